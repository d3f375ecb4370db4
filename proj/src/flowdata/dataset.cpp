#include "afp/flowdata/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "afp/error.hpp"

namespace afp::flowdata {

std::string_view to_string(Label l) noexcept {
  return l == Label::benign ? "Benign" : "Attack";
}

FeatureSchema::FeatureSchema(std::vector<std::string> names,
                             std::vector<std::optional<FeatureBound>> bounds)
    : names_(std::move(names)), bounds_(std::move(bounds)) {
  if (names_.empty()) {
    throw Error(ErrorCategory::schema, "feature schema must have at least one feature");
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw Error(ErrorCategory::schema, "empty feature name");
    if (!seen.insert(n).second) {
      throw Error(ErrorCategory::schema, "duplicate feature name '" + n + "'");
    }
  }
  if (bounds_.empty()) bounds_.resize(names_.size());
  if (bounds_.size() != names_.size()) {
    throw Error(ErrorCategory::schema, "bounds length does not match feature count");
  }
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    if (bounds_[i] && !(bounds_[i]->min <= bounds_[i]->max)) {
      throw Error(ErrorCategory::schema,
                  "bound for '" + names_[i] + "' has min > max");
    }
  }
  kinds_.assign(names_.size(), FeatureKind::continuous);
}

FeatureSchema FeatureSchema::desk_default() {
  constexpr double inf = HUGE_VAL;
  return FeatureSchema(
      {"Duration", "BytesPerSec", "PktsPerSec", "FwdPktLenMean", "FlowIATMean"},
      {FeatureBound{0.0, inf}, FeatureBound{0.0, inf}, FeatureBound{0.0, inf},
       FeatureBound{0.0, inf}, FeatureBound{0.0, inf}});
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::string FeatureSchema::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& n : names_) {
    for (unsigned char c : n) mix(c);
    mix(0x1f);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset::Dataset(FeatureSchema schema, std::vector<double> values,
                 std::vector<Label> labels, Provenance provenance)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      provenance_(provenance) {
  if (values_.size() != labels_.size() * schema_.size()) {
    throw Error(ErrorCategory::schema,
                "feature block size does not match record count x schema length");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCategory::input, "dataset contains a non-finite feature value");
    }
  }
}

Dataset Dataset::from_records(FeatureSchema schema,
                              const std::vector<FlowRecord>& records,
                              Provenance provenance) {
  std::vector<double> values;
  std::vector<Label> labels;
  values.reserve(records.size() * schema.size());
  labels.reserve(records.size());
  for (const auto& r : records) {
    if (r.features.size() != schema.size()) {
      throw Error(ErrorCategory::schema, "record feature count does not match schema");
    }
    values.insert(values.end(), r.features.begin(), r.features.end());
    labels.push_back(r.label);
  }
  return Dataset(std::move(schema), std::move(values), std::move(labels), provenance);
}

FlowRecord Dataset::record(std::size_t i) const {
  auto r = row(i);
  return FlowRecord{{r.begin(), r.end()}, labels_[i]};
}

std::size_t Dataset::count(Label l) const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> values;
  std::vector<Label> labels;
  values.reserve(indices.size() * dims());
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    values.insert(values.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  Dataset out;
  out.schema_ = schema_;
  out.values_ = std::move(values);
  out.labels_ = std::move(labels);
  out.provenance_ = provenance_;
  return out;
}

}  // namespace afp::flowdata
