#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace afp::flowdata {

enum class Label : std::uint8_t { benign = 0, attack = 1 };

constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }
std::string_view to_string(Label l) noexcept;

enum class FeatureKind : std::uint8_t { continuous };

/// Validity range of a feature in natural (unstandardized) units.
struct FeatureBound {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const FeatureBound&) const = default;
};

/// Ordered feature identifiers with per-feature kind and optional bounds.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<std::string> names,
                         std::vector<std::optional<FeatureBound>> bounds = {});

  /// Duration, BytesPerSec, PktsPerSec, FwdPktLenMean, FlowIATMean; all >= 0.
  static FeatureSchema desk_default();

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<FeatureKind>& kinds() const noexcept { return kinds_; }
  const std::vector<std::optional<FeatureBound>>& bounds() const noexcept {
    return bounds_;
  }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Stable 64-bit FNV-1a digest of the ordered names, as 16 hex digits.
  std::string hash() const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<FeatureKind> kinds_;
  std::vector<std::optional<FeatureBound>> bounds_;
};

struct FlowRecord {
  std::vector<double> features;
  Label label = Label::benign;
};

enum class Provenance : std::uint8_t { ingested, synthetic };

/// Immutable-after-construction collection of flows. Feature values are
/// stored row-major in one contiguous block.
class Dataset {
 public:
  Dataset() = default;
  Dataset(FeatureSchema schema, std::vector<double> values,
          std::vector<Label> labels, Provenance provenance);

  static Dataset from_records(FeatureSchema schema,
                              const std::vector<FlowRecord>& records,
                              Provenance provenance);

  const FeatureSchema& schema() const noexcept { return schema_; }
  Provenance provenance() const noexcept { return provenance_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dims() const noexcept { return schema_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dims(), dims()};
  }
  Label label(std::size_t i) const { return labels_[i]; }
  FlowRecord record(std::size_t i) const;

  std::span<const double> values() const noexcept { return values_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  std::size_t count(Label l) const noexcept;
  bool has_both_classes() const noexcept {
    return count(Label::benign) > 0 && count(Label::attack) > 0;
  }

  /// Records at `indices`, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  FeatureSchema schema_;
  std::vector<double> values_;
  std::vector<Label> labels_;
  Provenance provenance_ = Provenance::synthetic;
};

}  // namespace afp::flowdata
