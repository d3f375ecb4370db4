#include "afp/flowdata/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "afp/error.hpp"

namespace afp::flowdata {

SynthConfig SynthConfig::desk_default(std::size_t count) {
  SynthConfig c;
  c.schema = FeatureSchema::desk_default();
  c.count = count;
  c.attack_fraction = 0.5;
  // Duration [s], BytesPerSec, PktsPerSec, FwdPktLenMean [B], FlowIATMean [s]
  const std::vector<double> mean = {1.5, 20000.0, 40.0, 500.0, 0.05};
  const std::vector<double> sd = {0.4, 5000.0, 10.0, 120.0, 0.012};
  const std::vector<double> direction = {-1.0, 1.0, 1.0, -1.0, -1.0};
  const double per_feature = 6.0 / std::sqrt(static_cast<double>(mean.size()));
  for (std::size_t i = 0; i < mean.size(); ++i) {
    c.benign_mean.push_back(mean[i]);
    c.benign_var.push_back(sd[i] * sd[i]);
    c.attack_mean.push_back(mean[i] + direction[i] * per_feature * sd[i]);
    c.attack_var.push_back(sd[i] * sd[i]);
  }
  return c;
}

void SynthConfig::validate() const {
  const std::size_t d = schema.size();
  if (d == 0) throw Error(ErrorCategory::config, "synth schema is empty");
  if (count < 1) throw Error(ErrorCategory::config, "synth count must be >= 1");
  if (!(attack_fraction > 0.0 && attack_fraction < 1.0)) {
    throw Error(ErrorCategory::config, "synth attack_fraction must lie in (0,1)");
  }
  for (const auto* v : {&benign_mean, &benign_var, &attack_mean, &attack_var}) {
    if (v->size() != d) {
      throw Error(ErrorCategory::config, "synth class parameters must match schema length");
    }
    for (double x : *v) {
      if (!std::isfinite(x)) throw Error(ErrorCategory::config, "synth parameter is not finite");
    }
  }
  for (const auto* v : {&benign_var, &attack_var}) {
    for (double x : *v) {
      if (!(x > 0.0)) throw Error(ErrorCategory::config, "synth variances must be > 0");
    }
  }
}

Dataset synth_generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.schema.size();
  const auto n_attack = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.count) * config.attack_fraction));

  std::mt19937_64 rng(seed);
  std::vector<Label> labels(config.count, Label::benign);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_attack),
            Label::attack);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<double> bsd(d), asd(d);
  for (std::size_t j = 0; j < d; ++j) {
    bsd[j] = std::sqrt(config.benign_var[j]);
    asd[j] = std::sqrt(config.attack_var[j]);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values;
  values.reserve(config.count * d);
  const auto& bounds = config.schema.bounds();
  for (Label l : labels) {
    const bool attack = l == Label::attack;
    const auto& mean = attack ? config.attack_mean : config.benign_mean;
    const auto& sd = attack ? asd : bsd;
    for (std::size_t j = 0; j < d; ++j) {
      double v = mean[j] + sd[j] * normal(rng);
      if (bounds[j]) v = std::clamp(v, bounds[j]->min, bounds[j]->max);
      values.push_back(v);
    }
  }
  return Dataset(config.schema, std::move(values), std::move(labels), Provenance::synthetic);
}

}  // namespace afp::flowdata
