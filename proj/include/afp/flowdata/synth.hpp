#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "afp/flowdata/dataset.hpp"

namespace afp::flowdata {

/// Per-class diagonal Gaussian traffic model.
struct SynthConfig {
  FeatureSchema schema = FeatureSchema::desk_default();
  std::vector<double> benign_mean;
  std::vector<double> benign_var;
  std::vector<double> attack_mean;
  std::vector<double> attack_var;
  double attack_fraction = 0.5;  ///< class mix, in (0,1)
  std::size_t count = 1000;

  /// Desk-scale default: the two class means sit 6 within-class standard
  /// deviations apart (Mahalanobis), split evenly over the five features.
  static SynthConfig desk_default(std::size_t count = 50000);

  /// Throws Error{config} describing the first violated constraint.
  void validate() const;
};

/// Exactly round(count * attack_fraction) attack records in a seeded random
/// order; values are clamped to the schema bounds. Bit-reproducible per seed.
Dataset synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace afp::flowdata
