#pragma once

#include <cstddef>
#include <span>

#include "afp/flowdata/dataset.hpp"
#include "afp/ids/forest.hpp"

namespace afp::ids {

/// Attack is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassRates {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Rates with an empty denominator are reported as 0.
struct Metrics {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  ClassRates benign;
  ClassRates attack;
  std::size_t support = 0;

  static Metrics from_confusion(const ConfusionMatrix& cm);
};

Metrics metrics_from_predictions(std::span<const flowdata::Label> truth,
                                 std::span<const flowdata::Label> predicted);

/// Exact confusion counts of `model` over `test` (must be nonempty).
Metrics evaluate(const ClassifierModel& model, const flowdata::Dataset& test);

}  // namespace afp::ids
