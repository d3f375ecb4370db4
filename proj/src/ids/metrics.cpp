#include "afp/ids/metrics.hpp"

#include <vector>

#include "afp/error.hpp"

namespace afp::ids {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ClassRates rates(std::size_t hit, std::size_t false_pos, std::size_t false_neg) {
  ClassRates r;
  r.precision = ratio(hit, hit + false_pos);
  r.recall = ratio(hit, hit + false_neg);
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

}  // namespace

Metrics Metrics::from_confusion(const ConfusionMatrix& cm) {
  Metrics m;
  m.confusion = cm;
  m.support = cm.total();
  m.accuracy = ratio(cm.tp + cm.tn, m.support);
  m.attack = rates(cm.tp, cm.fp, cm.fn);
  m.benign = rates(cm.tn, cm.fn, cm.fp);
  return m;
}

Metrics metrics_from_predictions(std::span<const flowdata::Label> truth,
                                 std::span<const flowdata::Label> predicted) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorCategory::input, "truth and prediction lengths differ");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == flowdata::Label::attack;
    const bool p = predicted[i] == flowdata::Label::attack;
    if (t && p) ++cm.tp;
    else if (!t && !p) ++cm.tn;
    else if (!t && p) ++cm.fp;
    else ++cm.fn;
  }
  return Metrics::from_confusion(cm);
}

Metrics evaluate(const ClassifierModel& model, const flowdata::Dataset& test) {
  if (test.empty()) throw Error(ErrorCategory::empty_dataset, "evaluation set is empty");
  std::vector<flowdata::Label> predicted;
  predicted.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) predicted.push_back(model.predict(test.row(i)));
  return metrics_from_predictions(test.labels(), predicted);
}

}  // namespace afp::ids
