#pragma once

// Small fixtures shared by the test binaries.

#include <cstddef>
#include <string>
#include <vector>

#include "afp/attacks/pipeline.hpp"
#include "afp/ids/forest.hpp"
#include "afp/sidechannel/sidechannel.hpp"

namespace afp::testing {

inline flowdata::FeatureSchema plain_schema(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back("f" + std::to_string(i));
  return flowdata::FeatureSchema(std::move(names));
}

/// One tree: x[feature] > threshold -> attack.
inline ids::DecisionTree stump_tree(std::size_t feature, double threshold) {
  std::vector<ids::TreeNode> nodes(3);
  nodes[0].feature = static_cast<std::int32_t>(feature);
  nodes[0].threshold = threshold;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].counts = {1, 0};
  nodes[2].counts = {0, 1};
  return ids::DecisionTree(std::move(nodes));
}

inline ids::ClassifierModel stump_model(std::size_t d, std::size_t feature, double threshold) {
  ids::ForestHyper h;
  h.n_trees = 1;
  h.max_depth = 1;
  return ids::ClassifierModel::from_trees(plain_schema(d), h, {stump_tree(feature, threshold)});
}

/// Staircase on one feature: thresholds t_0 < t_1 < ... ; every step to the
/// right goes one node deeper, the last leaf is attack. Deeper paths cost more.
inline ids::ClassifierModel staircase_model(std::size_t d, std::size_t feature,
                                            const std::vector<double>& thresholds) {
  std::vector<ids::TreeNode> nodes;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    ids::TreeNode split;
    split.feature = static_cast<std::int32_t>(feature);
    split.threshold = thresholds[k];
    const auto here = static_cast<std::int32_t>(nodes.size());
    split.left = here + 1;
    split.right = here + 2;
    nodes.push_back(split);
    ids::TreeNode leaf;
    leaf.counts = {1, 0};
    nodes.push_back(leaf);
  }
  ids::TreeNode last;
  last.counts = {0, 1};
  nodes.push_back(last);
  ids::ForestHyper h;
  h.n_trees = 1;
  h.max_depth = thresholds.size();
  return ids::ClassifierModel::from_trees(plain_schema(d), h, {ids::DecisionTree(std::move(nodes))});
}

/// Undefended model pipeline that counts every call it receives.
class CountingPipeline final : public attacks::BlackBoxPipeline {
 public:
  CountingPipeline(const ids::ClassifierModel& model, sidechannel::SideChannelConfig sc,
                   std::uint64_t seed)
      : model_(model), stream_(sc, seed) {}

  attacks::QueryResponse query(std::span<const double> x) override {
    ++calls;
    const auto o = stream_.observe(model_, x);
    return {o.label, o.sample};
  }
  std::size_t dims() const override { return model_.dims(); }

  std::size_t calls = 0;

 private:
  const ids::ClassifierModel& model_;
  sidechannel::SideChannelStream stream_;
};

inline sidechannel::SideChannelConfig quiet_channel() {
  sidechannel::SideChannelConfig sc;
  sc.noise_std_ms = 0.0;
  return sc;
}

}  // namespace afp::testing
