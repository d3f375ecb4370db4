#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afp/flowdata/dataset.hpp"

namespace afp::ids {

using flowdata::Dataset;
using flowdata::FeatureSchema;
using flowdata::Label;

/// Split nodes send x to `left` when x[feature] <= threshold. Leaves carry
/// the per-label training counts that reached them (feature == -1).
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::array<std::uint32_t, 2> counts{0, 0};

  bool is_leaf() const noexcept { return feature < 0; }
  /// Majority label at a leaf; ties go to benign.
  Label leaf_label() const noexcept {
    return counts[1] > counts[0] ? Label::attack : Label::benign;
  }
};

/// Flat preorder node array; node 0 is the root.
class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;

  /// Leaf reached by x and the number of nodes visited (root and leaf included).
  struct Traversal {
    const TreeNode* leaf;
    std::size_t visits;
  };
  Traversal traverse(std::span<const double> x) const noexcept {
    std::size_t i = 0;
    std::size_t visits = 1;
    const TreeNode* nodes = nodes_.data();
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold
                                       ? n.left
                                       : n.right);
      ++visits;
    }
    return {nodes + i, visits};
  }

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestHyper {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 2;
  std::size_t features_per_split = 0;  ///< 0 means ceil(sqrt(d))
  std::uint64_t seed = 1;

  std::size_t resolved_features(std::size_t dims) const;
  bool operator==(const ForestHyper&) const = default;
};

/// Full per-query outcome. Only the label crosses the black-box boundary.
struct Prediction {
  Label label = Label::benign;
  std::size_t attack_votes = 0;
  std::size_t node_visits = 0;
};

/// Trained decision-tree ensemble f: R^d -> {benign, attack}. Immutable and
/// shareable across threads.
class ClassifierModel {
 public:
  ClassifierModel() = default;

  /// Validates split feature indices, child links, leaf counts and depth.
  static ClassifierModel from_trees(FeatureSchema schema, ForestHyper hyper,
                                    std::vector<DecisionTree> trees);

  /// Majority vote, ties to benign. Throws Error{input} on a dimension
  /// mismatch or a non-finite value.
  Label predict(std::span<const double> x) const { return predict_detailed(x).label; }
  Prediction predict_detailed(std::span<const double> x) const;

  /// Fraction of trees voting attack. Attacker-side use only (surrogates).
  double attack_vote_fraction(std::span<const double> x) const;
  /// Mean leaf attack frequency over trees. Attacker-side use only.
  double soft_attack_score(std::span<const double> x) const;

  const FeatureSchema& schema() const noexcept { return schema_; }
  const ForestHyper& hyper() const noexcept { return hyper_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  std::size_t dims() const noexcept { return schema_.size(); }

 private:
  void check_input(std::span<const double> x) const;
  void build_flat();

  // Evaluation copy of the trees: leaves loop to themselves (threshold +inf),
  // so a walk is a fixed number of branch-free steps and its wall time does
  // not depend on how predictable the inputs are.
  struct FlatNode {
    double threshold;
    std::uint32_t feature;
    std::uint32_t kind;  // 0 benign leaf, 1 attack leaf, 2 split
    std::uint32_t next[2];
  };

  FeatureSchema schema_;
  ForestHyper hyper_;
  std::vector<DecisionTree> trees_;
  std::vector<FlatNode> flat_;
  std::vector<std::uint32_t> roots_;
  std::vector<std::uint32_t> depths_;
};

/// Bagged Gini trees. Each tree draws its bootstrap sample and per-split
/// feature subsets from its own generator seeded by (hyper.seed, tree index),
/// so the result is a pure function of (data, hyper).
/// Throws Error{training} on single-class data or invalid hyperparameters.
ClassifierModel train_forest(const Dataset& train, const ForestHyper& hyper);

}  // namespace afp::ids
