#include "afp/ids/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "afp/error.hpp"
#include "afp/kernels/kernels.hpp"
#include "afp/rng.hpp"

namespace afp::ids {

std::size_t ForestHyper::resolved_features(std::size_t dims) const {
  if (features_per_split > 0) return std::min(features_per_split, dims);
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dims))));
  return std::clamp<std::size_t>(k, 1, dims);
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& n = nodes_[i];
    if (!n.is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(n.left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(n.right), d + 1);
    }
  }
  return best;
}

ClassifierModel ClassifierModel::from_trees(FeatureSchema schema, ForestHyper hyper,
                                            std::vector<DecisionTree> trees) {
  if (trees.empty()) throw Error(ErrorCategory::training, "model needs at least one tree");
  for (const auto& tree : trees) {
    const auto& nodes = tree.nodes();
    if (nodes.empty()) throw Error(ErrorCategory::training, "tree has no nodes");
    for (const auto& n : nodes) {
      if (n.is_leaf()) {
        if (n.counts[0] + n.counts[1] == 0) {
          throw Error(ErrorCategory::training, "leaf has zero total count");
        }
        continue;
      }
      if (static_cast<std::size_t>(n.feature) >= schema.size()) {
        throw Error(ErrorCategory::training, "split feature index outside schema");
      }
      const auto sz = static_cast<std::int32_t>(nodes.size());
      if (n.left <= 0 || n.right <= 0 || n.left >= sz || n.right >= sz) {
        throw Error(ErrorCategory::training, "split node has an invalid child link");
      }
      if (!std::isfinite(n.threshold)) {
        throw Error(ErrorCategory::training, "split threshold is not finite");
      }
    }
    if (tree.depth() > hyper.max_depth) {
      throw Error(ErrorCategory::training, "tree exceeds max_depth");
    }
  }
  hyper.n_trees = trees.size();
  ClassifierModel m;
  m.schema_ = std::move(schema);
  m.hyper_ = hyper;
  m.trees_ = std::move(trees);
  m.build_flat();
  return m;
}

void ClassifierModel::build_flat() {
  flat_.clear();
  roots_.clear();
  depths_.clear();
  for (const auto& tree : trees_) {
    const auto base = static_cast<std::uint32_t>(flat_.size());
    roots_.push_back(base);
    depths_.push_back(static_cast<std::uint32_t>(tree.depth()));
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
      const auto& n = tree.nodes()[i];
      const auto self = base + static_cast<std::uint32_t>(i);
      if (n.is_leaf()) {
        const std::uint32_t kind = n.leaf_label() == Label::attack ? 1 : 0;
        flat_.push_back({std::numeric_limits<double>::infinity(), 0, kind, {self, self}});
      } else {
        flat_.push_back({n.threshold, static_cast<std::uint32_t>(n.feature), 2,
                         {base + static_cast<std::uint32_t>(n.left),
                          base + static_cast<std::uint32_t>(n.right)}});
      }
    }
  }
}

void ClassifierModel::check_input(std::span<const double> x) const {
  if (x.size() != schema_.size()) {
    throw Error(ErrorCategory::input, "feature vector has " + std::to_string(x.size()) +
                                          " values, model expects " +
                                          std::to_string(schema_.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCategory::input, "feature vector is not finite");
  }
}

Prediction ClassifierModel::predict_detailed(std::span<const double> x) const {
  check_input(x);
  Prediction p;
  const FlatNode* f = flat_.data();
  const double* v = x.data();
  const std::size_t n_trees = roots_.size();
  std::size_t visits = n_trees;  // every root
  std::size_t votes = 0;
  std::size_t t = 0;
  // Four independent walks in lockstep hide the load latency of each step.
  for (; t + 4 <= n_trees; t += 4) {
    std::uint32_t a = roots_[t], b = roots_[t + 1], c = roots_[t + 2], d = roots_[t + 3];
    const std::uint32_t steps =
        std::max(std::max(depths_[t], depths_[t + 1]), std::max(depths_[t + 2], depths_[t + 3]));
    for (std::uint32_t s = 0; s < steps; ++s) {
      visits += (f[a].kind >> 1) + (f[b].kind >> 1) + (f[c].kind >> 1) + (f[d].kind >> 1);
      a = f[a].next[v[f[a].feature] > f[a].threshold];
      b = f[b].next[v[f[b].feature] > f[b].threshold];
      c = f[c].next[v[f[c].feature] > f[c].threshold];
      d = f[d].next[v[f[d].feature] > f[d].threshold];
    }
    votes += f[a].kind + f[b].kind + f[c].kind + f[d].kind;
  }
  for (; t < n_trees; ++t) {
    std::uint32_t a = roots_[t];
    for (std::uint32_t s = 0; s < depths_[t]; ++s) {
      visits += f[a].kind >> 1;
      a = f[a].next[v[f[a].feature] > f[a].threshold];
    }
    votes += f[a].kind;
  }
  p.node_visits = visits;
  p.attack_votes = votes;
  p.label = 2 * p.attack_votes > trees_.size() ? Label::attack : Label::benign;
  return p;
}

double ClassifierModel::attack_vote_fraction(std::span<const double> x) const {
  const auto p = predict_detailed(x);
  return static_cast<double>(p.attack_votes) / static_cast<double>(trees_.size());
}

double ClassifierModel::soft_attack_score(std::span<const double> x) const {
  check_input(x);
  double sum = 0.0;
  for (const auto& tree : trees_) {
    const auto* leaf = tree.traverse(x).leaf;
    sum += static_cast<double>(leaf->counts[1]) /
           static_cast<double>(leaf->counts[0] + leaf->counts[1]);
  }
  return sum / static_cast<double>(trees_.size());
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestHyper& hyper, Rng& rng)
      : data_(data),
        hyper_(hyper),
        rng_(rng),
        dims_(data.dims()),
        k_features_(hyper.resolved_features(data.dims())),
        kernels_(kernels::active()) {}

  DecisionTree build(std::vector<std::size_t> sample) {
    nodes_.clear();
    grow(sample, 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Candidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;
    bool found = false;
  };

  Candidate best_split_on(std::size_t feature, const std::vector<std::size_t>& idx) {
    const std::size_t m = idx.size();
    pairs_.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      pairs_[k] = {data_.row(idx[k])[feature], data_.label(idx[k]) == Label::attack ? 1 : 0};
    }
    std::sort(pairs_.begin(), pairs_.end());
    values_.resize(m);
    cum_pos_.resize(m);
    double pos = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      values_[k] = pairs_[k].first;
      pos += pairs_[k].second;
      cum_pos_[k] = pos;
    }
    const auto scan = kernels_.min_gini_split(values_.data(), cum_pos_.data(), m,
                                              hyper_.min_leaf);
    Candidate c;
    if (!scan.found()) return c;
    const double lo = values_[scan.index];
    const double hi = values_[scan.index + 1];
    double mid = lo + (hi - lo) / 2.0;
    if (!(mid >= lo && mid < hi)) mid = lo;
    c.feature = feature;
    c.threshold = mid;
    c.score = scan.score;
    c.found = true;
    return c;
  }

  std::size_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const std::size_t self = nodes_.size();
    nodes_.emplace_back();
    std::array<std::uint32_t, 2> counts{0, 0};
    for (std::size_t i : idx) ++counts[data_.label(i) == Label::attack ? 1 : 0];
    nodes_[self].counts = counts;

    const bool pure = counts[0] == 0 || counts[1] == 0;
    if (pure || depth >= hyper_.max_depth || idx.size() < 2 * hyper_.min_leaf) {
      return self;
    }

    std::vector<std::size_t> order(dims_);
    std::iota(order.begin(), order.end(), 0);
    Candidate best;
    // Draw features without replacement; keep drawing past k only while no
    // admissible split has been found.
    for (std::size_t drawn = 0; drawn < dims_; ++drawn) {
      std::uniform_int_distribution<std::size_t> pick(drawn, dims_ - 1);
      std::swap(order[drawn], order[pick(rng_)]);
      const auto c = best_split_on(order[drawn], idx);
      if (c.found && (!best.found || c.score < best.score)) best = c;
      if (drawn + 1 >= k_features_ && best.found) break;
    }
    if (!best.found) return self;

    std::vector<std::size_t> left, right;
    left.reserve(idx.size());
    right.reserve(idx.size());
    for (std::size_t i : idx) {
      (data_.row(i)[best.feature] <= best.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    nodes_[self].feature = static_cast<std::int32_t>(best.feature);
    nodes_[self].threshold = best.threshold;
    const std::size_t l = grow(left, depth + 1);
    const std::size_t r = grow(right, depth + 1);
    nodes_[self].left = static_cast<std::int32_t>(l);
    nodes_[self].right = static_cast<std::int32_t>(r);
    return self;
  }

  const Dataset& data_;
  const ForestHyper& hyper_;
  Rng& rng_;
  std::size_t dims_;
  std::size_t k_features_;
  const kernels::KernelTable& kernels_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, int>> pairs_;
  std::vector<double> values_;
  std::vector<double> cum_pos_;
};

}  // namespace

ClassifierModel train_forest(const Dataset& train, const ForestHyper& hyper) {
  if (train.empty() || !train.has_both_classes()) {
    throw Error(ErrorCategory::training, "training data must contain both classes");
  }
  if (hyper.n_trees < 1) throw Error(ErrorCategory::training, "n_trees must be >= 1");
  if (hyper.max_depth < 1) throw Error(ErrorCategory::training, "max_depth must be >= 1");
  if (hyper.min_leaf < 1) throw Error(ErrorCategory::training, "min_leaf must be >= 1");

  std::vector<DecisionTree> trees;
  trees.reserve(hyper.n_trees);
  const std::size_t n = train.size();
  for (std::size_t t = 0; t < hyper.n_trees; ++t) {
    Rng rng(derive_seed(hyper.seed, t));
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = draw(rng);
    TreeBuilder builder(train, hyper, rng);
    trees.push_back(builder.build(std::move(sample)));
  }
  return ClassifierModel::from_trees(train.schema(), hyper, std::move(trees));
}

}  // namespace afp::ids
