#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "afp/error.hpp"
#include "afp/flowdata/synth.hpp"
#include "afp/flowdata/preprocess.hpp"
#include "afp/ids/forest.hpp"
#include "afp/ids/metrics.hpp"
#include "afp/ids/model_io.hpp"
#include "support/helpers.hpp"

using namespace afp;
using namespace afp::ids;
using flowdata::Dataset;
using flowdata::Provenance;

namespace {

Dataset make(const std::vector<std::vector<double>>& rows, const std::vector<Label>& labels) {
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return Dataset(testing::plain_schema(rows.front().size()), v, labels, Provenance::synthetic);
}

// Walks one tree by hand from the node array.
Label walk(const DecisionTree& t, std::span<const double> x) {
  const auto& nodes = t.nodes();
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[i].counts[1] > nodes[i].counts[0] ? Label::attack : Label::benign;
}

Dataset small_corpus(std::size_t n, std::uint64_t seed) {
  const auto raw = flowdata::synth_generate(flowdata::SynthConfig::desk_default(n), seed);
  return flowdata::standardize(raw).first;
}

}  // namespace

TEST_CASE("separable 1-D data gives a single stump between the classes") {
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  for (int rep = 0; rep < 30; ++rep) {
    for (double b : {-3.0, -2.0, -1.0}) rows.push_back({b}), labels.push_back(Label::benign);
    for (double a : {1.0, 2.0, 3.0}) rows.push_back({a}), labels.push_back(Label::attack);
  }
  const auto data = make(rows, labels);
  ForestHyper h;
  h.n_trees = 1;
  h.max_depth = 1;
  const auto m = train_forest(data, h);
  REQUIRE(m.trees().size() == 1);
  const auto& nodes = m.trees()[0].nodes();
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0].threshold > -1.0);
  CHECK(nodes[0].threshold <= 1.0);
  CHECK(evaluate(m, data).accuracy == 1.0);
}

TEST_CASE("XOR corners are learnt exactly by a depth-2 ensemble") {
  const std::vector<std::vector<double>> corners{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<Label> xor_label{Label::benign, Label::attack, Label::attack, Label::benign};

  // A depth-2 tree expressing XOR exists: split x0 at 0.5, then x1 at 0.5 on both sides.
  std::vector<TreeNode> nodes(7);
  nodes[0] = {0, 0.5, 1, 4, {0, 0}};
  nodes[1] = {1, 0.5, 2, 3, {0, 0}};
  nodes[2].counts = {1, 0};
  nodes[3].counts = {0, 1};
  nodes[4] = {1, 0.5, 5, 6, {0, 0}};
  nodes[5].counts = {0, 1};
  nodes[6].counts = {1, 0};
  ForestHyper h2;
  h2.max_depth = 2;
  const auto witness = ClassifierModel::from_trees(testing::plain_schema(2), h2,
                                                   {DecisionTree(std::move(nodes))});
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(witness.predict(corners[i]) == xor_label[i]);

  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  for (int rep = 0; rep < 25; ++rep) {
    for (std::size_t i = 0; i < 4; ++i) rows.push_back(corners[i]), labels.push_back(xor_label[i]);
  }
  ForestHyper h;
  h.n_trees = 25;
  h.max_depth = 2;
  h.min_leaf = 1;
  h.features_per_split = 2;
  const auto m = train_forest(make(rows, labels), h);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.predict(corners[i]) == xor_label[i]);
}

TEST_CASE("same data, hyperparameters and seed give identical forests") {
  const auto data = small_corpus(2000, 4);
  ForestHyper h;
  h.n_trees = 10;
  h.max_depth = 6;
  h.seed = 21;
  const auto a = train_forest(data, h), b = train_forest(data, h);
  CHECK(model_to_json(a) == model_to_json(b));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(data.dims());
    for (auto& v : x) v = g(rng);
    CHECK(a.predict(x) == b.predict(x));
  }
}

TEST_CASE("stump traversal and the benign tie rule") {
  const auto stump = testing::stump_model(5, 0, 0.5);
  CHECK(stump.predict(std::vector<double>{0.7, 0, 0, 0, 0}) == Label::attack);
  CHECK(stump.predict(std::vector<double>{0.5, 0, 0, 0, 0}) == Label::benign);

  ForestHyper h;
  h.max_depth = 1;
  // One tree always benign, one always attack: 1-1 vote.
  const auto tie = ClassifierModel::from_trees(
      testing::plain_schema(1), h, {testing::stump_tree(0, 1e9), testing::stump_tree(0, -1e9)});
  const auto p = tie.predict_detailed(std::vector<double>{0.0});
  CHECK(p.attack_votes == 1);
  CHECK(p.label == Label::benign);
  CHECK(p.node_visits == 4);
}

TEST_CASE("ensemble vote and visit count equal a per-tree tally on 1000 random probes") {
  const auto data = small_corpus(3000, 5);
  ForestHyper h;
  h.n_trees = 15;
  h.max_depth = 8;
  const auto m = train_forest(data, h);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(data.dims());
    for (auto& v : x) v = g(rng);
    std::size_t votes = 0, visits = 0;
    for (const auto& t : m.trees()) {
      votes += walk(t, x) == Label::attack;
      visits += t.traverse(x).visits;
    }
    const Label slow = 2 * votes > m.trees().size() ? Label::attack : Label::benign;
    CHECK(m.predict(x) == slow);
    CHECK(m.predict_detailed(x).attack_votes == votes);
    CHECK(m.predict_detailed(x).node_visits == visits);
  }
}

TEST_CASE("bad inputs and bad training data are typed errors") {
  const auto stump = testing::stump_model(2, 0, 0.0);
  try {
    stump.predict(std::vector<double>{1.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::input);
  }
  CHECK_THROWS_AS(stump.predict(std::vector<double>{NAN, 0.0}), Error);

  const auto one_class = make({{1.0}, {2.0}}, {Label::benign, Label::benign});
  try {
    train_forest(one_class, ForestHyper{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::training);
  }
}

TEST_CASE("metrics: perfect and constant-benign classifiers") {
  std::vector<Label> truth(10), pred;
  for (std::size_t i = 0; i < 10; ++i) truth[i] = i % 2 ? Label::attack : Label::benign;
  const auto perfect = metrics_from_predictions(truth, truth);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.confusion.fp == 0);
  CHECK(perfect.confusion.fn == 0);

  std::vector<Label> t2(6, Label::benign);
  t2.insert(t2.end(), 4, Label::attack);
  const std::vector<Label> all_benign(10, Label::benign);
  const auto m = metrics_from_predictions(t2, all_benign);
  CHECK(m.accuracy == doctest::Approx(0.6));
  CHECK(m.attack.recall == 0.0);
  CHECK(m.attack.precision == 0.0);
  CHECK(m.benign.recall == 1.0);
  CHECK(m.confusion.fn == 4);
  CHECK(m.support == 10);
}

TEST_CASE("model JSON round trip preserves every prediction") {
  const auto data = small_corpus(2000, 6);
  ForestHyper h;
  h.n_trees = 8;
  h.max_depth = 7;
  const auto m = train_forest(data, h);
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  CHECK(back.hyper() == m.hyper());
  CHECK(back.schema() == m.schema());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.predict_detailed(data.row(i)).attack_votes ==
          m.predict_detailed(data.row(i)).attack_votes);
  }

  auto doc = model_to_json(m);
  doc["version"] = 99;
  CHECK_THROWS_AS(model_from_json(doc), Error);
  doc = model_to_json(m);
  doc["schema_hash"] = "0000000000000000";
  try {
    model_from_json(doc);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::schema);
  }
}

TEST_CASE("a held-out split of the desk corpus is classified well") {
  const auto raw = flowdata::synth_generate(flowdata::SynthConfig::desk_default(6000), 12);
  const auto split = flowdata::stratified_split(raw, 0.3, 1);
  const auto [train, params] = flowdata::standardize(split.train);
  const auto test = flowdata::standardize(split.test, params).first;
  ForestHyper h;
  h.n_trees = 30;
  h.max_depth = 10;
  const auto m = evaluate(train_forest(train, h), test);
  CHECK(m.accuracy >= 0.97);
  CHECK(m.confusion.total() == test.size());
}
