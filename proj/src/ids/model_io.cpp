#include "afp/ids/model_io.hpp"

#include <cmath>
#include <fstream>

#include "afp/error.hpp"

namespace afp::ids {

using nlohmann::json;

json hyper_to_json(const ForestHyper& h) {
  return json{{"n_trees", h.n_trees},
              {"max_depth", h.max_depth},
              {"min_leaf", h.min_leaf},
              {"features_per_split", h.features_per_split},
              {"seed", h.seed}};
}

ForestHyper hyper_from_json(const json& j) {
  ForestHyper h;
  h.n_trees = j.value("n_trees", h.n_trees);
  h.max_depth = j.value("max_depth", h.max_depth);
  h.min_leaf = j.value("min_leaf", h.min_leaf);
  h.features_per_split = j.value("features_per_split", h.features_per_split);
  h.seed = j.value("seed", h.seed);
  return h;
}

json schema_to_json(const FeatureSchema& s) {
  json bounds = json::array();
  for (const auto& b : s.bounds()) {
    if (!b) {
      bounds.push_back(nullptr);
    } else {
      // JSON has no infinity; an open side is written as null.
      json pair = json::array();
      pair.push_back(std::isfinite(b->min) ? json(b->min) : json(nullptr));
      pair.push_back(std::isfinite(b->max) ? json(b->max) : json(nullptr));
      bounds.push_back(pair);
    }
  }
  return json{{"names", s.names()}, {"bounds", bounds}};
}

FeatureSchema schema_from_json(const json& j) {
  auto names = j.at("names").get<std::vector<std::string>>();
  std::vector<std::optional<flowdata::FeatureBound>> bounds(names.size());
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    if (!b.is_array() || b.size() != names.size()) {
      throw Error(ErrorCategory::schema, "schema bounds length does not match names");
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (b[i].is_null()) continue;
      flowdata::FeatureBound fb;
      fb.min = b[i].at(0).is_null() ? -HUGE_VAL : b[i].at(0).get<double>();
      fb.max = b[i].at(1).is_null() ? HUGE_VAL : b[i].at(1).get<double>();
      bounds[i] = fb;
    }
  }
  return FeatureSchema(std::move(names), std::move(bounds));
}

json model_to_json(const ClassifierModel& model) {
  json trees = json::array();
  for (const auto& tree : model.trees()) {
    json feature = json::array(), threshold = json::array(), left = json::array(),
         right = json::array(), counts = json::array();
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      counts.push_back(json::array({n.counts[0], n.counts[1]}));
    }
    trees.push_back(json{{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"counts", counts}});
  }
  return json{{"format", "afp-forest"},
              {"version", kModelFormatVersion},
              {"schema_hash", model.schema().hash()},
              {"schema", schema_to_json(model.schema())},
              {"hyper", hyper_to_json(model.hyper())},
              {"trees", trees}};
}

ClassifierModel model_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string{}) != "afp-forest") {
      throw Error(ErrorCategory::schema, "not an afp-forest model document");
    }
    if (doc.value("version", 0) != kModelFormatVersion) {
      throw Error(ErrorCategory::schema, "unsupported model format version");
    }
    auto schema = schema_from_json(doc.at("schema"));
    if (doc.at("schema_hash").get<std::string>() != schema.hash()) {
      throw Error(ErrorCategory::schema, "model schema hash does not match its schema");
    }
    const auto hyper = hyper_from_json(doc.at("hyper"));
    std::vector<DecisionTree> trees;
    for (const auto& t : doc.at("trees")) {
      const auto& feature = t.at("feature");
      const std::size_t m = feature.size();
      const auto& threshold = t.at("threshold");
      const auto& left = t.at("left");
      const auto& right = t.at("right");
      const auto& counts = t.at("counts");
      if (threshold.size() != m || left.size() != m || right.size() != m ||
          counts.size() != m) {
        throw Error(ErrorCategory::training, "tree arrays have inconsistent lengths");
      }
      std::vector<TreeNode> nodes(m);
      for (std::size_t i = 0; i < m; ++i) {
        nodes[i].feature = feature[i].get<std::int32_t>();
        nodes[i].threshold = threshold[i].get<double>();
        nodes[i].left = left[i].get<std::int32_t>();
        nodes[i].right = right[i].get<std::int32_t>();
        nodes[i].counts = {counts[i].at(0).get<std::uint32_t>(),
                           counts[i].at(1).get<std::uint32_t>()};
      }
      trees.emplace_back(std::move(nodes));
    }
    return ClassifierModel::from_trees(std::move(schema), hyper, std::move(trees));
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::schema, std::string("malformed model document: ") + e.what());
  }
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write model file " + path.string());
  out << model_to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open model file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::schema, "model file is not valid JSON: " + path.string());
  }
  return model_from_json(doc);
}

}  // namespace afp::ids
