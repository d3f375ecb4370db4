#include "afp/harness/config.hpp"

#include <cstdlib>
#include <fstream>

#include "afp/error.hpp"
#include "afp/ids/model_io.hpp"

namespace afp::harness {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCategory::config, msg);
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // An integer slot must not silently take a fraction.
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

// Recursively overlays `src` onto `dst`, which holds the defaults and so
// defines the accepted keys.
void overlay(json& dst, const json& src, const std::string& path) {
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!dst.contains(it.key())) config_error("unknown config key '" + key + "'");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) config_error("config key '" + key + "' must be an object");
      overlay(slot, *it, key);
    } else if (slot.is_null() || same_kind(slot, *it)) {
      slot = *it;
    } else {
      config_error("config key '" + key + "' has the wrong type");
    }
  }
}

json side_to_json(const sidechannel::SideChannelConfig& s) {
  return json{{"base_latency_ms", s.base_latency_ms},
              {"per_node_cost_ms", s.per_node_cost_ms},
              {"noise_std_ms", s.noise_std_ms},
              {"drift_amplitude_ms", s.load_drift ? s.load_drift->amplitude_ms : 0.0},
              {"drift_period", s.load_drift ? s.load_drift->period : 1000.0}};
}

json afp_to_json(const defense::AfpConfig& a) {
  return json{{"epsilon_base", a.epsilon_base},
              {"alpha", a.alpha},
              {"theta", a.theta},
              {"window_len", a.window_len},
              {"epsilon_max", a.epsilon_max},
              {"min_segment", a.min_segment},
              {"deviation_floor", a.deviation_floor},
              {"decay", a.decay},
              {"sustain_ratio", a.sustain_ratio},
              {"continuous_baseline_noise", a.continuous_baseline_noise},
              {"seed", a.seed}};
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["data"] = {{"source", c.data.source},
               {"csv_path", c.data.csv_path},
               {"label_column", c.data.label_column},
               {"features", c.data.features},
               {"synth_count", c.data.synth_count},
               {"synth_attack_fraction", c.data.synth_attack_fraction}};
  j["split"] = {{"test_fraction", c.split.test_fraction},
                {"attacker_fraction", c.split.attacker_fraction}};
  j["ids"] = ids::hyper_to_json(c.ids);
  j["model_path"] = c.model_path;
  j["sidechannel"] = side_to_json(c.sidechannel);
  j["afp"] = afp_to_json(c.afp);
  j["calibration"] = {{"enabled", c.calibration.enabled},
                      {"baseline_len", c.calibration.baseline_len},
                      {"target_rate", c.calibration.target_rate},
                      {"margin", c.calibration.margin}};
  const auto& p = c.probe.probe;
  j["probe"] = {{"probe_step", p.probe_step},
                {"repeats", p.repeats},
                {"top_k", p.top_k},
                {"travel_cap", p.travel_cap},
                {"budget", c.probe.budget}};
  j["transfer"] = {{"step", c.transfer.step},
                   {"max_steps", c.transfer.max_steps},
                   {"overshoot", c.transfer.overshoot},
                   {"surrogate", ids::hyper_to_json(c.transfer.surrogate)}};
  j["boundary"] = {{"samples", c.boundary.samples},
                   {"iters", c.boundary.search.iters},
                   {"shrink_passes", c.boundary.search.shrink_passes},
                   {"shrink_halvings", c.boundary.search.shrink_halvings},
                   {"background_per_query", c.boundary.background_per_query},
                   {"budget_per_sample", c.boundary.budget_per_sample}};
  j["output_dir"] = c.output_dir;
  j["include_timing"] = c.include_timing;
  return j;
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) config_error("config document must be a JSON object");
  json m = to_json(ExperimentConfig{});
  overlay(m, doc, "");

  ExperimentConfig c;
  try {
    c.seed = m["seed"].get<std::uint64_t>();
    const auto& d = m["data"];
    c.data.source = d["source"];
    c.data.csv_path = d["csv_path"];
    c.data.label_column = d["label_column"];
    c.data.features = d["features"].get<std::vector<std::string>>();
    c.data.synth_count = d["synth_count"];
    c.data.synth_attack_fraction = d["synth_attack_fraction"];
    c.split.test_fraction = m["split"]["test_fraction"];
    c.split.attacker_fraction = m["split"]["attacker_fraction"];
    c.ids = ids::hyper_from_json(m["ids"]);
    c.model_path = m["model_path"];

    const auto& s = m["sidechannel"];
    c.sidechannel.base_latency_ms = s["base_latency_ms"];
    c.sidechannel.per_node_cost_ms = s["per_node_cost_ms"];
    c.sidechannel.noise_std_ms = s["noise_std_ms"];
    const double amp = s["drift_amplitude_ms"];
    if (amp != 0.0) c.sidechannel.load_drift = sidechannel::LoadDrift{amp, s["drift_period"]};

    const auto& a = m["afp"];
    c.afp.epsilon_base = a["epsilon_base"];
    c.afp.alpha = a["alpha"];
    c.afp.theta = a["theta"];
    c.afp.window_len = a["window_len"];
    c.afp.epsilon_max = a["epsilon_max"];
    c.afp.min_segment = a["min_segment"];
    c.afp.deviation_floor = a["deviation_floor"];
    c.afp.decay = a["decay"];
    c.afp.sustain_ratio = a["sustain_ratio"];
    c.afp.continuous_baseline_noise = a["continuous_baseline_noise"];
    c.afp.seed = a["seed"];

    const auto& cal = m["calibration"];
    c.calibration.enabled = cal["enabled"];
    c.calibration.baseline_len = cal["baseline_len"];
    c.calibration.target_rate = cal["target_rate"];
    c.calibration.margin = cal["margin"];

    const auto& p = m["probe"];
    c.probe.probe.probe_step = p["probe_step"];
    c.probe.probe.repeats = p["repeats"];
    c.probe.probe.top_k = p["top_k"];
    c.probe.probe.travel_cap = p["travel_cap"];
    c.probe.budget = p["budget"];

    const auto& t = m["transfer"];
    c.transfer.step = t["step"];
    c.transfer.max_steps = t["max_steps"];
    c.transfer.overshoot = t["overshoot"];
    c.transfer.surrogate = ids::hyper_from_json(t["surrogate"]);

    const auto& b = m["boundary"];
    c.boundary.samples = b["samples"];
    c.boundary.search.iters = b["iters"];
    c.boundary.search.shrink_passes = b["shrink_passes"];
    c.boundary.search.shrink_halvings = b["shrink_halvings"];
    c.boundary.background_per_query = b["background_per_query"];
    c.boundary.budget_per_sample = b["budget_per_sample"];

    c.output_dir = m["output_dir"];
    c.include_timing = m["include_timing"];
  } catch (const json::exception& e) {
    config_error(std::string("config value out of range: ") + e.what());
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (data.source != "synth" && data.source != "csv") config_error("data.source must be synth or csv");
  if (data.source == "csv" && data.csv_path.empty()) config_error("data.csv_path is required for csv data");
  if (data.synth_count < 10) config_error("data.synth_count must be >= 10");
  if (!(data.synth_attack_fraction > 0.0 && data.synth_attack_fraction < 1.0)) {
    config_error("data.synth_attack_fraction must lie in (0,1)");
  }
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) config_error("split.test_fraction must lie in (0,1)");
  if (!(split.attacker_fraction > 0.0 && split.attacker_fraction < 1.0)) {
    config_error("split.attacker_fraction must lie in (0,1)");
  }
  if (ids.n_trees < 1 || ids.max_depth < 1 || ids.min_leaf < 1) config_error("ids hyperparameters must be >= 1");
  sidechannel.validate();
  afp.validate();
  if (calibration.baseline_len < afp.window_len) config_error("calibration.baseline_len must be >= afp.window_len");
  if (!(calibration.target_rate > 0.0 && calibration.target_rate < 1.0)) {
    config_error("calibration.target_rate must lie in (0,1)");
  }
  if (!(calibration.margin > 0.0)) config_error("calibration.margin must be > 0");
  if (!(probe.probe.probe_step > 0.0) || probe.probe.repeats == 0 || !(probe.probe.travel_cap > 0.0)) {
    config_error("probe settings must be positive");
  }
  if (!(transfer.step > 0.0) || transfer.max_steps == 0) config_error("transfer settings must be positive");
  if (boundary.samples == 0 || boundary.search.iters == 0) config_error("boundary settings must be positive");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_error("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_error("override key '" + key + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) config_error("override key '" + key + "' crosses a non-object");
    node = &next;
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open config " + path.string());
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) config_error("config file is not valid JSON: " + path.string());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (const char* env = std::getenv("AFP_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') config_error("AFP_SEED must be an unsigned integer");
    doc["seed"] = static_cast<std::uint64_t>(v);
  }
  return config_from_json(doc);
}

}  // namespace afp::harness
