#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afp/attacks/pipeline.hpp"
#include "afp/defense/afp.hpp"
#include "afp/flowdata/dataset.hpp"
#include "afp/flowdata/preprocess.hpp"
#include "afp/harness/config.hpp"
#include "afp/ids/forest.hpp"
#include "afp/ids/metrics.hpp"

namespace afp::harness {

/// Everything derived from the config before any scenario runs. All feature
/// data is in standardized units.
struct Experiment {
  flowdata::StandardizationParams scaling;
  flowdata::Dataset target_train;
  flowdata::Dataset attacker_pool;  ///< disjoint from target_train
  flowdata::Dataset test;
  ids::ClassifierModel model;
};

/// Natural-unit corpus named by the config (synthetic or CSV).
flowdata::Dataset load_corpus(const ExperimentConfig& cfg);

/// Split (test, then attacker share of train), standardize on train, and train
/// or load the target model.
Experiment prepare_experiment(const ExperimentConfig& cfg);
Experiment prepare_experiment(const ExperimentConfig& cfg, const flowdata::Dataset& corpus);

/// The deployed IDS: optional AFP stage, then one classification that also
/// yields the side-channel reading. Attackers only ever hold it as a
/// BlackBoxPipeline.
class DefendedIds final : public attacks::BlackBoxPipeline {
 public:
  DefendedIds(const ids::ClassifierModel& model, const sidechannel::SideChannelConfig& sc,
              std::uint64_t seed, std::optional<defense::AfpState> afp);

  struct Outcome {
    flowdata::Label label;
    sidechannel::SideChannelSample side;
    bool perturbed;
  };
  Outcome process(std::span<const double> x);

  attacks::QueryResponse query(std::span<const double> x) override {
    const auto o = process(x);
    return {o.label, o.side};
  }
  std::size_t dims() const override { return model_.dims(); }

  const defense::AfpState* afp() const noexcept { return afp_ ? &*afp_ : nullptr; }
  std::uint64_t flows() const noexcept { return flows_; }

 private:
  const ids::ClassifierModel& model_;
  sidechannel::SideChannelStream stream_;
  std::optional<defense::AfpState> afp_;
  Rng afp_rng_;
  std::vector<double> scratch_;
  std::uint64_t flows_ = 0;
};

/// Baseline profile and (optionally calibrated) AFP config for a model.
/// X_ref: benign flows of target_train; S_ref and the theta calibration:
/// side-channel readings of a clean replay of the whole target_train mix.
struct DefenseSetup {
  defense::BaselineProfile baseline;
  defense::AfpConfig afp;
};
DefenseSetup prepare_defense(const ExperimentConfig& cfg, const Experiment& exp);

enum class Scenario { baseline, probe, transfer, boundary };
std::string_view to_string(Scenario s) noexcept;
Scenario scenario_from_string(std::string_view s);

struct AttackStats {
  std::size_t crafted = 0;
  std::size_t evasion_success_count = 0;
  double evasion_rate = 0.0;
  std::size_t queries_spent = 0;
  double mean_l2 = 0.0;
  bool partial = false;
  std::vector<attacks::FeatureSensitivity> ranking;
};

/// One counted flow of a scenario stream.
struct FlowPrediction {
  std::uint64_t stream_index;
  flowdata::Label truth;
  flowdata::Label predicted;
};

struct ArmResult {
  ids::Metrics metrics;
  std::optional<AttackStats> attack;
  std::vector<FlowPrediction> predictions;
  std::uint64_t flows_processed = 0;
  std::uint64_t trigger_count = 0;
  double coverage = 0.0;
  std::vector<defense::TriggerEvent> triggers;
  std::vector<std::vector<double>> deployed;  ///< every input the pipeline saw, in order
};

struct ScenarioReport {
  Scenario scenario = Scenario::baseline;
  bool defense = false;
  std::uint64_t seed = 0;
  std::string build_id;
  std::string schema_hash;
  double theta = 0.0;
  ids::Metrics metrics_before;                 ///< defense-off arm
  std::optional<ids::Metrics> metrics_after;   ///< defense-on arm
  std::optional<double> coverage;
  std::optional<std::uint64_t> trigger_count;
  std::uint64_t flows_processed = 0;
  std::optional<AttackStats> attack_before;
  std::optional<AttackStats> attack_after;
  std::optional<nlohmann::json> timing;
};

struct ScenarioRun {
  ScenarioReport report;
  ArmResult off;
  std::optional<ArmResult> on;
};

/// Runs the defense-off arm and, when `defense` is set, the defense-on arm on
/// the same stream and seeds. No AFP state exists in the off arm.
ScenarioRun run_scenario(const ExperimentConfig& cfg, const Experiment& exp, Scenario scenario,
                         bool defense);

/// Writes report.json, resolved_config.json, predictions_before.csv,
/// predictions_after.csv (defense on) and triggers.jsonl (defense on).
void write_run(const ScenarioRun& run, const ExperimentConfig& cfg,
               const flowdata::FeatureSchema& schema, const std::filesystem::path& dir);

nlohmann::json report_to_json(const ScenarioReport& r);
ScenarioReport report_from_json(const nlohmann::json& j);
nlohmann::json metrics_to_json(const ids::Metrics& m);
ids::Metrics metrics_from_json(const nlohmann::json& j);

struct OverheadResult {
  std::size_t repetitions = 0;
  std::size_t flows = 0;
  double median_base_s = 0.0;      ///< whole pass, seconds
  double median_afp_s = 0.0;
  double median_per_flow_base_us = 0.0;
  double median_per_flow_afp_us = 0.0;
  double overhead_pct = 0.0;       ///< 100 * (t_afp - t_base) / t_base, medians
  double spread_pct = 0.0;         ///< max - min of per-repetition overhead %
  std::vector<double> per_rep_overhead_pct;
};

/// Replays the scenario's deployed input stream `repetitions` (>= 5) times
/// through the pipeline with and without AFP and compares median wall times.
/// `afp_in_both` disables AFP in both arms (null comparison).
OverheadResult measure_overhead(const ExperimentConfig& cfg, const Experiment& exp,
                                Scenario scenario, std::size_t repetitions,
                                bool afp_in_both_disabled = false);
nlohmann::json overhead_to_json(const OverheadResult& r);

/// Small explicit grid over n_trees x max_depth, scored on a stratified
/// validation slice of target_train. Returns the best hyperparameters.
struct GridPoint {
  ids::ForestHyper hyper;
  double validation_accuracy;
};
std::vector<GridPoint> grid_search(const flowdata::Dataset& train, const ids::ForestHyper& base,
                                   std::uint64_t seed);

std::string build_id();

}  // namespace afp::harness
