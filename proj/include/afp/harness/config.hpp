#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "afp/attacks/attacks.hpp"
#include "afp/defense/afp.hpp"
#include "afp/ids/forest.hpp"
#include "afp/sidechannel/sidechannel.hpp"

namespace afp::harness {

struct DataConfig {
  std::string source = "synth";  ///< synth | csv
  std::string csv_path;
  std::string label_column = "Label";
  std::vector<std::string> features;  ///< CSV columns to use; empty: desk default names
  std::size_t synth_count = 50000;
  double synth_attack_fraction = 0.5;
};

struct SplitConfig {
  double test_fraction = 0.3;
  double attacker_fraction = 0.2;  ///< of the training part, held out for the attacker
};

struct CalibrationConfig {
  bool enabled = true;
  std::size_t baseline_len = 2048;
  double target_rate = 1e-5;
  double margin = 1.2;
};

struct ProbeSettings {
  attacks::ProbeConfig probe;
  std::size_t budget = 1'000'000;
};

struct TransferSettings {
  double step = 0.1;
  std::size_t max_steps = 200;
  std::size_t overshoot = 2;
  ids::ForestHyper surrogate = attacks::default_surrogate_hyper();
};

struct BoundarySettings {
  std::size_t samples = 100;
  attacks::BoundaryConfig search;
  std::size_t background_per_query = 0;  ///< clean replay flows between attacker queries
  std::size_t budget_per_sample = 1000;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  DataConfig data;
  SplitConfig split;
  ids::ForestHyper ids;
  std::string model_path;  ///< load instead of training when set
  sidechannel::SideChannelConfig sidechannel;
  defense::AfpConfig afp;
  CalibrationConfig calibration;
  ProbeSettings probe;
  TransferSettings transfer;
  BoundarySettings boundary;
  std::string output_dir = "runs";
  bool include_timing = false;  ///< wall-clock fields make reports run-dependent

  /// Throws Error{config} on any out-of-range value.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Overlays `doc` onto the defaults. Unknown keys and type mismatches raise
/// Error{config}.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Loads a JSON config file (empty path: defaults), applies `key=value`
/// overrides with dotted keys, then AFP_SEED from the environment, and
/// validates. Override values are parsed as JSON when possible, else taken as
/// strings.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace afp::harness
