#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "afp/attacks/pipeline.hpp"
#include "afp/ids/forest.hpp"
#include "afp/rng.hpp"

namespace afp::attacks {

struct CraftedSample {
  std::vector<double> original;
  std::vector<double> adversarial;
  Label original_label = Label::attack;
  bool success = false;     ///< final pipeline verdict was benign
  bool verified = false;    ///< the final verifying query was actually made
  double l2 = 0.0;          ///< ||adversarial - original||
  std::size_t queries = 0;  ///< pipeline calls spent on this sample
};

struct FeatureSensitivity {
  std::size_t feature = 0;
  double flip_rate = 0.0;   ///< label flips per probe
  double side_delta = 0.0;  ///< mean |response-time change| per probe
  int direction = -1;       ///< step sign that moves toward benign
};

struct AttackResult {
  std::vector<CraftedSample> samples;
  std::size_t evasion_success_count = 0;
  std::size_t queries_spent = 0;
  bool partial = false;  ///< budget ran out before the campaign finished
  std::vector<FeatureSensitivity> ranking;  ///< probing only, most sensitive first

  double evasion_rate() const noexcept {
    return samples.empty() ? 0.0
                           : static_cast<double>(evasion_success_count) /
                                 static_cast<double>(samples.size());
  }
};

// ---------------------------------------------------------------- probing

struct ProbeConfig {
  double probe_step = 0.25;   ///< standardized units
  std::size_t repeats = 8;    ///< seeds used for sensitivity inference
  std::size_t top_k = 3;      ///< features walked during evasion
  double travel_cap = 3.0;    ///< per-feature walking limit
};

/// Phase 1 probes each of the first `repeats` seeds at +/- probe_step on every
/// feature (1 + 2d queries per seed) and ranks features by flip rate, then
/// mean |response-time change|, then index. Phase 2 walks each seed's top-k
/// features toward benign until the label flips or the travel cap is hit, and
/// spends one last query to verify. A walk that reaches the cap without a flip
/// is retried the other way (the end with more response time is kept, deeper
/// being closer to the contested region); directions of verified evasions are
/// remembered and override the inferred ones for later seeds.
class SilentProbeCampaign {
 public:
  SilentProbeCampaign(ProbeConfig cfg, std::size_t dims);

  /// Throws Error{precondition} if the budget cannot cover 2*d*repeats.
  void infer(MeteredPipeline& pipe, std::span<const std::vector<double>> seeds);
  /// Phase 2 for one seed. Requires infer() to have produced a ranking.
  const CraftedSample& evade(MeteredPipeline& pipe, std::span<const double> seed);

  const AttackResult& result() const noexcept { return result_; }
  AttackResult take_result() { return std::move(result_); }
  bool inferred() const noexcept { return !result_.ranking.empty(); }

 private:
  ProbeConfig cfg_;
  std::size_t d_;
  AttackResult result_;
  std::vector<long> learned_;  // per feature: sum of move signs over verified evasions
  std::size_t start_spent_ = 0;
  bool started_ = false;
  void account(const MeteredPipeline& pipe);
};

/// Whole campaign over `seeds` (attack-class samples): inference on the first
/// `repeats` seeds (chosen in order after an rng shuffle), then evasion of
/// every seed.
AttackResult silent_probe_campaign(MeteredPipeline& pipe,
                                   std::span<const std::vector<double>> seeds,
                                   const ProbeConfig& cfg, Rng& rng);

/// Rankings compared in feature space: 1 when identical, lower otherwise.
double spearman_rank_correlation(const std::vector<FeatureSensitivity>& a,
                                 const std::vector<FeatureSensitivity>& b);

// ----------------------------------------------------------- transferability

/// The attacker's own model: trained only on attacker-visible data.
struct SurrogateModel {
  ids::ClassifierModel model;
  std::string provenance;
  std::vector<double> benign_centroid;
};

/// Attacker ensemble defaults: smaller than the target's.
ids::ForestHyper default_surrogate_hyper();

/// Throws Error{training} on single-class data.
SurrogateModel train_surrogate(const flowdata::Dataset& attacker_data,
                               const ids::ForestHyper& hyper = default_surrogate_hyper(),
                               const std::string& provenance = "attacker_pool");

struct CraftResult {
  std::vector<double> x_adv;
  bool success = false;     ///< surrogate says benign
  std::size_t steps = 0;    ///< accepted moves
  std::vector<double> vote_trace;  ///< attack-vote fraction after each accepted move
};

/// Gradient-free coordinate descent on the surrogate: each round tries every
/// single-feature +/- step move and keeps the one with the lowest
/// (attack-vote fraction, soft attack score, distance to the benign centroid),
/// provided it does not increase that key. Stops on a benign verdict, when no
/// move helps, or after max_steps. `overshoot` extra rounds continue past the
/// flip for margin. Throws Error{precondition} if the surrogate already says
/// benign.
CraftResult craft_on_surrogate(const SurrogateModel& surrogate, std::span<const double> x_attack,
                               double step, std::size_t max_steps, std::size_t overshoot = 0);

// -------------------------------------------------------------- boundary

struct BoundaryConfig {
  std::size_t iters = 20;          ///< bisection halvings
  std::size_t shrink_passes = 2;
  std::size_t shrink_halvings = 6; ///< revert fractions 1, 1/2, ... per coordinate
};

struct BoundaryResult {
  CraftedSample sample;
  double bisection_l2 = 0.0;  ///< distance after bisection alone
};

/// Bisection along [x_attack, anchor] to the label boundary, then per-feature
/// shrink passes reverting coordinates toward x_attack while the label stays
/// benign; one final query verifies. Throws Error{precondition} unless the
/// pipeline labels x_attack attack and the anchor benign.
BoundaryResult boundary_attack(MeteredPipeline& pipe, std::span<const double> x_attack,
                               std::span<const double> anchor,
                               const BoundaryConfig& cfg = {});

/// Benign record minimising the summed Euclidean distance to the other benign
/// records of `data`.
std::vector<double> benign_medoid(const flowdata::Dataset& data);

}  // namespace afp::attacks
