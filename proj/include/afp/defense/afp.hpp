#pragma once

// Adaptive feature poisoning: watch the side-channel stream for a change in
// its mean, work out which traffic features moved, and jitter those features
// (boundedly) before the IDS sees them.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afp/flowdata/dataset.hpp"
#include "afp/kernels/kernels.hpp"
#include "afp/rng.hpp"
#include "afp/sidechannel/sidechannel.hpp"

namespace afp::defense {

using sidechannel::SideChannelSample;

struct AfpConfig {
  double epsilon_base = 0.01;  ///< standardized units
  double alpha = 0.05;
  double theta = 4.0;          ///< z-score gate on the side-channel mean
  std::size_t window_len = 64;
  double epsilon_max = 0.1;
  std::size_t min_segment = 8;
  double deviation_floor = 0.5;
  double decay = 0.9;          ///< cumulative deviation: acc = decay * acc + delta
  double sustain_ratio = 0.5;  ///< an active alert is renewed while |window z| > ratio * theta
  bool continuous_baseline_noise = false;
  std::uint64_t seed = 7;

  /// Throws Error{config}.
  void validate() const;
};

struct Moments {
  double mean = 0.0;
  double std = 1.0;
};

/// Reference statistics of normal traffic: per-feature moments of X_ref and
/// moments of each side-channel dimension of S_ref.
struct BaselineProfile {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  Moments response_time;
  Moments cpu_cost;
  std::size_t samples = 0;  ///< entries each moment was computed over

  std::size_t dims() const noexcept { return feature_mean.size(); }
};

/// Moments over the last `n` entries of each sequence. Stds use the same
/// constant guard as standardization. Throws Error{calibration} when either
/// sequence is shorter than n or n is zero.
BaselineProfile build_baseline(std::span<const double> clean_x, std::size_t dims,
                               std::span<const SideChannelSample> clean_s, std::size_t n);

struct ChangePoint {
  std::size_t index = 0;     ///< t*: first sample of the post-change segment
  double score = 0.0;        ///< L2 cost reduction of the split
  double post_mean_z = 0.0;  ///< (mean_post - mu_ref) / (sigma_ref / sqrt(len_post))
};

/// Single-split binary segmentation over a fixed window length. Holds the
/// per-split weight tables so that a scan is one prefix pass plus one kernel
/// call.
class ChangeDetector {
 public:
  ChangeDetector(std::size_t window_len, std::size_t min_segment,
                 const kernels::KernelTable& k = kernels::active());

  /// Best split by cost reduction, then both gates: reduction > 2 sigma^2 log n
  /// and |post_mean_z| > theta. Windows of the wrong length yield none.
  std::optional<ChangePoint> detect(std::span<const double> window, const Moments& ref,
                                    double theta);

  /// Best split and its statistics without the gates (calibration, tests).
  std::optional<ChangePoint> best_split(std::span<const double> window, const Moments& ref);

  static double penalty(const Moments& ref, std::size_t n);
  std::size_t window_len() const noexcept { return n_; }

 private:
  std::size_t n_;
  std::size_t min_segment_;
  const kernels::KernelTable& k_;
  std::vector<double> weight_, inv_left_, inv_right_, prefix_;
};

/// Detection on the response-time readings of a full window.
std::optional<ChangePoint> detect_change(std::span<const SideChannelSample> obs_s,
                                         const BaselineProfile& baseline,
                                         const AfpConfig& cfg);

struct DeviationScores {
  std::vector<double> delta;           ///< |window mean - ref mean| / ref std
  std::vector<std::size_t> deviated;   ///< features with delta > floor, ascending
};

/// `obs_x` is a row-major window of `rows` flows.
DeviationScores score_deviations(std::span<const double> obs_x, std::size_t rows,
                                 const BaselineProfile& baseline, const AfpConfig& cfg);

inline double epsilon_for(double delta, const AfpConfig& cfg) noexcept {
  const double e = cfg.epsilon_base + cfg.alpha * delta;
  return e < cfg.epsilon_max ? e : cfg.epsilon_max;
}

/// x'_i = x_i + u_i * eps_i, u_i ~ U[-1, 1), one draw per perturbed feature in
/// feature order. Deviated features use epsilon_for(delta_i); the rest are
/// copied unless continuous_baseline_noise is set (then eps = epsilon_base).
/// `deviated` must be sorted ascending. |x'_i - x_i| <= eps_i always holds.
void perturb(std::span<const double> x, std::span<const double> delta,
             std::span<const std::size_t> deviated, const AfpConfig& cfg, Rng& rng,
             std::span<double> out);
std::vector<double> perturb(std::span<const double> x, const DeviationScores& scores,
                            const AfpConfig& cfg, Rng& rng);

enum class TriggerKind { onset, sustain };

struct TriggerEvent {
  std::uint64_t flow_index = 0;
  TriggerKind kind = TriggerKind::onset;
  std::optional<std::size_t> t_star;  ///< none for sustain re-arms
  double post_mean_z = 0.0;
  std::vector<std::size_t> deviated;
  std::vector<double> epsilons;  ///< aligned with `deviated`
};

/// Per-stream defense state. Single writer.
///
/// A flow is first perturbed from the current alert state (apply), then
/// classified once, and its raw features and side-channel reading are pushed
/// (observe). Detection thus acts on the flows after the one that revealed
/// the change.
///
/// While no alert is active, every full window is tested for a change point.
/// An onset alert scores deviations, fixes the deviated set for the next
/// window_len flows (detection is disarmed meanwhile) and counts one trigger.
/// When that hold runs out the window is re-examined: a fresh change point or
/// a whole-window mean z still beyond sustain_ratio * theta renews the hold
/// (logged as "sustain" unless a change point was found); otherwise the set is
/// cleared.
class AfpState {
 public:
  AfpState(BaselineProfile baseline, AfpConfig cfg);

  struct StepInfo {
    bool perturbed = false;   ///< flow fell inside an alert hold
    bool triggered = false;   ///< an onset or sustain event fired on this flow
  };

  /// Writes x' into `out` from the current alert state; true if x fell
  /// inside a hold.
  bool apply(std::span<const double> x, Rng& rng, std::span<double> out);
  /// Pushes the raw flow and its reading; true if an event fired.
  bool observe(std::span<const double> x, const SideChannelSample& s);
  /// apply, then observe.
  StepInfo step(std::span<const double> x, const SideChannelSample& s, Rng& rng,
                std::span<double> out);

  const BaselineProfile& baseline() const noexcept { return baseline_; }
  const AfpConfig& config() const noexcept { return cfg_; }
  std::uint64_t processed() const noexcept { return processed_; }
  std::uint64_t trigger_count() const noexcept { return trigger_count_; }
  std::uint64_t perturbed_flows() const noexcept { return perturbed_; }
  double coverage() const noexcept {
    return processed_ ? static_cast<double>(perturbed_) / static_cast<double>(processed_) : 0.0;
  }
  const std::vector<std::size_t>& deviated() const noexcept { return deviated_; }
  const std::vector<double>& cumulative_delta() const noexcept { return cumulative_; }
  const std::vector<TriggerEvent>& events() const noexcept { return events_; }
  bool window_full() const noexcept { return filled_ >= cfg_.window_len; }

  /// Last window_len flows / readings in arrival order (valid once full).
  std::span<const double> window_x() const noexcept;
  std::span<const double> window_rt() const noexcept;

 private:
  void push(std::span<const double> x, const SideChannelSample& s);
  void raise(TriggerKind kind, const std::optional<ChangePoint>& cp, double z);
  double window_z() const noexcept;

  BaselineProfile baseline_;
  AfpConfig cfg_;
  std::size_t d_;
  ChangeDetector detector_;
  std::vector<double> ring_x_;   // 2n rows, each row written twice
  std::vector<double> ring_rt_;  // 2n readings, likewise
  std::size_t head_ = 0;         // next write slot in [0, n)
  std::size_t filled_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t trigger_count_ = 0;
  std::uint64_t perturbed_ = 0;
  std::size_t hold_ = 0;
  bool alert_ = false;
  std::vector<std::size_t> deviated_;
  std::vector<double> cumulative_;
  std::vector<TriggerEvent> events_;
};

/// Convenience wrapper returning a fresh vector.
std::vector<double> afp_step(AfpState& state, std::span<const double> x,
                             const SideChannelSample& s, Rng& rng);

/// theta = max(cfg.theta, margin * q), q being the (1 - target_rate) quantile
/// of |z| over every full window of a clean signal replay. For each window z
/// is the post-segment z of the best split when that split clears the
/// segmentation penalty, and the whole-window z otherwise considered by the
/// sustain rule; the larger is used. Throws Error{calibration} when the replay
/// is shorter than one window.
double calibrate_theta(std::span<const double> clean_rt, const BaselineProfile& baseline,
                       const AfpConfig& cfg, double target_rate = 1e-5,
                       double margin = 1.2);

std::string_view to_string(TriggerKind kind) noexcept;

/// One JSON object per line: flow_index, kind, t_star, post_mean_z,
/// deviated_features, epsilons.
void write_trigger_log(std::ostream& out, std::span<const TriggerEvent> events,
                       const flowdata::FeatureSchema& schema);

}  // namespace afp::defense
