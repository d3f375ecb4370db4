#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "afp/defense/afp.hpp"
#include "afp/error.hpp"

namespace afp::defense {

namespace {

// Keeps |out - x| <= eps even when x + u*eps rounds away from x.
double bounded_add(double x, double u, double eps) {
  double y = x + u * eps;
  while (std::abs(y - x) > eps) y = std::nextafter(y, x);
  return y;
}

}  // namespace

void perturb(std::span<const double> x, std::span<const double> delta,
             std::span<const std::size_t> deviated, const AfpConfig& cfg, Rng& rng,
             std::span<double> out) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t next = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (next < deviated.size() && deviated[next] == i) {
      ++next;
      out[i] = bounded_add(x[i], u(rng), epsilon_for(delta[i], cfg));
    } else if (cfg.continuous_baseline_noise && cfg.epsilon_base > 0.0) {
      out[i] = bounded_add(x[i], u(rng), cfg.epsilon_base);
    } else {
      out[i] = x[i];
    }
  }
}

std::vector<double> perturb(std::span<const double> x, const DeviationScores& scores,
                            const AfpConfig& cfg, Rng& rng) {
  std::vector<double> out(x.size());
  perturb(x, scores.delta, scores.deviated, cfg, rng, out);
  return out;
}

AfpState::AfpState(BaselineProfile baseline, AfpConfig cfg)
    : baseline_(std::move(baseline)),
      cfg_(std::move(cfg)),
      d_(baseline_.dims()),
      detector_((cfg_.validate(), cfg_.window_len), cfg_.min_segment) {
  if (d_ == 0 || baseline_.feature_std.size() != d_) {
    throw Error(ErrorCategory::calibration, "AFP state needs an initialized baseline");
  }
  if (baseline_.samples < cfg_.window_len) {
    throw Error(ErrorCategory::calibration, "baseline was built from fewer than window_len samples");
  }
  ring_x_.assign(2 * cfg_.window_len * d_, 0.0);
  ring_rt_.assign(2 * cfg_.window_len, 0.0);
  cumulative_.assign(d_, 0.0);
}

void AfpState::push(std::span<const double> x, const SideChannelSample& s) {
  const std::size_t n = cfg_.window_len;
  std::copy(x.begin(), x.end(), ring_x_.begin() + static_cast<std::ptrdiff_t>(head_ * d_));
  std::copy(x.begin(), x.end(), ring_x_.begin() + static_cast<std::ptrdiff_t>((head_ + n) * d_));
  ring_rt_[head_] = s.response_time;
  ring_rt_[head_ + n] = s.response_time;
  head_ = head_ + 1 == n ? 0 : head_ + 1;
  if (filled_ < n) ++filled_;
}

std::span<const double> AfpState::window_x() const noexcept {
  const std::size_t n = cfg_.window_len;
  return {ring_x_.data() + head_ * d_, n * d_};
}

std::span<const double> AfpState::window_rt() const noexcept {
  return {ring_rt_.data() + head_, cfg_.window_len};
}

double AfpState::window_z() const noexcept {
  const auto w = window_rt();
  double sum = 0.0;
  for (double v : w) sum += v - baseline_.response_time.mean;
  const double n = static_cast<double>(w.size());
  return (sum / n) / (baseline_.response_time.std / std::sqrt(n));
}

void AfpState::raise(TriggerKind kind, const std::optional<ChangePoint>& cp, double z) {
  const auto scores = score_deviations(window_x(), cfg_.window_len, baseline_, cfg_);
  for (std::size_t i = 0; i < d_; ++i) {
    cumulative_[i] = cfg_.decay * cumulative_[i] + scores.delta[i];
  }
  deviated_ = scores.deviated;
  hold_ = cfg_.window_len;
  alert_ = true;
  if (kind == TriggerKind::onset) ++trigger_count_;

  TriggerEvent ev;
  ev.flow_index = processed_ - 1;
  ev.kind = kind;
  if (cp) ev.t_star = cp->index;
  ev.post_mean_z = z;
  ev.deviated = deviated_;
  for (std::size_t i : deviated_) ev.epsilons.push_back(epsilon_for(cumulative_[i], cfg_));
  events_.push_back(std::move(ev));
}

bool AfpState::apply(std::span<const double> x, Rng& rng, std::span<double> out) {
  if (x.size() != d_ || out.size() != d_) {
    throw Error(ErrorCategory::input, "AFP step got a feature vector of the wrong length");
  }
  if (hold_ > 0) {
    --hold_;
    ++perturbed_;
    perturb(x, cumulative_, deviated_, cfg_, rng, out);
    return true;
  }
  perturb(x, cumulative_, {}, cfg_, rng, out);
  return false;
}

bool AfpState::observe(std::span<const double> x, const SideChannelSample& s) {
  if (x.size() != d_) {
    throw Error(ErrorCategory::input, "AFP step got a feature vector of the wrong length");
  }
  push(x, s);
  ++processed_;
  if (hold_ > 0 || !window_full()) return false;

  if (const auto cp = detector_.detect(window_rt(), baseline_.response_time, cfg_.theta)) {
    raise(TriggerKind::onset, cp, cp->post_mean_z);
    return true;
  }
  if (alert_) {
    const double z = window_z();
    if (std::abs(z) > cfg_.sustain_ratio * cfg_.theta) {
      raise(TriggerKind::sustain, std::nullopt, z);
      return true;
    }
    alert_ = false;
    deviated_.clear();
  }
  return false;
}

AfpState::StepInfo AfpState::step(std::span<const double> x, const SideChannelSample& s,
                                  Rng& rng, std::span<double> out) {
  StepInfo info;
  info.perturbed = apply(x, rng, out);
  info.triggered = observe(x, s);
  return info;
}

std::vector<double> afp_step(AfpState& state, std::span<const double> x,
                             const SideChannelSample& s, Rng& rng) {
  std::vector<double> out(x.size());
  state.step(x, s, rng, out);
  return out;
}

std::string_view to_string(TriggerKind kind) noexcept {
  return kind == TriggerKind::onset ? "onset" : "sustain";
}

void write_trigger_log(std::ostream& out, std::span<const TriggerEvent> events,
                       const flowdata::FeatureSchema& schema) {
  for (const auto& ev : events) {
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t i : ev.deviated) names.push_back(schema.name(i));
    nlohmann::json j{{"flow_index", ev.flow_index},
                     {"kind", to_string(ev.kind)},
                     {"t_star", ev.t_star ? nlohmann::json(*ev.t_star) : nlohmann::json(nullptr)},
                     {"post_mean_z", ev.post_mean_z},
                     {"deviated_features", names},
                     {"epsilons", ev.epsilons}};
    out << j.dump() << '\n';
  }
}

}  // namespace afp::defense
