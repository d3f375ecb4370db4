#include <algorithm>
#include <cmath>

#include "afp/defense/afp.hpp"
#include "afp/error.hpp"
#include "afp/flowdata/preprocess.hpp"

namespace afp::defense {

void AfpConfig::validate() const {
  auto fail = [](const char* msg) { throw Error(ErrorCategory::config, msg); };
  if (!(epsilon_base >= 0.0)) fail("afp.epsilon_base must be >= 0");
  if (!(alpha >= 0.0)) fail("afp.alpha must be >= 0");
  if (!(epsilon_max > 0.0)) fail("afp.epsilon_max must be > 0");
  if (epsilon_base > epsilon_max) fail("afp.epsilon_base must not exceed afp.epsilon_max");
  if (!std::isfinite(theta)) fail("afp.theta must be finite");
  if (window_len < 8) fail("afp.window_len must be >= 8");
  if (min_segment < 2) fail("afp.min_segment must be >= 2");
  if (2 * min_segment > window_len) fail("afp.min_segment must be <= window_len / 2");
  if (!(deviation_floor >= 0.0)) fail("afp.deviation_floor must be >= 0");
  if (!(decay >= 0.0 && decay < 1.0)) fail("afp.decay must lie in [0, 1)");
  if (!(sustain_ratio > 0.0 && sustain_ratio <= 1.0)) fail("afp.sustain_ratio must lie in (0, 1]");
}

BaselineProfile build_baseline(std::span<const double> clean_x, std::size_t dims,
                               std::span<const SideChannelSample> clean_s, std::size_t n) {
  if (n == 0 || dims == 0) {
    throw Error(ErrorCategory::calibration, "baseline needs n > 0 and at least one feature");
  }
  const std::size_t rows = clean_x.size() / dims;
  if (rows < n || clean_s.size() < n) {
    throw Error(ErrorCategory::calibration,
                "baseline needs at least " + std::to_string(n) + " clean samples");
  }
  BaselineProfile b;
  const auto fm = flowdata::column_moments(clean_x.subspan((rows - n) * dims, n * dims), dims);
  b.feature_mean = fm.mean;
  b.feature_std = fm.std;

  // Side channel as a two-column block so it goes through the same guarded path.
  std::vector<double> sc;
  sc.reserve(2 * n);
  for (const auto& s : clean_s.subspan(clean_s.size() - n)) {
    sc.push_back(s.response_time);
    sc.push_back(s.cpu_cost);
  }
  const auto sm = flowdata::column_moments(sc, 2);
  b.response_time = {sm.mean[0], sm.std[0]};
  b.cpu_cost = {sm.mean[1], sm.std[1]};
  b.samples = n;
  return b;
}

ChangeDetector::ChangeDetector(std::size_t window_len, std::size_t min_segment,
                               const kernels::KernelTable& k)
    : n_(window_len), min_segment_(min_segment), k_(k) {
  if (n_ < 2 * min_segment_ || min_segment_ == 0) {
    throw Error(ErrorCategory::config, "change detector needs 1 <= min_segment <= n/2");
  }
  weight_.assign(n_ + 1, 0.0);
  inv_left_.assign(n_ + 1, 0.0);
  inv_right_.assign(n_ + 1, 0.0);
  prefix_.assign(n_ + 1, 0.0);
  const double n = static_cast<double>(n_);
  for (std::size_t t = 1; t < n_; ++t) {
    const double l = static_cast<double>(t);
    const double r = n - l;
    weight_[t] = l * r / n;
    inv_left_[t] = 1.0 / l;
    inv_right_[t] = 1.0 / r;
  }
}

double ChangeDetector::penalty(const Moments& ref, std::size_t n) {
  return 2.0 * ref.std * ref.std * std::log(static_cast<double>(n));
}

std::optional<ChangePoint> ChangeDetector::best_split(std::span<const double> window,
                                                      const Moments& ref) {
  if (window.size() != n_) return std::nullopt;
  // Centre on the reference mean: the reduction is shift invariant and the
  // prefix sums stay small.
  double acc = 0.0;
  prefix_[0] = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    acc += window[i] - ref.mean;
    prefix_[i + 1] = acc;
  }
  const auto scan = k_.max_mean_shift_split(prefix_.data(), n_, min_segment_,
                                            n_ - min_segment_, weight_.data(),
                                            inv_left_.data(), inv_right_.data());
  if (!scan.found()) return std::nullopt;
  const std::size_t t = scan.index;
  const double len_post = static_cast<double>(n_ - t);
  const double post_mean = (prefix_[n_] - prefix_[t]) / len_post;  // already centred
  ChangePoint cp;
  cp.index = t;
  cp.score = scan.score;
  cp.post_mean_z = post_mean / (ref.std / std::sqrt(len_post));
  return cp;
}

std::optional<ChangePoint> ChangeDetector::detect(std::span<const double> window,
                                                  const Moments& ref, double theta) {
  auto cp = best_split(window, ref);
  if (!cp) return std::nullopt;
  if (!(cp->score > penalty(ref, n_))) return std::nullopt;
  if (!(std::abs(cp->post_mean_z) > theta)) return std::nullopt;
  return cp;
}

std::optional<ChangePoint> detect_change(std::span<const SideChannelSample> obs_s,
                                         const BaselineProfile& baseline,
                                         const AfpConfig& cfg) {
  if (obs_s.size() != cfg.window_len) return std::nullopt;
  std::vector<double> rt(obs_s.size());
  for (std::size_t i = 0; i < obs_s.size(); ++i) rt[i] = obs_s[i].response_time;
  ChangeDetector det(cfg.window_len, cfg.min_segment);
  return det.detect(rt, baseline.response_time, cfg.theta);
}

DeviationScores score_deviations(std::span<const double> obs_x, std::size_t rows,
                                 const BaselineProfile& baseline, const AfpConfig& cfg) {
  const std::size_t d = baseline.dims();
  DeviationScores out;
  out.delta.assign(d, 0.0);
  if (rows == 0 || obs_x.size() != rows * d) return out;
  kernels::column_sums(obs_x, d, out.delta);
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = out.delta[i] * inv_rows;
    out.delta[i] = std::abs(mean - baseline.feature_mean[i]) / baseline.feature_std[i];
    if (out.delta[i] > cfg.deviation_floor) out.deviated.push_back(i);
  }
  return out;
}

double calibrate_theta(std::span<const double> clean_rt, const BaselineProfile& baseline,
                       const AfpConfig& cfg, double target_rate, double margin) {
  const std::size_t n = cfg.window_len;
  if (clean_rt.size() < n) {
    throw Error(ErrorCategory::calibration, "calibration replay is shorter than one window");
  }
  if (!(target_rate > 0.0 && target_rate < 1.0) || !(margin > 0.0)) {
    throw Error(ErrorCategory::config, "calibration target_rate/margin out of range");
  }
  ChangeDetector det(n, cfg.min_segment);
  const Moments& ref = baseline.response_time;
  const double pen = ChangeDetector::penalty(ref, n);
  const double se_window = ref.std / std::sqrt(static_cast<double>(n));
  std::vector<double> zs;
  zs.reserve(clean_rt.size() - n + 1);
  double window_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) window_sum += clean_rt[i] - ref.mean;
  for (std::size_t start = 0; start + n <= clean_rt.size(); ++start) {
    if (start > 0) window_sum += clean_rt[start + n - 1] - clean_rt[start - 1];
    double z = std::abs(window_sum / static_cast<double>(n) / se_window);
    const auto cp = det.best_split(clean_rt.subspan(start, n), ref);
    if (cp && cp->score > pen) z = std::max(z, std::abs(cp->post_mean_z));
    zs.push_back(z);
  }
  std::sort(zs.begin(), zs.end());
  const double pos = (1.0 - target_rate) * static_cast<double>(zs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, zs.size() - 1);
  const double q = zs[lo] + (zs[hi] - zs[lo]) * (pos - static_cast<double>(lo));
  return std::max(cfg.theta, margin * q);
}

}  // namespace afp::defense
