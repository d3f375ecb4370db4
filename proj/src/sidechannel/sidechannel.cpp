#include "afp/sidechannel/sidechannel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "afp/error.hpp"

namespace afp::sidechannel {

void SideChannelConfig::validate() const {
  if (!(base_latency_ms > 0.0) || !std::isfinite(base_latency_ms)) {
    throw Error(ErrorCategory::config, "sidechannel.base_latency_ms must be > 0");
  }
  if (!(per_node_cost_ms >= 0.0) || !std::isfinite(per_node_cost_ms)) {
    throw Error(ErrorCategory::config, "sidechannel.per_node_cost_ms must be >= 0");
  }
  if (!(noise_std_ms >= 0.0) || !std::isfinite(noise_std_ms)) {
    throw Error(ErrorCategory::config, "sidechannel.noise_std_ms must be >= 0");
  }
  if (load_drift && !(load_drift->period > 0.0)) {
    throw Error(ErrorCategory::config, "sidechannel.load_drift.period must be > 0");
  }
}

double drift_at(const SideChannelConfig& cfg, std::uint64_t t) noexcept {
  if (!cfg.load_drift) return 0.0;
  const auto& d = *cfg.load_drift;
  return d.amplitude_ms * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / d.period);
}

Observation observe(const SideChannelConfig& cfg, const ids::ClassifierModel& model,
                    std::span<const double> x, Rng& rng, std::uint64_t t) {
  const auto p = model.predict_detailed(x);
  const double visits = static_cast<double>(p.node_visits);
  double rt = cfg.base_latency_ms + cfg.per_node_cost_ms * visits + drift_at(cfg, t);
  if (cfg.noise_std_ms > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std_ms);
    rt += noise(rng);
  }
  return {p.label, {std::max(rt, kMinResponseMs), visits}};
}

SideChannelStream::SideChannelStream(SideChannelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
}

Observation SideChannelStream::observe(const ids::ClassifierModel& model,
                                       std::span<const double> x) {
  return sidechannel::observe(cfg_, model, x, rng_, tick_++);
}

void write_trace_csv(const std::filesystem::path& path,
                     std::span<const SideChannelSample> samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write trace " + path.string());
  out << "t,response_time,cpu_cost\n";
  char buf[96];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, samples[i].response_time,
                  samples[i].cpu_cost);
    out << buf;
  }
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

}  // namespace afp::sidechannel
