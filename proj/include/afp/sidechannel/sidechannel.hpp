#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "afp/ids/forest.hpp"
#include "afp/rng.hpp"

namespace afp::sidechannel {

/// What an outside observer sees of one query besides its label.
struct SideChannelSample {
  double response_time = 0.0;  ///< milliseconds, > 0
  double cpu_cost = 0.0;       ///< abstract work units (tree-node visits)
};

struct LoadDrift {
  double amplitude_ms = 0.0;
  double period = 1.0;  ///< in queries
};

struct SideChannelConfig {
  double base_latency_ms = 1.0;
  double per_node_cost_ms = 0.01;
  double noise_std_ms = 0.05;  ///< 5% of base by default
  std::optional<LoadDrift> load_drift;

  void validate() const;
};

/// Smallest response time ever reported; noise cannot push a reading to or below zero.
inline constexpr double kMinResponseMs = 1e-6;

double drift_at(const SideChannelConfig& cfg, std::uint64_t t) noexcept;

/// Label and side-channel reading from a single traversal of the ensemble.
struct Observation {
  flowdata::Label label = flowdata::Label::benign;
  SideChannelSample sample;
};

/// response_time = base + per_node * visits + drift(t) + N(0, noise_std);
/// cpu_cost = visits, where visits is exactly what predict traverses.
Observation observe(const SideChannelConfig& cfg, const ids::ClassifierModel& model,
                    std::span<const double> x, Rng& rng, std::uint64_t t = 0);

/// One query stream: owns its generator and its clock.
class SideChannelStream {
 public:
  SideChannelStream(SideChannelConfig cfg, std::uint64_t seed);

  Observation observe(const ids::ClassifierModel& model, std::span<const double> x);
  std::uint64_t ticks() const noexcept { return tick_; }
  const SideChannelConfig& config() const noexcept { return cfg_; }

 private:
  SideChannelConfig cfg_;
  Rng rng_;
  std::uint64_t tick_ = 0;
};

/// CSV with header `t,response_time,cpu_cost`.
void write_trace_csv(const std::filesystem::path& path,
                     std::span<const SideChannelSample> samples);

}  // namespace afp::sidechannel
