#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "afp/error.hpp"
#include "afp/sidechannel/sidechannel.hpp"
#include "support/helpers.hpp"

using namespace afp;
using namespace afp::sidechannel;

TEST_CASE("noise-free stump reading follows the latency formula exactly") {
  const auto stump = testing::stump_model(1, 0, 0.0);
  SideChannelConfig cfg;
  cfg.base_latency_ms = 1.0;
  cfg.per_node_cost_ms = 0.5;
  cfg.noise_std_ms = 0.0;
  Rng rng(1);
  const auto o = observe(cfg, stump, std::vector<double>{3.0}, rng);
  CHECK(o.sample.response_time == 2.0);
  CHECK(o.sample.cpu_cost == 2.0);
  CHECK(o.label == flowdata::Label::attack);
}

TEST_CASE("deeper leaves cost strictly more without noise") {
  const auto stairs = testing::staircase_model(1, 0, {0, 1, 2, 3, 4, 5, 6});
  SideChannelConfig cfg;
  cfg.noise_std_ms = 0.0;
  Rng rng(1);
  // Leaf depth k+1 is reached for x in (t_{k-1}, t_k].
  const auto shallow = observe(cfg, stairs, std::vector<double>{1.5}, rng);  // depth 3
  const auto deep = observe(cfg, stairs, std::vector<double>{5.5}, rng);     // depth 7
  CHECK(shallow.sample.cpu_cost == 4.0);
  CHECK(deep.sample.cpu_cost == 8.0);
  CHECK(deep.sample.response_time > shallow.sample.response_time);
}

TEST_CASE("noisy readings average to the deterministic value") {
  const auto stump = testing::stump_model(1, 0, 0.0);
  SideChannelConfig cfg;
  cfg.noise_std_ms = 0.1;
  SideChannelStream stream(cfg, 2024);
  const std::size_t n = 10000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += stream.observe(stump, std::vector<double>{-1.0}).sample.response_time;
  }
  const double expected = cfg.base_latency_ms + 2 * cfg.per_node_cost_ms;
  CHECK(std::abs(sum / n - expected) <= 3.0 * cfg.noise_std_ms / std::sqrt(double(n)));
  CHECK(stream.ticks() == n);
}

TEST_CASE("readings stay positive under heavy noise") {
  const auto stump = testing::stump_model(1, 0, 0.0);
  SideChannelConfig cfg;
  cfg.base_latency_ms = 0.01;
  cfg.per_node_cost_ms = 0.0;
  cfg.noise_std_ms = 5.0;
  SideChannelStream stream(cfg, 3);
  for (int i = 0; i < 2000; ++i) {
    CHECK(stream.observe(stump, std::vector<double>{0.0}).sample.response_time >= kMinResponseMs);
  }
}

TEST_CASE("load drift is a sinusoid in the query clock") {
  SideChannelConfig cfg;
  cfg.load_drift = LoadDrift{0.3, 100.0};
  CHECK(drift_at(cfg, 0) == 0.0);
  CHECK(drift_at(cfg, 25) == doctest::Approx(0.3));
  CHECK(drift_at(cfg, 75) == doctest::Approx(-0.3));
  cfg.load_drift.reset();
  CHECK(drift_at(cfg, 25) == 0.0);
}

TEST_CASE("streams are reproducible per seed and reject bad configs") {
  const auto stump = testing::stump_model(1, 0, 0.0);
  SideChannelConfig cfg;
  SideChannelStream a(cfg, 5), b(cfg, 5);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x{i % 2 ? 1.0 : -1.0};
    CHECK(a.observe(stump, x).sample.response_time == b.observe(stump, x).sample.response_time);
  }
  cfg.noise_std_ms = -1.0;
  CHECK_THROWS_AS(SideChannelStream(cfg, 1), Error);
}

TEST_CASE("trace CSV has the documented header and one row per sample") {
  const auto path = std::filesystem::temp_directory_path() / "afp_trace_test.csv";
  write_trace_csv(path, std::vector<SideChannelSample>{{1.5, 3}, {2.25, 4}});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,response_time,cpu_cost");
  std::getline(in, line);
  CHECK(line == "0,1.5,3");
  std::getline(in, line);
  CHECK(line == "1,2.25,4");
  std::filesystem::remove(path);
}
