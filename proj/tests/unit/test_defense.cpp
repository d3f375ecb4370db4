#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "afp/defense/afp.hpp"
#include "afp/error.hpp"
#include "support/helpers.hpp"
#include "support/properties.hpp"

using namespace afp;
using namespace afp::defense;

namespace {

constexpr std::size_t kDims = 3;

struct Clean {
  std::vector<double> x;
  std::vector<SideChannelSample> s;
};

Clean clean_traffic(std::size_t n, std::uint64_t seed, double rt_mean = 1.2, double rt_sd = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Clean c;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kDims; ++j) c.x.push_back(g(rng));
    c.s.push_back({rt_mean + rt_sd * g(rng), 50.0 + g(rng)});
  }
  return c;
}

// Two-pass population moments written out longhand.
std::pair<double, double> moments(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

BaselineProfile unit_baseline(std::size_t d = kDims) {
  BaselineProfile b;
  b.feature_mean.assign(d, 0.0);
  b.feature_std.assign(d, 1.0);
  b.response_time = {1.0, 0.1};
  b.cpu_cost = {10.0, 1.0};
  b.samples = 4096;
  return b;
}

}  // namespace

TEST_CASE("baseline: constant signal keeps its mean and a guarded std") {
  std::vector<double> x(64 * kDims, 0.5);
  std::vector<SideChannelSample> s(64, SideChannelSample{3.0, 7.0});
  const auto b = build_baseline(x, kDims, s, 64);
  CHECK(b.response_time.mean == 3.0);
  CHECK(b.response_time.std == 1.0);
  CHECK(b.feature_mean[1] == 0.5);
  CHECK(b.feature_std[1] == 1.0);
  CHECK(b.samples == 64);
}

TEST_CASE("baseline: standardized columns come out near (0, 1)") {
  auto c = clean_traffic(5000, 1);
  // Standardize the feature block in place with its own moments.
  for (std::size_t j = 0; j < kDims; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < 5000; ++i) col.push_back(c.x[i * kDims + j]);
    const auto [m, sd] = moments(col);
    for (std::size_t i = 0; i < 5000; ++i) c.x[i * kDims + j] = (c.x[i * kDims + j] - m) / sd;
  }
  const auto b = build_baseline(c.x, kDims, c.s, 5000);
  for (std::size_t j = 0; j < kDims; ++j) {
    CHECK(std::abs(b.feature_mean[j]) < 1e-6);
    CHECK(std::abs(b.feature_std[j] - 1.0) < 1e-6);
  }
}

TEST_CASE("baseline: moments of the last n samples match a separate two-pass recount") {
  const auto c = clean_traffic(3000, 2);
  const std::size_t n = 1000;
  const auto b = build_baseline(c.x, kDims, c.s, n);
  std::vector<double> rt, cpu;
  for (std::size_t i = 3000 - n; i < 3000; ++i) rt.push_back(c.s[i].response_time), cpu.push_back(c.s[i].cpu_cost);
  CHECK(std::abs(b.response_time.mean - moments(rt).first) < 1e-9);
  CHECK(std::abs(b.response_time.std - moments(rt).second) < 1e-9);
  CHECK(std::abs(b.cpu_cost.std - moments(cpu).second) < 1e-9);
  for (std::size_t j = 0; j < kDims; ++j) {
    std::vector<double> col;
    for (std::size_t i = 3000 - n; i < 3000; ++i) col.push_back(c.x[i * kDims + j]);
    CHECK(std::abs(b.feature_mean[j] - moments(col).first) < 1e-9);
    CHECK(std::abs(b.feature_std[j] - moments(col).second) < 1e-9);
  }
  try {
    build_baseline(c.x, kDims, c.s, 5000);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::calibration);
  }
}

TEST_CASE("detect: a flat window at the reference mean yields nothing") {
  ChangeDetector det(64, 8);
  const std::vector<double> w(64, 1.0);
  CHECK_FALSE(det.detect(w, {1.0, 0.1}, 3.0).has_value());
}

TEST_CASE("detect: a 10-sigma step at 32 is found where the exhaustive L2 scan puts it") {
  const Moments ref{1.0, 0.1};
  std::vector<double> w(64, ref.mean);
  std::fill(w.begin() + 32, w.end(), ref.mean + 10 * ref.std);
  ChangeDetector det(64, 8);
  const auto cp = det.detect(w, ref, 3.0);
  REQUIRE(cp.has_value());
  CHECK(cp->index == 32);
  CHECK(testing::exhaustive_l2_split(w, 1, 63) == 32);
  CHECK(cp->post_mean_z == doctest::Approx(10.0 * std::sqrt(32.0)));

  // Same through the side-channel entry point.
  std::vector<SideChannelSample> s;
  for (double v : w) s.push_back({v, 0.0});
  auto b = unit_baseline();
  b.response_time = ref;
  AfpConfig cfg;
  cfg.theta = 3.0;
  const auto cp2 = detect_change(s, b, cfg);
  REQUIRE(cp2.has_value());
  CHECK(cp2->index == 32);
}

TEST_CASE("detect: post-change z of 2 stays below theta 3 even when segmentation passes") {
  const Moments ref{1.0, 0.1};
  const double post = ref.mean + 2.0 * ref.std / std::sqrt(32.0);
  std::vector<double> w(64, ref.mean - 3.0 * ref.std);
  std::fill(w.begin() + 32, w.end(), post);
  ChangeDetector det(64, 8);
  const auto raw = det.best_split(w, ref);
  REQUIRE(raw.has_value());
  CHECK(raw->index == 32);
  CHECK(raw->score > ChangeDetector::penalty(ref, 64));
  CHECK(raw->post_mean_z == doctest::Approx(2.0));
  CHECK_FALSE(det.detect(w, ref, 3.0).has_value());
}

TEST_CASE("detect: randomized shifted and pure-noise windows") {
  const auto s = testing::run_changepoint_suite(1000, 606);
  CHECK(s.agree == s.detected);
  CHECK(s.detection_rate() >= 0.99);
  CHECK(s.false_rate() <= 0.01);
}

TEST_CASE("deviation scores: zero, direct and mixed shifts") {
  const auto b = unit_baseline();
  AfpConfig cfg;
  cfg.deviation_floor = 1.0;

  std::vector<double> same(16 * kDims, 0.0);
  const auto zero = score_deviations(same, 16, b, cfg);
  CHECK(zero.deviated.empty());
  for (double d : zero.delta) CHECK(d == 0.0);

  std::vector<double> two(16 * kDims, 0.0);
  for (std::size_t i = 0; i < 16; ++i) two[i * kDims + 1] = 2.0;
  CHECK(score_deviations(two, 16, b, cfg).delta[1] == 2.0);

  // Shifts of 0.1, 1.5 and 4 baseline stds around unit noise.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<double> shift{0.1, 1.5, 4.0};
  std::vector<double> w(64 * kDims);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < kDims; ++j) w[i * kDims + j] = shift[j] + 0.01 * g(rng);
  const auto sc = score_deviations(w, 64, b, cfg);
  CHECK(sc.deviated == std::vector<std::size_t>{1, 2});
  for (std::size_t j = 0; j < kDims; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < 64; ++i) col.push_back(w[i * kDims + j]);
    CHECK(std::abs(sc.delta[j] - std::abs(moments(col).first)) < 1e-9);
  }
}

TEST_CASE("perturb: identity without deviations, epsilon formula, uniform spread") {
  AfpConfig cfg;
  Rng rng(1);
  const std::vector<double> x{0.3, -7.5, 1e6};
  const std::vector<double> delta{5.0, 5.0, 5.0};
  std::vector<double> out(3);
  perturb(x, delta, {}, cfg, rng, out);
  CHECK(std::memcmp(x.data(), out.data(), sizeof(double) * 3) == 0);

  cfg.epsilon_base = 0.01;
  cfg.alpha = 0.5;
  cfg.epsilon_max = 1.0;
  CHECK(epsilon_for(0.3, cfg) == doctest::Approx(0.16));
  cfg.epsilon_max = 0.1;
  CHECK(epsilon_for(0.3, cfg) == 0.1);

  cfg.epsilon_max = 1.0;
  const std::size_t n = 10000;
  const std::vector<double> d1{0.3};
  const std::vector<std::size_t> dev{0};
  const double eps = epsilon_for(0.3, cfg);
  double max_abs = 0.0, sum_abs = 0.0;
  std::vector<double> one{2.5}, o1(1);
  for (std::size_t i = 0; i < n; ++i) {
    perturb(one, d1, dev, cfg, rng, o1);
    const double a = std::abs(o1[0] - one[0]);
    max_abs = std::max(max_abs, a);
    sum_abs += a;
  }
  CHECK(max_abs <= eps);
  // |U| * eps is uniform on [0, eps]: mean eps/2, std eps/sqrt(12).
  const double se = eps / std::sqrt(12.0) / std::sqrt(double(n));
  CHECK(std::abs(sum_abs / n - eps / 2) <= 3 * se);
}

TEST_CASE("AFP state: a clean stream never triggers and passes flows through") {
  const auto ref = clean_traffic(4096, 10);
  auto b = build_baseline(ref.x, kDims, ref.s, 2048);
  AfpConfig cfg;
  std::vector<double> rt;
  for (const auto& s : ref.s) rt.push_back(s.response_time);
  cfg.theta = calibrate_theta(rt, b, cfg);
  CHECK(cfg.theta >= 4.0);

  AfpState state(b, cfg);
  const auto live = clean_traffic(5000, 11);
  Rng rng(3);
  std::vector<double> out(kDims);
  for (std::size_t i = 0; i < 5000; ++i) {
    const std::span<const double> x(live.x.data() + i * kDims, kDims);
    state.step(x, live.s[i], rng, out);
    CHECK(std::memcmp(x.data(), out.data(), sizeof(double) * kDims) == 0);
  }
  CHECK(state.trigger_count() == 0);
  CHECK(state.coverage() == 0.0);
}

TEST_CASE("AFP state: a 10-sigma side-channel step triggers within one window") {
  const auto ref = clean_traffic(4096, 20);
  const auto b = build_baseline(ref.x, kDims, ref.s, 2048);
  AfpConfig cfg;
  AfpState state(b, cfg);
  const std::size_t n = cfg.window_len, k = 3 * n + 17, total = k + 2 * n;
  auto live = clean_traffic(total, 21);
  for (std::size_t i = k; i < total; ++i) {
    live.s[i].response_time += 10 * b.response_time.std;
    live.x[i * kDims + 2] += 3.0;  // the shifted flows also differ in one feature
  }
  Rng rng(4);
  std::vector<double> out(kDims);
  for (std::size_t i = 0; i < total; ++i) {
    state.step(std::span<const double>(live.x.data() + i * kDims, kDims), live.s[i], rng, out);
  }
  REQUIRE(state.trigger_count() >= 1);
  const auto& first = state.events().front();
  CHECK(first.kind == TriggerKind::onset);
  CHECK(first.flow_index >= k);
  CHECK(first.flow_index < k + n);

  // Offline: the exhaustive split of the full trace lands on the step, and
  // the trigger's t* is the exhaustive split of its own window. An early
  // onset sees fewer than min_segment shifted flows, so t* sits at most
  // min_segment before the step.
  std::vector<double> trace;
  for (const auto& s : live.s) trace.push_back(s.response_time);
  const std::size_t offline = testing::exhaustive_l2_split(trace, cfg.min_segment, total - cfg.min_segment);
  CHECK(offline == k);
  REQUIRE(first.t_star.has_value());
  const std::size_t start = first.flow_index + 1 - n;
  const std::vector<double> window(trace.begin() + start, trace.begin() + start + n);
  CHECK(*first.t_star == testing::exhaustive_l2_split(window, cfg.min_segment, n - cfg.min_segment));
  CHECK(start + *first.t_star <= k);
  CHECK(start + *first.t_star + cfg.min_segment >= k);

  // Once the window is mostly shifted, the held alert names the moved feature.
  const auto& events = state.events();
  CHECK(std::any_of(events.begin(), events.end(),
                    [](const auto& e) { return e.deviated == std::vector<std::size_t>{2}; }));
}

TEST_CASE("AFP state: perturbation bound holds over 1e5 steps") {
  const auto r = testing::run_bound_suite(100000, 77);
  CHECK(r.steps == 100000);
  CHECK(r.triggers > 0);
  CHECK(r.perturbed_steps > 0);
  CHECK(r.violations == 0);
  CHECK(r.identity_checked > 0);
  CHECK(r.identity_violations == 0);
}

TEST_CASE("AFP state: continuous baseline noise touches every feature within eps_base") {
  const auto ref = clean_traffic(4096, 30);
  AfpConfig cfg;
  cfg.continuous_baseline_noise = true;
  AfpState state(build_baseline(ref.x, kDims, ref.s, 2048), cfg);
  Rng rng(5);
  std::vector<double> out(kDims);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 500; ++i) {
    const std::span<const double> x(ref.x.data() + i * kDims, kDims);
    state.step(x, ref.s[i], rng, out);
    for (std::size_t j = 0; j < kDims; ++j) {
      CHECK(std::abs(out[j] - x[j]) <= cfg.epsilon_base);
      changed += out[j] != x[j];
    }
  }
  CHECK(changed > 1400);
}

TEST_CASE("trigger log: one JSON object per event with feature names") {
  const auto ref = clean_traffic(4096, 40);
  AfpConfig cfg;
  AfpState state(build_baseline(ref.x, kDims, ref.s, 2048), cfg);
  auto live = clean_traffic(400, 41);
  for (std::size_t i = 200; i < 400; ++i) {
    live.s[i].response_time += 1.0;
    live.x[i * kDims] -= 5.0;
  }
  Rng rng(6);
  std::vector<double> out(kDims);
  for (std::size_t i = 0; i < 400; ++i)
    state.step(std::span<const double>(live.x.data() + i * kDims, kDims), live.s[i], rng, out);
  REQUIRE(!state.events().empty());
  std::ostringstream log;
  write_trigger_log(log, state.events(), testing::plain_schema(kDims));
  std::istringstream in(log.str());
  std::string line;
  std::size_t lines = 0, onsets = 0, named = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    ++lines;
    onsets += j["kind"] == "onset";
    CHECK(j["deviated_features"].size() == j["epsilons"].size());
    for (const auto& f : j["deviated_features"]) {
      CHECK(f == "f0");
      ++named;
    }
  }
  CHECK(named > 0);
  CHECK(lines == state.events().size());
  CHECK(onsets == state.trigger_count());
}

TEST_CASE("config validation rejects inconsistent settings") {
  AfpConfig cfg;
  cfg.epsilon_base = 0.5;
  cfg.epsilon_max = 0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = AfpConfig{};
  cfg.min_segment = 40;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = AfpConfig{};
  cfg.decay = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
