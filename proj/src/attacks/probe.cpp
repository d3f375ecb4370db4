#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "afp/attacks/attacks.hpp"
#include "afp/error.hpp"

namespace afp::attacks {

std::optional<QueryResponse> MeteredPipeline::query(std::span<const double> x) {
  if (budget_.exhausted()) return std::nullopt;
  auto r = inner_.query(x);
  if (record_) {
    trace_.push_back({std::vector<double>(x.begin(), x.end()), r.label, r.side, budget_.spent});
  }
  ++budget_.spent;
  return r;
}

void write_probe_trace(std::ostream& out, std::span<const ProbeObservation> trace) {
  for (const auto& o : trace) {
    nlohmann::json j{{"step", o.step},
                     {"label", flowdata::to_int(o.label)},
                     {"response_time", o.side.response_time},
                     {"cpu_cost", o.side.cpu_cost},
                     {"query", o.query}};
    out << j.dump() << '\n';
  }
}

namespace {

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

SilentProbeCampaign::SilentProbeCampaign(ProbeConfig cfg, std::size_t dims)
    : cfg_(cfg), d_(dims), learned_(dims, 0) {
  if (!(cfg_.probe_step > 0.0) || !(cfg_.travel_cap > 0.0) || cfg_.repeats == 0) {
    throw Error(ErrorCategory::config, "probe_step, travel_cap and repeats must be positive");
  }
}

void SilentProbeCampaign::account(const MeteredPipeline& pipe) {
  if (!started_) {
    start_spent_ = pipe.budget().spent;
    started_ = true;
  }
  result_.queries_spent = pipe.budget().spent - start_spent_;
}

void SilentProbeCampaign::infer(MeteredPipeline& pipe,
                                std::span<const std::vector<double>> seeds) {
  if (pipe.budget().remaining() < 2 * d_ * cfg_.repeats) {
    throw Error(ErrorCategory::precondition,
                "probe budget must cover 2*d*repeats inference queries");
  }
  if (seeds.empty()) throw Error(ErrorCategory::precondition, "probing needs seed samples");
  account(pipe);

  std::vector<double> flips_up(d_, 0.0), flips_down(d_, 0.0);
  std::vector<double> drt_up(d_, 0.0), drt_down(d_, 0.0), abs_drt(d_, 0.0);
  std::size_t probes = 0;
  const std::size_t used = std::min(cfg_.repeats, seeds.size());
  std::vector<double> x(d_);
  for (std::size_t r = 0; r < used; ++r) {
    const auto& seed = seeds[r];
    const auto base = pipe.query(seed);
    if (!base) {
      result_.partial = true;
      break;
    }
    bool out_of_budget = false;
    for (std::size_t f = 0; f < d_ && !out_of_budget; ++f) {
      for (int sign : {+1, -1}) {
        std::copy(seed.begin(), seed.end(), x.begin());
        x[f] += sign * cfg_.probe_step;
        const auto resp = pipe.query(x);
        if (!resp) {
          out_of_budget = true;
          break;
        }
        const double flip = resp->label != base->label ? 1.0 : 0.0;
        const double drt = resp->side.response_time - base->side.response_time;
        (sign > 0 ? flips_up : flips_down)[f] += flip;
        (sign > 0 ? drt_up : drt_down)[f] += drt;
        abs_drt[f] += std::abs(drt);
      }
    }
    ++probes;
    if (out_of_budget) {
      result_.partial = true;
      break;
    }
  }
  account(pipe);

  const double denom = std::max<double>(1.0, 2.0 * static_cast<double>(probes));
  result_.ranking.clear();
  for (std::size_t f = 0; f < d_; ++f) {
    FeatureSensitivity s;
    s.feature = f;
    s.flip_rate = (flips_up[f] + flips_down[f]) / denom;
    s.side_delta = abs_drt[f] / denom;
    if (flips_up[f] != flips_down[f]) {
      s.direction = flips_up[f] > flips_down[f] ? +1 : -1;
    } else {
      // No label evidence either way: head where the work goes up, i.e.
      // deeper into the contested region.
      s.direction = drt_up[f] >= drt_down[f] ? +1 : -1;
    }
    result_.ranking.push_back(s);
  }
  std::stable_sort(result_.ranking.begin(), result_.ranking.end(),
                   [](const FeatureSensitivity& a, const FeatureSensitivity& b) {
                     if (a.flip_rate != b.flip_rate) return a.flip_rate > b.flip_rate;
                     if (a.side_delta != b.side_delta) return a.side_delta > b.side_delta;
                     return a.feature < b.feature;
                   });
}

const CraftedSample& SilentProbeCampaign::evade(MeteredPipeline& pipe,
                                                std::span<const double> seed) {
  if (!inferred()) throw Error(ErrorCategory::precondition, "evade() before infer()");
  account(pipe);
  const std::size_t before = pipe.budget().spent;
  CraftedSample cs;
  cs.original.assign(seed.begin(), seed.end());
  cs.adversarial = cs.original;
  cs.original_label = Label::attack;

  bool flipped = false;
  bool exhausted = false;
  if (auto r = pipe.query(cs.adversarial)) {
    flipped = r->label == Label::benign;
  } else {
    exhausted = true;
  }
  const std::size_t k = std::min(cfg_.top_k, result_.ranking.size());
  const auto max_moves = static_cast<std::size_t>(std::floor(cfg_.travel_cap / cfg_.probe_step + 1e-9));
  // Walks feature f from its current value; returns the mean response time
  // seen on the way (or -inf when nothing was answered).
  auto walk = [&](std::size_t f, int dir) {
    double rt = 0.0;
    std::size_t n = 0;
    for (std::size_t m = 0; m < max_moves; ++m) {
      cs.adversarial[f] += dir * cfg_.probe_step;
      const auto r = pipe.query(cs.adversarial);
      if (!r) {
        exhausted = true;
        break;
      }
      rt += r->side.response_time;
      ++n;
      if (r->label == Label::benign) {
        flipped = true;
        break;
      }
    }
    return n ? rt / static_cast<double>(n) : -HUGE_VAL;
  };
  for (std::size_t j = 0; j < k && !flipped && !exhausted; ++j) {
    const std::size_t f = result_.ranking[j].feature;
    const bool known = learned_[f] != 0;
    const int dir = known ? (learned_[f] > 0 ? +1 : -1) : result_.ranking[j].direction;
    const double start = cs.adversarial[f];
    const double rt_fwd = walk(f, dir);
    if (flipped || exhausted || known) continue;
    const double end_fwd = cs.adversarial[f];
    cs.adversarial[f] = start;
    const double rt_back = walk(f, -dir);
    if (flipped || exhausted) continue;
    if (rt_fwd > rt_back) cs.adversarial[f] = end_fwd;
  }
  if (!exhausted) {
    // The walk's last answer is not trusted on its own: one verifying query.
    if (auto v = pipe.query(cs.adversarial)) {
      cs.success = v->label == Label::benign;
      cs.verified = true;
    } else {
      exhausted = true;
    }
  }
  if (exhausted) result_.partial = true;
  cs.l2 = l2(cs.adversarial, cs.original);
  cs.queries = pipe.budget().spent - before;
  if (cs.success) {
    ++result_.evasion_success_count;
    for (std::size_t f = 0; f < d_; ++f) {
      if (cs.adversarial[f] > cs.original[f]) ++learned_[f];
      if (cs.adversarial[f] < cs.original[f]) --learned_[f];
    }
  }
  result_.samples.push_back(std::move(cs));
  account(pipe);
  return result_.samples.back();
}

AttackResult silent_probe_campaign(MeteredPipeline& pipe,
                                   std::span<const std::vector<double>> seeds,
                                   const ProbeConfig& cfg, Rng& rng) {
  SilentProbeCampaign campaign(cfg, pipe.dims());
  std::vector<std::size_t> order(seeds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<double>> inference;
  for (std::size_t i = 0; i < std::min(cfg.repeats, order.size()); ++i) {
    inference.push_back(seeds[order[i]]);
  }
  campaign.infer(pipe, inference);
  for (const auto& seed : seeds) {
    if (pipe.budget().exhausted()) {
      auto res = campaign.take_result();
      res.partial = true;
      return res;
    }
    campaign.evade(pipe, seed);
  }
  return campaign.take_result();
}

double spearman_rank_correlation(const std::vector<FeatureSensitivity>& a,
                                 const std::vector<FeatureSensitivity>& b) {
  const std::size_t d = a.size();
  if (d != b.size() || d < 2) return 1.0;
  std::vector<double> ra(d), rb(d);
  for (std::size_t r = 0; r < d; ++r) {
    ra[a[r].feature] = static_cast<double>(r);
    rb[b[r].feature] = static_cast<double>(r);
  }
  double s = 0.0;
  for (std::size_t f = 0; f < d; ++f) s += (ra[f] - rb[f]) * (ra[f] - rb[f]);
  const double n = static_cast<double>(d);
  return 1.0 - 6.0 * s / (n * (n * n - 1.0));
}

}  // namespace afp::attacks
