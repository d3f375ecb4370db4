#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "afp/attacks/attacks.hpp"
#include "afp/error.hpp"

namespace afp::attacks {

namespace {

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

ids::ForestHyper default_surrogate_hyper() {
  ids::ForestHyper h;
  h.n_trees = 30;
  h.max_depth = 12;
  h.min_leaf = 2;
  h.seed = 0x5eed;
  return h;
}

SurrogateModel train_surrogate(const flowdata::Dataset& attacker_data,
                               const ids::ForestHyper& hyper, const std::string& provenance) {
  SurrogateModel s;
  s.model = ids::train_forest(attacker_data, hyper);
  s.provenance = provenance;
  const std::size_t d = attacker_data.dims();
  s.benign_centroid.assign(d, 0.0);
  std::size_t nb = 0;
  for (std::size_t i = 0; i < attacker_data.size(); ++i) {
    if (attacker_data.label(i) != Label::benign) continue;
    const auto row = attacker_data.row(i);
    for (std::size_t f = 0; f < d; ++f) s.benign_centroid[f] += row[f];
    ++nb;
  }
  for (double& c : s.benign_centroid) c /= static_cast<double>(nb);
  return s;
}

CraftResult craft_on_surrogate(const SurrogateModel& surrogate, std::span<const double> x_attack,
                               double step, std::size_t max_steps, std::size_t overshoot) {
  const auto& m = surrogate.model;
  if (m.predict(x_attack) != Label::attack) {
    throw Error(ErrorCategory::precondition, "surrogate already labels the sample benign");
  }
  if (!(step > 0.0)) throw Error(ErrorCategory::config, "craft step must be positive");

  using Key = std::tuple<double, double, double>;
  auto key_of = [&](std::span<const double> x) {
    return Key{m.attack_vote_fraction(x), m.soft_attack_score(x),
               l2(x, surrogate.benign_centroid)};
  };

  CraftResult r;
  r.x_adv.assign(x_attack.begin(), x_attack.end());
  Key current = key_of(r.x_adv);
  std::vector<double> cand = r.x_adv;
  std::size_t extra = 0;
  for (std::size_t it = 0; it < max_steps; ++it) {
    if (m.predict(r.x_adv) == Label::benign) {
      r.success = true;
      if (extra++ >= overshoot) break;
    }
    Key best = current;
    std::size_t best_f = 0;
    double best_delta = 0.0;
    bool found = false;
    for (std::size_t f = 0; f < r.x_adv.size(); ++f) {
      for (double sign : {-1.0, +1.0}) {
        cand = r.x_adv;
        cand[f] += sign * step;
        const Key k = key_of(cand);
        if (k < best) {
          best = k;
          best_f = f;
          best_delta = sign * step;
          found = true;
        }
      }
    }
    if (!found) break;
    r.x_adv[best_f] += best_delta;
    current = best;
    ++r.steps;
    r.vote_trace.push_back(std::get<0>(current));
  }
  r.success = m.predict(r.x_adv) == Label::benign;
  return r;
}

BoundaryResult boundary_attack(MeteredPipeline& pipe, std::span<const double> x_attack,
                               std::span<const double> anchor, const BoundaryConfig& cfg) {
  const std::size_t d = x_attack.size();
  if (anchor.size() != d) throw Error(ErrorCategory::input, "anchor dimension mismatch");
  const std::size_t before = pipe.budget().spent;
  auto ask = [&](std::span<const double> x) -> Label {
    auto r = pipe.query(x);
    if (!r) throw Error(ErrorCategory::precondition, "boundary attack ran out of query budget");
    return r->label;
  };
  if (ask(x_attack) != Label::attack) {
    throw Error(ErrorCategory::precondition, "boundary attack needs an attack-labelled start");
  }
  if (ask(anchor) != Label::benign) {
    throw Error(ErrorCategory::precondition, "boundary attack anchor is not labelled benign");
  }

  BoundaryResult out;
  auto& cs = out.sample;
  cs.original.assign(x_attack.begin(), x_attack.end());
  std::vector<double> x(d);
  auto at = [&](double t) {
    for (std::size_t i = 0; i < d; ++i) x[i] = x_attack[i] + t * (anchor[i] - x_attack[i]);
  };
  double lo = 0.0, hi = 1.0;  // label(lo) attack, label(hi) benign
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    const double mid = lo + (hi - lo) / 2.0;
    at(mid);
    (ask(x) == Label::benign ? hi : lo) = mid;
  }
  at(hi);
  cs.adversarial = x;
  out.bisection_l2 = l2(cs.adversarial, cs.original);

  std::vector<double> cand(d);
  for (std::size_t pass = 0; pass < cfg.shrink_passes; ++pass) {
    for (std::size_t c = 0; c < d; ++c) {
      const double remaining = x_attack[c] - cs.adversarial[c];
      if (remaining == 0.0) continue;
      double frac = 1.0;
      for (std::size_t h = 0; h < cfg.shrink_halvings; ++h, frac /= 2.0) {
        cand = cs.adversarial;
        cand[c] += frac * remaining;
        if (ask(cand) == Label::benign) {
          cs.adversarial = cand;
          break;
        }
      }
    }
  }
  cs.success = ask(cs.adversarial) == Label::benign;
  cs.verified = true;
  cs.l2 = l2(cs.adversarial, cs.original);
  cs.queries = pipe.budget().spent - before;
  return out;
}

std::vector<double> benign_medoid(const flowdata::Dataset& data) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.label(i) == Label::benign) idx.push_back(i);
  }
  if (idx.empty()) throw Error(ErrorCategory::empty_dataset, "no benign records for a medoid");
  std::size_t best = idx[0];
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t a : idx) {
    double sum = 0.0;
    for (std::size_t b : idx) {
      sum += l2(data.row(a), data.row(b));
      if (sum >= best_sum) break;
    }
    if (sum < best_sum) {
      best_sum = sum;
      best = a;
    }
  }
  const auto row = data.row(best);
  return {row.begin(), row.end()};
}

}  // namespace afp::attacks
