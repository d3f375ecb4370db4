#include "afp/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "afp/attacks/attacks.hpp"
#include "afp/error.hpp"
#include "afp/flowdata/csv.hpp"
#include "afp/flowdata/synth.hpp"
#include "afp/ids/model_io.hpp"

#ifndef AFP_BUILD_ID
#define AFP_BUILD_ID "unknown"
#endif

namespace afp::harness {

using flowdata::Dataset;
using flowdata::Label;

// Stream ids for derive_seed(cfg.seed, ...). Fixed so reports stay comparable.
namespace seeds {
constexpr std::uint64_t corpus = 0, test_split = 1, attacker_split = 2, target = 3,
                        replay = 10, deploy = 11, afp = 12, probe = 13;
}

std::string build_id() { return AFP_BUILD_ID; }

Dataset load_corpus(const ExperimentConfig& cfg) {
  if (cfg.data.source == "csv") {
    flowdata::FeatureSchema schema = cfg.data.features.empty()
                                         ? flowdata::FeatureSchema::desk_default()
                                         : flowdata::FeatureSchema(cfg.data.features);
    return flowdata::load_csv(cfg.data.csv_path, schema, cfg.data.label_column).data;
  }
  auto sc = flowdata::SynthConfig::desk_default(cfg.data.synth_count);
  sc.attack_fraction = cfg.data.synth_attack_fraction;
  return flowdata::synth_generate(sc, derive_seed(cfg.seed, seeds::corpus));
}

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  return prepare_experiment(cfg, load_corpus(cfg));
}

Experiment prepare_experiment(const ExperimentConfig& cfg, const Dataset& corpus) {
  auto outer = flowdata::stratified_split(corpus, cfg.split.test_fraction,
                                          derive_seed(cfg.seed, seeds::test_split));
  auto [train_std, scaling] = flowdata::standardize(outer.train);
  Experiment e;
  e.test = flowdata::standardize(outer.test, scaling).first;
  e.scaling = std::move(scaling);
  auto inner = flowdata::stratified_split(train_std, cfg.split.attacker_fraction,
                                          derive_seed(cfg.seed, seeds::attacker_split));
  e.target_train = std::move(inner.train);
  e.attacker_pool = std::move(inner.test);
  if (!cfg.model_path.empty()) {
    e.model = ids::load_model(cfg.model_path);
    if (e.model.schema().hash() != corpus.schema().hash()) {
      throw Error(ErrorCategory::schema, "loaded model schema does not match the corpus");
    }
  } else {
    auto hyper = cfg.ids;
    hyper.seed = derive_seed(cfg.seed, seeds::target + hyper.seed);
    e.model = ids::train_forest(e.target_train, hyper);
  }
  return e;
}

// ------------------------------------------------------------------ pipeline

DefendedIds::DefendedIds(const ids::ClassifierModel& model,
                         const sidechannel::SideChannelConfig& sc, std::uint64_t seed,
                         std::optional<defense::AfpState> afp)
    : model_(model),
      stream_(sc, seed),
      afp_(std::move(afp)),
      afp_rng_(derive_seed(seed, seeds::afp)),
      scratch_(model.dims()) {}

DefendedIds::Outcome DefendedIds::process(std::span<const double> x) {
  ++flows_;
  if (!afp_) {
    const auto obs = stream_.observe(model_, x);
    return {obs.label, obs.sample, false};
  }
  // One classification per flow, on what AFP hands the classifier.
  const bool perturbed = afp_->apply(x, afp_rng_, scratch_);
  const auto obs = stream_.observe(model_, scratch_);
  afp_->observe(x, obs.sample);
  return {obs.label, obs.sample, perturbed};
}

DefenseSetup prepare_defense(const ExperimentConfig& cfg, const Experiment& exp) {
  const auto& train = exp.target_train;
  const std::size_t d = train.dims();
  sidechannel::SideChannelStream replay(cfg.sidechannel, derive_seed(cfg.seed, seeds::replay));
  std::vector<sidechannel::SideChannelSample> s;
  std::vector<double> rt;
  std::vector<double> benign_x;
  s.reserve(train.size());
  rt.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto obs = replay.observe(exp.model, train.row(i));
    s.push_back(obs.sample);
    rt.push_back(obs.sample.response_time);
    if (train.label(i) == Label::benign) {
      const auto r = train.row(i);
      benign_x.insert(benign_x.end(), r.begin(), r.end());
    }
  }
  DefenseSetup out;
  out.afp = cfg.afp;
  out.baseline = defense::build_baseline(benign_x, d, s, cfg.calibration.baseline_len);
  if (cfg.calibration.enabled) {
    out.afp.theta = defense::calibrate_theta(rt, out.baseline, cfg.afp,
                                             cfg.calibration.target_rate, cfg.calibration.margin);
  }
  return out;
}

// ------------------------------------------------------------------ scenarios

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::probe: return "probe";
    case Scenario::transfer: return "transfer";
    case Scenario::boundary: return "boundary";
  }
  return "baseline";
}

Scenario scenario_from_string(std::string_view s) {
  if (s == "baseline") return Scenario::baseline;
  if (s == "probe") return Scenario::probe;
  if (s == "transfer") return Scenario::transfer;
  if (s == "boundary") return Scenario::boundary;
  throw Error(ErrorCategory::config, "unknown scenario '" + std::string(s) + "'");
}

namespace {

// Harness-side view of the deployed pipeline: records every input and can
// slip clean replay flows in ahead of each attacker query.
class StreamPipeline final : public attacks::BlackBoxPipeline {
 public:
  StreamPipeline(DefendedIds& ids, std::vector<std::vector<double>>& deployed)
      : ids_(ids), deployed_(deployed) {}

  void set_background(const Dataset* bg, std::size_t per_query) {
    bg_ = bg;
    per_query_ = per_query;
  }

  DefendedIds::Outcome deploy(std::span<const double> x) {
    deployed_.emplace_back(x.begin(), x.end());
    return ids_.process(x);
  }

  attacks::QueryResponse query(std::span<const double> x) override {
    if (bg_ && !bg_->empty()) {
      for (std::size_t k = 0; k < per_query_; ++k) {
        deploy(bg_->row(cursor_++ % bg_->size()));
      }
    }
    const auto o = deploy(x);
    return {o.label, o.side};
  }
  std::size_t dims() const override { return ids_.dims(); }

 private:
  DefendedIds& ids_;
  std::vector<std::vector<double>>& deployed_;
  const Dataset* bg_ = nullptr;
  std::size_t per_query_ = 0;
  std::size_t cursor_ = 0;
};

std::vector<double> to_vec(std::span<const double> r) { return {r.begin(), r.end()}; }

// Attack inputs shared by both arms (computed once, defense independent).
struct Prepared {
  std::vector<std::size_t> attack_rows;                    // test indices of attack flows
  std::vector<std::optional<std::vector<double>>> crafted; // transfer: per attack row
  std::vector<double> anchor;                              // boundary
};

Prepared prepare_attacks(const ExperimentConfig& cfg, const Experiment& exp, Scenario sc) {
  Prepared p;
  for (std::size_t i = 0; i < exp.test.size(); ++i) {
    if (exp.test.label(i) == Label::attack) p.attack_rows.push_back(i);
  }
  if (sc == Scenario::transfer) {
    auto hyper = cfg.transfer.surrogate;
    hyper.seed = derive_seed(cfg.seed, seeds::probe + hyper.seed);
    const auto surrogate = attacks::train_surrogate(exp.attacker_pool, hyper);
    p.crafted.resize(p.attack_rows.size());
    for (std::size_t k = 0; k < p.attack_rows.size(); ++k) {
      const auto x = exp.test.row(p.attack_rows[k]);
      if (surrogate.model.predict(x) != Label::attack) continue;  // nothing to do
      p.crafted[k] = attacks::craft_on_surrogate(surrogate, x, cfg.transfer.step,
                                                 cfg.transfer.max_steps, cfg.transfer.overshoot)
                         .x_adv;
    }
  }
  if (sc == Scenario::boundary) p.anchor = attacks::benign_medoid(exp.attacker_pool);
  return p;
}

AttackStats stats_from(const std::vector<attacks::CraftedSample>& samples, std::size_t queries,
                       bool partial) {
  AttackStats a;
  a.crafted = samples.size();
  a.queries_spent = queries;
  a.partial = partial;
  double l2 = 0.0;
  for (const auto& s : samples) {
    if (s.success) ++a.evasion_success_count;
    l2 += s.l2;
  }
  if (!samples.empty()) {
    a.evasion_rate = static_cast<double>(a.evasion_success_count) / static_cast<double>(samples.size());
    a.mean_l2 = l2 / static_cast<double>(samples.size());
  }
  return a;
}

ArmResult run_arm(const ExperimentConfig& cfg, const Experiment& exp, Scenario sc,
                  const Prepared& prep, const DefenseSetup* defense) {
  std::optional<defense::AfpState> afp;
  if (defense) afp.emplace(defense->baseline, defense->afp);
  DefendedIds ids(exp.model, cfg.sidechannel, derive_seed(cfg.seed, seeds::deploy), std::move(afp));
  ArmResult arm;
  StreamPipeline pipe(ids, arm.deployed);
  const auto& test = exp.test;

  auto count = [&](std::uint64_t idx, Label truth, Label predicted) {
    arm.predictions.push_back({idx, truth, predicted});
  };

  switch (sc) {
    case Scenario::baseline: {
      for (std::size_t i = 0; i < test.size(); ++i) {
        count(i, test.label(i), pipe.deploy(test.row(i)).label);
      }
      break;
    }
    case Scenario::probe: {
      attacks::MeteredPipeline metered(pipe, {cfg.probe.budget, 0}, false);
      attacks::SilentProbeCampaign campaign(cfg.probe.probe, test.dims());
      std::vector<std::vector<double>> inference;
      for (std::size_t k = 0; k < std::min(cfg.probe.probe.repeats, prep.attack_rows.size()); ++k) {
        inference.push_back(to_vec(test.row(prep.attack_rows[k])));
      }
      campaign.infer(metered, inference);
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.label(i) == Label::benign) {
          count(i, Label::benign, pipe.deploy(test.row(i)).label);
          continue;
        }
        if (metered.budget().exhausted()) {
          count(i, Label::attack, pipe.deploy(test.row(i)).label);
          continue;
        }
        const auto& cs = campaign.evade(metered, test.row(i));
        const Label verdict = cs.verified ? (cs.success ? Label::benign : Label::attack)
                                          : pipe.deploy(cs.adversarial).label;
        count(i, Label::attack, verdict);
      }
      const auto& res = campaign.result();
      auto st = stats_from(res.samples, metered.budget().spent, res.partial);
      st.ranking = res.ranking;
      arm.attack = st;
      break;
    }
    case Scenario::transfer: {
      attacks::MeteredPipeline metered(pipe, {prep.attack_rows.size(), 0}, false);
      std::vector<attacks::CraftedSample> samples;
      std::size_t k = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.label(i) == Label::benign) {
          count(i, Label::benign, pipe.deploy(test.row(i)).label);
          continue;
        }
        attacks::CraftedSample cs;
        cs.original = to_vec(test.row(i));
        cs.adversarial = prep.crafted[k] ? *prep.crafted[k] : cs.original;
        ++k;
        const auto r = metered.query(cs.adversarial);
        cs.verified = true;
        cs.success = r->label == Label::benign;
        cs.queries = 1;
        double l2 = 0.0;
        for (std::size_t f = 0; f < cs.original.size(); ++f) {
          l2 += (cs.adversarial[f] - cs.original[f]) * (cs.adversarial[f] - cs.original[f]);
        }
        cs.l2 = std::sqrt(l2);
        count(i, Label::attack, r->label);
        samples.push_back(std::move(cs));
      }
      arm.attack = stats_from(samples, metered.budget().spent, false);
      break;
    }
    case Scenario::boundary: {
      pipe.set_background(&test, cfg.boundary.background_per_query);
      std::vector<attacks::CraftedSample> samples;
      std::size_t spent = 0;
      const std::size_t n = std::min(cfg.boundary.samples, prep.attack_rows.size());
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = prep.attack_rows[k];
        attacks::MeteredPipeline metered(pipe, {cfg.boundary.budget_per_sample, 0}, false);
        attacks::CraftedSample cs;
        try {
          cs = attacks::boundary_attack(metered, test.row(i), prep.anchor, cfg.boundary.search).sample;
        } catch (const Error& e) {
          if (e.category() != ErrorCategory::precondition) throw;
          // The search could not start (the flow already passes, or the
          // anchor was refused); the attacker sends the flow unchanged.
          cs.original = to_vec(test.row(i));
          cs.adversarial = cs.original;
          if (const auto r = metered.query(cs.adversarial)) {
            cs.verified = true;
            cs.success = r->label == Label::benign;
          } else {
            cs.success = pipe.deploy(cs.adversarial).label == Label::benign;
          }
        }
        spent += metered.budget().spent;
        count(i, Label::attack, cs.success ? Label::benign : Label::attack);
        samples.push_back(std::move(cs));
      }
      arm.attack = stats_from(samples, spent, false);
      break;
    }
  }

  std::vector<Label> truth, pred;
  for (const auto& p : arm.predictions) {
    truth.push_back(p.truth);
    pred.push_back(p.predicted);
  }
  arm.metrics = ids::metrics_from_predictions(truth, pred);
  arm.flows_processed = ids.flows();
  if (const auto* st = ids.afp()) {
    arm.trigger_count = st->trigger_count();
    arm.coverage = st->coverage();
    arm.triggers = st->events();
  }
  return arm;
}

}  // namespace

ScenarioRun run_scenario(const ExperimentConfig& cfg, const Experiment& exp, Scenario scenario,
                         bool defense) {
  // Resolve everything that can fail on configuration before the long part.
  std::optional<DefenseSetup> setup;
  if (defense) setup = prepare_defense(cfg, exp);
  const auto prep = prepare_attacks(cfg, exp, scenario);

  using clock = std::chrono::steady_clock;
  ScenarioRun run;
  const auto t0 = clock::now();
  run.off = run_arm(cfg, exp, scenario, prep, nullptr);
  const auto t1 = clock::now();
  if (setup) run.on = run_arm(cfg, exp, scenario, prep, &*setup);
  const auto t2 = clock::now();

  auto& r = run.report;
  r.scenario = scenario;
  r.defense = defense;
  r.seed = cfg.seed;
  r.build_id = build_id();
  r.schema_hash = exp.model.schema().hash();
  r.metrics_before = run.off.metrics;
  r.attack_before = run.off.attack;
  r.flows_processed = run.off.flows_processed;
  if (run.on) {
    r.theta = setup->afp.theta;
    r.metrics_after = run.on->metrics;
    r.coverage = run.on->coverage;
    r.trigger_count = run.on->trigger_count;
    r.attack_after = run.on->attack;
  }
  if (cfg.include_timing) {
    const double off_s = std::chrono::duration<double>(t1 - t0).count();
    nlohmann::json t{{"off_arm_s", off_s},
                     {"off_per_flow_us", 1e6 * off_s / static_cast<double>(run.off.flows_processed)}};
    if (run.on) {
      const double on_s = std::chrono::duration<double>(t2 - t1).count();
      t["on_arm_s"] = on_s;
      t["on_per_flow_us"] = 1e6 * on_s / static_cast<double>(run.on->flows_processed);
    }
    r.timing = t;
  }
  return run;
}

// ------------------------------------------------------------------ overhead

OverheadResult measure_overhead(const ExperimentConfig& cfg, const Experiment& exp,
                                Scenario scenario, std::size_t repetitions,
                                bool afp_in_both_disabled) {
  if (repetitions < 5) throw Error(ErrorCategory::config, "overhead needs at least 5 repetitions");
  const auto setup = prepare_defense(cfg, exp);
  const auto prep = prepare_attacks(cfg, exp, scenario);
  // The defended arm's input stream, attacker queries included.
  const auto stream = run_arm(cfg, exp, scenario, prep, &setup).deployed;

  using clock = std::chrono::steady_clock;
  auto pass = [&](bool with_afp) {
    std::optional<defense::AfpState> afp;
    if (with_afp) afp.emplace(setup.baseline, setup.afp);
    DefendedIds ids(exp.model, cfg.sidechannel, derive_seed(cfg.seed, seeds::deploy), std::move(afp));
    std::size_t sink = 0;
    const auto t0 = clock::now();
    for (const auto& x : stream) sink += flowdata::to_int(ids.process(x).label);
    const auto t1 = clock::now();
    volatile std::size_t keep = sink;
    (void)keep;
    return std::chrono::duration<double>(t1 - t0).count();
  };

  OverheadResult out;
  out.repetitions = repetitions;
  out.flows = stream.size();
  std::vector<double> base, with;
  pass(false);  // warm caches once, untimed
  for (std::size_t r = 0; r < repetitions; ++r) {
    // Alternate which arm goes first so drift in machine load hits both.
    double b, a;
    if (r % 2 == 0) {
      b = pass(false);
      a = pass(!afp_in_both_disabled);
    } else {
      a = pass(!afp_in_both_disabled);
      b = pass(false);
    }
    base.push_back(b);
    with.push_back(a);
    out.per_rep_overhead_pct.push_back(100.0 * (a - b) / b);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  out.median_base_s = median(base);
  out.median_afp_s = median(with);
  const double flows = static_cast<double>(std::max<std::size_t>(1, out.flows));
  out.median_per_flow_base_us = 1e6 * out.median_base_s / flows;
  out.median_per_flow_afp_us = 1e6 * out.median_afp_s / flows;
  out.overhead_pct = 100.0 * (out.median_afp_s - out.median_base_s) / out.median_base_s;
  const auto [lo, hi] = std::minmax_element(out.per_rep_overhead_pct.begin(),
                                            out.per_rep_overhead_pct.end());
  out.spread_pct = *hi - *lo;
  return out;
}

nlohmann::json overhead_to_json(const OverheadResult& r) {
  return nlohmann::json{{"repetitions", r.repetitions},
                        {"flows", r.flows},
                        {"median_base_s", r.median_base_s},
                        {"median_afp_s", r.median_afp_s},
                        {"median_per_flow_base_us", r.median_per_flow_base_us},
                        {"median_per_flow_afp_us", r.median_per_flow_afp_us},
                        {"overhead_pct", r.overhead_pct},
                        {"spread_pct", r.spread_pct},
                        {"per_rep_overhead_pct", r.per_rep_overhead_pct}};
}

// ------------------------------------------------------------------ grid

std::vector<GridPoint> grid_search(const Dataset& train, const ids::ForestHyper& base,
                                   std::uint64_t seed) {
  const auto split = flowdata::stratified_split(train, 0.2, derive_seed(seed, 20));
  std::vector<GridPoint> out;
  for (std::size_t trees : {50u, 100u}) {
    for (std::size_t depth : {8u, 16u}) {
      auto h = base;
      h.n_trees = trees;
      h.max_depth = depth;
      const auto m = ids::train_forest(split.train, h);
      out.push_back({h, ids::evaluate(m, split.test).accuracy});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const GridPoint& a, const GridPoint& b) {
    return a.validation_accuracy > b.validation_accuracy;
  });
  return out;
}

}  // namespace afp::harness
