// afp: command-line front end for the flow IDS / AFP experiment harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "afp/error.hpp"
#include "afp/flowdata/csv.hpp"
#include "afp/flowdata/synth.hpp"
#include "afp/harness/config.hpp"
#include "afp/harness/experiment.hpp"
#include "afp/harness/report.hpp"
#include "afp/ids/metrics.hpp"
#include "afp/ids/model_io.hpp"
#include "afp/kernels/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace afp;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file");
  cmd->add_option("--set", c.sets, "Override a config key (dotted), e.g. --set afp.theta=5")
      ->take_all();
}

harness::ExperimentConfig resolve(const Common& c) { return harness::load_config(c.config, c.sets); }

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow IDS with adaptive feature poisoning: data, training, attack scenarios, reports"};
  app.require_subcommand(1);

  // synth
  Common synth_c;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic two-class flow corpus as CSV");
  add_common(synth, synth_c);
  synth->add_option("-o,--out", synth_out, "Output CSV")->required();

  // ingest
  Common ingest_c;
  std::string ingest_in, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Validate a flow CSV against the schema and write the clean rows");
  add_common(ingest, ingest_c);
  ingest->add_option("-i,--input", ingest_in, "Input CSV")->required();
  ingest->add_option("-o,--out", ingest_out, "Cleaned CSV");

  // train
  Common train_c;
  std::string train_out;
  bool train_grid = false;
  auto* train = app.add_subcommand("train", "Train the target forest and save it as JSON");
  add_common(train, train_c);
  train->add_option("-o,--out", train_out, "Model JSON")->required();
  train->add_flag("--grid", train_grid, "Pick n_trees/max_depth by a small grid search first");

  // run
  Common run_c;
  std::string run_scenario = "baseline", run_defense = "off", run_out;
  auto* run = app.add_subcommand("run", "Run one scenario with the defense on or off");
  add_common(run, run_c);
  run->add_option("--scenario", run_scenario)
      ->check(CLI::IsMember({"baseline", "probe", "transfer", "boundary"}));
  run->add_option("--defense", run_defense)->check(CLI::IsMember({"on", "off"}));
  run->add_option("-o,--out", run_out, "Run directory (default: <output_dir>/<scenario>_<defense>)");

  // overhead
  Common over_c;
  std::string over_scenario = "probe", over_out;
  std::size_t over_reps = 5;
  bool over_null = false;
  auto* over = app.add_subcommand("overhead", "Median wall time of the prediction pass with and without AFP");
  add_common(over, over_c);
  over->add_option("--scenario", over_scenario)
      ->check(CLI::IsMember({"baseline", "probe", "transfer", "boundary"}));
  over->add_option("--reps", over_reps, "Repetitions (>= 5)");
  over->add_flag("--null", over_null, "Disable AFP in both arms");
  over->add_option("-o,--out", over_out, "Write the result JSON here too");

  // report
  std::vector<std::string> rep_inputs;
  std::string rep_format = "markdown", rep_out = "report";
  bool rep_plots = false;
  auto* report = app.add_subcommand("report", "Combine run reports into JSON/CSV/markdown and charts");
  report->add_option("inputs", rep_inputs, "Run directories or report.json files")->required();
  report->add_option("--format", rep_format)->check(CLI::IsMember({"json", "csv", "markdown"}));
  report->add_flag("--plots", rep_plots, "Also write one SVG bar chart per report");
  report->add_option("-o,--out", rep_out, "Output directory");

  auto* info = app.add_subcommand("info", "Print build id and active kernel ISA");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      const auto cfg = resolve(synth_c);
      auto sc = flowdata::SynthConfig::desk_default(cfg.data.synth_count);
      sc.attack_fraction = cfg.data.synth_attack_fraction;
      const auto data = flowdata::synth_generate(sc, derive_seed(cfg.seed, 0));
      flowdata::write_csv(synth_out, data, cfg.data.label_column);
      print({{"written", synth_out},
             {"flows", data.size()},
             {"attack", data.count(flowdata::Label::attack)},
             {"schema_hash", data.schema().hash()}});
    } else if (*ingest) {
      const auto cfg = resolve(ingest_c);
      const auto schema = cfg.data.features.empty() ? flowdata::FeatureSchema::desk_default()
                                                    : flowdata::FeatureSchema(cfg.data.features);
      const auto res = flowdata::load_csv(ingest_in, schema, cfg.data.label_column);
      if (!ingest_out.empty()) flowdata::write_csv(ingest_out, res.data, cfg.data.label_column);
      print({{"flows", res.data.size()},
             {"dropped", res.dropped},
             {"benign", res.data.count(flowdata::Label::benign)},
             {"attack", res.data.count(flowdata::Label::attack)},
             {"schema_hash", schema.hash()}});
    } else if (*train) {
      auto cfg = resolve(train_c);
      cfg.model_path.clear();
      json out;
      if (train_grid) {
        const auto corpus = harness::load_corpus(cfg);
        auto probe_cfg = cfg;
        probe_cfg.ids.n_trees = 1;  // the grid trains its own forests
        const auto exp = harness::prepare_experiment(probe_cfg, corpus);
        const auto grid = harness::grid_search(exp.target_train, cfg.ids, cfg.seed);
        json g = json::array();
        for (const auto& p : grid) {
          g.push_back({{"n_trees", p.hyper.n_trees},
                       {"max_depth", p.hyper.max_depth},
                       {"validation_accuracy", p.validation_accuracy}});
        }
        out["grid"] = g;
        cfg.ids.n_trees = grid.front().hyper.n_trees;
        cfg.ids.max_depth = grid.front().hyper.max_depth;
      }
      const auto exp = harness::prepare_experiment(cfg);
      ids::save_model(exp.model, train_out);
      const auto m = ids::evaluate(exp.model, exp.test);
      out["written"] = train_out;
      out["hyper"] = ids::hyper_to_json(exp.model.hyper());
      out["test_metrics"] = harness::metrics_to_json(m);
      print(out);
    } else if (*run) {
      const auto cfg = resolve(run_c);
      const auto scenario = harness::scenario_from_string(run_scenario);
      const bool defense = run_defense == "on";
      const auto exp = harness::prepare_experiment(cfg);
      const auto result = harness::run_scenario(cfg, exp, scenario, defense);
      const fs::path dir = run_out.empty()
                               ? fs::path(cfg.output_dir) / (run_scenario + "_" + run_defense)
                               : fs::path(run_out);
      harness::write_run(result, cfg, exp.model.schema(), dir);
      print(harness::report_to_json(result.report));
    } else if (*over) {
      const auto cfg = resolve(over_c);
      const auto exp = harness::prepare_experiment(cfg);
      const auto r = harness::measure_overhead(cfg, exp, harness::scenario_from_string(over_scenario),
                                               over_reps, over_null);
      auto j = harness::overhead_to_json(r);
      j["scenario"] = over_scenario;
      j["afp_disabled_in_both"] = over_null;
      if (!over_out.empty()) {
        std::ofstream f(over_out);
        if (!f) throw Error(ErrorCategory::io, "cannot write " + over_out);
        f << j.dump(2) << '\n';
      }
      print(j);
    } else if (*report) {
      std::vector<harness::ScenarioReport> reports;
      for (const auto& in : rep_inputs) {
        const fs::path p = fs::is_directory(in) ? fs::path(in) / "report.json" : fs::path(in);
        reports.push_back(harness::read_report(p));
      }
      const auto files = harness::emit_report(reports, harness::report_format_from_string(rep_format),
                                              rep_plots, rep_out);
      json written = json::array();
      for (const auto& f : files) written.push_back(f.string());
      print({{"written", written}});
      if (rep_format == "markdown") std::cout << harness::markdown_table(reports);
    } else if (*info) {
      print({{"build_id", harness::build_id()},
             {"kernel_isa", kernels::to_string(kernels::active().isa)}});
    }
  } catch (const Error& e) {
    const json err{{"error", {{"category", to_string(e.category())}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    const json err{{"error", {{"category", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
