#include "afp/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "afp/error.hpp"
#include "afp/flowdata/csv.hpp"

namespace afp::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json rates_to_json(const ids::ClassRates& r) {
  return json{{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
}

ids::ClassRates rates_from_json(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

json attack_to_json(const AttackStats& a) {
  json ranking = json::array();
  for (const auto& s : a.ranking) {
    ranking.push_back({{"feature", s.feature},
                       {"flip_rate", s.flip_rate},
                       {"side_delta", s.side_delta},
                       {"direction", s.direction}});
  }
  return json{{"crafted", a.crafted},
              {"evasion_success_count", a.evasion_success_count},
              {"evasion_rate", a.evasion_rate},
              {"queries_spent", a.queries_spent},
              {"mean_l2", a.mean_l2},
              {"partial", a.partial},
              {"ranking", ranking}};
}

AttackStats attack_from_json(const json& j) {
  AttackStats a;
  a.crafted = j.at("crafted");
  a.evasion_success_count = j.at("evasion_success_count");
  a.evasion_rate = j.at("evasion_rate");
  a.queries_spent = j.at("queries_spent");
  a.mean_l2 = j.at("mean_l2");
  a.partial = j.at("partial");
  for (const auto& s : j.at("ranking")) {
    a.ranking.push_back({s.at("feature"), s.at("flip_rate"), s.at("side_delta"), s.at("direction")});
  }
  return a;
}

template <class T, class F>
json opt_json(const std::optional<T>& v, F f) {
  return v ? f(*v) : json(nullptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_predictions(const fs::path& path, const std::vector<FlowPrediction>& preds) {
  std::string s = "stream_index,truth,predicted\n";
  for (const auto& p : preds) {
    s += std::to_string(p.stream_index);
    s += ',';
    s += flowdata::to_string(p.truth);
    s += ',';
    s += flowdata::to_string(p.predicted);
    s += '\n';
  }
  write_text(path, s);
}

}  // namespace

json metrics_to_json(const ids::Metrics& m) {
  return json{{"accuracy", m.accuracy},
              {"support", m.support},
              {"confusion",
               {{"tp", m.confusion.tp}, {"tn", m.confusion.tn}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}}},
              {"benign", rates_to_json(m.benign)},
              {"attack", rates_to_json(m.attack)}};
}

ids::Metrics metrics_from_json(const json& j) {
  ids::Metrics m;
  m.accuracy = j.at("accuracy");
  m.support = j.at("support");
  const auto& c = j.at("confusion");
  m.confusion = {c.at("tp"), c.at("tn"), c.at("fp"), c.at("fn")};
  m.benign = rates_from_json(j.at("benign"));
  m.attack = rates_from_json(j.at("attack"));
  return m;
}

json report_to_json(const ScenarioReport& r) {
  json j{{"scenario", to_string(r.scenario)},
         {"defense", r.defense ? "on" : "off"},
         {"seed", r.seed},
         {"build_id", r.build_id},
         {"schema_hash", r.schema_hash},
         {"theta", r.defense ? json(r.theta) : json(nullptr)},
         {"metrics_before", metrics_to_json(r.metrics_before)},
         {"metrics_after", opt_json(r.metrics_after, metrics_to_json)},
         {"coverage", opt_json(r.coverage, [](double v) { return json(v); })},
         {"trigger_count", opt_json(r.trigger_count, [](std::uint64_t v) { return json(v); })},
         {"flows_processed", r.flows_processed},
         {"attack_before", opt_json(r.attack_before, attack_to_json)},
         {"attack_after", opt_json(r.attack_after, attack_to_json)}};
  if (r.timing) j["timing"] = *r.timing;
  return j;
}

ScenarioReport report_from_json(const json& j) {
  try {
    ScenarioReport r;
    r.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    r.defense = j.at("defense").get<std::string>() == "on";
    r.seed = j.at("seed");
    r.build_id = j.at("build_id");
    r.schema_hash = j.at("schema_hash");
    if (!j.at("theta").is_null()) r.theta = j.at("theta");
    r.metrics_before = metrics_from_json(j.at("metrics_before"));
    if (!j.at("metrics_after").is_null()) r.metrics_after = metrics_from_json(j.at("metrics_after"));
    if (!j.at("coverage").is_null()) r.coverage = j.at("coverage").get<double>();
    if (!j.at("trigger_count").is_null()) r.trigger_count = j.at("trigger_count").get<std::uint64_t>();
    r.flows_processed = j.at("flows_processed");
    if (!j.at("attack_before").is_null()) r.attack_before = attack_from_json(j.at("attack_before"));
    if (!j.at("attack_after").is_null()) r.attack_after = attack_from_json(j.at("attack_after"));
    if (j.contains("timing")) r.timing = j.at("timing");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::schema, std::string("malformed report: ") + e.what());
  }
}

void write_run(const ScenarioRun& run, const ExperimentConfig& cfg,
               const flowdata::FeatureSchema& schema, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", report_to_json(run.report).dump(2) + "\n");
  json resolved{{"config", to_json(cfg)}, {"seed", cfg.seed}, {"build_id", build_id()}};
  write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");
  write_predictions(dir / "predictions_before.csv", run.off.predictions);
  if (run.on) {
    write_predictions(dir / "predictions_after.csv", run.on->predictions);
    std::ostringstream log;
    defense::write_trigger_log(log, run.on->triggers, schema);
    write_text(dir / "triggers.jsonl", log.str());
  }
}

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw Error(ErrorCategory::config, "unknown report format '" + std::string(s) + "'");
}

std::string markdown_table(const std::vector<ScenarioReport>& reports) {
  std::string s = "| scenario | acc_before | acc_after | attack_recall_after |\n";
  s += "|---|---|---|---|\n";
  for (const auto& r : reports) {
    s += "| " + std::string(to_string(r.scenario)) + " | " + fmt(r.metrics_before.accuracy) + " | ";
    s += (r.metrics_after ? fmt(r.metrics_after->accuracy) : std::string("-")) + " | ";
    s += (r.metrics_after ? fmt(r.metrics_after->attack.recall) : std::string("-")) + " |\n";
  }
  return s;
}

std::string csv_table(const std::vector<ScenarioReport>& reports) {
  std::string s =
      "scenario,defense,seed,acc_before,acc_after,attack_recall_before,attack_recall_after,"
      "benign_recall_before,benign_recall_after,coverage,trigger_count\n";
  auto num = [](double v) { return fmt(v, "%.17g"); };
  for (const auto& r : reports) {
    const auto& b = r.metrics_before;
    s += std::string(to_string(r.scenario)) + "," + (r.defense ? "on" : "off") + "," +
         std::to_string(r.seed) + "," + num(b.accuracy) + ",";
    s += (r.metrics_after ? num(r.metrics_after->accuracy) : "") + ",";
    s += num(b.attack.recall) + ",";
    s += (r.metrics_after ? num(r.metrics_after->attack.recall) : "") + ",";
    s += num(b.benign.recall) + ",";
    s += (r.metrics_after ? num(r.metrics_after->benign.recall) : "") + ",";
    s += (r.coverage ? num(*r.coverage) : "") + ",";
    s += (r.trigger_count ? std::to_string(*r.trigger_count) : "") + "\n";
  }
  return s;
}

std::string bar_chart_svg(const ScenarioReport& r) {
  struct Bar {
    const char* label;
    double value;
    const char* colour;
  };
  std::vector<Bar> bars{{"accuracy (off)", r.metrics_before.accuracy, "#8c8c8c"},
                        {"attack recall (off)", r.metrics_before.attack.recall, "#bdbdbd"}};
  if (r.metrics_after) {
    bars.push_back({"accuracy (AFP)", r.metrics_after->accuracy, "#2b6cb0"});
    bars.push_back({"attack recall (AFP)", r.metrics_after->attack.recall, "#63b3ed"});
  }
  const int w = 120, gap = 30, left = 50, top = 40, h = 220;
  const int width = left + static_cast<int>(bars.size()) * (w + gap) + gap;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + h + 60
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << to_string(r.scenario)
    << " scenario</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + h << "\" x2=\"" << width << "\" y2=\"" << top + h
    << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const int y = top + h - tick * h / 4;
    o << "<text x=\"" << left - 30 << "\" y=\"" << y + 4 << "\">" << fmt(tick * 0.25, "%.2f") << "</text>\n";
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const int x = left + gap + static_cast<int>(i) * (w + gap);
    const int bh = static_cast<int>(bars[i].value * h + 0.5);
    o << "<rect x=\"" << x << "\" y=\"" << top + h - bh << "\" width=\"" << w << "\" height=\"" << bh
      << "\" fill=\"" << bars[i].colour << "\"/>\n";
    o << "<text x=\"" << x + w / 2 << "\" y=\"" << top + h - bh - 4 << "\" text-anchor=\"middle\">"
      << fmt(bars[i].value, "%.3f") << "</text>\n";
    o << "<text x=\"" << x + w / 2 << "\" y=\"" << top + h + 18 << "\" text-anchor=\"middle\">"
      << bars[i].label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<fs::path> emit_report(const std::vector<ScenarioReport>& reports, ReportFormat format,
                                  bool plots, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  written.push_back(dir / "summary.json");
  write_text(written.back(), arr.dump(2) + "\n");
  if (format == ReportFormat::csv) {
    written.push_back(dir / "summary.csv");
    write_text(written.back(), csv_table(reports));
  } else if (format == ReportFormat::markdown) {
    written.push_back(dir / "summary.md");
    write_text(written.back(), markdown_table(reports));
  }
  if (plots) {
    for (const auto& r : reports) {
      written.push_back(dir / (std::string(to_string(r.scenario)) + "_" + (r.defense ? "on" : "off") + ".svg"));
      write_text(written.back(), bar_chart_svg(r));
    }
  }
  return written;
}

std::vector<FlowPrediction> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::vector<FlowPrediction> out;
  std::string line;
  std::getline(in, line);  // header
  auto label = [&](const std::string& s) {
    if (s == "Benign") return flowdata::Label::benign;
    if (s == "Attack") return flowdata::Label::attack;
    throw Error(ErrorCategory::schema, "bad label '" + s + "' in " + path.string());
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = flowdata::split_csv_line(line);
    if (f.size() != 3) throw Error(ErrorCategory::schema, "bad prediction row in " + path.string());
    out.push_back({std::stoull(f[0]), label(f[1]), label(f[2])});
  }
  return out;
}

ScenarioReport read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCategory::schema, "report is not valid JSON: " + path.string());
  return report_from_json(j);
}

}  // namespace afp::harness
