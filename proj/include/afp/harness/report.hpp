#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afp/harness/experiment.hpp"

namespace afp::harness {

enum class ReportFormat { json, csv, markdown };
ReportFormat report_format_from_string(std::string_view s);

/// Writes `summary.<ext>` for the chosen format into `dir` (summary.json is
/// always written) and, with `plots`, one SVG bar chart per scenario.
/// Returns the paths written.
std::vector<std::filesystem::path> emit_report(const std::vector<ScenarioReport>& reports,
                                               ReportFormat format, bool plots,
                                               const std::filesystem::path& dir);

/// Column order: scenario, acc_before, acc_after, attack_recall_after.
std::string markdown_table(const std::vector<ScenarioReport>& reports);

/// Header plus one row per report: scenario, defense, seed, acc_before,
/// acc_after, attack_recall_before, attack_recall_after, benign_recall_before,
/// benign_recall_after, coverage, trigger_count.
std::string csv_table(const std::vector<ScenarioReport>& reports);

std::string bar_chart_svg(const ScenarioReport& report);

/// Reads predictions_*.csv as written by write_run.
std::vector<FlowPrediction> read_predictions(const std::filesystem::path& path);

ScenarioReport read_report(const std::filesystem::path& path);

}  // namespace afp::harness
