#pragma once

// Run outputs: results JSON (outcome, alerts, full timeline), a plain-text
// summary table, the per-channel time series CSV and the alerts CSV.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "spamlab/scenario.hpp"

namespace spamlab::report {

nlohmann::json to_json(const scenario::OutcomeRecord& r);
nlohmann::json to_json(const scenario::Timeline& tl);
nlohmann::json results_json(const scenario::RunResult& r);

scenario::Timeline timeline_from_json(const nlohmann::json& j);
scenario::OutcomeRecord outcome_from_json(const nlohmann::json& j);

/// Re-runs classification on the timeline stored in a results document.
scenario::OutcomeRecord reclassify(const nlohmann::json& results);

/// One summary row per results document.
struct SummaryRow {
  std::string scenario;
  std::uint64_t seed = 0;
  scenario::OutcomeRecord outcome;
  std::size_t alert_count = 0;
};
SummaryRow summary_row(const nlohmann::json& results);
std::string summary_table(const std::vector<SummaryRow>& rows);

void write_timeseries_csv(std::ostream& out, const scenario::Timeline& tl);
void write_alerts_csv(std::ostream& out, const std::vector<detect::Alert>& alerts);

/// Writes results.json, summary.txt, timeseries.csv, alerts.csv and
/// patches.log into `dir` (created if missing).
void emit_report(const scenario::RunResult& r, const std::filesystem::path& dir);

nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace spamlab::report
