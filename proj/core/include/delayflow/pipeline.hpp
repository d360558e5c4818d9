#pragma once

#include "delayflow/eval_harness.hpp"
#include "delayflow/synth_data.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace delayflow {

/// Everything a run needs; every field maps to a config key and a CLI flag of
/// the same name.
struct RunConfig {
    std::string afc_path;
    std::string events_path;
    std::string adjacency_path;
    std::string out_dir = "out";

    Date train_first = parse_date("2019-08-05");
    Date train_last = parse_date("2019-08-18");
    Date test_first = parse_date("2019-08-19");
    Date test_last = parse_date("2019-08-25");

    int d = 12;
    int u = 6;
    bool focus_delay = true;
    int affected_hops = 1;
    int history_days = 3;
    int validation_days = 3;
    double incomplete_threshold = 0.5;
    std::vector<std::string> models = {"historical-average", "seasonal-naive", "arima", "p1", "p2"};
    ArimaParams arima;
    int token_budget = 12000;
    bool outlier_filter = false;
    double outlier_multiple = 8.0;
    bool export_prompts = false;
    std::uint64_t seed = 42;

    BackendConfig backend;
    SynthConfig synth = default_synth_config();
};

/// Stable hash of the canonical config document (timestamps excluded).
std::string config_hash(const RunConfig& config);

/// UTC timestamp plus config hash prefix, e.g. 20190805T120000Z-1a2b3c4d.
std::string make_run_id(const RunConfig& config);

struct RunOutcome {
    int exit_code = 0;
    std::string run_dir;  // directory holding this invocation's outputs
};

/// Writes afc.csv, events.csv, adjacency.csv and synth_manifest.json under
/// out_dir, creating it if needed.
RunOutcome cmd_synth(const RunConfig& config);

/// Parses, cleans and aggregates the AFC file against the adjacency's station
/// registry; writes flows.csv and prints a diagnostics summary.
RunOutcome cmd_ingest(const RunConfig& config, std::ostream& log);

/// Full pipeline: repository, template generation/scoring (P1), refinement
/// (P2), baselines, evaluation, reports and plot data under
/// {out_dir}/{run_id}/. Exit code 2 when any model's report is incomplete.
RunOutcome cmd_run(const RunConfig& config, std::ostream& log);

/// Scores the generation library and the refinement pool of its winner on
/// validation tasks; writes template_scores.csv and
/// template_scores_refined.csv under out_dir.
RunOutcome cmd_score_templates(const RunConfig& config, std::ostream& log);

/// Re-renders the Markdown report of a finished run directory.
int cmd_report(const std::string& run_dir, std::ostream& out);

}  // namespace delayflow
