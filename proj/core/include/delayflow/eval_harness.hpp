#pragma once

#include "delayflow/baselines.hpp"
#include "delayflow/llm_backend.hpp"
#include "delayflow/prompt_engine.hpp"
#include "delayflow/refine_engine.hpp"
#include "delayflow/task.hpp"

#include <span>
#include <string>
#include <vector>

namespace delayflow {

/// Root mean square error. Throws ValidationError on empty or mismatched
/// input lengths.
double rmse(std::span<const double> truth, std::span<const double> predictions);

/// Mean absolute error; same contract as rmse.
double mae(std::span<const double> truth, std::span<const double> predictions);

struct SplitSpec {
    DateRange train{};
    DateRange test{};
};

/// One forecast-window task per (station, direction, window); anchors step
/// u bins at a time so the evaluation range is covered exactly once. Tasks
/// without d available history bins are skipped.
std::vector<ForecastTask> generate_tasks(const InformationRepository& repo, const DateRange& range, int d, int u);

/// Keeps only tasks whose forecast window overlaps a delay event window at a
/// station inside the event's impact scope.
std::vector<ForecastTask> focus_delay_tasks(const std::vector<ForecastTask>& tasks,
                                            const InformationRepository& repo);

struct ExperimentSpec {
    SplitSpec split{};
    int d = 12;
    int u = 6;
    bool focus_delay = true;
    int validation_days = 3;           // tail of the training range used for template scoring
    double incomplete_threshold = 0.5; // failed-task share that flags a model incomplete
    std::vector<std::string> models = {"historical-average", "seasonal-naive", "arima", "p1", "p2"};
    BaselineParams baseline_params;
    TemplateLibraryConfig generation_axes;
    std::uint64_t seed = 0;  // recorded in the manifest
};

struct TaskRecord {
    std::string task_id;
    std::string station_id;
    Direction direction = Direction::Inflow;
    TimeBin anchor{};
    std::vector<double> truth;
    std::vector<double> predictions;
};

struct ModelReport {
    std::string model;
    double rmse_value = 0.0;
    double mae_value = 0.0;
    long long n = 0;  // predicted values compared
    int n_tasks = 0;
    int n_failed_tasks = 0;
    bool incomplete = false;
    std::vector<TaskRecord> tasks;
    /// Raw backend replies keyed by task id; prompt-backed models only.
    std::map<std::string, std::string> raw_replies;
};

struct MetricReport {
    std::vector<ModelReport> models;
    int n_tasks = 0;
    std::string p1_template_id;
    std::string p2_template_id;
    std::string backend_id;
    std::vector<TemplateScore> p1_scores;
    std::vector<TemplateScore> p2_scores;
    /// The winning templates actually evaluated (P1 and/or P2).
    std::vector<PromptTemplate> chosen_templates;
};

/// Evaluates every requested model on the identical task set. "p1" is the
/// best template of the generation library by training-time scoring; "p2" is
/// the refinement winner derived from it. Models failing more than the
/// threshold share of tasks are flagged incomplete; the rest are unaffected.
MetricReport run_experiment(const ExperimentSpec& spec, const InformationRepository& repo, Backend& backend);

/// Literature reference rows (model, RMSE, MAE) quoted verbatim; rendered
/// under an explicit "not reproduced" label.
const std::vector<std::array<std::string, 3>>& literature_reference_rows();

std::string render_markdown_report(const MetricReport& report);

// model,rmse,mae,n
void write_report_csv(const MetricReport& report, std::ostream& out);

/// Time-aligned truth/prediction table for one station and service date:
/// time,truth,<model>... One row per bin covered by at least one model.
/// Defaults to outbound flow, the direction delay impacts show up in.
std::string emit_plot_data(const MetricReport& report, const std::string& station_id, Date date,
                           Direction direction = Direction::Outflow);

}  // namespace delayflow
