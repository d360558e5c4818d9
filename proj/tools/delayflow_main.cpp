#include "delayflow/errors.hpp"
#include "delayflow/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(csv);
    while (std::getline(in, token, ',')) {
        token = delayflow::trim(token);
        if (!token.empty()) out.push_back(token);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace delayflow;

    CLI::App app{"delayflow: metro passenger-flow forecasting under delay conditions"};
    app.set_config("--config", "", "TOML-style key=value config file; any key can be overridden by the flag "
                                   "of the same name");
    app.require_subcommand(1);

    RunConfig config;
    std::string backend_kind = "mock";
    std::string train_start = format_date(config.train_first);
    std::string train_end = format_date(config.train_last);
    std::string test_start = format_date(config.test_first);
    std::string test_end = format_date(config.test_last);
    std::string synth_start = format_date(config.synth.start_date);
    std::string models_csv;
    bool no_noise = false;
    long long timeout_ms = config.backend.timeout.count();
    std::string run_dir;

    app.add_option("--afc", config.afc_path, "AFC transaction CSV");
    app.add_option("--events", config.events_path, "Delay event CSV");
    app.add_option("--adjacency", config.adjacency_path, "Adjacency matrix CSV");
    app.add_option("--out", config.out_dir, "Output directory");
    app.add_option("--seed", config.seed, "Random seed (synthetic data, recorded in manifests)");
    app.add_option("--backend", backend_kind, "Forecast backend: mock or remote")
        ->check(CLI::IsMember({"mock", "remote"}));
    app.add_option("--endpoint", config.backend.endpoint_url, "Chat-completions endpoint URL (remote backend)");
    app.add_option("--model-name", config.backend.model_name, "Remote model name");
    app.add_option("--temperature", config.backend.temperature, "Remote decoding temperature");
    app.add_option("--max-in-flight", config.backend.max_in_flight, "Concurrent backend requests");
    app.add_option("--retry-attempts", config.backend.retry.max_attempts, "Transport retry attempts");
    app.add_option("--timeout-ms", timeout_ms, "Backend request timeout in milliseconds");
    app.add_option("--train-start", train_start, "Training range start date");
    app.add_option("--train-end", train_end, "Training range end date");
    app.add_option("--test-start", test_start, "Test range start date");
    app.add_option("--test-end", test_end, "Test range end date");
    app.add_option("--d", config.d, "History length in bins");
    app.add_option("--u", config.u, "Forecast horizon in bins");
    app.add_flag("--focus-delay,!--no-focus-delay", config.focus_delay,
                 "Restrict evaluation to delay-affected forecast windows");
    app.add_option("--hops", config.affected_hops, "Impact-scope expansion hops beyond the event interval");
    app.add_option("--history-days", config.history_days, "Comparable days quoted in prompts");
    app.add_option("--validation-days", config.validation_days, "Training-tail days for template scoring");
    app.add_option("--incomplete-threshold", config.incomplete_threshold,
                   "Failed-task share that flags a model incomplete");
    app.add_option("--models", models_csv, "Comma-separated model list "
                                           "(historical-average,seasonal-naive,arima,p1,p2)");
    app.add_option("--arima-p", config.arima.p, "AR order");
    app.add_option("--arima-d", config.arima.d, "Differencing order (0 or 1)");
    app.add_option("--token-budget", config.token_budget, "Prompt character budget");
    app.add_flag("--outlier-filter", config.outlier_filter, "Median-based outlier replacement at ingest");
    app.add_option("--outlier-multiple", config.outlier_multiple, "Outlier threshold multiple");
    app.add_flag("--export-prompts", config.export_prompts, "Write rendered prompts under the run directory");
    app.add_option("--stations", config.synth.n_stations, "Synthetic network size");
    app.add_option("--days", config.synth.n_days, "Synthetic dataset length in days");
    app.add_option("--start-date", synth_start, "Synthetic dataset start date");
    app.add_option("--weekend-scale", config.synth.weekend_scale, "Weekend demand scale in (0,1]");
    app.add_flag("--no-noise", no_noise, "Disable Poisson sampling; emit the analytic means");
    app.add_option("--run", run_dir, "Run directory (report subcommand)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic AFC/event/adjacency dataset");
    auto* ingest = app.add_subcommand("ingest", "Parse, clean and aggregate an AFC file into flow series");
    auto* run = app.add_subcommand("run", "Run the full forecasting pipeline and write reports");
    auto* score = app.add_subcommand("score-templates", "Score prompt template libraries on validation tasks");
    auto* report = app.add_subcommand("report", "Re-render the Markdown report of a finished run");
    for (auto* sub : {synth, ingest, run, score, report}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        config.backend.kind = backend_kind == "remote" ? BackendKind::RemoteChat : BackendKind::DeterministicMock;
        config.backend.timeout = std::chrono::milliseconds(timeout_ms);
        config.train_first = parse_date(train_start);
        config.train_last = parse_date(train_end);
        config.test_first = parse_date(test_start);
        config.test_last = parse_date(test_end);
        config.synth.start_date = parse_date(synth_start);
        config.synth.poisson_noise = !no_noise;
        if (!models_csv.empty()) config.models = split_list(models_csv);

        if (synth->parsed()) return cmd_synth(config).exit_code;
        if (ingest->parsed()) return cmd_ingest(config, std::cout).exit_code;
        if (run->parsed()) return cmd_run(config, std::cout).exit_code;
        if (score->parsed()) return cmd_score_templates(config, std::cout).exit_code;
        if (report->parsed()) {
            if (run_dir.empty()) throw ConfigError("report requires --run <run directory>");
            return cmd_report(run_dir, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
