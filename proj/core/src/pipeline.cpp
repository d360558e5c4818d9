#include "delayflow/pipeline.hpp"

#include "delayflow/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace delayflow {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;

json config_to_json(const RunConfig& c) {
    json delays = json::array();
    for (const auto& d : c.synth.delays) {
        delays.push_back(json{{"day_index", d.day_index},
                              {"window_start_bin", d.window_start_bin},
                              {"window_bins", d.window_bins},
                              {"interval_from", d.interval_from},
                              {"interval_to", d.interval_to},
                              {"type", std::string(to_string(d.type))},
                              {"drop_fraction", d.drop_fraction},
                              {"surge_fraction", d.surge_fraction},
                              {"surge_duration_bins", d.surge_duration_bins}});
    }
    return json{
        {"afc_path", c.afc_path},
        {"events_path", c.events_path},
        {"adjacency_path", c.adjacency_path},
        {"out_dir", c.out_dir},
        {"train_first", format_date(c.train_first)},
        {"train_last", format_date(c.train_last)},
        {"test_first", format_date(c.test_first)},
        {"test_last", format_date(c.test_last)},
        {"d", c.d},
        {"u", c.u},
        {"focus_delay", c.focus_delay},
        {"affected_hops", c.affected_hops},
        {"history_days", c.history_days},
        {"validation_days", c.validation_days},
        {"incomplete_threshold", c.incomplete_threshold},
        {"models", c.models},
        {"arima_p", c.arima.p},
        {"arima_d", c.arima.d},
        {"token_budget", c.token_budget},
        {"outlier_filter", c.outlier_filter},
        {"outlier_multiple", c.outlier_multiple},
        {"export_prompts", c.export_prompts},
        {"seed", c.seed},
        {"backend",
         {{"kind", c.backend.kind == BackendKind::DeterministicMock ? "mock" : "remote"},
          {"endpoint_url", c.backend.endpoint_url},
          {"model_name", c.backend.model_name},
          {"temperature", c.backend.temperature},
          {"max_in_flight", c.backend.max_in_flight},
          {"retry_max_attempts", c.backend.retry.max_attempts},
          {"timeout_ms", c.backend.timeout.count()}}},
        {"synth",
         {{"seed", c.synth.seed},
          {"n_stations", c.synth.n_stations},
          {"n_days", c.synth.n_days},
          {"start_date", format_date(c.synth.start_date)},
          {"weekend_scale", c.synth.weekend_scale},
          {"poisson_noise", c.synth.poisson_noise},
          {"delays", delays}}},
    };
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (const unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw InputError("write failed: " + path.string());
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file: " + path);
    return in;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[24];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

struct IngestStats {
    std::size_t parsed = 0;
    std::size_t rejected = 0;
    std::size_t dropped_outside_hours = 0;
    std::size_t dropped_unknown_station = 0;
    std::size_t outliers_replaced = 0;
    std::size_t entry_records = 0;
    std::size_t exit_records = 0;
};

FlowStore ingest_flows(const RunConfig& config, const std::vector<std::string>& registry, IngestStats& stats) {
    auto afc_in = open_input(config.afc_path);
    const auto parsed = parse_afc(afc_in);
    stats.parsed = parsed.records.size();
    stats.rejected = parsed.rejected.size();

    const auto cleaned = clean(parsed.records, registry);
    stats.dropped_outside_hours = cleaned.dropped_outside_hours;
    stats.dropped_unknown_station = cleaned.dropped_unknown_station;
    for (const auto& rec : cleaned.records) {
        ++(rec.kind == RecordKind::Entry ? stats.entry_records : stats.exit_records);
    }

    FlowStore store = aggregate_flows(cleaned.records, registry);
    if (config.outlier_filter) {
        stats.outliers_replaced = apply_outlier_filter(store, config.outlier_multiple);
    }
    return store;
}

InformationRepository load_repository(const RunConfig& config, IngestStats& stats) {
    auto adjacency_in = open_input(config.adjacency_path);
    auto adjacency = AdjacencyMatrix::load(adjacency_in);

    auto events_in = open_input(config.events_path);
    auto events = load_events(events_in);
    if (!events.rejected.empty()) {
        throw ValidationError("event catalog has " + std::to_string(events.rejected.size()) +
                              " rejected rows; first: row " + std::to_string(events.rejected.front().row_number) +
                              " (" + events.rejected.front().reason + ")");
    }

    auto flows = ingest_flows(config, adjacency.stations(), stats);
    return build_repository(std::move(flows), std::move(events.events), std::move(adjacency),
                            config.affected_hops);
}

ExperimentSpec experiment_spec(const RunConfig& config) {
    ExperimentSpec spec;
    spec.split.train = {config.train_first, config.train_last};
    spec.split.test = {config.test_first, config.test_last};
    spec.d = config.d;
    spec.u = config.u;
    spec.focus_delay = config.focus_delay;
    spec.validation_days = config.validation_days;
    spec.incomplete_threshold = config.incomplete_threshold;
    spec.models = config.models;
    spec.baseline_params.arima = config.arima;
    spec.baseline_params.history_days = config.history_days;
    spec.generation_axes.history_days = config.history_days;
    spec.generation_axes.token_budget = config.token_budget;
    spec.seed = config.seed;
    return spec;
}

/// Headline plot target: the first event whose window lies in the test range,
/// else the first registered station on the first test day.
std::pair<std::string, Date> plot_target(const InformationRepository& repo, const RunConfig& config) {
    for (const auto& ev : repo.events) {
        if (ev.date >= config.test_first && ev.date <= config.test_last) {
            const auto scope = affected_stations(ev, repo.adjacency, repo.affected_hops);
            if (!scope.empty()) return {scope.front(), ev.date};
        }
    }
    return {repo.station_registry.front(), config.test_first};
}

json manifest_models(const MetricReport& report) {
    json models = json::array();
    for (const auto& m : report.models) {
        models.push_back(json{{"model", m.model},
                              {"rmse", m.rmse_value},
                              {"mae", m.mae_value},
                              {"n", m.n},
                              {"n_tasks", m.n_tasks},
                              {"n_failed_tasks", m.n_failed_tasks},
                              {"incomplete", m.incomplete}});
    }
    return models;
}

}  // namespace

std::string config_hash(const RunConfig& config) { return fnv1a_hex(config_to_json(config).dump()); }

std::string make_run_id(const RunConfig& config) {
    return utc_timestamp() + "-" + config_hash(config).substr(0, 8);
}

RunOutcome cmd_synth(const RunConfig& config) {
    SynthConfig synth = config.synth;
    synth.seed = config.seed;
    const SynthOutput output = generate(synth);

    fs::create_directories(config.out_dir);
    const fs::path out(config.out_dir);
    write_file(out / "afc.csv", output.afc_csv);
    write_file(out / "events.csv", output.events_csv);
    write_file(out / "adjacency.csv", output.adjacency_csv);

    RunConfig hashed = config;
    hashed.synth = synth;
    const json manifest{{"config_hash", config_hash(hashed)},
                        {"seed", synth.seed},
                        {"n_stations", synth.n_stations},
                        {"n_days", synth.n_days},
                        {"start_date", format_date(synth.start_date)},
                        {"files", {"afc.csv", "events.csv", "adjacency.csv"}}};
    write_file(out / "synth_manifest.json", manifest.dump(2) + "\n");
    return {0, config.out_dir};
}

RunOutcome cmd_ingest(const RunConfig& config, std::ostream& log) {
    auto adjacency_in = open_input(config.adjacency_path);
    const auto adjacency = AdjacencyMatrix::load(adjacency_in);

    IngestStats stats;
    const FlowStore store = ingest_flows(config, adjacency.stations(), stats);

    fs::create_directories(config.out_dir);
    std::ofstream out(fs::path(config.out_dir) / "flows.csv", std::ios::binary);
    if (!out) throw InputError("cannot open flows.csv for writing under " + config.out_dir);
    write_flow_csv(store, out);

    log << "parsed " << stats.parsed << " records, rejected " << stats.rejected << " rows\n";
    log << "filtered " << stats.dropped_outside_hours << " outside service hours, "
        << stats.dropped_unknown_station << " at unknown stations\n";
    if (config.outlier_filter) log << "replaced " << stats.outliers_replaced << " outlier bins\n";
    log << "wrote " << store.size() << " flow series (" << adjacency.size() << " stations x 2 directions)\n";
    if (store.empty()) log << "warning: no records survived ingestion; flow store is empty\n";
    return {0, config.out_dir};
}

RunOutcome cmd_run(const RunConfig& config, std::ostream& log) {
    IngestStats stats;
    const InformationRepository repo = load_repository(config, stats);
    const auto backend = make_backend(config.backend);
    const ExperimentSpec spec = experiment_spec(config);

    const MetricReport report = run_experiment(spec, repo, *backend);

    const std::string run_id = make_run_id(config);
    const fs::path run_dir = fs::path(config.out_dir) / run_id;
    fs::create_directories(run_dir);

    write_file(run_dir / "report.md", render_markdown_report(report));
    {
        std::ofstream out(run_dir / "report.csv", std::ios::binary);
        write_report_csv(report, out);
    }
    if (!report.p1_scores.empty()) {
        std::ofstream out(run_dir / "scores_p1.csv", std::ios::binary);
        write_scores_csv(report.p1_scores, out);
    }
    if (!report.p2_scores.empty()) {
        std::ofstream out(run_dir / "scores_p2.csv", std::ios::binary);
        write_scores_csv(report.p2_scores, out);
    }

    const auto [plot_station, plot_date] = plot_target(repo, config);
    std::string plot_file;
    try {
        const std::string plot = emit_plot_data(report, plot_station, plot_date);
        plot_file = "plot_" + plot_station + "_" + format_date(plot_date) + ".csv";
        write_file(run_dir / plot_file, plot);
    } catch (const Error& e) {
        log << "plot data skipped: " << e.what() << "\n";
    }

    for (const auto& model : report.models) {
        if (model.raw_replies.empty()) continue;
        const fs::path replies_dir = run_dir / "replies" / model.model;
        fs::create_directories(replies_dir);
        for (const auto& [task_id, raw] : model.raw_replies) {
            write_file(replies_dir / (task_id + ".txt"), raw);
        }
    }

    if (config.export_prompts && !report.chosen_templates.empty()) {
        const fs::path prompts_dir = run_dir / "prompts";
        fs::create_directories(prompts_dir);
        for (const auto& tpl : report.chosen_templates) {
            for (const auto& model : report.models) {
                for (const auto& rec : model.tasks) {
                    ForecastTask task{rec.task_id, rec.station_id, rec.direction, rec.anchor, config.d, config.u};
                    const RenderedPrompt prompt = render(tpl, repo, task);
                    write_file(prompts_dir / prompt_file_name(prompt), prompt.text);
                }
                break;  // task set is identical across models
            }
        }
    }

    json manifest{{"run_id", run_id},
                  {"created_utc", utc_timestamp()},
                  {"config_hash", config_hash(config)},
                  {"config", config_to_json(config)},
                  {"backend_id", report.backend_id},
                  {"p1_template_id", report.p1_template_id},
                  {"p2_template_id", report.p2_template_id},
                  {"n_tasks", report.n_tasks},
                  {"models", manifest_models(report)},
                  {"ingest",
                   {{"parsed", stats.parsed},
                    {"rejected", stats.rejected},
                    {"dropped_outside_hours", stats.dropped_outside_hours},
                    {"dropped_unknown_station", stats.dropped_unknown_station},
                    {"outliers_replaced", stats.outliers_replaced},
                    {"entry_records", stats.entry_records},
                    {"exit_records", stats.exit_records}}},
                  {"plot_file", plot_file}};
    write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

    bool incomplete = false;
    for (const auto& model : report.models) {
        log << model.model << ": rmse " << format_double(model.rmse_value, 4) << ", mae "
            << format_double(model.mae_value, 4) << ", n " << model.n;
        if (model.incomplete) {
            log << " [incomplete: " << model.n_failed_tasks << " failed tasks]";
            incomplete = true;
        }
        log << "\n";
    }
    log << "run directory: " << run_dir.string() << "\n";

    return {incomplete ? 2 : 0, run_dir.string()};
}

RunOutcome cmd_score_templates(const RunConfig& config, std::ostream& log) {
    IngestStats stats;
    const InformationRepository repo = load_repository(config, stats);
    const auto backend = make_backend(config.backend);
    const ExperimentSpec spec = experiment_spec(config);

    const Date val_first = std::max(spec.split.train.first,
                                    spec.split.train.last - std::chrono::days{std::max(0, spec.validation_days - 1)});
    const auto validation_tasks = generate_tasks(repo, {val_first, spec.split.train.last}, spec.d, spec.u);
    if (validation_tasks.empty()) throw ConfigError("no validation tasks in the training tail");

    const auto library = generate_template_library(spec.generation_axes);
    const auto screened = screen(library, repo, validation_tasks.front());
    const auto scores = score_templates(screened.kept, validation_tasks, repo, *backend);
    const std::string best = select_best(scores);

    fs::create_directories(config.out_dir);
    {
        std::ofstream out(fs::path(config.out_dir) / "template_scores.csv", std::ios::binary);
        write_scores_csv(scores, out);
    }

    const auto& base = [&]() -> const PromptTemplate& {
        for (const auto& tpl : screened.kept) {
            if (tpl.template_id == best) return tpl;
        }
        throw Error("selected template missing from library");
    }();
    const auto refined = refine_library(base, nonempty_dimension_subsets(),
                                        {PromptStructure::Parallel, PromptStructure::Nested},
                                        {DetailLevel::Brief, DetailLevel::Standard, DetailLevel::Verbose});
    const auto refined_screened = screen(refined, repo, validation_tasks.front());
    const auto refined_scores = score_templates(refined_screened.kept, validation_tasks, repo, *backend);
    const std::string refined_best = select_best(refined_scores);
    {
        std::ofstream out(fs::path(config.out_dir) / "template_scores_refined.csv", std::ios::binary);
        write_scores_csv(refined_scores, out);
    }

    log << "generation library: " << screened.kept.size() << " templates, best " << best << "\n";
    log << "refined pool: " << refined_screened.kept.size() << " templates, best " << refined_best << "\n";
    return {0, config.out_dir};
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
    std::ifstream manifest_in(fs::path(run_dir) / "manifest.json", std::ios::binary);
    if (!manifest_in) throw InputError("no manifest.json under " + run_dir);
    json manifest;
    try {
        manifest_in >> manifest;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("manifest.json does not parse: ") + e.what());
    }

    MetricReport report;
    report.backend_id = manifest.value("backend_id", "");
    report.p1_template_id = manifest.value("p1_template_id", "");
    report.p2_template_id = manifest.value("p2_template_id", "");
    report.n_tasks = manifest.value("n_tasks", 0);
    for (const auto& m : manifest.at("models")) {
        ModelReport model;
        model.model = m.at("model").get<std::string>();
        model.rmse_value = m.at("rmse").get<double>();
        model.mae_value = m.at("mae").get<double>();
        model.n = m.at("n").get<long long>();
        model.n_tasks = m.at("n_tasks").get<int>();
        model.n_failed_tasks = m.at("n_failed_tasks").get<int>();
        model.incomplete = m.at("incomplete").get<bool>();
        report.models.push_back(std::move(model));
    }
    out << render_markdown_report(report);
    return 0;
}

}  // namespace delayflow
