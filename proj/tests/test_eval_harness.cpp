#include "delayflow/errors.hpp"
#include "delayflow/eval_harness.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace delayflow;
using namespace delayflow::testing;

TEST_CASE("rmse and mae on identical vectors are zero") {
    const std::vector<double> v = {1, 2, 3};
    CHECK(rmse(v, v) == 0.0);
    CHECK(mae(v, v) == 0.0);
}

TEST_CASE("rmse and mae match hand arithmetic") {
    const std::vector<double> truth = {3, 4};
    const std::vector<double> pred = {0, 0};
    CHECK(rmse(truth, pred) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    CHECK(mae(truth, pred) == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("metrics reject empty and mismatched inputs") {
    const std::vector<double> v = {1.0};
    const std::vector<double> w = {1.0, 2.0};
    const std::vector<double> empty;
    CHECK_THROWS_AS(rmse(v, w), ValidationError);
    CHECK_THROWS_AS(mae(v, w), ValidationError);
    CHECK_THROWS_AS(rmse(empty, empty), ValidationError);
    CHECK_THROWS_AS(mae(empty, empty), ValidationError);
}

TEST_CASE("metrics agree with a loop-based recomputation on random vectors") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> value(0.0, 100.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<std::size_t> length(1, 100);
        const std::size_t n = length(rng);
        std::vector<double> truth(n);
        std::vector<double> pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = value(rng);
            pred[i] = value(rng);
        }
        long double sq = 0.0L;
        long double ab = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            const long double r = static_cast<long double>(truth[i]) - static_cast<long double>(pred[i]);
            sq += r * r;
            ab += std::fabs(static_cast<double>(r));
        }
        const double expected_rmse = static_cast<double>(std::sqrt(sq / static_cast<long double>(n)));
        const double expected_mae = static_cast<double>(ab / static_cast<long double>(n));
        CHECK(std::fabs(rmse(truth, pred) - expected_rmse) < 1e-12);
        CHECK(std::fabs(mae(truth, pred) - expected_mae) < 1e-12);
        CHECK(mae(truth, pred) <= rmse(truth, pred));
    }
}

TEST_CASE("metrics are scale-equivariant") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> value(0.0, 50.0);
    std::vector<double> truth(64);
    std::vector<double> pred(64);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = value(rng);
        pred[i] = value(rng);
    }
    for (const double c : {0.25, 2.0, 1000.0}) {
        std::vector<double> ct(truth);
        std::vector<double> cp(pred);
        for (auto& x : ct) x *= c;
        for (auto& x : cp) x *= c;
        CHECK(rmse(ct, cp) == doctest::Approx(c * rmse(truth, pred)).epsilon(1e-12));
        CHECK(mae(ct, cp) == doctest::Approx(c * mae(truth, pred)).epsilon(1e-12));
    }
}

TEST_CASE("task generation covers the test range exactly once") {
    const auto config = small_synth(5);
    const auto repo = repo_from_synth(config);
    const DateRange test{config.start_date + std::chrono::days{7}, config.start_date + std::chrono::days{9}};
    const int u = 6;
    const auto tasks = generate_tasks(repo, test, 12, u);

    // 6 stations x 2 directions x 3 days x 18 windows
    CHECK(tasks.size() == 6 * 2 * 3 * (kBinsPerDay / u));

    std::map<std::pair<std::string, int>, std::set<long long>> covered;
    for (const auto& task : tasks) {
        auto& bins = covered[{task.station_id, static_cast<int>(task.direction)}];
        for (int k = 1; k <= task.u; ++k) {
            const long long g = global_bin(task.anchor) + k;
            CHECK(bins.insert(g).second);  // no bin covered twice
        }
    }
    const long long first = global_bin(TimeBin{test.first, 0});
    const long long last = global_bin(TimeBin{test.last, kBinsPerDay - 1});
    for (const auto& [key, bins] : covered) {
        CHECK(bins.size() == static_cast<std::size_t>(last - first + 1));
        CHECK(*bins.begin() == first);
        CHECK(*bins.rbegin() == last);
    }
}

TEST_CASE("the delay focus filter keeps only windows overlapping an event at affected stations") {
    const auto config = small_synth(5);
    const auto repo = repo_from_synth(config);
    const DateRange test{config.start_date + std::chrono::days{7}, config.start_date + std::chrono::days{9}};
    const auto all_tasks = generate_tasks(repo, test, 12, 6);
    const auto focused = focus_delay_tasks(all_tasks, repo);

    CHECK(focused.size() < all_tasks.size());
    CHECK(!focused.empty());

    // the event sits on day 7, bins 66..71, stations S03..S05 plus one hop
    const Date event_day = config.start_date + std::chrono::days{7};
    const std::set<std::string> scope = {"S02", "S03", "S04", "S05", "S06"};
    for (const auto& task : focused) {
        CHECK(task.anchor.service_date == event_day);
        CHECK(scope.contains(task.station_id));
        const long long wf = global_bin(task.anchor) + 1;
        const long long wl = global_bin(task.anchor) + task.u;
        const long long ef = global_bin(TimeBin{event_day, 66});
        const long long el = global_bin(TimeBin{event_day, 71});
        CHECK(wf <= el);
        CHECK(ef <= wl);
    }
}

TEST_CASE("run_experiment scores a periodic fixture at zero error for seasonal naive") {
    const auto config = daily_repeat_synth(3, 10);
    const auto repo = repo_from_synth(config);
    ExperimentSpec spec;
    spec.split.train = {config.start_date, config.start_date + std::chrono::days{6}};
    spec.split.test = {config.start_date + std::chrono::days{7}, config.start_date + std::chrono::days{9}};
    spec.focus_delay = false;
    spec.models = {"seasonal-naive"};
    const auto backend = make_backend({});
    const auto report = run_experiment(spec, repo, *backend);
    REQUIRE(report.models.size() == 1);
    CHECK(report.models.front().model == "SeasonalNaive");
    CHECK(report.models.front().rmse_value == 0.0);
    CHECK(report.models.front().mae_value == 0.0);
    CHECK_FALSE(report.models.front().incomplete);
}

TEST_CASE("P1 and P2 coincide under the deterministic mock") {
    const auto config = small_synth(6);
    const auto repo = repo_from_synth(config);
    ExperimentSpec spec;
    spec.split.train = {config.start_date, config.start_date + std::chrono::days{6}};
    spec.split.test = {config.start_date + std::chrono::days{7}, config.start_date + std::chrono::days{9}};
    spec.focus_delay = true;
    spec.models = {"seasonal-naive", "p1", "p2"};
    const auto backend = make_backend({});
    const auto report = run_experiment(spec, repo, *backend);
    REQUIRE(report.models.size() == 3);
    const auto& naive = report.models[0];
    const auto& p1 = report.models[1];
    const auto& p2 = report.models[2];
    CHECK(p1.rmse_value == p2.rmse_value);
    CHECK(p1.mae_value == p2.mae_value);
    CHECK(p1.rmse_value == naive.rmse_value);
    CHECK(!report.p1_template_id.empty());
    CHECK(!report.p2_template_id.empty());
    CHECK(report.p2_template_id.find(report.p1_template_id) == 0);  // refined from the P1 winner
}

TEST_CASE("a model that keeps failing is flagged incomplete without hurting the others") {
    const auto config = small_synth(6);
    const auto repo = repo_from_synth(config);
    ExperimentSpec spec;
    spec.split.train = {config.start_date, config.start_date + std::chrono::days{6}};
    spec.split.test = {config.start_date + std::chrono::days{7}, config.start_date + std::chrono::days{9}};
    spec.focus_delay = true;
    spec.models = {"seasonal-naive", "p1"};

    // Validation prompts (training tail, no active event) keep working, but
    // every delay-focused evaluation prompt carries an event narrative and
    // trips the injected failure.
    BackendConfig faulty;
    faulty.mock_faults.fail_if_text_contains = "Delay event";
    const auto backend = make_backend(faulty);
    const auto report = run_experiment(spec, repo, *backend);
    REQUIRE(report.models.size() == 2);
    CHECK_FALSE(report.models[0].incomplete);
    CHECK(report.models[0].n > 0);
    CHECK(report.models[1].incomplete);
    CHECK(report.models[1].n_failed_tasks == report.n_tasks);
}

TEST_CASE("the markdown report quotes the literature rows byte-exactly") {
    MetricReport report;
    report.backend_id = "mock";
    report.n_tasks = 1;
    ModelReport model;
    model.model = "SeasonalNaive";
    model.rmse_value = 1.0;
    model.mae_value = 0.5;
    model.n = 6;
    report.models.push_back(model);

    const std::string markdown = render_markdown_report(report);
    CHECK(markdown.find("P2 | 11.75 | 8.61") != std::string::npos);
    CHECK(markdown.find("ARIMA | 17.52 | 12.5 ") != std::string::npos);
    CHECK(markdown.find("GC-LSTM | 12.29 | 7.76") != std::string::npos);
    CHECK(markdown.find("not reproduced") != std::string::npos);

    std::ostringstream csv;
    write_report_csv(report, csv);
    CHECK(csv.str() == "model,rmse,mae,n\nSeasonalNaive,1.000000,0.500000,6\n");
}

TEST_CASE("plot data emits one row per bin and round-trips the residuals") {
    const auto config = daily_repeat_synth(3, 10);
    const auto repo = repo_from_synth(config);
    ExperimentSpec spec;
    spec.split.train = {config.start_date, config.start_date + std::chrono::days{6}};
    spec.split.test = {config.start_date + std::chrono::days{7}, config.start_date + std::chrono::days{9}};
    spec.focus_delay = false;
    spec.models = {"historical-average"};
    const auto backend = make_backend({});
    const auto report = run_experiment(spec, repo, *backend);

    const Date day = config.start_date + std::chrono::days{8};
    const std::string csv = emit_plot_data(report, "S02", day);

    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "time,truth,HistoricalAverage");
    std::size_t rows = 0;
    double residual_sum = 0.0;
    while (std::getline(in, line)) {
        const auto fields = split_csv_row(line);
        REQUIRE(fields.size() == 3);
        residual_sum += std::fabs(std::stod(fields[1]) - std::stod(fields[2]));
        ++rows;
    }
    CHECK(rows == static_cast<std::size_t>(kBinsPerDay));

    // residuals reconstructed from the CSV match the report's task records
    double expected = 0.0;
    for (const auto& rec : report.models.front().tasks) {
        if (rec.station_id != "S02" || rec.direction != Direction::Outflow) continue;
        for (std::size_t k = 0; k < rec.predictions.size(); ++k) {
            if (advance(rec.anchor, static_cast<long long>(k) + 1).service_date != day) continue;
            expected += std::fabs(rec.truth[k] - rec.predictions[k]);
        }
    }
    CHECK(residual_sum == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(emit_plot_data(report, "S99", day), doctest::Contains("not present"), Error);
    CHECK_THROWS_WITH_AS(emit_plot_data(MetricReport{}, "S02", day), doctest::Contains("no models in report"),
                         Error);
}

TEST_CASE("overlapping train and test ranges are rejected") {
    const auto repo = repo_from_synth(daily_repeat_synth(3, 6));
    ExperimentSpec spec;
    spec.split.train = {parse_date("2019-08-05"), parse_date("2019-08-08")};
    spec.split.test = {parse_date("2019-08-08"), parse_date("2019-08-10")};
    const auto backend = make_backend({});
    CHECK_THROWS_AS(run_experiment(spec, repo, *backend), ConfigError);
}
