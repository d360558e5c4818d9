#include "delayflow/baselines.hpp"

#include "delayflow/errors.hpp"
#include "delayflow/prompt_engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace delayflow {

namespace {

/// Gaussian elimination with partial pivoting on the normal equations.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row) {
            if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
        }
        if (std::fabs(a[pivot][col]) < 1e-12) throw FitError("singular design matrix in AR fit");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t row = col + 1; row < n; ++row) {
            const double f = a[row][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[row][k] -= f * a[col][k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= a[i][k] * x[k];
        x[i] = sum / a[i][i];
    }
    return x;
}

/// Per-day value sequences of the training range, differenced `d` times
/// within the day. Differencing never spans the overnight gap.
std::vector<std::vector<double>> training_segments(const FlowSeries& series, const DateRange& training, int d) {
    std::vector<std::vector<double>> segments;
    Date current{};
    for (const auto& [bin, count] : series.values) {
        if (!training.contains(bin.service_date)) continue;
        if (segments.empty() || bin.service_date != current) {
            segments.emplace_back();
            current = bin.service_date;
        }
        segments.back().push_back(static_cast<double>(count));
    }
    if (d == 1) {
        for (auto& seg : segments) {
            std::vector<double> diff;
            for (std::size_t i = 1; i < seg.size(); ++i) diff.push_back(seg[i] - seg[i - 1]);
            seg = std::move(diff);
        }
    }
    return segments;
}

void require_history(const FlowSeries& series, const ForecastTask& task) {
    if (series.values.empty()) throw HistoryUnderflowError("history underflow: series has no observations");
    const long long anchor_g = global_bin(task.anchor);
    const long long first_g = global_bin(series.values.begin()->first);
    const long long last_g = global_bin(series.values.rbegin()->first);
    if (anchor_g < first_g || anchor_g > last_g || anchor_g - (task.d - 1) < first_g) {
        throw HistoryUnderflowError("history underflow: task needs " + std::to_string(task.d) +
                                    " bins ending at " + format_date(task.anchor.service_date));
    }
}

}  // namespace

std::string_view to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::HistoricalAverage: return "HistoricalAverage";
        case BaselineKind::SeasonalNaive: return "SeasonalNaive";
        case BaselineKind::Arima: return "ARIMA";
    }
    return "";
}

ArFit fit_ar_ols(const std::vector<std::vector<double>>& segments, int p) {
    if (p < 1) throw FitError("AR order must be >= 1");
    // Normal equations over [1, y_{t-1}, ..., y_{t-p}] rows.
    const std::size_t dim = static_cast<std::size_t>(p) + 1;
    std::vector<std::vector<double>> xtx(dim, std::vector<double>(dim, 0.0));
    std::vector<double> xty(dim, 0.0);
    std::size_t rows = 0;
    std::vector<double> x(dim, 1.0);
    for (const auto& seg : segments) {
        for (std::size_t t = static_cast<std::size_t>(p); t < seg.size(); ++t) {
            for (int j = 1; j <= p; ++j) x[static_cast<std::size_t>(j)] = seg[t - static_cast<std::size_t>(j)];
            const double y = seg[t];
            for (std::size_t i = 0; i < dim; ++i) {
                for (std::size_t j = 0; j < dim; ++j) xtx[i][j] += x[i] * x[j];
                xty[i] += x[i] * y;
            }
            ++rows;
        }
    }
    if (rows < dim) {
        throw FitError("AR(" + std::to_string(p) + ") fit needs at least " + std::to_string(dim) +
                       " usable rows, got " + std::to_string(rows));
    }
    const auto beta = solve_linear(std::move(xtx), std::move(xty));
    ArFit fit;
    fit.intercept = beta[0];
    fit.coefficients.assign(beta.begin() + 1, beta.end());
    return fit;
}

BaselineModel fit(BaselineKind kind, const BaselineParams& params, const FlowSeries& series,
                  const DateRange& training) {
    BaselineModel model;
    model.kind = kind;
    model.params = params;
    model.series = series;
    model.training = training;

    std::size_t training_bins = 0;
    for (const auto& [bin, count] : series.values) {
        if (training.contains(bin.service_date)) ++training_bins;
    }
    if (training_bins == 0) {
        throw FitError("training range " + format_date(training.first) + " .. " + format_date(training.last) +
                       " contains no observations");
    }

    switch (kind) {
        case BaselineKind::HistoricalAverage: {
            std::array<std::array<double, kBinsPerDay>, 2> sums{};
            std::array<std::array<long long, kBinsPerDay>, 2> counts{};
            for (const auto& [bin, count] : series.values) {
                if (!training.contains(bin.service_date)) continue;
                const int daytype = is_weekend(bin.service_date) ? 1 : 0;
                sums[daytype][bin.bin_index] += static_cast<double>(count);
                ++counts[daytype][bin.bin_index];
            }
            for (int b = 0; b < kBinsPerDay; ++b) {
                const double all_sum = sums[0][b] + sums[1][b];
                const long long all_count = counts[0][b] + counts[1][b];
                for (int daytype = 0; daytype < 2; ++daytype) {
                    if (counts[daytype][b] > 0) {
                        model.means[daytype][b] = sums[daytype][b] / static_cast<double>(counts[daytype][b]);
                    } else if (all_count > 0) {
                        // no training day of this type: fall back to the overall bin mean
                        model.means[daytype][b] = all_sum / static_cast<double>(all_count);
                    }
                }
            }
            break;
        }
        case BaselineKind::SeasonalNaive:
            break;  // nothing beyond the series reference
        case BaselineKind::Arima: {
            const auto& ar = params.arima;
            if (ar.p < 1 || (ar.d != 0 && ar.d != 1)) {
                throw FitError("ARIMA orders out of range: p >= 1 and d in {0,1}");
            }
            if (training_bins < static_cast<std::size_t>(ar.p + ar.d + 1)) {
                throw FitError("ARIMA(p=" + std::to_string(ar.p) + ",d=" + std::to_string(ar.d) +
                               ") needs at least " + std::to_string(ar.p + ar.d + 1) + " training bins, got " +
                               std::to_string(training_bins));
            }
            model.ar = fit_ar_ols(training_segments(series, training, ar.d), ar.p);
            break;
        }
    }
    return model;
}

std::vector<double> predict(const BaselineModel& model, const ForecastTask& task) {
    const FlowSeries& series = model.series;
    require_history(series, task);
    if (task.u < 1) throw ValidationError("task horizon must be >= 1");

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(task.u));

    switch (model.kind) {
        case BaselineKind::HistoricalAverage: {
            for (int k = 1; k <= task.u; ++k) {
                const TimeBin target = advance(task.anchor, k);
                const int daytype = is_weekend(target.service_date) ? 1 : 0;
                out.push_back(std::max(0.0, model.means[daytype][target.bin_index]));
            }
            break;
        }
        case BaselineKind::SeasonalNaive: {
            const auto days = comparable_days_before(task.anchor.service_date, model.params.history_days,
                                                     *series.first_date(), *series.last_date());
            const double anchor_value = static_cast<double>(series.value_at(task.anchor).value_or(0));
            for (int k = 1; k <= task.u; ++k) {
                const int target_bin = advance(task.anchor, k).bin_index;
                std::optional<std::int64_t> value;
                for (auto day = days.rbegin(); day != days.rend(); ++day) {
                    value = series.value_at(TimeBin{*day, target_bin});
                    if (value) break;
                }
                out.push_back(std::max(0.0, value ? static_cast<double>(*value) : anchor_value));
            }
            break;
        }
        case BaselineKind::Arima: {
            const int p = model.params.arima.p;
            const int d = model.params.arima.d;
            // Realized levels of the anchor day up to the anchor bin; the
            // recursion appends its own predictions from there.
            std::vector<double> levels;
            Date current_day = task.anchor.service_date;
            for (int b = 0; b <= task.anchor.bin_index; ++b) {
                if (const auto v = series.value_at(TimeBin{current_day, b})) {
                    levels.push_back(static_cast<double>(*v));
                }
            }
            double carried_level = levels.empty() ? 0.0 : levels.back();
            for (int k = 1; k <= task.u; ++k) {
                const TimeBin target = advance(task.anchor, k);
                if (target.service_date != current_day) {
                    // New service day: differencing restarts, the level carries over.
                    if (!levels.empty()) carried_level = levels.back();
                    levels.clear();
                    current_day = target.service_date;
                }
                double prediction = model.ar.intercept;
                if (d == 0) {
                    for (int j = 1; j <= p; ++j) {
                        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(levels.size()) - j;
                        prediction += model.ar.coefficients[static_cast<std::size_t>(j - 1)] *
                                      (idx >= 0 ? levels[static_cast<std::size_t>(idx)] : 0.0);
                    }
                } else {
                    double diff_hat = model.ar.intercept;
                    for (int j = 1; j <= p; ++j) {
                        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(levels.size()) - 1 - j;
                        const double lag = idx >= 0 ? levels[static_cast<std::size_t>(idx + 1)] -
                                                          levels[static_cast<std::size_t>(idx)]
                                                    : 0.0;
                        diff_hat += model.ar.coefficients[static_cast<std::size_t>(j - 1)] * lag;
                    }
                    const double base = levels.empty() ? carried_level : levels.back();
                    prediction = base + diff_hat;
                }
                levels.push_back(prediction);
                out.push_back(std::max(0.0, prediction));
            }
            break;
        }
    }
    return out;
}

std::string model_summary_json(const BaselineModel& model) {
    nlohmann::json j{{"kind", std::string(to_string(model.kind))},
                     {"station", model.series.station_id},
                     {"direction", std::string(to_string(model.series.direction))},
                     {"training", {{"first", format_date(model.training.first)},
                                   {"last", format_date(model.training.last)}}}};
    switch (model.kind) {
        case BaselineKind::HistoricalAverage:
            j["weekday_means"] = model.means[0];
            j["weekend_means"] = model.means[1];
            break;
        case BaselineKind::SeasonalNaive:
            j["history_days"] = model.params.history_days;
            break;
        case BaselineKind::Arima:
            j["p"] = model.params.arima.p;
            j["d"] = model.params.arima.d;
            j["intercept"] = model.ar.intercept;
            j["coefficients"] = model.ar.coefficients;
            break;
    }
    return j.dump(2) + "\n";
}

}  // namespace delayflow
