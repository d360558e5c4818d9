#pragma once

#include "delayflow/calendar.hpp"
#include "delayflow/flow_ingest.hpp"
#include "delayflow/task.hpp"

#include <array>
#include <string>
#include <vector>

namespace delayflow {

enum class BaselineKind { HistoricalAverage, SeasonalNaive, Arima };

std::string_view to_string(BaselineKind k);

struct ArimaParams {
    int p = 6;  // autoregressive order
    int d = 1;  // differencing order, 0 or 1
};

struct BaselineParams {
    ArimaParams arima;
    /// Comparable-day lookback for the seasonal-naive rule; must match the
    /// prompt templates' history_days for the mock-equivalence property.
    int history_days = 3;
};

/// Ordinary-least-squares AR(p) fit with intercept, pooled over independent
/// segments (lags never span a segment boundary).
struct ArFit {
    double intercept = 0.0;
    std::vector<double> coefficients;  // lag 1..p
};

ArFit fit_ar_ols(const std::vector<std::vector<double>>& segments, int p);

/// A fitted classical forecaster for one station/direction series. Fitting
/// reads training-range bins only; the stored series is used as realized
/// history when rolling forward.
struct BaselineModel {
    BaselineKind kind = BaselineKind::SeasonalNaive;
    BaselineParams params;
    FlowSeries series;
    DateRange training{};
    // HistoricalAverage: per (day-type, bin) means. 0 = weekday, 1 = weekend.
    std::array<std::array<double, kBinsPerDay>, 2> means{};
    // Arima
    ArFit ar;
};

/// Throws FitError when the training range holds no bins, or fewer than
/// p + d + 1 usable bins for Arima.
BaselineModel fit(BaselineKind kind, const BaselineParams& params, const FlowSeries& series,
                  const DateRange& training);

/// u-step forecast for the task. Arima rolls forward feeding its own
/// predictions; outputs are clamped at zero and returned at full precision.
/// Throws HistoryUnderflowError when the task history is unavailable.
std::vector<double> predict(const BaselineModel& model, const ForecastTask& task);

/// Fitted-state summary (coefficients or means) as a JSON document.
std::string model_summary_json(const BaselineModel& model);

}  // namespace delayflow
