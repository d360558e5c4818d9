#pragma once

#include "delayflow/calendar.hpp"
#include "delayflow/flow_ingest.hpp"

#include <string>

namespace delayflow {

/// One forecasting job: given the d bins ending at `anchor`, predict the next
/// u bins for the station/direction.
struct ForecastTask {
    std::string task_id;
    std::string station_id;
    Direction direction = Direction::Inflow;
    TimeBin anchor{};  // last observed bin (time t)
    int d = 1;         // history length in bins
    int u = 1;         // horizon in bins

    bool operator==(const ForecastTask&) const = default;
};

}  // namespace delayflow
