#pragma once

#include "delayflow/calendar.hpp"
#include "delayflow/event_topology.hpp"
#include "delayflow/flow_ingest.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace delayflow {

/// One injected disruption: outflow at the interval stations drops by
/// drop_fraction during the window; the withheld volume re-emerges over
/// surge_duration bins right after the window, scaled by surge_fraction.
struct DelaySpec {
    int day_index = 0;        // 0-based offset from start_date
    int window_start_bin = 0;
    int window_bins = 6;
    int interval_from = 0;    // station indices on the line graph
    int interval_to = 0;
    DelayType type = DelayType::TrainFault;
    double drop_fraction = 0.5;
    double surge_fraction = 1.0;
    int surge_duration_bins = 3;
};

struct SynthConfig {
    std::uint64_t seed = 42;
    int n_stations = 12;
    int n_days = 21;
    Date start_date = parse_date("2019-08-05");  // a Monday
    std::vector<double> base_profile;            // per-bin mean, default bimodal
    double weekend_scale = 0.6;
    bool poisson_noise = true;
    std::vector<DelaySpec> delays;               // default: one train-range, one test-range event
};

/// Morning peak around bins 12-18 (08:00-09:10), evening peak around bins
/// 66-72 (17:00-18:10).
std::vector<double> default_profile();
std::vector<DelaySpec> default_delays();
SynthConfig default_synth_config();

std::string synth_station_name(int index);  // "S01", "S02", ...

/// Pre-noise mean count for one cell, including weekend scaling and delay
/// drop/surge effects. Pure; consumes no randomness.
double analytic_mean(const SynthConfig& config, int station_index, Direction direction, int day_index, int bin);

struct SynthOutput {
    std::string afc_csv;
    std::string events_csv;
    std::string adjacency_csv;
};

/// Generates a schema-compatible dataset on a line-graph network. Byte-wise
/// reproducible from the seed. Throws ConfigError for windows that leave
/// service hours or malformed fractions.
SynthOutput generate(const SynthConfig& config);

}  // namespace delayflow
