#include "delayflow/synth_data.hpp"

#include "delayflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace delayflow {

namespace {

/// Knuth's product method; deterministic for a given engine state, unlike
/// std::poisson_distribution whose algorithm is implementation-defined.
long long knuth_poisson(std::mt19937_64& rng, double lambda) {
    if (lambda <= 0.0) return 0;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double limit = std::exp(-lambda);
    long long k = 0;
    double product = 1.0;
    do {
        ++k;
        product *= uniform(rng);
    } while (product > limit);
    return k - 1;
}

void validate(const SynthConfig& config) {
    if (config.n_stations < 1) throw ConfigError("n_stations must be >= 1");
    if (config.n_days < 1) throw ConfigError("n_days must be >= 1");
    if (config.weekend_scale <= 0.0 || config.weekend_scale > 1.0) {
        throw ConfigError("weekend_scale must lie in (0, 1]");
    }
    if (static_cast<int>(config.base_profile.size()) != kBinsPerDay) {
        throw ConfigError("base_profile must have exactly " + std::to_string(kBinsPerDay) + " bins");
    }
    for (const auto& delay : config.delays) {
        if (delay.day_index < 0 || delay.day_index >= config.n_days) {
            throw ConfigError("delay day_index outside the generated range");
        }
        if (delay.window_start_bin < 0 || delay.window_bins < 1 ||
            delay.window_start_bin + delay.window_bins + delay.surge_duration_bins > kBinsPerDay) {
            throw ConfigError("delay window outside service hours");
        }
        if (delay.drop_fraction < 0.0 || delay.drop_fraction > 1.0 || delay.surge_fraction < 0.0 ||
            delay.surge_fraction > 1.0) {
            throw ConfigError("delay fractions must lie in [0, 1]");
        }
        if (delay.surge_duration_bins < 1 && delay.surge_fraction > 0.0) {
            throw ConfigError("surge_duration_bins must be >= 1 when surge_fraction > 0");
        }
        const int lo = std::min(delay.interval_from, delay.interval_to);
        const int hi = std::max(delay.interval_from, delay.interval_to);
        if (lo < 0 || hi >= config.n_stations || lo == hi) {
            throw ConfigError("delay interval must name two distinct stations in range");
        }
    }
}

std::string fault_description(const DelaySpec& delay, const std::string& from, const std::string& to) {
    std::string label(to_string(delay.type));
    std::string text = label + " reported between " + from + " and " + to +
                       " on Line 1. Trains in the affected interval ran with extended headways while crews "
                       "worked to restore normal operation, and several services turned back at the interval "
                       "boundaries. Station staff held passengers at the platforms during the busiest minutes "
                       "and released them gradually once headways recovered, so exits at the affected stations "
                       "were suppressed during the window and rebounded shortly after the fault cleared.";
    return text;
}

}  // namespace

std::vector<double> default_profile() {
    std::vector<double> profile(kBinsPerDay, 0.0);
    const auto bump = [](double x, double center, double width, double height) {
        const double z = (x - center) / width;
        return height * std::exp(-0.5 * z * z);
    };
    for (int b = 0; b < kBinsPerDay; ++b) {
        profile[b] = 8.0 + bump(b, 15.0, 3.0, 40.0) + bump(b, 69.0, 3.5, 44.0);
    }
    return profile;
}

std::vector<DelaySpec> default_delays() {
    // One event in the usual training window (day 9) and one in the usual
    // test window (day 16), both on the evening peak.
    DelaySpec train_event{9, 12, 6, 3, 5, DelayType::TrainFault, 0.5, 1.0, 3};
    DelaySpec test_event{16, 66, 6, 6, 8, DelayType::SignalingFault, 0.5, 1.0, 3};
    return {train_event, test_event};
}

SynthConfig default_synth_config() {
    SynthConfig config;
    config.base_profile = default_profile();
    config.delays = default_delays();
    return config;
}

std::string synth_station_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%02d", index + 1);
    return buf;
}

double analytic_mean(const SynthConfig& config, int station_index, Direction direction, int day_index, int bin) {
    const Date day = config.start_date + std::chrono::days{day_index};
    double mean = config.base_profile[static_cast<std::size_t>(bin)];
    if (is_weekend(day)) mean *= config.weekend_scale;

    if (direction == Direction::Outflow) {
        for (const auto& delay : config.delays) {
            if (delay.day_index != day_index) continue;
            const int lo = std::min(delay.interval_from, delay.interval_to);
            const int hi = std::max(delay.interval_from, delay.interval_to);
            if (station_index < lo || station_index > hi) continue;

            const int window_end = delay.window_start_bin + delay.window_bins;  // exclusive
            if (bin >= delay.window_start_bin && bin < window_end) {
                mean *= 1.0 - delay.drop_fraction;
            } else if (delay.surge_fraction > 0.0 && bin >= window_end &&
                       bin < window_end + delay.surge_duration_bins) {
                double withheld = 0.0;
                const double scale = is_weekend(day) ? config.weekend_scale : 1.0;
                for (int wb = delay.window_start_bin; wb < window_end; ++wb) {
                    withheld += config.base_profile[static_cast<std::size_t>(wb)] * scale * delay.drop_fraction;
                }
                mean += withheld * delay.surge_fraction / static_cast<double>(delay.surge_duration_bins);
            }
        }
    }
    return mean;
}

SynthOutput generate(const SynthConfig& config) {
    validate(config);

    std::mt19937_64 rng(config.seed);
    std::ostringstream afc;
    afc << "passenger_id,transaction_datetime,type,device_code,line,station,settlement_date\n";

    long long passenger_counter = 0;
    for (int day_index = 0; day_index < config.n_days; ++day_index) {
        const Date day = config.start_date + std::chrono::days{day_index};
        const std::chrono::year_month_day ymd{day};
        char date_part[16];
        std::snprintf(date_part, sizeof(date_part), "%d/%u/%u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        char settlement[16];
        std::snprintf(settlement, sizeof(settlement), "%04d%02u%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));

        for (int bin = 0; bin < kBinsPerDay; ++bin) {
            for (int station = 0; station < config.n_stations; ++station) {
                const std::string station_name = synth_station_name(station);
                for (const Direction dir : {Direction::Inflow, Direction::Outflow}) {
                    const double mean = analytic_mean(config, station, dir, day_index, bin);
                    const long long count =
                        config.poisson_noise ? knuth_poisson(rng, mean) : std::llround(mean);
                    for (long long i = 0; i < count; ++i) {
                        const int minute = bin_start_minute(bin) + static_cast<int>(i % kBinMinutes);
                        ++passenger_counter;
                        afc << 880000000 + passenger_counter << ',' << date_part << ' ' << minute / 60 << ':';
                        char mm[8];
                        std::snprintf(mm, sizeof(mm), "%02d", minute % 60);
                        afc << mm << ',' << (dir == Direction::Inflow ? "Entry" : "Exit") << ",26"
                            << 1000 + station << ',' << "Line 1" << ',' << station_name << ',' << settlement
                            << '\n';
                    }
                }
            }
        }
    }

    std::ostringstream events;
    events << "event_id,line,delay_type,date,start_time,end_time,interval_from,interval_to,direction,"
              "description,scope\n";
    int event_counter = 0;
    for (const auto& delay : config.delays) {
        ++event_counter;
        const Date day = config.start_date + std::chrono::days{delay.day_index};
        const int start_minute = bin_start_minute(delay.window_start_bin);
        const int end_minute = bin_start_minute(delay.window_start_bin + delay.window_bins - 1) + kBinMinutes;
        const std::string from = synth_station_name(delay.interval_from);
        const std::string to = synth_station_name(delay.interval_to);
        char event_id[16];
        std::snprintf(event_id, sizeof(event_id), "E%02d", event_counter);
        events << event_id << ",Line 1," << to_string(delay.type) << ',' << format_date(day) << ','
               << format_clock(ClockTime{start_minute}) << ',' << format_clock(ClockTime{end_minute}) << ','
               << from << ',' << to << ',' << (delay.interval_from <= delay.interval_to ? "Up" : "Down") << ','
               << csv_quote(fault_description(delay, from, to)) << ",\n";
    }

    std::vector<std::string> stations;
    stations.reserve(static_cast<std::size_t>(config.n_stations));
    for (int i = 0; i < config.n_stations; ++i) stations.push_back(synth_station_name(i));

    SynthOutput out;
    out.afc_csv = afc.str();
    out.events_csv = events.str();
    out.adjacency_csv = AdjacencyMatrix::line_graph(stations).to_csv();
    return out;
}

}  // namespace delayflow
