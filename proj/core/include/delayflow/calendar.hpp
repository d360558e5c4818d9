#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace delayflow {

/// Calendar date with day resolution (no timezone; service data is local time).
using Date = std::chrono::sys_days;

/// Accepts "2019-08-05", "2019/8/5" and "20190805".
Date parse_date(std::string_view text);
std::string format_date(Date d);
bool is_weekend(Date d);

/// Wall-clock time of day, minute precision.
struct ClockTime {
    int minute_of_day = 0;
    auto operator<=>(const ClockTime&) const = default;
};

/// Accepts "18:04" and "7:05".
ClockTime parse_clock(std::string_view text);
std::string format_clock(ClockTime t);

struct DateTime {
    Date date{};
    int minute_of_day = 0;
    auto operator<=>(const DateTime&) const = default;
};

/// Accepts "2019/8/1 4:36" and "2019-08-01 04:36".
DateTime parse_datetime(std::string_view text);
std::string format_datetime(const DateTime& dt);

// Service day: 06:00-24:00, resampled at 10-minute intervals.
inline constexpr int kBinsPerDay = 108;
inline constexpr int kBinMinutes = 10;
inline constexpr int kServiceStartMinute = 6 * 60;
inline constexpr int kServiceEndMinute = 24 * 60;

/// One 10-minute aggregation interval of a service day. Bin 0 covers
/// 06:00-06:09, bin 107 covers 23:50-23:59.
struct TimeBin {
    Date service_date{};
    int bin_index = 0;
    auto operator<=>(const TimeBin&) const = default;
};

/// Bin containing the instant, or nullopt outside service hours [06:00, 24:00).
std::optional<TimeBin> bin_of(const DateTime& dt);

int bin_start_minute(int bin_index);
std::string format_bin_time(int bin_index);  // "06:00"

/// Linearized bin index across days; supports arithmetic over day rollovers.
long long global_bin(const TimeBin& b);
TimeBin bin_from_global(long long g);
TimeBin advance(const TimeBin& b, long long steps);

/// Inclusive date interval.
struct DateRange {
    Date first{};
    Date last{};
    bool contains(Date d) const { return first <= d && d <= last; }
    long long days() const { return (last - first).count() + 1; }
    auto operator<=>(const DateRange&) const = default;
};

}  // namespace delayflow
