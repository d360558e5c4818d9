#include "delayflow/calendar.hpp"

#include "delayflow/errors.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace delayflow {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

int to_int(std::string_view s) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError("not a number: '" + std::string(s) + "'");
    }
    return value;
}

Date make_date(int y, int m, int d, std::string_view original) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw ValidationError("invalid calendar date: '" + std::string(original) + "'");
    }
    return std::chrono::sys_days{ymd};
}

}  // namespace

Date parse_date(std::string_view text) {
    if (all_digits(text) && text.size() == 8) {
        return make_date(to_int(text.substr(0, 4)), to_int(text.substr(4, 2)), to_int(text.substr(6, 2)), text);
    }
    const char sep = text.find('/') != std::string_view::npos ? '/' : '-';
    const auto p1 = text.find(sep);
    const auto p2 = p1 == std::string_view::npos ? std::string_view::npos : text.find(sep, p1 + 1);
    if (p1 == std::string_view::npos || p2 == std::string_view::npos) {
        throw ValidationError("invalid date: '" + std::string(text) + "'");
    }
    return make_date(to_int(text.substr(0, p1)), to_int(text.substr(p1 + 1, p2 - p1 - 1)),
                     to_int(text.substr(p2 + 1)), text);
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

bool is_weekend(Date d) {
    const std::chrono::weekday wd{d};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

ClockTime parse_clock(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw ValidationError("invalid clock time: '" + std::string(text) + "'");
    }
    const int h = to_int(text.substr(0, colon));
    const int m = to_int(text.substr(colon + 1));
    if (h < 0 || h > 24 || m < 0 || m > 59 || (h == 24 && m != 0)) {
        throw ValidationError("invalid clock time: '" + std::string(text) + "'");
    }
    return ClockTime{h * 60 + m};
}

std::string format_clock(ClockTime t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", t.minute_of_day / 60, t.minute_of_day % 60);
    return buf;
}

DateTime parse_datetime(std::string_view text) {
    const auto space = text.find(' ');
    if (space == std::string_view::npos) {
        throw ValidationError("invalid date-time: '" + std::string(text) + "'");
    }
    auto clock_part = text.substr(space + 1);
    while (!clock_part.empty() && clock_part.front() == ' ') clock_part.remove_prefix(1);
    return DateTime{parse_date(text.substr(0, space)), parse_clock(clock_part).minute_of_day};
}

std::string format_datetime(const DateTime& dt) {
    return format_date(dt.date) + " " + format_clock(ClockTime{dt.minute_of_day});
}

std::optional<TimeBin> bin_of(const DateTime& dt) {
    if (dt.minute_of_day < kServiceStartMinute || dt.minute_of_day >= kServiceEndMinute) {
        return std::nullopt;
    }
    return TimeBin{dt.date, (dt.minute_of_day - kServiceStartMinute) / kBinMinutes};
}

int bin_start_minute(int bin_index) { return kServiceStartMinute + bin_index * kBinMinutes; }

std::string format_bin_time(int bin_index) { return format_clock(ClockTime{bin_start_minute(bin_index)}); }

long long global_bin(const TimeBin& b) {
    return static_cast<long long>(b.service_date.time_since_epoch().count()) * kBinsPerDay + b.bin_index;
}

TimeBin bin_from_global(long long g) {
    long long day = g / kBinsPerDay;
    long long idx = g % kBinsPerDay;
    if (idx < 0) {
        idx += kBinsPerDay;
        --day;
    }
    return TimeBin{Date{std::chrono::days{day}}, static_cast<int>(idx)};
}

TimeBin advance(const TimeBin& b, long long steps) { return bin_from_global(global_bin(b) + steps); }

}  // namespace delayflow
