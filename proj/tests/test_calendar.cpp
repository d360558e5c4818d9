#include "delayflow/calendar.hpp"
#include "delayflow/errors.hpp"

#include <doctest.h>

using namespace delayflow;

TEST_CASE("date parsing accepts the three supported spellings") {
    const Date expected = parse_date("2019-08-05");
    CHECK(parse_date("2019/8/5") == expected);
    CHECK(parse_date("20190805") == expected);
    CHECK(format_date(expected) == "2019-08-05");
    CHECK_THROWS_AS(parse_date("2019-13-01"), ValidationError);
    CHECK_THROWS_AS(parse_date("notadate"), ValidationError);
}

TEST_CASE("datetime parsing handles both table spellings") {
    const DateTime a = parse_datetime("2019/8/1 4:36");
    CHECK(format_date(a.date) == "2019-08-01");
    CHECK(a.minute_of_day == 4 * 60 + 36);
    const DateTime b = parse_datetime("2019-08-01 04:36");
    CHECK(a == b);
    CHECK_THROWS_AS(parse_datetime("2019-08-01"), ValidationError);
}

TEST_CASE("a service day spans exactly 108 bins") {
    CHECK(kBinsPerDay == 108);
    CHECK(kBinsPerDay == 18 * 6);  // 18 service hours, six 10-minute bins each
}

TEST_CASE("bin_of maps service hours and rejects the rest") {
    const Date day = parse_date("2019-08-05");
    CHECK(bin_of({day, 6 * 60}) == TimeBin{day, 0});
    CHECK(bin_of({day, 6 * 60 + 9}) == TimeBin{day, 0});
    CHECK(bin_of({day, 6 * 60 + 10}) == TimeBin{day, 1});
    CHECK(bin_of({day, 23 * 60 + 50}) == TimeBin{day, 107});
    CHECK(bin_of({day, 23 * 60 + 59}) == TimeBin{day, 107});
    CHECK_FALSE(bin_of({day, 5 * 60 + 59}).has_value());
    CHECK_FALSE(bin_of({day, 0}).has_value());
}

TEST_CASE("global bin arithmetic rolls across days") {
    const Date day = parse_date("2019-08-05");
    const TimeBin last{day, 107};
    const TimeBin next = advance(last, 1);
    CHECK(next.service_date == day + std::chrono::days{1});
    CHECK(next.bin_index == 0);
    CHECK(advance(next, -1) == last);
    CHECK(bin_from_global(global_bin(last)) == last);
}

TEST_CASE("weekday classification") {
    CHECK_FALSE(is_weekend(parse_date("2019-08-05")));  // Monday
    CHECK(is_weekend(parse_date("2019-08-10")));        // Saturday
    CHECK(is_weekend(parse_date("2019-08-11")));        // Sunday
    CHECK_FALSE(is_weekend(parse_date("2019-08-12")));
}

TEST_CASE("clock formatting round-trips") {
    CHECK(format_clock(parse_clock("18:04")) == "18:04");
    CHECK(format_clock(parse_clock("7:05")) == "07:05");
    CHECK(format_bin_time(0) == "06:00");
    CHECK(format_bin_time(107) == "23:50");
    CHECK_THROWS_AS(parse_clock("25:00"), ValidationError);
}
