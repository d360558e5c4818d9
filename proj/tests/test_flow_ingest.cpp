#include "delayflow/errors.hpp"
#include "delayflow/flow_ingest.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

using namespace delayflow;

namespace {

constexpr const char* kHeader = "passenger_id,transaction_datetime,type,device_code,line,station,settlement_date";

AfcParseResult parse_text(const std::string& body) {
    std::istringstream in(std::string(kHeader) + "\n" + body);
    return parse_afc(in);
}

AfcRecord make_record(const std::string& station, const std::string& datetime, RecordKind kind) {
    AfcRecord rec;
    rec.passenger_id = "p";
    rec.timestamp = parse_datetime(datetime);
    rec.kind = kind;
    rec.station_id = station;
    rec.settlement_date = rec.timestamp.date;
    return rec;
}

}  // namespace

TEST_CASE("parse_afc accepts the sample transaction row") {
    const auto result = parse_text("880023346, 2019/8/1 4:36, Entry, 263033104, Line 5, Baigelong, 20190801\n");
    REQUIRE(result.records.size() == 1);
    REQUIRE(result.rejected.empty());
    const auto& rec = result.records.front();
    CHECK(rec.kind == RecordKind::Entry);
    CHECK(rec.station_id == "Baigelong");
    CHECK(rec.line_id == "Line 5");
    CHECK(rec.timestamp.minute_of_day == 4 * 60 + 36);
    CHECK(format_date(rec.settlement_date) == "2019-08-01");
}

TEST_CASE("parse_afc on an empty file with a valid header") {
    const auto result = parse_text("");
    CHECK(result.records.empty());
    CHECK(result.rejected.empty());
}

TEST_CASE("parse_afc rejects unknown transaction types with row numbers") {
    const auto result = parse_text(
        "1,2019/8/1 8:00,Entry,d,Line 1,A,20190801\n"
        "2,2019/8/1 8:01,Transfer,d,Line 1,A,20190801\n");
    CHECK(result.records.size() == 1);
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected.front().row_number == 3);
    CHECK(result.rejected.front().reason.find("unknown transaction type") != std::string::npos);
}

TEST_CASE("parse_afc collects malformed rows instead of dropping them") {
    const auto result = parse_text(
        "1,2019/8/1 8:00,Entry,d,Line 1,A,20190801\n"
        "2,not a time,Entry,d,Line 1,A,20190801\n"
        "3,2019/8/1 8:02,Exit,d,Line 1\n"
        "4,2019/8/1 8:03,Exit,d,Line 1,,20190801\n");
    CHECK(result.records.size() == 1);
    CHECK(result.rejected.size() == 3);
}

TEST_CASE("parse_afc fails fast on an unknown header layout") {
    std::istringstream in("card_id,when,type,device,line,station,settlement\n");
    CHECK_THROWS_AS(parse_afc(in), SchemaError);
}

TEST_CASE("clean drops pre-dawn records and keeps the 06:00 boundary") {
    const std::vector<std::string> registry = {"Baigelong", "Shenzhen North"};
    std::vector<AfcRecord> records = {
        make_record("Baigelong", "2019-08-01 04:36", RecordKind::Entry),
        make_record("Shenzhen North", "2019-08-01 04:54", RecordKind::Entry),
        make_record("Baigelong", "2019-08-01 06:00", RecordKind::Entry),
    };
    const auto result = clean(records, registry);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records.front().timestamp.minute_of_day == 6 * 60);
    CHECK(result.dropped_outside_hours == 2);
}

TEST_CASE("clean filters by service hours and registry, matching a brute-force filter") {
    const std::vector<std::string> registry = {"A", "B"};
    std::vector<AfcRecord> records;
    records.push_back(make_record("A", "2019-08-01 05:59", RecordKind::Entry));
    records.push_back(make_record("A", "2019-08-01 04:00", RecordKind::Exit));
    records.push_back(make_record("B", "2019-08-02 00:10", RecordKind::Entry));
    records.push_back(make_record("X", "2019-08-01 09:00", RecordKind::Entry));
    for (int i = 0; i < 6; ++i) {
        records.push_back(make_record(i % 2 ? "A" : "B", "2019-08-01 12:0" + std::to_string(i), RecordKind::Exit));
    }

    const auto result = clean(records, registry);
    CHECK(result.records.size() == 6);
    CHECK(result.dropped_outside_hours == 3);
    CHECK(result.dropped_unknown_station == 1);

    // independent re-implementation of the filter
    std::size_t expected = 0;
    for (const auto& rec : records) {
        const bool in_hours = rec.timestamp.minute_of_day >= 360 && rec.timestamp.minute_of_day < 1440;
        const bool known = rec.station_id == "A" || rec.station_id == "B";
        if (in_hours && known) ++expected;
    }
    CHECK(result.records.size() == expected);
}

TEST_CASE("clean is idempotent and order-preserving") {
    const std::vector<std::string> registry = {"A"};
    std::vector<AfcRecord> records;
    for (int i = 0; i < 20; ++i) {
        records.push_back(make_record(i % 3 ? "A" : "X", i % 4 ? "2019-08-01 10:00" : "2019-08-01 03:00",
                                      RecordKind::Entry));
        records.back().passenger_id = std::to_string(i);
    }
    const auto once = clean(records, registry);
    const auto twice = clean(once.records, registry);
    REQUIRE(once.records.size() == twice.records.size());
    for (std::size_t i = 0; i < once.records.size(); ++i) {
        CHECK(once.records[i].passenger_id == twice.records[i].passenger_id);
    }
    CHECK(twice.dropped_outside_hours == 0);
    CHECK(twice.dropped_unknown_station == 0);
}

TEST_CASE("aggregate_flows counts entries into the right bin") {
    const std::vector<std::string> registry = {"S"};
    std::vector<AfcRecord> records = {
        make_record("S", "2019-08-01 08:00", RecordKind::Entry),
        make_record("S", "2019-08-01 08:04", RecordKind::Entry),
        make_record("S", "2019-08-01 08:09", RecordKind::Entry),
    };
    const auto store = aggregate_flows(records, registry);
    const auto* inflow = store.find("S", Direction::Inflow);
    REQUIRE(inflow != nullptr);
    CHECK(inflow->value_at(TimeBin{parse_date("2019-08-01"), 12}) == 3);
    CHECK(inflow->value_at(TimeBin{parse_date("2019-08-01"), 13}) == 0);
}

TEST_CASE("aggregate_flows materializes all-zero series for idle registry stations") {
    const std::vector<std::string> registry = {"S", "Idle"};
    std::vector<AfcRecord> records = {make_record("S", "2019-08-01 08:00", RecordKind::Entry),
                                      make_record("S", "2019-08-02 09:00", RecordKind::Exit)};
    const auto store = aggregate_flows(records, registry);
    const auto* idle = store.find("Idle", Direction::Outflow);
    REQUIRE(idle != nullptr);
    CHECK(idle->values.size() == 2 * kBinsPerDay);  // both observed days materialized
    for (const auto& [bin, count] : idle->values) CHECK(count == 0);
}

TEST_CASE("aggregate_flows with no records yields an empty store") {
    CHECK(aggregate_flows({}, {"A", "B"}).empty());
}

TEST_CASE("aggregate_flows matches an independent brute-force tally on a randomized fixture") {
    std::mt19937 rng(20190801);
    const std::vector<std::string> registry = {"A", "B", "C"};
    std::uniform_int_distribution<int> station_pick(0, 2);
    std::uniform_int_distribution<int> minute_pick(6 * 60, 24 * 60 - 1);
    std::uniform_int_distribution<int> day_pick(0, 2);
    std::uniform_int_distribution<int> kind_pick(0, 1);

    std::vector<AfcRecord> records;
    for (int i = 0; i < 1000; ++i) {
        AfcRecord rec;
        rec.passenger_id = std::to_string(i);
        rec.station_id = registry[static_cast<std::size_t>(station_pick(rng))];
        rec.kind = kind_pick(rng) ? RecordKind::Entry : RecordKind::Exit;
        rec.timestamp = DateTime{parse_date("2019-08-01") + std::chrono::days{day_pick(rng)}, minute_pick(rng)};
        rec.settlement_date = rec.timestamp.date;
        records.push_back(rec);
    }

    // brute-force oracle over all records
    std::map<std::tuple<std::string, int, Date, int>, long long> expected;
    for (const auto& rec : records) {
        const int dir = rec.kind == RecordKind::Entry ? 0 : 1;
        const int bin = (rec.timestamp.minute_of_day - 360) / 10;
        ++expected[{rec.station_id, dir, rec.timestamp.date, bin}];
    }

    const auto store = aggregate_flows(records, registry);
    long long checked = 0;
    for (const auto& station : registry) {
        for (const Direction dir : {Direction::Inflow, Direction::Outflow}) {
            const auto* series = store.find(station, dir);
            REQUIRE(series != nullptr);
            for (const auto& [bin, count] : series->values) {
                const auto key = std::make_tuple(station, dir == Direction::Inflow ? 0 : 1, bin.service_date,
                                                 bin.bin_index);
                const auto it = expected.find(key);
                CHECK(count == (it == expected.end() ? 0 : it->second));
                checked += count;
            }
        }
    }
    CHECK(checked == 1000);
}

TEST_CASE("conservation: inflow totals equal cleaned entry counts") {
    const std::vector<std::string> registry = {"A", "B"};
    std::mt19937 rng(7);
    std::vector<AfcRecord> records;
    std::uniform_int_distribution<int> minute_pick(0, 24 * 60 - 1);
    for (int i = 0; i < 500; ++i) {
        records.push_back(make_record(i % 2 ? "A" : "B",
                                      "2019-08-01 10:00", i % 3 ? RecordKind::Entry : RecordKind::Exit));
        records.back().timestamp.minute_of_day = minute_pick(rng);
    }
    const auto cleaned = clean(records, registry);
    long long entries = 0;
    long long exits = 0;
    for (const auto& rec : cleaned.records) ++(rec.kind == RecordKind::Entry ? entries : exits);

    const auto store = aggregate_flows(cleaned.records, registry);
    CHECK(store.total(Direction::Inflow) == entries);
    CHECK(store.total(Direction::Outflow) == exits);
}

TEST_CASE("flow CSV round-trips exactly") {
    const std::vector<std::string> registry = {"A", "B"};
    std::vector<AfcRecord> records = {
        make_record("A", "2019-08-01 08:00", RecordKind::Entry),
        make_record("B", "2019-08-01 21:13", RecordKind::Exit),
        make_record("A", "2019-08-02 12:30", RecordKind::Exit),
    };
    const auto store = aggregate_flows(records, registry);

    std::ostringstream out;
    write_flow_csv(store, out);
    std::istringstream in(out.str());
    const auto reloaded = read_flow_csv(in);
    CHECK(reloaded == store);
}

TEST_CASE("read_flow_csv rejects duplicate bins and bad headers") {
    std::istringstream bad_header("station,dir,day,bin,count\n");
    CHECK_THROWS_AS(read_flow_csv(bad_header), SchemaError);
    std::istringstream dup(
        "station_id,direction,service_date,bin_index,count\n"
        "A,Inflow,2019-08-01,0,1\n"
        "A,Inflow,2019-08-01,0,2\n");
    CHECK_THROWS_AS(read_flow_csv(dup), ValidationError);
}

TEST_CASE("outlier filter replaces spikes with the same-bin median") {
    const std::vector<std::string> registry = {"A"};
    std::vector<AfcRecord> records;
    // five days of quiet bin 12 plus one day with a huge spike
    for (int day = 0; day < 6; ++day) {
        const int copies = day == 5 ? 500 : 5;
        for (int i = 0; i < copies; ++i) {
            records.push_back(make_record("A", "2019-08-0" + std::to_string(day + 1) + " 08:0" +
                                                   std::to_string(i % 10),
                                          RecordKind::Entry));
        }
    }
    auto store = aggregate_flows(records, registry);
    const std::size_t replaced = apply_outlier_filter(store, 8.0);
    CHECK(replaced == 1);
    CHECK(store.find("A", Direction::Inflow)->value_at(TimeBin{parse_date("2019-08-06"), 12}) == 5);
}
