#include "delayflow/flow_ingest.hpp"

#include "delayflow/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

namespace delayflow {

namespace {

constexpr std::string_view kAfcHeader[] = {"passenger_id", "transaction_datetime", "type",
                                           "device_code",  "line",                 "station",
                                           "settlement_date"};
constexpr std::size_t kAfcColumns = 7;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<RecordKind> kind_from_string(std::string_view s) {
    const std::string k = lower(s);
    if (k == "entry") return RecordKind::Entry;
    if (k == "exit") return RecordKind::Exit;
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::Inflow ? "Inflow" : "Outflow"; }

std::optional<Direction> direction_from_string(std::string_view s) {
    const std::string k = lower(s);
    if (k == "inflow") return Direction::Inflow;
    if (k == "outflow") return Direction::Outflow;
    return std::nullopt;
}

AfcParseResult parse_afc(std::istream& in) {
    if (!in.good()) throw InputError("unreadable AFC input stream");

    std::string record;
    if (!read_csv_record(in, record)) throw SchemaError("AFC input has no header row");

    const auto header = split_csv_row(record);
    if (header.size() != kAfcColumns) {
        throw SchemaError("AFC header has " + std::to_string(header.size()) + " columns, expected 7");
    }
    for (std::size_t i = 0; i < kAfcColumns; ++i) {
        if (header[i] != kAfcHeader[i]) {
            throw SchemaError("unknown AFC header layout: column " + std::to_string(i + 1) + " is '" +
                              header[i] + "', expected '" + std::string(kAfcHeader[i]) + "'");
        }
    }

    AfcParseResult result;
    std::size_t row_number = 1;
    while (read_csv_record(in, record)) {
        ++row_number;
        if (trim(record).empty()) continue;
        const auto fields = split_csv_row(record);
        if (fields.size() != kAfcColumns) {
            result.rejected.push_back({row_number, "expected 7 fields, got " + std::to_string(fields.size())});
            continue;
        }
        AfcRecord rec;
        rec.passenger_id = fields[0];
        try {
            rec.timestamp = parse_datetime(fields[1]);
        } catch (const ValidationError& e) {
            result.rejected.push_back({row_number, std::string("bad timestamp: ") + e.what()});
            continue;
        }
        const auto kind = kind_from_string(fields[2]);
        if (!kind) {
            result.rejected.push_back({row_number, "unknown transaction type '" + fields[2] + "'"});
            continue;
        }
        rec.kind = *kind;
        rec.device_code = fields[3];
        rec.line_id = fields[4];
        rec.station_id = fields[5];
        if (rec.station_id.empty()) {
            result.rejected.push_back({row_number, "empty station"});
            continue;
        }
        try {
            rec.settlement_date = parse_date(fields[6]);
        } catch (const ValidationError& e) {
            result.rejected.push_back({row_number, std::string("bad settlement date: ") + e.what()});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    if (in.bad()) throw InputError("I/O failure while reading AFC input");
    return result;
}

CleanResult clean(const std::vector<AfcRecord>& records, const std::vector<std::string>& station_registry) {
    const std::unordered_set<std::string> known(station_registry.begin(), station_registry.end());
    CleanResult result;
    result.records.reserve(records.size());
    for (const auto& rec : records) {
        if (rec.timestamp.minute_of_day < kServiceStartMinute ||
            rec.timestamp.minute_of_day >= kServiceEndMinute) {
            ++result.dropped_outside_hours;
            continue;
        }
        if (!known.contains(rec.station_id)) {
            ++result.dropped_unknown_station;
            continue;
        }
        result.records.push_back(rec);
    }
    return result;
}

std::optional<std::int64_t> FlowSeries::value_at(const TimeBin& bin) const {
    const auto it = values.find(bin);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

std::optional<Date> FlowSeries::first_date() const {
    if (values.empty()) return std::nullopt;
    return values.begin()->first.service_date;
}

std::optional<Date> FlowSeries::last_date() const {
    if (values.empty()) return std::nullopt;
    return values.rbegin()->first.service_date;
}

FlowStore::FlowStore(std::vector<std::string> registry) : registry_(std::move(registry)) {
    for (const auto& station : registry_) {
        for (Direction dir : {Direction::Inflow, Direction::Outflow}) {
            auto& s = series_[{station, static_cast<int>(dir)}];
            s.station_id = station;
            s.direction = dir;
        }
    }
}

FlowSeries& FlowStore::series(const std::string& station, Direction dir) {
    const auto key = std::make_pair(station, static_cast<int>(dir));
    auto it = series_.find(key);
    if (it == series_.end()) {
        if (std::find(registry_.begin(), registry_.end(), station) == registry_.end()) {
            registry_.push_back(station);
        }
        it = series_.emplace(key, FlowSeries{station, dir, {}}).first;
    }
    return it->second;
}

const FlowSeries* FlowStore::find(const std::string& station, Direction dir) const {
    const auto it = series_.find({station, static_cast<int>(dir)});
    return it == series_.end() ? nullptr : &it->second;
}

std::vector<const FlowSeries*> FlowStore::all() const {
    std::vector<const FlowSeries*> out;
    out.reserve(series_.size());
    for (const auto& station : registry_) {
        for (Direction dir : {Direction::Inflow, Direction::Outflow}) {
            if (const auto* s = find(station, dir)) out.push_back(s);
        }
    }
    return out;
}

std::int64_t FlowStore::total(Direction dir) const {
    std::int64_t sum = 0;
    for (const auto& [key, s] : series_) {
        if (s.direction != dir) continue;
        for (const auto& [bin, count] : s.values) sum += count;
    }
    return sum;
}

FlowStore aggregate_flows(const std::vector<AfcRecord>& records,
                          const std::vector<std::string>& station_registry) {
    if (records.empty()) return FlowStore{};

    Date first = records.front().timestamp.date;
    Date last = first;
    for (const auto& rec : records) {
        first = std::min(first, rec.timestamp.date);
        last = std::max(last, rec.timestamp.date);
    }

    FlowStore store(station_registry);
    for (const auto& station : station_registry) {
        for (Direction dir : {Direction::Inflow, Direction::Outflow}) {
            auto& values = store.series(station, dir).values;
            for (Date day = first; day <= last; day += std::chrono::days{1}) {
                for (int b = 0; b < kBinsPerDay; ++b) values[{day, b}] = 0;
            }
        }
    }

    const std::unordered_set<std::string> known(station_registry.begin(), station_registry.end());
    for (const auto& rec : records) {
        if (!known.contains(rec.station_id)) continue;  // callers clean() first
        const auto bin = bin_of(rec.timestamp);
        if (!bin) continue;
        const Direction dir = rec.kind == RecordKind::Entry ? Direction::Inflow : Direction::Outflow;
        ++store.series(rec.station_id, dir).values[*bin];
    }
    return store;
}

void write_flow_csv(const FlowStore& store, std::ostream& out) {
    out << "station_id,direction,service_date,bin_index,count\n";
    for (const auto* s : store.all()) {
        for (const auto& [bin, count] : s->values) {
            out << csv_quote(s->station_id) << ',' << to_string(s->direction) << ','
                << format_date(bin.service_date) << ',' << bin.bin_index << ',' << count << '\n';
        }
    }
}

FlowStore read_flow_csv(std::istream& in) {
    if (!in.good()) throw InputError("unreadable flow CSV stream");
    std::string record;
    if (!read_csv_record(in, record)) throw SchemaError("flow CSV has no header row");
    if (split_csv_row(record) !=
        std::vector<std::string>{"station_id", "direction", "service_date", "bin_index", "count"}) {
        throw SchemaError("unknown flow CSV header layout");
    }

    FlowStore store;
    std::size_t row_number = 1;
    while (read_csv_record(in, record)) {
        ++row_number;
        if (trim(record).empty()) continue;
        const auto fields = split_csv_row(record);
        if (fields.size() != 5) {
            throw ValidationError("flow CSV row " + std::to_string(row_number) + ": expected 5 fields");
        }
        const auto dir = direction_from_string(fields[1]);
        if (!dir) throw ValidationError("flow CSV row " + std::to_string(row_number) + ": bad direction");
        int bin_index = 0;
        auto [p1, e1] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), bin_index);
        std::int64_t count = 0;
        auto [p2, e2] = std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(), count);
        if (e1 != std::errc{} || e2 != std::errc{} || bin_index < 0 || bin_index >= kBinsPerDay || count < 0) {
            throw ValidationError("flow CSV row " + std::to_string(row_number) + ": bad bin or count");
        }
        const TimeBin bin{parse_date(fields[2]), bin_index};
        auto& series = store.series(fields[0], *dir);
        if (series.values.contains(bin)) {
            throw ValidationError("flow CSV row " + std::to_string(row_number) + ": duplicate bin");
        }
        series.values[bin] = count;
    }
    return store;
}

std::size_t apply_outlier_filter(FlowStore& store, double multiple) {
    std::size_t replaced = 0;
    for (const auto& station : store.stations()) {
        for (Direction dir : {Direction::Inflow, Direction::Outflow}) {
            const auto* cs = store.find(station, dir);
            if (!cs || cs->values.empty()) continue;
            auto& s = store.series(station, dir);

            std::array<std::vector<std::int64_t>, kBinsPerDay> by_bin;
            for (const auto& [bin, count] : s.values) by_bin[bin.bin_index].push_back(count);

            std::array<double, kBinsPerDay> median{};
            for (int b = 0; b < kBinsPerDay; ++b) {
                auto& v = by_bin[b];
                if (v.empty()) continue;
                std::sort(v.begin(), v.end());
                const std::size_t n = v.size();
                median[b] = n % 2 == 1 ? static_cast<double>(v[n / 2])
                                       : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
            }
            for (auto& [bin, count] : s.values) {
                // max(median, 1) keeps sparse bins from flagging every nonzero count.
                const double threshold = multiple * std::max(median[bin.bin_index], 1.0);
                if (static_cast<double>(count) > threshold) {
                    count = static_cast<std::int64_t>(median[bin.bin_index] + 0.5);
                    ++replaced;
                }
            }
        }
    }
    return replaced;
}

}  // namespace delayflow
