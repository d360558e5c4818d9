#pragma once

#include "delayflow/calendar.hpp"
#include "delayflow/csv.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayflow {

enum class RecordKind { Entry, Exit };
enum class Direction { Inflow, Outflow };

std::string_view to_string(Direction d);
std::optional<Direction> direction_from_string(std::string_view s);

/// One card-swipe transaction.
struct AfcRecord {
    std::string passenger_id;
    DateTime timestamp{};
    RecordKind kind = RecordKind::Entry;
    std::string device_code;
    std::string line_id;
    std::string station_id;
    Date settlement_date{};
};

struct AfcParseResult {
    std::vector<AfcRecord> records;
    std::vector<RowDiagnostic> rejected;
};

/// Expected header: passenger_id,transaction_datetime,type,device_code,line,station,settlement_date
/// Well-formed rows become records; malformed rows land in `rejected` with
/// their original row number and a reason.
///
/// Throws InputError for an unreadable stream and SchemaError for an unknown
/// header layout.
AfcParseResult parse_afc(std::istream& in);

struct CleanResult {
    std::vector<AfcRecord> records;
    std::size_t dropped_outside_hours = 0;
    std::size_t dropped_unknown_station = 0;
};

/// Keeps records whose timestamp falls in [06:00, 24:00) and whose station is
/// in the registry. Input order is preserved; the filter is idempotent.
CleanResult clean(const std::vector<AfcRecord>& records, const std::vector<std::string>& station_registry);

/// Binned counts for one station and direction. Bins are strictly ordered by
/// (service_date, bin_index); all counts are >= 0.
struct FlowSeries {
    std::string station_id;
    Direction direction = Direction::Inflow;
    std::map<TimeBin, std::int64_t> values;

    std::optional<std::int64_t> value_at(const TimeBin& bin) const;
    std::optional<Date> first_date() const;
    std::optional<Date> last_date() const;
    bool operator==(const FlowSeries&) const = default;
};

/// The per-station inflow/outflow series of one dataset, ordered by the
/// station registry.
class FlowStore {
public:
    FlowStore() = default;
    explicit FlowStore(std::vector<std::string> registry);

    const std::vector<std::string>& stations() const { return registry_; }
    FlowSeries& series(const std::string& station, Direction dir);
    const FlowSeries* find(const std::string& station, Direction dir) const;
    /// Registry order, Inflow before Outflow.
    std::vector<const FlowSeries*> all() const;
    std::size_t size() const { return series_.size(); }
    bool empty() const { return series_.empty(); }
    std::int64_t total(Direction dir) const;

    bool operator==(const FlowStore&) const = default;

private:
    std::vector<std::string> registry_;
    std::map<std::pair<std::string, int>, FlowSeries> series_;
};

/// Tallies cleaned records into 10-minute bins. Every registry station gets
/// one Inflow and one Outflow series; bins without records are materialized
/// with count 0 across the observed date range. No records at all yields an
/// empty store.
FlowStore aggregate_flows(const std::vector<AfcRecord>& records, const std::vector<std::string>& station_registry);

// Flow CSV: station_id,direction,service_date,bin_index,count
void write_flow_csv(const FlowStore& store, std::ostream& out);
FlowStore read_flow_csv(std::istream& in);

/// Replaces bins whose count exceeds `multiple` times the same-bin-index
/// median of their station/direction with that median. Returns the number of
/// bins replaced. Off by default in the pipeline; meant for raw AFC feeds.
std::size_t apply_outlier_filter(FlowStore& store, double multiple = 8.0);

}  // namespace delayflow
