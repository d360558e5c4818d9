#pragma once

#include "delayflow/calendar.hpp"
#include "delayflow/csv.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace delayflow {

enum class DelayType { TrainFault, SignalingFault, PowerSupplyFault, Other };
enum class TrackDirection { Up, Down };

std::string_view to_string(DelayType t);
std::string_view to_string(TrackDirection d);

/// Maps free-text fault labels ("Signaling Fault", "signaling_fault", ...) to
/// the enum. Unknown labels yield nullopt and are mapped to Other by the
/// loader, with a diagnostic.
std::optional<DelayType> delay_type_from_label(std::string_view label);
std::optional<TrackDirection> track_direction_from_label(std::string_view label);

/// One service disruption: time window (E_T), line and interval (E_L), and a
/// free-text description (E_H).
struct DelayEvent {
    std::string event_id;
    std::string line_id;
    DelayType delay_type = DelayType::Other;
    Date date{};
    ClockTime start_time{};
    ClockTime end_time{};
    std::string interval_from;
    std::string interval_to;
    TrackDirection direction = TrackDirection::Up;
    std::string description;
    std::vector<std::string> expected_scope;  // optional override, empty = compute

    /// Global bins touched by the event window, clamped to service hours.
    /// Empty when the window lies entirely outside service hours.
    std::vector<long long> window_bins() const;
};

struct EventLoadResult {
    std::vector<DelayEvent> events;
    std::vector<RowDiagnostic> rejected;
    std::vector<RowDiagnostic> warnings;  // e.g. unknown fault label mapped to Other
};

/// Header: event_id,line,delay_type,date,start_time,end_time,interval_from,
///         interval_to,direction,description,scope
/// scope is a semicolon-separated station list and may be empty.
EventLoadResult load_events(std::istream& in);

/// Binary, symmetric station connectivity matrix with zero diagonal.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    /// Validates shape, binarity, symmetry and diagonal; throws
    /// ValidationError naming the offending cell.
    AdjacencyMatrix(std::vector<std::string> stations, std::vector<std::uint8_t> cells);

    /// CSV with station ids as first row and first column, body cells 0/1.
    static AdjacencyMatrix load(std::istream& in);
    static AdjacencyMatrix line_graph(const std::vector<std::string>& stations);

    std::size_t size() const { return stations_.size(); }
    const std::vector<std::string>& stations() const { return stations_; }
    std::optional<std::size_t> index_of(std::string_view station) const;
    bool linked(std::size_t i, std::size_t j) const { return cells_[i * stations_.size() + j] != 0; }
    std::vector<std::string> neighbors(std::string_view station) const;
    std::string to_csv() const;

    bool operator==(const AdjacencyMatrix&) const = default;

private:
    std::vector<std::string> stations_;
    std::vector<std::uint8_t> cells_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Expected spatial footprint of an event: the shortest path between the
/// interval endpoints, expanded by up to `hops` additional BFS hops. An
/// explicit event.expected_scope overrides the computation. Duplicate-free;
/// path stations first, then each hop layer in station order.
std::vector<std::string> affected_stations(const DelayEvent& event, const AdjacencyMatrix& adj, int hops);

}  // namespace delayflow
