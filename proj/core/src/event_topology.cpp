#include "delayflow/event_topology.hpp"

#include "delayflow/errors.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <istream>
#include <sstream>

namespace delayflow {

namespace {

constexpr std::string_view kEventHeader =
    "event_id,line,delay_type,date,start_time,end_time,interval_from,interval_to,direction,description,scope";

std::string canonical_label(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

std::vector<std::string> split_scope(const std::string& field) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(field);
    while (std::getline(in, token, ';')) {
        token = trim(token);
        if (!token.empty()) out.push_back(token);
    }
    return out;
}

}  // namespace

std::string_view to_string(DelayType t) {
    switch (t) {
        case DelayType::TrainFault: return "Train Fault";
        case DelayType::SignalingFault: return "Signaling Fault";
        case DelayType::PowerSupplyFault: return "Power Supply Fault";
        case DelayType::Other: return "Other";
    }
    return "Other";
}

std::string_view to_string(TrackDirection d) { return d == TrackDirection::Up ? "Up" : "Down"; }

std::optional<DelayType> delay_type_from_label(std::string_view label) {
    static const std::map<std::string, DelayType> aliases = {
        {"trainfault", DelayType::TrainFault},
        {"trainbreakdown", DelayType::TrainFault},
        {"signalingfault", DelayType::SignalingFault},
        {"signallingfault", DelayType::SignalingFault},
        {"signalfault", DelayType::SignalingFault},
        {"powersupplyfault", DelayType::PowerSupplyFault},
        {"powerfault", DelayType::PowerSupplyFault},
        {"other", DelayType::Other},
        {"otherfault", DelayType::Other},
    };
    const auto it = aliases.find(canonical_label(label));
    if (it == aliases.end()) return std::nullopt;
    return it->second;
}

std::optional<TrackDirection> track_direction_from_label(std::string_view label) {
    const std::string c = canonical_label(label);
    if (c == "up") return TrackDirection::Up;
    if (c == "down") return TrackDirection::Down;
    return std::nullopt;
}

std::vector<long long> DelayEvent::window_bins() const {
    const int lo = std::max(start_time.minute_of_day, kServiceStartMinute);
    const int hi = std::min(end_time.minute_of_day, kServiceEndMinute);  // window is [start, end)
    std::vector<long long> bins;
    if (lo >= hi) return bins;
    const int first = (lo - kServiceStartMinute) / kBinMinutes;
    const int last = (hi - 1 - kServiceStartMinute) / kBinMinutes;
    for (int b = first; b <= last; ++b) bins.push_back(global_bin(TimeBin{date, b}));
    return bins;
}

EventLoadResult load_events(std::istream& in) {
    if (!in.good()) throw InputError("unreadable event input stream");
    std::string record;
    if (!read_csv_record(in, record)) throw SchemaError("event CSV has no header row");

    {
        const auto header = split_csv_row(record);
        const auto expected = split_csv_row(std::string(kEventHeader));
        if (header != expected) throw SchemaError("unknown event CSV header layout");
    }

    EventLoadResult result;
    std::size_t row_number = 1;
    while (read_csv_record(in, record)) {
        ++row_number;
        if (trim(record).empty()) continue;
        const auto fields = split_csv_row(record);
        if (fields.size() != 11) {
            result.rejected.push_back({row_number, "expected 11 fields, got " + std::to_string(fields.size())});
            continue;
        }
        DelayEvent ev;
        ev.event_id = fields[0];
        ev.line_id = fields[1];
        const auto type = delay_type_from_label(fields[2]);
        if (type) {
            ev.delay_type = *type;
        } else {
            ev.delay_type = DelayType::Other;
            result.warnings.push_back({row_number, "unknown fault label '" + fields[2] + "' mapped to Other"});
        }
        try {
            ev.date = parse_date(fields[3]);
            ev.start_time = parse_clock(fields[4]);
            ev.end_time = parse_clock(fields[5]);
        } catch (const ValidationError& e) {
            result.rejected.push_back({row_number, e.what()});
            continue;
        }
        if (!(ev.start_time < ev.end_time)) {
            result.rejected.push_back({row_number, "inverted window: " + fields[4] + " .. " + fields[5]});
            continue;
        }
        ev.interval_from = fields[6];
        ev.interval_to = fields[7];
        if (ev.interval_from.empty() || ev.interval_to.empty() || ev.interval_from == ev.interval_to) {
            result.rejected.push_back({row_number, "interval endpoints must be two distinct stations"});
            continue;
        }
        const auto dir = track_direction_from_label(fields[8]);
        if (!dir) {
            result.rejected.push_back({row_number, "unknown direction '" + fields[8] + "'"});
            continue;
        }
        ev.direction = *dir;
        ev.description = fields[9];
        if (ev.description.empty()) {
            result.rejected.push_back({row_number, "missing description"});
            continue;
        }
        ev.expected_scope = split_scope(fields[10]);
        result.events.push_back(std::move(ev));
    }
    return result;
}

AdjacencyMatrix::AdjacencyMatrix(std::vector<std::string> stations, std::vector<std::uint8_t> cells)
    : stations_(std::move(stations)), cells_(std::move(cells)) {
    const std::size_t n = stations_.size();
    if (cells_.size() != n * n) {
        throw ValidationError("adjacency matrix is not square: " + std::to_string(cells_.size()) +
                              " cells for " + std::to_string(n) + " stations");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto v = cells_[i * n + j];
            if (v != 0 && v != 1) {
                throw ValidationError("non-binary entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
            if (i == j && v != 0) {
                throw ValidationError("nonzero diagonal at (" + std::to_string(i) + "," + std::to_string(i) + ")");
            }
            if (cells_[i * n + j] != cells_[j * n + i]) {
                throw ValidationError("asymmetric entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (stations_[i].empty()) throw ValidationError("empty station id at index " + std::to_string(i));
        if (!index_.emplace(stations_[i], i).second) {
            throw ValidationError("duplicate station id '" + stations_[i] + "'");
        }
    }
}

AdjacencyMatrix AdjacencyMatrix::load(std::istream& in) {
    if (!in.good()) throw InputError("unreadable adjacency input stream");
    std::string record;
    if (!read_csv_record(in, record)) throw SchemaError("adjacency CSV has no header row");
    auto header = split_csv_row(record);
    if (header.size() < 2) throw SchemaError("adjacency header needs at least one station");
    std::vector<std::string> stations(header.begin() + 1, header.end());
    const std::size_t n = stations.size();

    std::vector<std::uint8_t> cells(n * n, 0);
    std::size_t row = 0;
    while (read_csv_record(in, record)) {
        if (trim(record).empty()) continue;
        if (row >= n) throw ValidationError("non-square matrix: more than " + std::to_string(n) + " rows");
        const auto fields = split_csv_row(record);
        if (fields.size() != n + 1) {
            throw ValidationError("non-square matrix row " + std::to_string(row) + ": expected " +
                                  std::to_string(n + 1) + " fields, got " + std::to_string(fields.size()));
        }
        if (fields[0] != stations[row]) {
            throw ValidationError("row label '" + fields[0] + "' does not match header order at row " +
                                  std::to_string(row));
        }
        for (std::size_t j = 0; j < n; ++j) {
            const std::string& cell = fields[j + 1];
            if (cell == "0") {
                cells[row * n + j] = 0;
            } else if (cell == "1") {
                cells[row * n + j] = 1;
            } else {
                throw ValidationError("non-binary entry at (" + std::to_string(row) + "," + std::to_string(j) +
                                      ")");
            }
        }
        ++row;
    }
    if (row != n) {
        throw ValidationError("non-square matrix: got " + std::to_string(row) + " rows for " +
                              std::to_string(n) + " stations");
    }
    return AdjacencyMatrix(std::move(stations), std::move(cells));
}

AdjacencyMatrix AdjacencyMatrix::line_graph(const std::vector<std::string>& stations) {
    const std::size_t n = stations.size();
    std::vector<std::uint8_t> cells(n * n, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        cells[i * n + i + 1] = 1;
        cells[(i + 1) * n + i] = 1;
    }
    return AdjacencyMatrix(stations, std::move(cells));
}

std::optional<std::size_t> AdjacencyMatrix::index_of(std::string_view station) const {
    const auto it = index_.find(station);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> AdjacencyMatrix::neighbors(std::string_view station) const {
    const auto idx = index_of(station);
    if (!idx) throw ValidationError("unknown station '" + std::string(station) + "'");
    std::vector<std::string> out;
    for (std::size_t j = 0; j < stations_.size(); ++j) {
        if (linked(*idx, j)) out.push_back(stations_[j]);
    }
    return out;
}

std::string AdjacencyMatrix::to_csv() const {
    std::string out = "station";
    for (const auto& s : stations_) {
        out += ',';
        out += csv_quote(s);
    }
    out += '\n';
    for (std::size_t i = 0; i < stations_.size(); ++i) {
        out += csv_quote(stations_[i]);
        for (std::size_t j = 0; j < stations_.size(); ++j) {
            out += ',';
            out += linked(i, j) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

std::vector<std::string> affected_stations(const DelayEvent& event, const AdjacencyMatrix& adj, int hops) {
    if (!event.expected_scope.empty()) {
        std::vector<std::string> out;
        for (const auto& s : event.expected_scope) {
            if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
        }
        return out;
    }

    const auto from = adj.index_of(event.interval_from);
    const auto to = adj.index_of(event.interval_to);
    if (!from || !to) {
        throw ValidationError("event '" + event.event_id + "' interval endpoint not in adjacency");
    }

    const std::size_t n = adj.size();
    std::vector<std::ptrdiff_t> parent(n, -2);
    std::deque<std::size_t> queue{*from};
    parent[*from] = -1;
    while (!queue.empty() && parent[*to] == -2) {
        const std::size_t cur = queue.front();
        queue.pop_front();
        for (std::size_t j = 0; j < n; ++j) {
            if (adj.linked(cur, j) && parent[j] == -2) {
                parent[j] = static_cast<std::ptrdiff_t>(cur);
                queue.push_back(j);
            }
        }
    }
    if (parent[*to] == -2) {
        throw ValidationError("no path for event interval " + event.interval_from + " .. " + event.interval_to);
    }

    std::vector<std::size_t> path;
    for (std::ptrdiff_t cur = static_cast<std::ptrdiff_t>(*to); cur != -1; cur = parent[cur]) {
        path.push_back(static_cast<std::size_t>(cur));
    }
    std::reverse(path.begin(), path.end());

    std::vector<bool> seen(n, false);
    std::vector<std::size_t> scope = path;
    for (const auto i : path) seen[i] = true;
    std::vector<std::size_t> frontier = path;
    for (int h = 0; h < hops; ++h) {
        std::vector<std::size_t> next;
        for (std::size_t j = 0; j < n; ++j) {
            if (seen[j]) continue;
            for (const auto i : frontier) {
                if (adj.linked(i, j)) {
                    next.push_back(j);
                    break;
                }
            }
        }
        for (const auto j : next) {
            seen[j] = true;
            scope.push_back(j);
        }
        frontier = std::move(next);
        if (frontier.empty()) break;
    }

    std::vector<std::string> out;
    out.reserve(scope.size());
    for (const auto i : scope) out.push_back(adj.stations()[i]);
    return out;
}

}  // namespace delayflow
