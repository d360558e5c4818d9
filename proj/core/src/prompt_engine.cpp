#include "delayflow/prompt_engine.hpp"

#include "delayflow/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace delayflow {

namespace {

using nlohmann::json;

std::string dims_code(const std::set<CotKind>& dims) {
    if (dims.empty()) return "none";
    std::string code;
    if (dims.contains(CotKind::Temporal)) code += 'T';
    if (dims.contains(CotKind::EventSeverity)) code += 'E';
    if (dims.contains(CotKind::SpatialSpread)) code += 'S';
    return code;
}

std::string structure_code(PromptStructure s) { return s == PromptStructure::Parallel ? "par" : "nst"; }

std::string detail_code(DetailLevel d) {
    switch (d) {
        case DetailLevel::Brief: return "brief";
        case DetailLevel::Standard: return "std";
        case DetailLevel::Verbose: return "verb";
    }
    return "std";
}

std::set<CotKind> dims_from_code(const std::string& code) {
    std::set<CotKind> dims;
    if (code == "none") return dims;
    for (char c : code) {
        if (c == 'T') dims.insert(CotKind::Temporal);
        else if (c == 'E') dims.insert(CotKind::EventSeverity);
        else if (c == 'S') dims.insert(CotKind::SpatialSpread);
        else throw ValidationError("bad dimension code '" + code + "'");
    }
    return dims;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string join_counts(const std::vector<std::int64_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(values[i]);
    }
    return out;
}

}  // namespace

std::string_view to_string(SectionKind k) {
    switch (k) {
        case SectionKind::EventDescription: return "event-description";
        case SectionKind::HistoricalFlow: return "historical-flow";
        case SectionKind::AdjacencyContext: return "adjacency-context";
        case SectionKind::TaskInstruction: return "task-instruction";
        case SectionKind::OutputFormat: return "output-format";
    }
    return "";
}

std::string_view to_string(CotKind k) {
    switch (k) {
        case CotKind::Temporal: return "Temporal";
        case CotKind::EventSeverity: return "EventSeverity";
        case CotKind::SpatialSpread: return "SpatialSpread";
    }
    return "";
}

std::string_view to_string(PromptStructure s) { return s == PromptStructure::Parallel ? "Parallel" : "Nested"; }

std::string_view to_string(DetailLevel d) {
    switch (d) {
        case DetailLevel::Brief: return "Brief";
        case DetailLevel::Standard: return "Standard";
        case DetailLevel::Verbose: return "Verbose";
    }
    return "";
}

std::string_view cot_catchphrase(CotKind k) {
    switch (k) {
        case CotKind::Temporal: return "delay timing";
        case CotKind::EventSeverity: return "fault severity";
        case CotKind::SpatialSpread: return "knock-on impact";
    }
    return "";
}

std::vector<SectionKind> default_sections() {
    return {SectionKind::EventDescription, SectionKind::HistoricalFlow, SectionKind::AdjacencyContext,
            SectionKind::TaskInstruction, SectionKind::OutputFormat};
}

InformationRepository build_repository(FlowStore flows, std::vector<DelayEvent> events, AdjacencyMatrix adjacency,
                                       int affected_hops) {
    InformationRepository repo;
    repo.station_registry = adjacency.stations();
    repo.affected_hops = affected_hops;

    for (const auto& ev : events) {
        for (const auto& endpoint : {ev.interval_from, ev.interval_to}) {
            if (!adjacency.index_of(endpoint)) {
                throw CrossRefError("event '" + ev.event_id + "' references unknown station '" + endpoint + "'");
            }
        }
        for (const auto& s : ev.expected_scope) {
            if (!adjacency.index_of(s)) {
                throw CrossRefError("event '" + ev.event_id + "' scope references unknown station '" + s + "'");
            }
        }
    }

    for (const auto* series : flows.all()) {
        if (!adjacency.index_of(series->station_id)) {
            repo.diagnostics.push_back("flow series for unregistered station '" + series->station_id +
                                       "' ignored");
        }
    }

    FlowStore aligned(repo.station_registry);
    for (const auto& station : repo.station_registry) {
        for (Direction dir : {Direction::Inflow, Direction::Outflow}) {
            if (const auto* s = flows.find(station, dir)) {
                aligned.series(station, dir) = *s;
            } else {
                repo.diagnostics.push_back("no flow data for station '" + station + "' (" +
                                           std::string(to_string(dir)) + ")");
            }
        }
    }

    repo.flows = std::move(aligned);
    repo.events = std::move(events);
    repo.adjacency = std::move(adjacency);
    return repo;
}

std::vector<PromptTemplate> generate_template_library(const TemplateLibraryConfig& config) {
    if (config.dimension_subsets.empty() || config.structures.empty() || config.detail_levels.empty()) {
        throw ConfigError("empty template axis");
    }
    if (config.history_days < 1) throw ConfigError("history_days must be positive");
    if (config.token_budget < 1) throw ConfigError("token_budget must be positive");

    std::vector<PromptTemplate> library;
    std::set<std::string> ids;
    for (const auto& dims : config.dimension_subsets) {
        for (const auto structure : config.structures) {
            for (const auto detail : config.detail_levels) {
                PromptTemplate tpl;
                tpl.template_id =
                    "gen-" + dims_code(dims) + "-" + structure_code(structure) + "-" + detail_code(detail);
                tpl.cot_dimensions = dims;
                tpl.structure = structure;
                tpl.detail = detail;
                tpl.history_days = config.history_days;
                tpl.token_budget = config.token_budget;
                if (!ids.insert(tpl.template_id).second) {
                    throw ConfigError("duplicate template axis entry produces id '" + tpl.template_id + "'");
                }
                library.push_back(std::move(tpl));
            }
        }
    }
    return library;
}

std::string library_to_json(const std::vector<PromptTemplate>& library) {
    json arr = json::array();
    for (const auto& tpl : library) {
        json sections = json::array();
        for (const auto s : tpl.sections) sections.push_back(std::string(to_string(s)));
        arr.push_back(json{{"template_id", tpl.template_id},
                           {"sections", sections},
                           {"cot_dimensions", dims_code(tpl.cot_dimensions)},
                           {"structure", std::string(to_string(tpl.structure))},
                           {"detail_level", std::string(to_string(tpl.detail))},
                           {"history_days", tpl.history_days},
                           {"token_budget", tpl.token_budget}});
    }
    return arr.dump(2) + "\n";
}

std::vector<PromptTemplate> library_from_json(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("template library JSON: ") + e.what());
    }
    if (!arr.is_array()) throw ValidationError("template library JSON must be an array");

    std::vector<PromptTemplate> library;
    for (const auto& item : arr) {
        PromptTemplate tpl;
        tpl.template_id = item.at("template_id").get<std::string>();
        tpl.sections.clear();
        for (const auto& s : item.at("sections")) {
            const std::string name = s.get<std::string>();
            bool found = false;
            for (const auto kind : default_sections()) {
                if (name == to_string(kind)) {
                    tpl.sections.push_back(kind);
                    found = true;
                    break;
                }
            }
            if (!found) throw ValidationError("unknown section '" + name + "'");
        }
        tpl.cot_dimensions = dims_from_code(item.at("cot_dimensions").get<std::string>());
        const std::string st = item.at("structure").get<std::string>();
        tpl.structure = st == "Nested" ? PromptStructure::Nested : PromptStructure::Parallel;
        const std::string dl = item.at("detail_level").get<std::string>();
        tpl.detail = dl == "Brief" ? DetailLevel::Brief : dl == "Verbose" ? DetailLevel::Verbose : DetailLevel::Standard;
        tpl.history_days = item.at("history_days").get<int>();
        tpl.token_budget = item.at("token_budget").get<int>();
        library.push_back(std::move(tpl));
    }
    return library;
}

std::string serialize_data_block(const DataBlock& block) {
    json days = json::array();
    for (const auto& day : block.comparable_days) {
        json bins = json::array();
        for (const auto& [bin, count] : day.bins) bins.push_back(json::array({bin, count}));
        days.push_back(json{{"date", format_date(day.date)}, {"bins", bins}});
    }
    const json j{{"task_id", block.task_id},
                 {"station", block.station},
                 {"direction", std::string(to_string(block.direction))},
                 {"anchor_date", format_date(block.anchor.service_date)},
                 {"anchor_bin", block.anchor.bin_index},
                 {"d", block.d},
                 {"u", block.u},
                 {"history", block.history},
                 {"comparable_days", days}};
    return j.dump();
}

DataBlock parse_data_block(const std::string& prompt_text) {
    const auto begin = prompt_text.find(kDataBlockBegin);
    if (begin == std::string::npos) throw MalformedPromptError("prompt has no data block");
    const auto payload_start = begin + kDataBlockBegin.size();
    const auto end = prompt_text.find(kDataBlockEnd, payload_start);
    if (end == std::string::npos) throw MalformedPromptError("data block is unterminated");

    json j;
    try {
        j = json::parse(prompt_text.substr(payload_start, end - payload_start));
    } catch (const json::exception& e) {
        throw MalformedPromptError(std::string("data block does not parse: ") + e.what());
    }

    DataBlock block;
    try {
        block.task_id = j.at("task_id").get<std::string>();
        block.station = j.at("station").get<std::string>();
        const auto dir = direction_from_string(j.at("direction").get<std::string>());
        if (!dir) throw MalformedPromptError("data block has bad direction");
        block.direction = *dir;
        block.anchor = TimeBin{parse_date(j.at("anchor_date").get<std::string>()), j.at("anchor_bin").get<int>()};
        block.d = j.at("d").get<int>();
        block.u = j.at("u").get<int>();
        block.history = j.at("history").get<std::vector<std::int64_t>>();
        for (const auto& day : j.at("comparable_days")) {
            ComparableDay cd;
            cd.date = parse_date(day.at("date").get<std::string>());
            for (const auto& pair : day.at("bins")) {
                cd.bins.emplace_back(pair.at(0).get<int>(), pair.at(1).get<std::int64_t>());
            }
            block.comparable_days.push_back(std::move(cd));
        }
    } catch (const json::exception& e) {
        throw MalformedPromptError(std::string("data block fields invalid: ") + e.what());
    }
    return block;
}

std::vector<Date> comparable_days_before(Date anchor_date, int history_days, Date first, Date last) {
    std::vector<Date> days;
    const bool weekend = is_weekend(anchor_date);
    for (Date day = std::min(anchor_date - std::chrono::days{1}, last); day >= first && static_cast<int>(days.size()) < history_days;
         day -= std::chrono::days{1}) {
        if (is_weekend(day) == weekend) days.push_back(day);
    }
    std::reverse(days.begin(), days.end());
    return days;
}

namespace {

struct EventView {
    const DelayEvent* event;
    std::vector<std::string> scope;
    bool covers_station;
};

std::string event_narrative(const EventView& view, const ForecastTask& task, DetailLevel detail) {
    const DelayEvent& ev = *view.event;
    std::string text = "Delay event " + ev.event_id + ": " + std::string(to_string(ev.delay_type)) + " on " +
                       ev.line_id + ", " + format_date(ev.date) + " " + format_clock(ev.start_time) + "-" +
                       format_clock(ev.end_time) + ", interval " + ev.interval_from + " to " + ev.interval_to +
                       " (" + std::string(to_string(ev.direction)) + " direction). Expected impact scope: " +
                       join(view.scope, ", ") + ".";
    if (view.covers_station) {
        text += " Station " + task.station_id + " lies inside the impact scope.";
    }
    if (detail >= DetailLevel::Standard) {
        text += " Operator notes: " + ev.description;
    }
    if (detail >= DetailLevel::Verbose) {
        text += " Stations inside the scope typically see suppressed flow while the fault is handled and a "
                "compensating surge once service resumes.";
    }
    return text;
}

std::string cot_step_body(CotKind kind) {
    switch (kind) {
        case CotKind::Temporal:
            return "weigh the delay timing against the daily demand profile and compare the same bins across "
                   "the comparable days listed above";
        case CotKind::EventSeverity:
            return "assess the fault severity from the fault type and the window length, and judge how strongly "
                   "it suppresses or defers demand";
        case CotKind::SpatialSpread:
            return "trace the knock-on impact along the listed links and judge whether neighboring stations "
                   "absorb or feed displaced passengers";
    }
    return "";
}

std::string cot_steps_text(const std::set<CotKind>& dims, PromptStructure structure) {
    std::string text = structure == PromptStructure::Parallel
                           ? "Reason through the following factors side by side before forecasting:"
                           : "Reason through the following factors in order, each building on the previous "
                             "conclusion:";
    int step = 0;
    for (const CotKind kind : {CotKind::Temporal, CotKind::EventSeverity, CotKind::SpatialSpread}) {
        if (!dims.contains(kind)) continue;
        ++step;
        text += "\nStep " + std::to_string(step) + " (" + std::string(cot_catchphrase(kind)) + "): ";
        if (structure == PromptStructure::Nested && step > 1) {
            text += "starting from conclusion C" + std::to_string(step - 1) + ", ";
        }
        text += cot_step_body(kind) + ". Record the conclusion as C" + std::to_string(step) + ".";
    }
    return text;
}

}  // namespace

RenderedPrompt render(const PromptTemplate& tpl, const InformationRepository& repo, const ForecastTask& task) {
    if (task.d < 1 || task.u < 1) throw ValidationError("task requires d >= 1 and u >= 1");
    const FlowSeries* series = repo.flows.find(task.station_id, task.direction);
    if (!series || !repo.adjacency.index_of(task.station_id)) {
        throw ValidationError("unknown station '" + task.station_id + "'");
    }
    if (series->values.empty()) {
        throw HistoryUnderflowError("history underflow: station has no observations");
    }

    const long long anchor_g = global_bin(task.anchor);
    const long long series_first = global_bin(series->values.begin()->first);
    const long long series_last = global_bin(series->values.rbegin()->first);
    if (anchor_g > series_last || anchor_g < series_first) {
        throw HistoryUnderflowError("history underflow: anchor outside observed range");
    }
    if (anchor_g - (task.d - 1) < series_first) {
        throw HistoryUnderflowError("history underflow: " + std::to_string(task.d) + " bins requested, only " +
                                    std::to_string(anchor_g - series_first + 1) + " available");
    }

    DataBlock block;
    block.task_id = task.task_id;
    block.station = task.station_id;
    block.direction = task.direction;
    block.anchor = task.anchor;
    block.d = task.d;
    block.u = task.u;
    for (long long g = anchor_g - task.d + 1; g <= anchor_g; ++g) {
        block.history.push_back(series->value_at(bin_from_global(g)).value_or(0));
    }

    // Bin indices the task touches: history plus forecast window (the window
    // may roll into the next service day).
    std::set<int> needed_bins;
    for (long long g = anchor_g - task.d + 1; g <= anchor_g + task.u; ++g) {
        needed_bins.insert(bin_from_global(g).bin_index);
    }
    const auto comparable =
        comparable_days_before(task.anchor.service_date, tpl.history_days, *series->first_date(), *series->last_date());
    for (const Date day : comparable) {
        ComparableDay cd;
        cd.date = day;
        for (const int b : needed_bins) {
            cd.bins.emplace_back(b, series->value_at(TimeBin{day, b}).value_or(0));
        }
        block.comparable_days.push_back(std::move(cd));
    }

    // Events whose window overlaps the task window (history through horizon).
    std::vector<EventView> matching;
    for (const auto& ev : repo.events) {
        bool overlaps = false;
        for (const long long g : ev.window_bins()) {
            if (g >= anchor_g - task.d + 1 && g <= anchor_g + task.u) {
                overlaps = true;
                break;
            }
        }
        if (!overlaps) continue;
        EventView view{&ev, affected_stations(ev, repo.adjacency, repo.affected_hops), false};
        view.covers_station =
            std::find(view.scope.begin(), view.scope.end(), task.station_id) != view.scope.end();
        matching.push_back(std::move(view));
    }

    const DetailLevel detail = tpl.detail;
    std::vector<std::pair<SectionKind, std::string>> sections;

    for (const SectionKind kind : tpl.sections) {
        switch (kind) {
            case SectionKind::EventDescription: {
                std::string text;
                if (matching.empty()) {
                    text = "No active delay event overlaps the forecast window; assume normal operating "
                           "conditions.";
                    if (detail >= DetailLevel::Standard) {
                        text += " Base the forecast on the regular demand pattern alone.";
                    }
                    if (detail >= DetailLevel::Verbose) {
                        text += " Any residual variation should reflect ordinary day-to-day noise.";
                    }
                } else {
                    std::vector<std::string> parts;
                    for (const auto& view : matching) parts.push_back(event_narrative(view, task, detail));
                    text = join(parts, "\n");
                }
                sections.emplace_back(kind, std::move(text));
                break;
            }
            case SectionKind::HistoricalFlow: {
                std::string text = "Historical " + std::string(to_string(task.direction)) + " counts for station " +
                                   task.station_id + " in 10-minute bins.";
                if (detail >= DetailLevel::Standard) {
                    text += " Counts are passengers per bin between 06:00 and 24:00; values are plain integers.";
                }
                text += "\nRecent observations ending " + format_date(task.anchor.service_date) + " " +
                        format_bin_time(task.anchor.bin_index) + ": " + join_counts(block.history) + ".";
                for (const auto& day : block.comparable_days) {
                    std::vector<std::int64_t> values;
                    for (const auto& [bin, count] : day.bins) values.push_back(count);
                    text += "\n" + format_date(day.date) + " (" + (is_weekend(day.date) ? "weekend" : "weekday") +
                            ") bins " + format_bin_time(day.bins.front().first) + "-" +
                            format_bin_time(day.bins.back().first) + ": " + join_counts(values) + ".";
                }
                if (detail >= DetailLevel::Verbose && !block.comparable_days.empty()) {
                    std::int64_t sum = 0;
                    std::int64_t n = 0;
                    for (const auto& day : block.comparable_days) {
                        for (const auto& [bin, count] : day.bins) {
                            sum += count;
                            ++n;
                        }
                    }
                    text += "\nAcross the listed comparable days these bins averaged " +
                            std::to_string(n > 0 ? (sum + n / 2) / n : 0) + " passengers.";
                }
                text += "\nMachine-readable task data:\n" + std::string(kDataBlockBegin) + "\n" +
                        serialize_data_block(block) + "\n" + std::string(kDataBlockEnd);
                sections.emplace_back(kind, std::move(text));
                break;
            }
            case SectionKind::AdjacencyContext: {
                const auto neighbors = repo.adjacency.neighbors(task.station_id);
                std::string text = "Station " + task.station_id + " connects directly to: " +
                                   (neighbors.empty() ? std::string("no other station") : join(neighbors, ", ")) +
                                   ".";
                if (detail >= DetailLevel::Standard) {
                    text += " Connectivity is physical track adjacency; delay effects propagate along these "
                            "links.";
                }
                if (detail >= DetailLevel::Verbose) {
                    text += " The network has " + std::to_string(repo.adjacency.size()) + " stations; " +
                            task.station_id + " has " + std::to_string(neighbors.size()) + " direct neighbors.";
                }
                sections.emplace_back(kind, std::move(text));
                break;
            }
            case SectionKind::TaskInstruction: {
                if (!tpl.cot_dimensions.empty()) {
                    sections.emplace_back(kind, cot_steps_text(tpl.cot_dimensions, tpl.structure));
                }
                const TimeBin first = advance(task.anchor, 1);
                const TimeBin last = advance(task.anchor, task.u);
                std::string text = "Task " + task.task_id + ": forecast the next " + std::to_string(task.u) +
                                   " 10-minute " + std::string(to_string(task.direction)) + " counts for station " +
                                   task.station_id + ", bins " + format_bin_time(first.bin_index) + "-" +
                                   format_bin_time(last.bin_index) + " starting " +
                                   format_date(first.service_date) + ".";
                if (detail >= DetailLevel::Standard) {
                    text += " Use the delay information, the historical observations, and the station "
                            "connectivity above.";
                }
                if (detail >= DetailLevel::Verbose) {
                    text += " Anchor the forecast on the comparable-day pattern, then adjust for any active "
                            "delay impact within the window.";
                }
                sections.emplace_back(kind, std::move(text));
                break;
            }
            case SectionKind::OutputFormat: {
                std::string text(kOutputContract);
                if (detail >= DetailLevel::Standard) {
                    text += " The predictions array must hold exactly " + std::to_string(task.u) +
                            " non-negative integers.";
                }
                if (detail >= DetailLevel::Verbose) {
                    text += " Do not add prose, units, or thousands separators around the JSON object.";
                }
                sections.emplace_back(kind, std::move(text));
                break;
            }
        }
    }

    // Budget: trim adjacency context first, then the event description tail.
    std::size_t total = 0;
    for (const auto& [kind, text] : sections) total += text.size();
    total += 2 * (sections.size() - 1);  // "\n\n" joiners
    const auto budget = static_cast<std::size_t>(tpl.token_budget);
    if (total > budget) {
        for (const SectionKind victim : {SectionKind::AdjacencyContext, SectionKind::EventDescription}) {
            if (total <= budget) break;
            for (auto& [kind, text] : sections) {
                if (kind != victim) continue;
                const std::size_t cut = std::min(text.size(), total - budget);
                text.resize(text.size() - cut);
                total -= cut;
            }
        }
        if (total > budget) {
            throw PromptBudgetError("token budget " + std::to_string(tpl.token_budget) +
                                    " too small for mandatory sections (" + std::to_string(total) + " chars)");
        }
    }

    RenderedPrompt prompt;
    prompt.template_id = tpl.template_id;
    prompt.block = std::move(block);
    prompt.task = task;
    std::vector<std::string> texts;
    texts.reserve(sections.size());
    for (auto& [kind, text] : sections) texts.push_back(std::move(text));
    prompt.text = join(texts, "\n\n");
    return prompt;
}

std::string prompt_file_name(const RenderedPrompt& prompt) {
    return prompt.task.task_id + "_" + prompt.template_id + ".txt";
}

}  // namespace delayflow
