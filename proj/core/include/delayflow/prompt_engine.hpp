#pragma once

#include "delayflow/calendar.hpp"
#include "delayflow/event_topology.hpp"
#include "delayflow/flow_ingest.hpp"
#include "delayflow/task.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace delayflow {

/// Cross-validated bundle of everything a prompt can draw on.
struct InformationRepository {
    FlowStore flows;
    std::vector<DelayEvent> events;
    AdjacencyMatrix adjacency;
    std::vector<std::string> station_registry;  // adjacency station order
    int affected_hops = 1;
    std::vector<std::string> diagnostics;  // station mismatches found while building
};

/// Validates that every event interval station exists in the adjacency
/// (CrossRefError otherwise) and materializes one Inflow and one Outflow
/// series per registered station; mismatched flow stations are reported in
/// diagnostics.
InformationRepository build_repository(FlowStore flows, std::vector<DelayEvent> events, AdjacencyMatrix adjacency,
                                       int affected_hops = 1);

enum class SectionKind { EventDescription, HistoricalFlow, AdjacencyContext, TaskInstruction, OutputFormat };
enum class CotKind { Temporal, EventSeverity, SpatialSpread };
enum class PromptStructure { Parallel, Nested };
enum class DetailLevel { Brief, Standard, Verbose };

std::string_view to_string(SectionKind k);
std::string_view to_string(CotKind k);
std::string_view to_string(PromptStructure s);
std::string_view to_string(DetailLevel d);

/// Short phrase that the rendered reasoning step for a dimension always
/// contains; lets tests and fault-injecting backends detect a dimension from
/// prompt text alone.
std::string_view cot_catchphrase(CotKind k);

std::vector<SectionKind> default_sections();

struct PromptTemplate {
    std::string template_id;
    std::vector<SectionKind> sections = default_sections();
    std::set<CotKind> cot_dimensions;
    PromptStructure structure = PromptStructure::Parallel;
    DetailLevel detail = DetailLevel::Standard;
    int history_days = 3;      // comparable days quoted in the prompt
    int token_budget = 12000;  // character budget proxy

    bool operator==(const PromptTemplate&) const = default;
};

struct TemplateLibraryConfig {
    std::vector<std::set<CotKind>> dimension_subsets = {{}};
    std::vector<PromptStructure> structures = {PromptStructure::Parallel};
    std::vector<DetailLevel> detail_levels = {DetailLevel::Brief, DetailLevel::Standard, DetailLevel::Verbose};
    int history_days = 3;
    int token_budget = 12000;
};

/// Deterministic Cartesian enumeration of the configured axes. Library size
/// is the product of the axis sizes; ids are stable across runs. Throws
/// ConfigError "empty template axis" when an axis is empty.
std::vector<PromptTemplate> generate_template_library(const TemplateLibraryConfig& config);

std::string library_to_json(const std::vector<PromptTemplate>& library);
std::vector<PromptTemplate> library_from_json(const std::string& text);

/// Values of one prior comparable day at the bin indices the task touches.
struct ComparableDay {
    Date date{};
    std::vector<std::pair<int, std::int64_t>> bins;  // (bin_index, count), sorted by bin_index
    bool operator==(const ComparableDay&) const = default;
};

/// Machine-readable payload embedded in every prompt; round-trips exactly.
struct DataBlock {
    std::string task_id;
    std::string station;
    Direction direction = Direction::Inflow;
    TimeBin anchor{};
    int d = 0;
    int u = 0;
    std::vector<std::int64_t> history;          // oldest first, ends at anchor
    std::vector<ComparableDay> comparable_days; // ascending by date

    bool operator==(const DataBlock&) const = default;
};

struct RenderedPrompt {
    std::string template_id;
    std::string text;
    DataBlock block;
    ForecastTask task;
};

inline constexpr std::string_view kDataBlockBegin = "<<<FORECAST_DATA";
inline constexpr std::string_view kDataBlockEnd = "FORECAST_DATA>>>";

/// The output contract demanded verbatim in every prompt, exactly once.
inline constexpr std::string_view kOutputContract =
    "Respond with a single JSON object of the form "
    "{\"task_id\": \"<task id>\", \"predictions\": [<integers>]} and nothing else.";

std::string serialize_data_block(const DataBlock& block);

/// Extracts and parses the embedded data block from rendered prompt text.
/// Throws MalformedPromptError when the block is missing or unparseable.
DataBlock parse_data_block(const std::string& prompt_text);

/// Renders one template against the repository for one task. Pure: identical
/// inputs yield byte-identical prompts.
///
/// Throws HistoryUnderflowError when fewer than task.d bins end at the
/// anchor, ValidationError for unknown stations, and PromptBudgetError when
/// the mandatory sections alone exceed the character budget.
RenderedPrompt render(const PromptTemplate& tpl, const InformationRepository& repo, const ForecastTask& task);

/// File name for an exported prompt: {task_id}_{template_id}.txt
std::string prompt_file_name(const RenderedPrompt& prompt);

/// Comparable days used for prompting and for the seasonal-naive rule: up to
/// `history_days` most recent days strictly before `anchor_date` with the
/// same day-type (weekday/weekend), clamped to [first, last]. Ascending.
std::vector<Date> comparable_days_before(Date anchor_date, int history_days, Date first, Date last);

}  // namespace delayflow
