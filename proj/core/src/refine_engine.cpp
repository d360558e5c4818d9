#include "delayflow/refine_engine.hpp"

#include "delayflow/errors.hpp"
#include "delayflow/eval_harness.hpp"
#include "delayflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace delayflow {

namespace {

std::string dims_suffix(const std::set<CotKind>& dims) {
    if (dims.empty()) return "none";
    std::string code;
    if (dims.contains(CotKind::Temporal)) code += 'T';
    if (dims.contains(CotKind::EventSeverity)) code += 'E';
    if (dims.contains(CotKind::SpatialSpread)) code += 'S';
    return code;
}

}  // namespace

PromptTemplate refine(const PromptTemplate& base, const std::set<CotKind>& dimensions, PromptStructure structure,
                      DetailLevel detail) {
    if (dimensions.empty() && structure == PromptStructure::Nested) {
        throw ConfigError("nothing to nest: refinement with empty dimension set cannot be Nested");
    }
    PromptTemplate refined = base;
    refined.cot_dimensions = dimensions;
    refined.structure = structure;
    refined.detail = detail;
    refined.template_id = base.template_id + "+ref-" + dims_suffix(dimensions) + "-" +
                          (structure == PromptStructure::Parallel ? "par" : "nst") + "-" +
                          (detail == DetailLevel::Brief ? "brief" : detail == DetailLevel::Verbose ? "verb" : "std");
    return refined;
}

std::vector<PromptTemplate> refine_library(const PromptTemplate& base,
                                           const std::vector<std::set<CotKind>>& dimension_subsets,
                                           const std::vector<PromptStructure>& structures,
                                           const std::vector<DetailLevel>& detail_levels) {
    if (dimension_subsets.empty() || structures.empty() || detail_levels.empty()) {
        throw ConfigError("empty template axis");
    }
    std::vector<PromptTemplate> out;
    for (const auto& dims : dimension_subsets) {
        for (const auto structure : structures) {
            if (dims.empty() && structure == PromptStructure::Nested) continue;
            for (const auto detail : detail_levels) {
                out.push_back(refine(base, dims, structure, detail));
            }
        }
    }
    return out;
}

std::vector<std::set<CotKind>> nonempty_dimension_subsets() {
    const std::vector<CotKind> all = {CotKind::Temporal, CotKind::EventSeverity, CotKind::SpatialSpread};
    std::vector<std::set<CotKind>> subsets;
    for (int mask = 1; mask < 8; ++mask) {
        std::set<CotKind> dims;
        for (int i = 0; i < 3; ++i) {
            if (mask & (1 << i)) dims.insert(all[i]);
        }
        subsets.push_back(std::move(dims));
    }
    return subsets;
}

ScreenResult screen(const std::vector<PromptTemplate>& library, const InformationRepository& repo,
                    const ForecastTask& probe_task) {
    if (library.empty()) throw ConfigError("cannot screen an empty library");

    ScreenResult result;
    for (const auto& tpl : library) {
        const bool has_instruction =
            std::find(tpl.sections.begin(), tpl.sections.end(), SectionKind::TaskInstruction) != tpl.sections.end();
        const bool has_output =
            std::find(tpl.sections.begin(), tpl.sections.end(), SectionKind::OutputFormat) != tpl.sections.end();
        if (!has_instruction) {
            result.removed.emplace_back(tpl.template_id, "missing task-instruction section");
            continue;
        }
        if (!has_output) {
            result.removed.emplace_back(tpl.template_id, "missing output-format section");
            continue;
        }
        try {
            const RenderedPrompt probe = render(tpl, repo, probe_task);
            if (parse_data_block(probe.text) != probe.block) {
                result.removed.emplace_back(tpl.template_id, "data block does not round-trip");
                continue;
            }
        } catch (const Error& e) {
            result.removed.emplace_back(tpl.template_id, std::string("probe render failed: ") + e.what());
            continue;
        }
        result.kept.push_back(tpl);
    }
    if (result.kept.empty()) throw Error("empty library after screening");
    return result;
}

std::vector<TemplateScore> score_templates(const std::vector<PromptTemplate>& templates,
                                           const std::vector<ForecastTask>& validation_tasks,
                                           const InformationRepository& repo, Backend& backend,
                                           double unreliable_threshold) {
    if (validation_tasks.empty()) throw ConfigError("no validation tasks to score templates on");

    std::vector<TemplateScore> scores;
    scores.reserve(templates.size());
    for (const auto& tpl : templates) {
        struct Slot {
            bool ok = false;
            std::vector<double> truth;
            std::vector<double> pred;
        };
        std::vector<Slot> slots(validation_tasks.size());

        parallel_for(validation_tasks.size(), backend.max_in_flight(), [&](std::size_t i) {
            const auto& task = validation_tasks[i];
            try {
                const RenderedPrompt prompt = render(tpl, repo, task);
                const ForecastResult result = backend.forecast(prompt);
                const FlowSeries* series = repo.flows.find(task.station_id, task.direction);
                Slot slot;
                for (int k = 1; k <= task.u; ++k) {
                    const auto truth = series ? series->value_at(advance(task.anchor, k)) : std::nullopt;
                    if (!truth) return;  // no ground truth: leave slot failed
                    slot.truth.push_back(static_cast<double>(*truth));
                    slot.pred.push_back(static_cast<double>(result.predictions()[k - 1]));
                }
                slot.ok = true;
                slots[i] = std::move(slot);
            } catch (const Error&) {
                // recorded as a failure below
            }
        });

        std::vector<double> truth;
        std::vector<double> pred;
        TemplateScore score;
        score.template_id = tpl.template_id;
        for (const auto& slot : slots) {
            if (!slot.ok) {
                ++score.n_failures;
                continue;
            }
            ++score.n_tasks;
            truth.insert(truth.end(), slot.truth.begin(), slot.truth.end());
            pred.insert(pred.end(), slot.pred.begin(), slot.pred.end());
        }
        if (score.n_tasks > 0) {
            score.rmse = rmse(truth, pred);
            score.mae = mae(truth, pred);
        }
        const double failure_rate =
            static_cast<double>(score.n_failures) / static_cast<double>(validation_tasks.size());
        score.reliable = score.n_tasks > 0 && failure_rate <= unreliable_threshold;
        scores.push_back(std::move(score));
    }
    return scores;
}

std::string select_best(const std::vector<TemplateScore>& scores) {
    const TemplateScore* best = nullptr;
    for (const auto& score : scores) {
        if (!score.reliable) continue;
        if (best == nullptr || std::tie(score.rmse, score.mae, score.template_id) <
                                   std::tie(best->rmse, best->mae, best->template_id)) {
            best = &score;
        }
    }
    if (best == nullptr) throw Error("no reliable template scores to select from");
    return best->template_id;
}

void write_scores_csv(const std::vector<TemplateScore>& scores, std::ostream& out) {
    out << "template_id,rmse,mae,n_tasks,n_failures\n";
    for (const auto& s : scores) {
        out << csv_quote(s.template_id) << ',' << format_double(s.rmse, 6) << ',' << format_double(s.mae, 6)
            << ',' << s.n_tasks << ',' << s.n_failures << '\n';
    }
}

}  // namespace delayflow
