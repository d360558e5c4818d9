#pragma once

#include "delayflow/llm_backend.hpp"
#include "delayflow/prompt_engine.hpp"
#include "delayflow/task.hpp"

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace delayflow {

/// Accuracy record for one template over a validation task set.
struct TemplateScore {
    std::string template_id;
    double rmse = 0.0;
    double mae = 0.0;
    int n_tasks = 0;     // tasks that scored
    int n_failures = 0;  // backend failures, excluded from the metrics
    bool reliable = true;

    bool operator==(const TemplateScore&) const = default;
};

/// Derives a refined template: the rendered prompt gains one reasoning step
/// per dimension, placed before the task instruction, listed side by side
/// (Parallel) or chained through conclusion slots (Nested). The input
/// template is not modified. Throws ConfigError "nothing to nest" for an
/// empty dimension set with Nested structure.
PromptTemplate refine(const PromptTemplate& base, const std::set<CotKind>& dimensions, PromptStructure structure,
                      DetailLevel detail);

/// Enumerates refine() over all axis combinations against one base template.
std::vector<PromptTemplate> refine_library(const PromptTemplate& base,
                                           const std::vector<std::set<CotKind>>& dimension_subsets,
                                           const std::vector<PromptStructure>& structures,
                                           const std::vector<DetailLevel>& detail_levels);

/// All seven non-empty subsets of the three reasoning dimensions.
std::vector<std::set<CotKind>> nonempty_dimension_subsets();

struct ScreenResult {
    std::vector<PromptTemplate> kept;  // input order preserved
    std::vector<std::pair<std::string, std::string>> removed;  // (template_id, reason)
};

/// Structural screening: required sections present, probe render succeeds
/// within budget, and the embedded data block round-trips. Throws Error
/// "empty library after screening" when nothing survives.
ScreenResult screen(const std::vector<PromptTemplate>& library, const InformationRepository& repo,
                    const ForecastTask& probe_task);

/// Scores every template over the validation tasks with pooled RMSE/MAE.
/// Backend failures are excluded and counted; a template whose failure rate
/// exceeds `unreliable_threshold` is flagged unreliable. Task evaluation may
/// run concurrently; accumulation is order-independent.
std::vector<TemplateScore> score_templates(const std::vector<PromptTemplate>& templates,
                                           const std::vector<ForecastTask>& validation_tasks,
                                           const InformationRepository& repo, Backend& backend,
                                           double unreliable_threshold = 0.5);

/// Template id with minimal RMSE among reliable scores; ties break on MAE,
/// then lexicographic id. Throws Error when no reliable score exists.
std::string select_best(const std::vector<TemplateScore>& scores);

// Scores CSV: template_id,rmse,mae,n_tasks,n_failures
void write_scores_csv(const std::vector<TemplateScore>& scores, std::ostream& out);

}  // namespace delayflow
