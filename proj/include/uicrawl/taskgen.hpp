#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uicrawl/errors.hpp"
#include "uicrawl/store.hpp"

namespace uicrawl::taskgen {

UICRAWL_DEFINE_ERROR(InsufficientData);
UICRAWL_DEFINE_ERROR(LengthMismatch);

enum class Task { VhGeneration, Tappability, Relationship, ComponentId };

std::string_view to_string(Task t);

struct TaskSample {
    std::string id;
    Task task = Task::VhGeneration;
    std::string screenshot_ref;
    nlohmann::json input;  // task-specific
    nlohmann::json gold;   // task-specific
    std::string record_id; // provenance
    nlohmann::json meta;   // node paths etc., used by recomputability checks
};

nlohmann::json sample_to_json(const TaskSample& s);

// screenshot -> canonical serialized simplified VH; n unique screens sampled
// without replacement.
std::vector<TaskSample> gen_vh_generation(const store::DatasetStore& store, size_t n,
                                          uint64_t seed);

// Per unique screenshot: at most one visible clickable node (gold true) and
// one visible non-clickable node (gold false); input is normalized bounds.
std::vector<TaskSample> gen_tappability(const store::DatasetStore& store, uint64_t seed);

// Ordered pairs of visible, focusable nodes from one screen; gold is the
// ancestor relation (transitive by default, direct parent behind the flag).
// The emitted true/false classes are balanced within the tolerance.
std::vector<TaskSample> gen_relationship(const store::DatasetStore& store, uint64_t seed,
                                         double balance_tolerance = 0.10,
                                         bool direct_parent_only = false);

// One classifiable (non-OTHER) visible node per unique screenshot; gold is the
// component class.
std::vector<TaskSample> gen_component_id(const store::DatasetStore& store, uint64_t seed);

struct SplitSpec {
    double train_fraction = 0.9;
    uint64_t seed = 0;
};

// Seeded shuffle of screen groups, partition at floor(train_fraction * n);
// samples sharing a screenshot always land on the same side.
std::pair<std::vector<TaskSample>, std::vector<TaskSample>> split(std::vector<TaskSample> samples,
                                                                  const SplitSpec& spec);

// ---- metrics ----------------------------------------------------------------

struct ScoreResult {
    double value = 0.0;
    bool empty_input = false;
};

// 2TP / (2TP + FP + FN); vacuous cases (no positives anywhere) score 1.0 so
// perfect predictions are always 1.0. Empty vectors -> {0, empty_input=true}.
ScoreResult binary_f1(const std::vector<bool>& preds, const std::vector<bool>& golds);

// Unweighted macro average of per-class F1 over `classes`; classes absent from
// both preds and golds contribute a vacuous 1.0.
ScoreResult multiclass_f1(const std::vector<std::string>& preds,
                          const std::vector<std::string>& golds,
                          const std::vector<std::string>& classes);

// Token-level F1 with multiset intersection after normalization (lowercase,
// punctuation stripped, whitespace split). Both-empty normalizes to 1.0,
// one-empty to 0.0. Article stripping is off by default.
double squad_f1(std::string_view pred, std::string_view gold, bool strip_articles = false);
std::vector<std::string> normalize_answer(std::string_view text, bool strip_articles = false);

} // namespace uicrawl::taskgen
