#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uicrawl/dedup.hpp"
#include "uicrawl/errors.hpp"
#include "uicrawl/store.hpp"

namespace uicrawl::analyze {

UICRAWL_DEFINE_ERROR(JudgeFailure);

// ---- screens per app --------------------------------------------------------

struct ScreensPerApp {
    std::map<std::string, size_t> per_app;             // app_id -> unique screens
    std::vector<std::pair<std::string, size_t>> buckets; // label -> app count
    double share_over(size_t threshold) const;          // fraction of apps above
};

// Counts is_unique records per app; bucket edges are inclusive lower bounds of
// the next bucket ("1-9", "10-29", ... ">=last").
ScreensPerApp screens_per_app(const store::DatasetStore& store,
                              const std::vector<size_t>& bucket_edges = {10, 30, 100});

// ---- similarity -------------------------------------------------------------

struct CdfPoint {
    size_t x = 0; // number of similar screens
    double y = 0; // cumulative fraction of screens with count <= x
};

// Per-screen similar counts over the multiset of hashes (self excluded).
std::vector<size_t> similar_counts(const std::vector<dedup::PerceptualHash>& hashes,
                                   int threshold = 5);

std::vector<CdfPoint> similarity_cdf(const std::vector<dedup::PerceptualHash>& hashes,
                                     int threshold = 5);

// ---- label coverage ---------------------------------------------------------

struct CoverageRow {
    std::string category;
    size_t total = 0;
    size_t unlabeled = 0;
    std::optional<double> unlabeled_pct; // absent when total == 0 ("n/a")
};

struct LabelCoverage {
    std::vector<CoverageRow> by_component;    // one row per ComponentType
    std::vector<CoverageRow> by_image_class;  // ImageView / ImageButton
    CoverageRow focusable_image_based;        // combined figure
};

// Node-level counts over the raw VHs of unique records.
LabelCoverage label_coverage(const store::DatasetStore& store);

// ---- label length -----------------------------------------------------------

enum class LabelLengthBucket { B1_5, B6_10, B11_15, B16_20, Over20 };

std::string_view to_string(LabelLengthBucket b);
size_t word_count(std::string_view label); // whitespace tokens, punctuation kept
LabelLengthBucket bucket_of(size_t words); // words >= 1

struct LengthDistribution {
    std::array<size_t, 5> total{};
    std::map<std::string, std::array<size_t, 5>> by_component;
};

LengthDistribution label_length_distribution(const store::DatasetStore& store);

// ---- label-to-view matching harness ------------------------------------------

class MatchJudge {
public:
    virtual ~MatchJudge() = default;
    // True iff the view matching the label is confidently identifiable in the
    // screenshot. May throw JudgeFailure for per-sample transport errors.
    virtual bool judge(const std::string& screenshot_ref, const std::string& label) = 0;
};

class AlwaysJudge : public MatchJudge {
public:
    explicit AlwaysJudge(bool verdict) : verdict_(verdict) {}
    bool judge(const std::string&, const std::string&) override { return verdict_; }

private:
    bool verdict_;
};

// Deterministic double: answers true iff the label is in the planted set.
class PlantedSetJudge : public MatchJudge {
public:
    explicit PlantedSetJudge(std::set<std::string> good) : good_(std::move(good)) {}
    bool judge(const std::string&, const std::string& label) override {
        return good_.count(label) > 0;
    }

private:
    std::set<std::string> good_;
};

std::string matching_prompt(const std::string& label);

struct HarnessRow {
    LabelLengthBucket bucket;
    size_t candidates = 0;
    size_t sampled = 0;
    size_t correct = 0;
    size_t skipped = 0;
    double pct = 0.0;      // 100 * correct / (sampled - skipped)
    bool shortfall = false; // fewer candidates than requested
};

// Seeded sampling without replacement per 1-20 word bucket (Over20 excluded).
std::vector<HarnessRow> run_matching_harness(const store::DatasetStore& store, MatchJudge& judge,
                                             size_t per_bucket = 500, uint64_t seed = 0);

} // namespace uicrawl::analyze
