#include "uicrawl/analyze.hpp"

#include <algorithm>
#include <random>

#include "uicrawl/util.hpp"

namespace uicrawl::analyze {

double ScreensPerApp::share_over(size_t threshold) const {
    if (per_app.empty()) return 0.0;
    size_t over = 0;
    for (const auto& [_, n] : per_app) {
        if (n > threshold) ++over;
    }
    return static_cast<double>(over) / static_cast<double>(per_app.size());
}

ScreensPerApp screens_per_app(const store::DatasetStore& store,
                              const std::vector<size_t>& bucket_edges) {
    ScreensPerApp out;
    for (const auto& r : store.records()) {
        if (r.is_unique) out.per_app[r.app_id]++;
    }
    std::vector<size_t> counts;
    for (const auto& [_, n] : out.per_app) counts.push_back(n);

    size_t lo = 1;
    for (size_t edge : bucket_edges) {
        std::string label = std::to_string(lo) + "-" + std::to_string(edge - 1);
        size_t n = 0;
        for (size_t c : counts) {
            if (c >= lo && c < edge) ++n;
        }
        out.buckets.emplace_back(label, n);
        lo = edge;
    }
    size_t n = 0;
    for (size_t c : counts) {
        if (c >= lo) ++n;
    }
    out.buckets.emplace_back(">=" + std::to_string(lo), n);
    return out;
}

std::vector<size_t> similar_counts(const std::vector<dedup::PerceptualHash>& hashes,
                                   int threshold) {
    dedup::SimilarityIndex index;
    for (auto h : hashes) index.insert(h);
    std::vector<size_t> counts;
    counts.reserve(hashes.size());
    for (auto h : hashes) counts.push_back(index.count_within(h, threshold));
    return counts;
}

std::vector<CdfPoint> similarity_cdf(const std::vector<dedup::PerceptualHash>& hashes,
                                     int threshold) {
    std::vector<size_t> counts = similar_counts(hashes, threshold);
    std::sort(counts.begin(), counts.end());
    std::vector<CdfPoint> cdf;
    const double n = static_cast<double>(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) {
        if (i + 1 < counts.size() && counts[i + 1] == counts[i]) continue;
        cdf.push_back({counts[i], static_cast<double>(i + 1) / n});
    }
    return cdf;
}

namespace {

struct CoverageAcc {
    size_t total = 0;
    size_t unlabeled = 0;
    void add(bool labeled) {
        ++total;
        if (!labeled) ++unlabeled;
    }
    CoverageRow row(std::string name) const {
        CoverageRow r;
        r.category = std::move(name);
        r.total = total;
        r.unlabeled = unlabeled;
        if (total > 0) r.unlabeled_pct = 100.0 * static_cast<double>(unlabeled) / total;
        return r;
    }
};

void scan_coverage(const vh::VhNode& n, std::map<vh::ComponentType, CoverageAcc>& by_comp,
                   CoverageAcc& image_view, CoverageAcc& image_button,
                   CoverageAcc& focusable_image) {
    const bool labeled = vh::is_labeled(n);
    by_comp[vh::classify_component(n)].add(labeled);
    const bool is_image_view = n.class_name.find("ImageView") != std::string::npos;
    const bool is_image_button = n.class_name.find("ImageButton") != std::string::npos;
    if (is_image_view) image_view.add(labeled);
    if (is_image_button) image_button.add(labeled);
    if ((is_image_view || is_image_button) && n.flags.focusable) focusable_image.add(labeled);
    for (const auto& c : n.children) {
        scan_coverage(c, by_comp, image_view, image_button, focusable_image);
    }
}

} // namespace

LabelCoverage label_coverage(const store::DatasetStore& store) {
    std::map<vh::ComponentType, CoverageAcc> by_comp;
    CoverageAcc image_view, image_button, focusable_image;
    for (const auto& r : store.records()) {
        if (!r.is_unique) continue;
        scan_coverage(r.raw_vh.root, by_comp, image_view, image_button, focusable_image);
    }
    LabelCoverage out;
    for (auto t : {vh::ComponentType::Button, vh::ComponentType::Checkbox, vh::ComponentType::Text,
                   vh::ComponentType::InputField, vh::ComponentType::ScrollItem,
                   vh::ComponentType::Other}) {
        out.by_component.push_back(by_comp[t].row(std::string(vh::to_string(t))));
    }
    out.by_image_class.push_back(image_view.row("ImageView"));
    out.by_image_class.push_back(image_button.row("ImageButton"));
    out.focusable_image_based = focusable_image.row("focusable_image_based");
    return out;
}

std::string_view to_string(LabelLengthBucket b) {
    switch (b) {
        case LabelLengthBucket::B1_5: return "1-5";
        case LabelLengthBucket::B6_10: return "6-10";
        case LabelLengthBucket::B11_15: return "11-15";
        case LabelLengthBucket::B16_20: return "16-20";
        case LabelLengthBucket::Over20: return ">20";
    }
    return ">20";
}

size_t word_count(std::string_view label) {
    size_t words = 0;
    bool in_word = false;
    for (char c : label) {
        bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (!space && !in_word) {
            ++words;
            in_word = true;
        } else if (space) {
            in_word = false;
        }
    }
    return words;
}

LabelLengthBucket bucket_of(size_t words) {
    if (words <= 5) return LabelLengthBucket::B1_5;
    if (words <= 10) return LabelLengthBucket::B6_10;
    if (words <= 15) return LabelLengthBucket::B11_15;
    if (words <= 20) return LabelLengthBucket::B16_20;
    return LabelLengthBucket::Over20;
}

namespace {

template <typename Fn>
void for_each_labeled_node(const store::DatasetStore& store, Fn&& fn) {
    for (const auto& r : store.records()) {
        if (!r.is_unique) continue;
        std::vector<const vh::VhNode*> stack{&r.raw_vh.root};
        // depth-first, children in order, to keep candidate order stable
        std::vector<const vh::VhNode*> ordered;
        while (!stack.empty()) {
            const vh::VhNode* n = stack.back();
            stack.pop_back();
            ordered.push_back(n);
            for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
                stack.push_back(&*it);
            }
        }
        for (const vh::VhNode* n : ordered) {
            if (auto label = vh::label_of(*n)) fn(r, *n, *label);
        }
    }
}

} // namespace

LengthDistribution label_length_distribution(const store::DatasetStore& store) {
    LengthDistribution out;
    for_each_labeled_node(store, [&](const store::ScreenRecord&, const vh::VhNode& n,
                                     const std::string& label) {
        size_t words = word_count(label);
        if (words == 0) return;
        size_t b = static_cast<size_t>(bucket_of(words));
        out.total[b]++;
        out.by_component[std::string(vh::to_string(vh::classify_component(n)))][b]++;
    });
    return out;
}

std::string matching_prompt(const std::string& label) {
    return "I will provide you with a screenshot of mobile devices and a caption of one of the "
           "UI components in the screenshot. Can you confidently identify the specific view "
           "that corresponds to the caption? Please respond only with \"True\" or \"False\" "
           "without any further explanation.\nCaption: " +
           label + "\nAnswer: True or False";
}

std::vector<HarnessRow> run_matching_harness(const store::DatasetStore& store, MatchJudge& judge,
                                             size_t per_bucket, uint64_t seed) {
    struct Candidate {
        std::string screenshot_ref;
        std::string label;
    };
    std::array<std::vector<Candidate>, 4> candidates; // 1-20 word buckets only
    for_each_labeled_node(store, [&](const store::ScreenRecord& r, const vh::VhNode&,
                                     const std::string& label) {
        size_t words = word_count(label);
        if (words == 0) return;
        LabelLengthBucket b = bucket_of(words);
        if (b == LabelLengthBucket::Over20) return;
        candidates[static_cast<size_t>(b)].push_back({r.screenshot_ref, label});
    });

    std::vector<HarnessRow> rows;
    for (size_t b = 0; b < 4; ++b) {
        HarnessRow row;
        row.bucket = static_cast<LabelLengthBucket>(b);
        row.candidates = candidates[b].size();
        size_t want = std::min(per_bucket, candidates[b].size());
        row.shortfall = candidates[b].size() < per_bucket;
        std::mt19937_64 rng(util::mix_seed(seed, "match-harness", b));
        auto picks = util::sample_without_replacement(candidates[b].size(), want, rng);
        for (size_t idx : picks) {
            const Candidate& c = candidates[b][idx];
            ++row.sampled;
            try {
                if (judge.judge(c.screenshot_ref, c.label)) ++row.correct;
            } catch (const JudgeFailure&) {
                ++row.skipped;
            }
        }
        size_t effective = row.sampled - row.skipped;
        row.pct = effective == 0 ? 0.0 : 100.0 * static_cast<double>(row.correct) / effective;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace uicrawl::analyze
