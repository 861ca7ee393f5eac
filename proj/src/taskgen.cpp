#include "uicrawl/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>

#include "uicrawl/util.hpp"

namespace uicrawl::taskgen {

using nlohmann::json;

std::string_view to_string(Task t) {
    switch (t) {
        case Task::VhGeneration: return "vh_generation";
        case Task::Tappability: return "tappability";
        case Task::Relationship: return "relationship";
        case Task::ComponentId: return "component_id";
    }
    return "vh_generation";
}

json sample_to_json(const TaskSample& s) {
    json j;
    j["id"] = s.id;
    j["task"] = std::string(to_string(s.task));
    j["image"] = s.screenshot_ref;
    j["input"] = s.input;
    j["gold"] = s.gold;
    j["meta"] = s.meta;
    j["meta"]["record_id"] = s.record_id;
    return j;
}

namespace {

struct VisibleNode {
    std::vector<int> path;
    const vh::VhNode* node;
};

// Visible means the node and all its ancestors are visible; zero-area nodes
// are excluded (nothing to see).
void collect_visible(const vh::VhNode& n, std::vector<int>& path, std::vector<VisibleNode>& out) {
    if (!n.flags.visible) return;
    if (!n.bounds_px.zero_area()) out.push_back({path, &n});
    for (int i = 0; i < static_cast<int>(n.children.size()); ++i) {
        path.push_back(i);
        collect_visible(n.children[i], path, out);
        path.pop_back();
    }
}

std::vector<VisibleNode> visible_nodes(const vh::VhTree& tree) {
    std::vector<VisibleNode> out;
    std::vector<int> path;
    collect_visible(tree.root, path, out);
    return out;
}

json normalized_bounds(const vh::VhNode& n, const vh::VhTree& tree) {
    const double w = tree.screen_width_px;
    const double h = tree.screen_height_px;
    return json::array({n.bounds_px.left / w, n.bounds_px.top / h, n.bounds_px.right / w,
                        n.bounds_px.bottom / h});
}

bool is_prefix(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() >= b.size()) return false;
    return std::equal(a.begin(), a.end(), b.begin());
}

std::vector<const store::ScreenRecord*> unique_records(const store::DatasetStore& store) {
    std::vector<const store::ScreenRecord*> out;
    for (const auto& r : store.records()) {
        if (r.is_unique) out.push_back(&r);
    }
    return out;
}

std::string sample_id(Task t, const std::string& record_id, int n) {
    return std::string(to_string(t)) + ":" + record_id + ":" + std::to_string(n);
}

} // namespace

std::vector<TaskSample> gen_vh_generation(const store::DatasetStore& store, size_t n,
                                          uint64_t seed) {
    auto uniques = unique_records(store);
    if (n > uniques.size()) {
        throw InsufficientData("requested " + std::to_string(n) + " samples but only " +
                               std::to_string(uniques.size()) + " unique screens are stored");
    }
    std::mt19937_64 rng(util::mix_seed(seed, "vh_generation"));
    auto picks = util::sample_without_replacement(uniques.size(), n, rng);
    std::vector<TaskSample> out;
    out.reserve(n);
    for (size_t idx : picks) {
        const auto* r = uniques[idx];
        TaskSample s;
        s.task = Task::VhGeneration;
        s.id = sample_id(s.task, r->record_id, 0);
        s.screenshot_ref = r->screenshot_ref;
        s.record_id = r->record_id;
        s.input = json::object();
        s.gold = vh::serialize_simplified(r->simplified_vh);
        s.meta = json::object();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TaskSample> gen_tappability(const store::DatasetStore& store, uint64_t seed) {
    std::mt19937_64 rng(util::mix_seed(seed, "tappability"));
    std::vector<TaskSample> out;
    for (const auto* r : unique_records(store)) {
        auto nodes = visible_nodes(r->raw_vh);
        std::vector<const VisibleNode*> clickable, non_clickable;
        for (const auto& vn : nodes) {
            (vn.node->flags.clickable ? clickable : non_clickable).push_back(&vn);
        }
        int emitted = 0;
        auto emit = [&](const VisibleNode& vn, bool gold) {
            TaskSample s;
            s.task = Task::Tappability;
            s.id = sample_id(s.task, r->record_id, emitted++);
            s.screenshot_ref = r->screenshot_ref;
            s.record_id = r->record_id;
            s.input = {{"bounds", normalized_bounds(*vn.node, r->raw_vh)}};
            s.gold = gold;
            s.meta = {{"path", vn.path}};
            out.push_back(std::move(s));
        };
        if (!clickable.empty()) {
            emit(*clickable[util::rng_below(rng, clickable.size())], true);
        }
        if (!non_clickable.empty()) {
            emit(*non_clickable[util::rng_below(rng, non_clickable.size())], false);
        }
    }
    return out;
}

std::vector<TaskSample> gen_relationship(const store::DatasetStore& store, uint64_t seed,
                                         double balance_tolerance, bool direct_parent_only) {
    std::mt19937_64 rng(util::mix_seed(seed, "relationship"));
    std::vector<TaskSample> out;
    size_t positives = 0, negatives = 0;
    for (const auto* r : unique_records(store)) {
        auto nodes = visible_nodes(r->raw_vh);
        std::vector<const VisibleNode*> focusable;
        for (const auto& vn : nodes) {
            if (vn.node->flags.focusable) focusable.push_back(&vn);
        }
        if (focusable.size() < 2) continue;

        std::vector<std::pair<const VisibleNode*, const VisibleNode*>> pos, neg;
        for (const auto* a : focusable) {
            for (const auto* b : focusable) {
                if (a == b) continue;
                bool ancestor = direct_parent_only
                                    ? (is_prefix(a->path, b->path) &&
                                       a->path.size() + 1 == b->path.size())
                                    : is_prefix(a->path, b->path);
                if (ancestor) {
                    pos.emplace_back(a, b);
                } else if (!is_prefix(a->path, b->path) && !is_prefix(b->path, a->path)) {
                    neg.emplace_back(a, b);
                }
            }
        }
        int emitted = 0;
        auto emit = [&](const VisibleNode& a, const VisibleNode& b, bool gold) {
            TaskSample s;
            s.task = Task::Relationship;
            s.id = sample_id(s.task, r->record_id, emitted++);
            s.screenshot_ref = r->screenshot_ref;
            s.record_id = r->record_id;
            s.input = {{"bounds_a", normalized_bounds(*a.node, r->raw_vh)},
                       {"bounds_b", normalized_bounds(*b.node, r->raw_vh)}};
            s.gold = gold;
            s.meta = {{"path_a", a.path}, {"path_b", b.path}};
            out.push_back(std::move(s));
        };
        if (!pos.empty()) {
            auto [a, b] = pos[util::rng_below(rng, pos.size())];
            emit(*a, *b, true);
            ++positives;
        }
        if (!neg.empty()) {
            auto [a, b] = neg[util::rng_below(rng, neg.size())];
            emit(*a, *b, false);
            ++negatives;
        }
    }

    // Trim the excess class (seeded) until the counts sit inside the
    // tolerance band.
    auto imbalance_ok = [&]() {
        size_t total = positives + negatives;
        if (total == 0) return true;
        size_t diff = positives > negatives ? positives - negatives : negatives - positives;
        return static_cast<double>(diff) <= balance_tolerance * static_cast<double>(total);
    };
    while (!imbalance_ok()) {
        bool drop_true = positives > negatives;
        std::vector<size_t> idx;
        for (size_t i = 0; i < out.size(); ++i) {
            if (out[i].gold.get<bool>() == drop_true) idx.push_back(i);
        }
        size_t victim = idx[util::rng_below(rng, idx.size())];
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(victim));
        (drop_true ? positives : negatives)--;
    }
    return out;
}

std::vector<TaskSample> gen_component_id(const store::DatasetStore& store, uint64_t seed) {
    std::mt19937_64 rng(util::mix_seed(seed, "component_id"));
    std::vector<TaskSample> out;
    for (const auto* r : unique_records(store)) {
        auto nodes = visible_nodes(r->raw_vh);
        std::vector<const VisibleNode*> classifiable;
        for (const auto& vn : nodes) {
            if (vh::classify_component(*vn.node) != vh::ComponentType::Other) {
                classifiable.push_back(&vn);
            }
        }
        if (classifiable.empty()) continue;
        const VisibleNode& vn = *classifiable[util::rng_below(rng, classifiable.size())];
        TaskSample s;
        s.task = Task::ComponentId;
        s.id = sample_id(s.task, r->record_id, 0);
        s.screenshot_ref = r->screenshot_ref;
        s.record_id = r->record_id;
        s.input = {{"bounds", normalized_bounds(*vn.node, r->raw_vh)}};
        s.gold = std::string(vh::to_string(vh::classify_component(*vn.node)));
        s.meta = {{"path", vn.path}};
        out.push_back(std::move(s));
    }
    return out;
}

std::pair<std::vector<TaskSample>, std::vector<TaskSample>> split(std::vector<TaskSample> samples,
                                                                  const SplitSpec& spec) {
    // Group by screenshot, first-seen order.
    std::map<std::string, size_t> group_of;
    std::vector<std::vector<TaskSample>> groups;
    for (auto& s : samples) {
        auto it = group_of.find(s.screenshot_ref);
        if (it == group_of.end()) {
            group_of.emplace(s.screenshot_ref, groups.size());
            groups.emplace_back();
            groups.back().push_back(std::move(s));
        } else {
            groups[it->second].push_back(std::move(s));
        }
    }
    std::vector<size_t> order(groups.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(util::mix_seed(spec.seed, "split"));
    util::shuffle_in_place(order, rng);

    size_t total = 0;
    for (const auto& g : groups) total += g.size();
    const size_t target = static_cast<size_t>(spec.train_fraction * static_cast<double>(total));

    std::vector<TaskSample> train, eval;
    for (size_t gi : order) {
        auto& g = groups[gi];
        auto& dst = train.size() < target ? train : eval;
        for (auto& s : g) dst.push_back(std::move(s));
    }
    return {std::move(train), std::move(eval)};
}

ScoreResult binary_f1(const std::vector<bool>& preds, const std::vector<bool>& golds) {
    if (preds.size() != golds.size()) {
        throw LengthMismatch("predictions and golds differ in length");
    }
    if (preds.empty()) return {0.0, true};
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] && golds[i]) ++tp;
        else if (preds[i] && !golds[i]) ++fp;
        else if (!preds[i] && golds[i]) ++fn;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return {denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(tp) / denom, false};
}

ScoreResult multiclass_f1(const std::vector<std::string>& preds,
                          const std::vector<std::string>& golds,
                          const std::vector<std::string>& classes) {
    if (preds.size() != golds.size()) {
        throw LengthMismatch("predictions and golds differ in length");
    }
    if (preds.empty() || classes.empty()) return {0.0, true};
    double sum = 0.0;
    for (const auto& cls : classes) {
        size_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < preds.size(); ++i) {
            const bool p = preds[i] == cls;
            const bool g = golds[i] == cls;
            if (p && g) ++tp;
            else if (p) ++fp;
            else if (g) ++fn;
        }
        const double denom = static_cast<double>(2 * tp + fp + fn);
        sum += denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(tp) / denom;
    }
    return {sum / static_cast<double>(classes.size()), false};
}

std::vector<std::string> normalize_answer(std::string_view text, bool strip_articles) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(u)));
    }
    std::vector<std::string> tokens;
    std::string word;
    for (char c : cleaned) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!word.empty()) tokens.push_back(std::exchange(word, {}));
        } else {
            word.push_back(c);
        }
    }
    if (!word.empty()) tokens.push_back(std::move(word));
    if (strip_articles) {
        std::erase_if(tokens,
                      [](const std::string& t) { return t == "a" || t == "an" || t == "the"; });
    }
    return tokens;
}

double squad_f1(std::string_view pred, std::string_view gold, bool strip_articles) {
    auto p = normalize_answer(pred, strip_articles);
    auto g = normalize_answer(gold, strip_articles);
    if (p.empty() && g.empty()) return 1.0; // exact-match convention
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, size_t> gold_counts;
    for (const auto& t : g) gold_counts[t]++;
    size_t common = 0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            ++common;
            --it->second;
        }
    }
    return 2.0 * static_cast<double>(common) / static_cast<double>(p.size() + g.size());
}

} // namespace uicrawl::taskgen
