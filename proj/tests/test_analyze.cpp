#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "uicrawl/analyze.hpp"
#include "uicrawl/util.hpp"

using namespace uicrawl;

namespace {

// Builds a store record around one synthetic screen tree.
store::ScreenRecord planted_record(const std::string& app, int step, vh::VhNode root,
                                   uint64_t sig_seed) {
    store::ScreenRecord r;
    r.record_id = app + ":s0:" + std::to_string(step);
    r.app_id = app;
    r.session_id = "s0";
    r.step = step;
    r.screenshot_ref = "images/" + app + "/s0/" + std::to_string(step) + ".png";
    r.raw_vh.screen_width_px = 100;
    r.raw_vh.screen_height_px = 100;
    r.raw_vh.package_name = "com." + app;
    r.raw_vh.root = std::move(root);
    r.simplified_vh = vh::simplify_vh(r.raw_vh);
    r.signature = {dedup::PerceptualHash{util::splitmix64(sig_seed)},
                   util::splitmix64(sig_seed ^ 0xabcd)};
    return r;
}

vh::VhNode container() {
    vh::VhNode root;
    root.class_name = "android.widget.FrameLayout";
    root.bounds_px = {0, 0, 100, 100};
    return root;
}

vh::VhNode image_view(const std::string& label, bool focusable = false) {
    vh::VhNode n;
    n.class_name = "android.widget.ImageView";
    if (!label.empty()) n.content_description = label;
    n.bounds_px = {0, 0, 10, 10};
    n.flags.focusable = focusable;
    return n;
}

vh::VhNode button(const std::string& label) {
    vh::VhNode n;
    n.class_name = "android.widget.Button";
    if (!label.empty()) n.text = label;
    n.bounds_px = {0, 0, 10, 10};
    n.flags.clickable = true;
    return n;
}

} // namespace

TEST_CASE("screens_per_app: counts unique records only") {
    store::DatasetStore s;
    for (int i = 0; i < 3; ++i) s.write_record(planted_record("A", i, container(), 100 + i));
    s.write_record(planted_record("A", 3, container(), 100)); // duplicate signature
    s.write_record(planted_record("B", 0, container(), 777));
    auto spa = analyze::screens_per_app(s);
    CHECK(spa.per_app.at("A") == 3);
    CHECK(spa.per_app.at("B") == 1);

    store::DatasetStore empty;
    CHECK(analyze::screens_per_app(empty).per_app.empty());
}

TEST_CASE("screens_per_app: planted 107-app fixture reproduces the >100 share") {
    store::DatasetStore s;
    uint64_t sig = 1;
    for (int a = 0; a < 100; ++a) {
        for (int k = 0; k < 20; ++k) {
            s.write_record(planted_record("app" + std::to_string(a), k, container(), sig++));
        }
    }
    for (int a = 100; a < 107; ++a) {
        for (int k = 0; k < 150; ++k) {
            s.write_record(planted_record("app" + std::to_string(a), k, container(), sig++));
        }
    }
    auto spa = analyze::screens_per_app(s);
    CHECK(spa.per_app.size() == 107);
    CHECK(spa.share_over(100) == doctest::Approx(7.0 / 107.0).epsilon(1e-12));
}

TEST_CASE("similar_counts: ten identical screens each see nine others") {
    std::vector<dedup::PerceptualHash> hashes(10, dedup::PerceptualHash{0x42});
    auto counts = analyze::similar_counts(hashes, 5);
    for (size_t c : counts) CHECK(c == 9);
    auto cdf = analyze::similarity_cdf(hashes, 5);
    REQUIRE(cdf.size() == 1);
    CHECK(cdf[0].x == 9);
    CHECK(cdf[0].y == doctest::Approx(1.0));
}

TEST_CASE("similarity_cdf: planted clusters of sizes 1/10/100") {
    // intra-cluster distance <= 4 (two flipped bits each), inter-cluster far
    std::vector<dedup::PerceptualHash> hashes;
    auto plant = [&hashes](uint64_t base, int size) {
        hashes.push_back(dedup::PerceptualHash{base});
        for (int i = 1; i < size; ++i) {
            uint64_t mutated = base ^ (1ULL << (i % 32)) ^ (1ULL << (32 + (i / 32)));
            hashes.push_back(dedup::PerceptualHash{mutated});
        }
    };
    plant(0x0000000000000000ULL, 1);
    plant(0xffffffffffffffffULL, 10);
    plant(0x5555555555555555ULL, 100);

    auto counts = analyze::similar_counts(hashes, 5);
    CHECK(counts[0] == 0);
    for (size_t i = 1; i < 11; ++i) CHECK(counts[i] == 9);
    for (size_t i = 11; i < 111; ++i) CHECK(counts[i] == 99);

    // verify against brute force
    for (size_t i = 0; i < hashes.size(); ++i) {
        CHECK(counts[i] == oracles::radius_count_oracle(hashes, hashes[i], 5));
    }

    auto cdf = analyze::similarity_cdf(hashes, 5);
    REQUIRE(cdf.size() == 3);
    CHECK(cdf[0].x == 0);
    CHECK(cdf[0].y == doctest::Approx(1.0 / 111.0));
    CHECK(cdf[1].x == 9);
    CHECK(cdf[1].y == doctest::Approx(11.0 / 111.0));
    CHECK(cdf[2].x == 99);
    CHECK(cdf[2].y == doctest::Approx(1.0));
}

TEST_CASE("similarity_cdf: monotone, ends at 1, equals brute force on random hashes") {
    std::mt19937_64 rng(util::mix_seed(3, "analyze-cdf"));
    std::vector<dedup::PerceptualHash> hashes;
    for (int i = 0; i < 400; ++i) {
        uint64_t bits = i % 2 == 0 ? (0xabcdefttULL ^ rng() % 16) : rng();
        hashes.push_back(dedup::PerceptualHash{bits});
    }
    auto counts = analyze::similar_counts(hashes, 5);
    for (size_t i = 0; i < hashes.size(); ++i) {
        CHECK(counts[i] == oracles::radius_count_oracle(hashes, hashes[i], 5));
    }
    auto cdf = analyze::similarity_cdf(hashes, 5);
    REQUIRE(!cdf.empty());
    for (size_t i = 1; i < cdf.size(); ++i) {
        CHECK(cdf[i].x > cdf[i - 1].x);
        CHECK(cdf[i].y >= cdf[i - 1].y);
    }
    CHECK(cdf.back().y == doctest::Approx(1.0));
}

TEST_CASE("label_coverage: percentages and n/a rule") {
    store::DatasetStore s;
    auto root = container();
    for (int i = 0; i < 10; ++i) root.children.push_back(image_view(i < 3 ? "labeled" : ""));
    s.write_record(planted_record("A", 0, root, 5));

    auto cov = analyze::label_coverage(s);
    const analyze::CoverageRow* image_row = nullptr;
    for (const auto& r : cov.by_image_class) {
        if (r.category == "ImageView") image_row = &r;
    }
    REQUIRE(image_row != nullptr);
    CHECK(image_row->total == 10);
    CHECK(image_row->unlabeled == 7);
    CHECK(*image_row->unlabeled_pct == doctest::Approx(70.0).epsilon(1e-12));

    // no ImageButton planted: reported as n/a, never 0%
    for (const auto& r : cov.by_image_class) {
        if (r.category == "ImageButton") CHECK(!r.unlabeled_pct.has_value());
    }
}

TEST_CASE("label_coverage: planted 30% unlabeled buttons exact") {
    store::DatasetStore s;
    uint64_t sig = 1;
    int unlabeled = 0, total = 0;
    for (int screen = 0; screen < 10; ++screen) {
        auto root = container();
        for (int k = 0; k < 10; ++k) {
            ++total;
            bool lab = (total % 10) < 7; // exactly 70% labeled, 30% unlabeled
            if (!lab) ++unlabeled;
            root.children.push_back(button(lab ? "Continue" : ""));
        }
        s.write_record(planted_record("A", screen, root, sig++));
    }
    REQUIRE(unlabeled * 10 == total * 3);
    auto cov = analyze::label_coverage(s);
    for (const auto& r : cov.by_component) {
        if (r.category == "BUTTON") {
            CHECK(r.total == static_cast<size_t>(total));
            CHECK(*r.unlabeled_pct == doctest::Approx(30.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("label_coverage: focusable image-based combined figure") {
    store::DatasetStore s;
    auto root = container();
    root.children.push_back(image_view("has label", true));
    root.children.push_back(image_view("", true));
    root.children.push_back(image_view("", true));
    root.children.push_back(image_view("", false)); // not focusable: excluded
    vh::VhNode ib;
    ib.class_name = "android.widget.ImageButton";
    ib.bounds_px = {0, 0, 5, 5};
    ib.flags.focusable = true;
    ib.flags.clickable = true;
    root.children.push_back(ib);
    s.write_record(planted_record("A", 0, root, 9));

    auto cov = analyze::label_coverage(s);
    CHECK(cov.focusable_image_based.total == 4);
    CHECK(cov.focusable_image_based.unlabeled == 3);
    CHECK(*cov.focusable_image_based.unlabeled_pct == doctest::Approx(75.0));
}

TEST_CASE("word_count and bucket boundaries") {
    CHECK(analyze::word_count("Open navigation drawer") == 3);
    CHECK(analyze::word_count("  padded   spaces  ") == 2);
    CHECK(analyze::word_count("") == 0);
    CHECK(analyze::bucket_of(3) == analyze::LabelLengthBucket::B1_5);
    CHECK(analyze::bucket_of(5) == analyze::LabelLengthBucket::B1_5);
    CHECK(analyze::bucket_of(6) == analyze::LabelLengthBucket::B6_10);
    CHECK(analyze::bucket_of(10) == analyze::LabelLengthBucket::B6_10);
    CHECK(analyze::bucket_of(11) == analyze::LabelLengthBucket::B11_15);
    CHECK(analyze::bucket_of(15) == analyze::LabelLengthBucket::B11_15);
    CHECK(analyze::bucket_of(16) == analyze::LabelLengthBucket::B16_20);
    CHECK(analyze::bucket_of(20) == analyze::LabelLengthBucket::B16_20);
    CHECK(analyze::bucket_of(21) == analyze::LabelLengthBucket::Over20);
}

namespace {

std::string words(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(i);
    }
    return out;
}

} // namespace

TEST_CASE("label_length_distribution: planted bucket counts exact") {
    store::DatasetStore s;
    uint64_t sig = 1;
    // plant: 4 labels of 3 words, 3 of 8, 2 of 12, 1 of 20, 2 of 25
    const std::vector<std::pair<int, int>> plan = {{3, 4}, {8, 3}, {12, 2}, {20, 1}, {25, 2}};
    int screen = 0;
    for (const auto& [len, count] : plan) {
        for (int i = 0; i < count; ++i) {
            auto root = container();
            root.children.push_back(image_view(words(len)));
            s.write_record(planted_record("A", screen++, root, sig++));
        }
    }
    auto dist = analyze::label_length_distribution(s);
    CHECK(dist.total[0] == 4);
    CHECK(dist.total[1] == 3);
    CHECK(dist.total[2] == 2);
    CHECK(dist.total[3] == 1);
    CHECK(dist.total[4] == 2);
    size_t bucket_sum = 0;
    for (size_t b = 0; b < 5; ++b) bucket_sum += dist.total[b];
    CHECK(bucket_sum == 12); // partition: every label in exactly one bucket
}

TEST_CASE("matching harness: always-true judge scores everything sampled") {
    store::DatasetStore s;
    uint64_t sig = 1;
    for (int i = 0; i < 30; ++i) {
        auto root = container();
        root.children.push_back(image_view(words(7) + " id" + std::to_string(i)));
        s.write_record(planted_record("A", i, root, sig++));
    }
    analyze::AlwaysJudge yes(true);
    auto rows = analyze::run_matching_harness(s, yes, 500, 1);
    for (const auto& r : rows) {
        if (r.bucket == analyze::LabelLengthBucket::B6_10) {
            CHECK(r.candidates == 30);
            CHECK(r.sampled == 30);
            CHECK(r.correct == 30);
            CHECK(r.shortfall); // fewer than the requested 500
            CHECK(r.pct == doctest::Approx(100.0));
        } else {
            CHECK(r.sampled == 0);
        }
    }
}

TEST_CASE("matching harness: planted good set reproduces 278/500 (55.60%)") {
    store::DatasetStore s;
    std::set<std::string> good;
    uint64_t sig = 1;
    for (int i = 0; i < 500; ++i) {
        std::string label = words(7) + " sample" + std::to_string(i);
        if (i < 278) good.insert(label);
        auto root = container();
        root.children.push_back(image_view(label));
        s.write_record(planted_record("A", i, root, sig++));
    }
    analyze::PlantedSetJudge judge(std::move(good));
    auto rows = analyze::run_matching_harness(s, judge, 500, 7);
    bool checked = false;
    for (const auto& r : rows) {
        if (r.bucket == analyze::LabelLengthBucket::B6_10) {
            CHECK(r.sampled == 500);
            CHECK(r.correct == 278);
            CHECK(!r.shortfall);
            CHECK(r.pct == doctest::Approx(55.60).epsilon(1e-9));
            checked = true;
        }
    }
    CHECK(checked);
}

TEST_CASE("matching harness: seeded sampling is reproducible") {
    store::DatasetStore s;
    uint64_t sig = 1;
    for (int i = 0; i < 50; ++i) {
        auto root = container();
        root.children.push_back(image_view(words(7) + " r" + std::to_string(i)));
        s.write_record(planted_record("A", i, root, sig++));
    }
    struct CountingJudge : analyze::MatchJudge {
        std::vector<std::string> seen;
        bool judge(const std::string&, const std::string& label) override {
            seen.push_back(label);
            return label.size() % 2 == 0;
        }
    };
    CountingJudge j1, j2;
    auto r1 = analyze::run_matching_harness(s, j1, 20, 7);
    auto r2 = analyze::run_matching_harness(s, j2, 20, 7);
    CHECK(j1.seen == j2.seen);
    REQUIRE(r1.size() == r2.size());
    for (size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].correct == r2[i].correct);
        CHECK(r1[i].sampled == r2[i].sampled);
    }
    CountingJudge j3;
    auto r3 = analyze::run_matching_harness(s, j3, 20, 8);
    CHECK(j1.seen != j3.seen); // different seed, different sample
}

TEST_CASE("matching prompt embeds the caption") {
    auto p = analyze::matching_prompt("Open drawer");
    CHECK(p.find("Caption: Open drawer") != std::string::npos);
    CHECK(p.find("True") != std::string::npos);
}

TEST_CASE("judge failures are skipped and reported") {
    store::DatasetStore s;
    uint64_t sig = 1;
    for (int i = 0; i < 10; ++i) {
        auto root = container();
        root.children.push_back(image_view(words(7) + " f" + std::to_string(i)));
        s.write_record(planted_record("A", i, root, sig++));
    }
    struct FlakyJudge : analyze::MatchJudge {
        int calls = 0;
        bool judge(const std::string&, const std::string&) override {
            if (++calls % 2 == 0) throw analyze::JudgeFailure("transport glitch");
            return true;
        }
    };
    FlakyJudge judge;
    auto rows = analyze::run_matching_harness(s, judge, 10, 3);
    for (const auto& r : rows) {
        if (r.bucket == analyze::LabelLengthBucket::B6_10) {
            CHECK(r.sampled == 10);
            CHECK(r.skipped == 5);
            CHECK(r.correct == 5);
            CHECK(r.pct == doctest::Approx(100.0));
        }
    }
}
