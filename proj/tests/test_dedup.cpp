#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "uicrawl/dedup.hpp"
#include "uicrawl/image.hpp"
#include "uicrawl/util.hpp"

using namespace uicrawl;

namespace {

// Structured fixture image: gradient background with a few rectangles, enough
// signal that every DCT value sits well away from the median.
img::Image fixture_image(int w, int h, uint64_t seed) {
    img::Image im = img::Image::solid(w, h, 255, 255, 255);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            uint8_t* p = im.pixel(x, y);
            p[0] = static_cast<uint8_t>((x * 255) / std::max(1, w - 1));
            p[1] = static_cast<uint8_t>((y * 255) / std::max(1, h - 1));
            p[2] = static_cast<uint8_t>(((x + y) * 255) / std::max(1, w + h - 2));
        }
    }
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 6; ++i) {
        int l = static_cast<int>(util::rng_below(rng, static_cast<uint64_t>(w)));
        int t = static_cast<int>(util::rng_below(rng, static_cast<uint64_t>(h)));
        int r = std::min<int>(w, l + 20 + static_cast<int>(util::rng_below(rng, 80)));
        int b = std::min<int>(h, t + 20 + static_cast<int>(util::rng_below(rng, 80)));
        im.fill_rect(l, t, r, b, static_cast<uint8_t>(util::rng_below(rng, 256)),
                     static_cast<uint8_t>(util::rng_below(rng, 256)),
                     static_cast<uint8_t>(util::rng_below(rng, 256)));
    }
    return im;
}

} // namespace

TEST_CASE("phash: deterministic") {
    auto im = fixture_image(256, 512, 1);
    CHECK(dedup::phash(im) == dedup::phash(im));
}

TEST_CASE("phash: invariant to lossless encoding") {
    auto im = fixture_image(200, 300, 2);
    auto fast = img::decode_png(img::encode_png(im, 1));
    auto small = img::decode_png(img::encode_png(im, 9));
    CHECK(fast.rgb == im.rgb);
    CHECK(small.rgb == im.rgb);
    CHECK(dedup::phash(fast) == dedup::phash(im));
    CHECK(dedup::phash(small) == dedup::phash(im));
}

TEST_CASE("phash: bit-exact against the scalar DCT oracle") {
    struct Case {
        int w, h;
        uint64_t seed;
    };
    for (Case c : {Case{256, 512, 3}, Case{137, 291, 4}, Case{64, 64, 5}, Case{512, 256, 6},
                   Case{33, 47, 7}}) {
        auto im = fixture_image(c.w, c.h, c.seed);
        CHECK(dedup::phash(im).bits == oracles::phash_oracle(im));
    }
}

TEST_CASE("phash: empty image rejected") {
    img::Image empty;
    CHECK_THROWS_AS(dedup::phash(empty), dedup::EmptyImage);
}

TEST_CASE("phash: hex round-trip") {
    auto h = dedup::phash(fixture_image(100, 100, 8));
    CHECK(dedup::phash_from_hex(dedup::to_hex(h)) == h);
    CHECK(dedup::to_hex(h).size() == 16);
}

TEST_CASE("hamming: identities") {
    dedup::PerceptualHash a{0xdeadbeefcafef00dULL};
    CHECK(dedup::hamming(a, a) == 0);
    dedup::PerceptualHash b{a.bits ^ 0b10110001ULL}; // five flipped bits
    CHECK(dedup::hamming(a, b) == 5);
    dedup::PerceptualHash inv{~a.bits};
    CHECK(dedup::hamming(a, inv) == 64);
}

TEST_CASE("hamming: metric properties on random triples") {
    std::mt19937_64 rng(util::mix_seed(99, "dedup-metric"));
    for (int i = 0; i < 2000; ++i) {
        dedup::PerceptualHash a{rng()}, b{rng()}, c{rng()};
        int dab = dedup::hamming(a, b);
        int dba = dedup::hamming(b, a);
        CHECK(dab == dba);
        CHECK((dab == 0) == (a == b));
        CHECK(dedup::hamming(a, c) <= dab + dedup::hamming(b, c));
        CHECK(dab >= 0);
        CHECK(dab <= 64);
        CHECK(dab == oracles::hamming_oracle(a.bits, b.bits));
    }
}

TEST_CASE("is_similar: threshold-5 semantics") {
    dedup::PerceptualHash a{0};
    dedup::PerceptualHash d5{0b11111ULL};
    dedup::PerceptualHash d6{0b111111ULL};
    CHECK(dedup::is_similar(a, d5));        // distance 5 -> similar
    CHECK(!dedup::is_similar(a, d6));       // distance 6 -> not similar
    CHECK(dedup::is_similar(a, a));
    CHECK(dedup::is_similar(a, d6, 6));
}

TEST_CASE("SimilarityIndex: duplicate insertion reported") {
    dedup::SimilarityIndex idx;
    dedup::PerceptualHash h{42};
    CHECK(idx.insert(h) == dedup::InsertResult::Inserted);
    CHECK(idx.insert(h) == dedup::InsertResult::AlreadyPresent);
    CHECK(idx.distinct_size() == 1);
    CHECK(idx.total_size() == 2);
}

TEST_CASE("SimilarityIndex: self-match excluded") {
    dedup::SimilarityIndex idx;
    dedup::PerceptualHash h{0x123456789abcdef0ULL};
    idx.insert(h);
    CHECK(idx.count_within(h, 5) == 0);
}

TEST_CASE("SimilarityIndex: multiset semantics for identical screens") {
    dedup::SimilarityIndex idx;
    dedup::PerceptualHash h{7};
    for (int i = 0; i < 10; ++i) idx.insert(h);
    CHECK(idx.count_within(h, 5) == 9);
}

TEST_CASE("SimilarityIndex: counts equal brute force on random hashes") {
    std::mt19937_64 rng(util::mix_seed(5, "dedup-index"));
    std::vector<dedup::PerceptualHash> hashes;
    dedup::SimilarityIndex idx;
    for (int i = 0; i < 600; ++i) {
        // mix of dense cluster and uniform hashes so small radii see matches
        uint64_t bits = i % 3 == 0 ? (0xff00ff00ULL ^ (1ULL << util::rng_below(rng, 64))) : rng();
        dedup::PerceptualHash h{bits};
        hashes.push_back(h);
        idx.insert(h);
    }
    for (int r = 0; r <= 8; ++r) {
        for (int q = 0; q < 100; ++q) {
            auto h = hashes[static_cast<size_t>(util::rng_below(rng, hashes.size()))];
            CHECK(idx.count_within(h, r) == oracles::radius_count_oracle(hashes, h, r));
        }
        // queries not present in the index
        dedup::PerceptualHash foreign{rng()};
        CHECK(idx.count_within(foreign, r) == oracles::radius_count_oracle(hashes, foreign, r));
    }
}

TEST_CASE("signature string round-trip") {
    dedup::ScreenSignature sig{dedup::PerceptualHash{0xabcdef0123456789ULL}, 0x1122334455667788ULL};
    auto s = dedup::to_string(sig);
    CHECK(s.size() == 33);
    CHECK(dedup::signature_from_string(s) == sig);
}
