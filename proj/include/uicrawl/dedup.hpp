#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "uicrawl/errors.hpp"
#include "uicrawl/image.hpp"

namespace uicrawl::dedup {

UICRAWL_DEFINE_ERROR(EmptyImage);

struct PerceptualHash {
    uint64_t bits = 0;
    bool operator==(const PerceptualHash&) const = default;
    auto operator<=>(const PerceptualHash&) const = default;
};

std::string to_hex(PerceptualHash h);
PerceptualHash phash_from_hex(std::string_view s);

// 64-bit DCT perceptual hash, pinned bit-exactly:
//   luma = 0.299 R + 0.587 G + 0.114 B
//   area-average resize to 32x32 (fractional pixel coverage)
//   orthonormal type-II 2D DCT
//   coefficients (u,v) for u,v in [0,8), dropping (0,0), plus (8,0) -> 64 values
//   bit i = value_i > median  (median of an even count: mean of the middle two)
//   packed MSB-first in value order
PerceptualHash phash(const img::Image& image);

int hamming(PerceptualHash a, PerceptualHash b);

// "similar" means Hamming distance <= threshold (default 5).
bool is_similar(PerceptualHash a, PerceptualHash b, int threshold = 5);

// Identity key of a screen state: visual hash plus structural hash.
struct ScreenSignature {
    PerceptualHash phash;
    uint64_t vh_hash = 0;
    bool operator==(const ScreenSignature&) const = default;
    auto operator<=>(const ScreenSignature&) const = default;
};

std::string to_string(const ScreenSignature& sig); // "<phash hex>:<vh hex>"
ScreenSignature signature_from_string(std::string_view s);

enum class InsertResult { Inserted, AlreadyPresent };

// BK-tree over Hamming distance. Stores multiplicities, so radius counts are
// over the inserted multiset. Not thread safe for writes: ingest from a single
// writer, then query freely (documented single-writer contract).
class SimilarityIndex {
public:
    InsertResult insert(PerceptualHash h);

    // |{x in inserted multiset : hamming(x, h) <= radius}|, minus one if h
    // itself was inserted (a screen is not similar to itself).
    size_t count_within(PerceptualHash h, int radius) const;

    bool contains(PerceptualHash h) const;
    size_t distinct_size() const { return distinct_; }
    size_t total_size() const { return total_; }

private:
    struct Node {
        uint64_t hash;
        size_t count;
        std::map<int, std::unique_ptr<Node>> children;
    };
    std::unique_ptr<Node> root_;
    size_t distinct_ = 0;
    size_t total_ = 0;
};

} // namespace uicrawl::dedup
