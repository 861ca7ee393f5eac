#include "uicrawl/dedup.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <vector>

#include "uicrawl/util.hpp"

namespace uicrawl::dedup {

std::string to_hex(PerceptualHash h) { return util::to_hex16(h.bits); }

PerceptualHash phash_from_hex(std::string_view s) { return PerceptualHash{util::parse_hex16(s)}; }

namespace {

constexpr int kGrid = 32;

// Area-average resample of the luma plane to kGrid x kGrid. Each output cell
// integrates the exact fractional coverage of source pixels.
std::array<double, kGrid * kGrid> resize_luma(const img::Image& image) {
    std::array<double, kGrid * kGrid> out{};
    const int w = image.width;
    const int h = image.height;
    const double sx = static_cast<double>(w) / kGrid;
    const double sy = static_cast<double>(h) / kGrid;
    for (int oy = 0; oy < kGrid; ++oy) {
        const double y0 = oy * sy;
        const double y1 = (oy + 1) * sy;
        const int iy0 = static_cast<int>(std::floor(y0));
        const int iy1 = std::min(h - 1, static_cast<int>(std::ceil(y1)) - 1);
        for (int ox = 0; ox < kGrid; ++ox) {
            const double x0 = ox * sx;
            const double x1 = (ox + 1) * sx;
            const int ix0 = static_cast<int>(std::floor(x0));
            const int ix1 = std::min(w - 1, static_cast<int>(std::ceil(x1)) - 1);
            double acc = 0.0;
            for (int y = iy0; y <= iy1; ++y) {
                const double cy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                if (cy <= 0) continue;
                for (int x = ix0; x <= ix1; ++x) {
                    const double cx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    if (cx <= 0) continue;
                    const uint8_t* p = image.pixel(x, y);
                    const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                    acc += luma * cx * cy;
                }
            }
            out[oy * kGrid + ox] = acc / (sx * sy);
        }
    }
    return out;
}

// Separable orthonormal DCT-II of the 32x32 grid.
std::array<double, kGrid * kGrid> dct2d(const std::array<double, kGrid * kGrid>& g) {
    static const auto cos_table = [] {
        std::array<double, kGrid * kGrid> t{};
        for (int u = 0; u < kGrid; ++u) {
            for (int x = 0; x < kGrid; ++x) {
                t[u * kGrid + x] =
                    std::cos((2.0 * x + 1.0) * u * std::numbers::pi / (2.0 * kGrid));
            }
        }
        return t;
    }();
    auto scale = [](int k) {
        return k == 0 ? std::sqrt(1.0 / kGrid) : std::sqrt(2.0 / kGrid);
    };

    // Rows first, then columns.
    std::array<double, kGrid * kGrid> rows{};
    for (int x = 0; x < kGrid; ++x) {
        for (int v = 0; v < kGrid; ++v) {
            double acc = 0.0;
            for (int y = 0; y < kGrid; ++y) acc += g[x * kGrid + y] * cos_table[v * kGrid + y];
            rows[x * kGrid + v] = scale(v) * acc;
        }
    }
    std::array<double, kGrid * kGrid> out{};
    for (int v = 0; v < kGrid; ++v) {
        for (int u = 0; u < kGrid; ++u) {
            double acc = 0.0;
            for (int x = 0; x < kGrid; ++x) acc += rows[x * kGrid + v] * cos_table[u * kGrid + x];
            out[u * kGrid + v] = scale(u) * acc;
        }
    }
    return out;
}

} // namespace

PerceptualHash phash(const img::Image& image) {
    if (image.empty()) throw EmptyImage("perceptual hash of an empty image");
    const auto grid = resize_luma(image);
    const auto freq = dct2d(grid);

    // Low-frequency block without the DC term; coefficient (8,0) keeps the
    // value count at 64.
    std::array<double, 64> values{};
    int idx = 0;
    for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
            if (u == 0 && v == 0) continue;
            values[idx++] = freq[u * kGrid + v];
        }
    }
    values[idx] = freq[8 * kGrid + 0];

    std::array<double, 64> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double median = (sorted[31] + sorted[32]) / 2.0;

    uint64_t bits = 0;
    for (int i = 0; i < 64; ++i) {
        if (values[i] > median) bits |= (1ULL << (63 - i));
    }
    return PerceptualHash{bits};
}

int hamming(PerceptualHash a, PerceptualHash b) {
    return std::popcount(a.bits ^ b.bits);
}

bool is_similar(PerceptualHash a, PerceptualHash b, int threshold) {
    return hamming(a, b) <= threshold;
}

std::string to_string(const ScreenSignature& sig) {
    return to_hex(sig.phash) + ":" + util::to_hex16(sig.vh_hash);
}

ScreenSignature signature_from_string(std::string_view s) {
    if (s.size() != 33 || s[16] != ':') throw std::invalid_argument("bad signature string");
    return ScreenSignature{phash_from_hex(s.substr(0, 16)), util::parse_hex16(s.substr(17, 16))};
}

InsertResult SimilarityIndex::insert(PerceptualHash h) {
    ++total_;
    if (!root_) {
        root_ = std::make_unique<Node>(Node{h.bits, 1, {}});
        ++distinct_;
        return InsertResult::Inserted;
    }
    Node* cur = root_.get();
    for (;;) {
        int d = hamming(PerceptualHash{cur->hash}, h);
        if (d == 0) {
            ++cur->count;
            return InsertResult::AlreadyPresent;
        }
        auto it = cur->children.find(d);
        if (it == cur->children.end()) {
            cur->children.emplace(d, std::make_unique<Node>(Node{h.bits, 1, {}}));
            ++distinct_;
            return InsertResult::Inserted;
        }
        cur = it->second.get();
    }
}

size_t SimilarityIndex::count_within(PerceptualHash h, int radius) const {
    if (!root_) return 0;
    size_t total = 0;
    bool exact_present = false;
    std::vector<const Node*> stack{root_.get()};
    while (!stack.empty()) {
        const Node* cur = stack.back();
        stack.pop_back();
        int d = hamming(PerceptualHash{cur->hash}, h);
        if (d == 0) exact_present = true;
        if (d <= radius) total += cur->count;
        const int lo = d - radius;
        const int hi = d + radius;
        for (const auto& [dist, child] : cur->children) {
            if (dist >= lo && dist <= hi) stack.push_back(child.get());
        }
    }
    if (exact_present && total > 0) --total;
    return total;
}

bool SimilarityIndex::contains(PerceptualHash h) const {
    const Node* cur = root_.get();
    while (cur) {
        int d = hamming(PerceptualHash{cur->hash}, h);
        if (d == 0) return true;
        auto it = cur->children.find(d);
        cur = it == cur->children.end() ? nullptr : it->second.get();
    }
    return false;
}

} // namespace uicrawl::dedup
