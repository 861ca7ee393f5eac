#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uicrawl/errors.hpp"

namespace uicrawl::img {

UICRAWL_DEFINE_ERROR(ImageIoError);

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;

    bool empty() const { return width <= 0 || height <= 0; }

    uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const uint8_t* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
    }

    static Image solid(int w, int h, uint8_t r, uint8_t g, uint8_t b);
    void fill_rect(int left, int top, int right, int bottom, uint8_t r, uint8_t g, uint8_t b);

    bool operator==(const Image&) const = default;
};

std::vector<uint8_t> encode_png(const Image& image, int compression_level = 6);
Image decode_png(const std::vector<uint8_t>& bytes);

void write_png(const std::filesystem::path& path, const Image& image, int compression_level = 6);
Image read_png(const std::filesystem::path& path);

} // namespace uicrawl::img
