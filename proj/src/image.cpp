#include "uicrawl/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>

namespace uicrawl::img {

Image Image::solid(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
    Image im;
    im.width = w;
    im.height = h;
    im.rgb.resize(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < im.rgb.size(); i += 3) {
        im.rgb[i] = r;
        im.rgb[i + 1] = g;
        im.rgb[i + 2] = b;
    }
    return im;
}

void Image::fill_rect(int left, int top, int right, int bottom, uint8_t r, uint8_t g, uint8_t b) {
    left = std::clamp(left, 0, width);
    right = std::clamp(right, 0, width);
    top = std::clamp(top, 0, height);
    bottom = std::clamp(bottom, 0, height);
    for (int y = top; y < bottom; ++y) {
        for (int x = left; x < right; ++x) {
            uint8_t* p = pixel(x, y);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
    }
}

namespace {

struct PngByteSink {
    std::vector<uint8_t>* out;
};

void png_vector_write(png_structp png, png_bytep data, png_size_t length) {
    auto* sink = static_cast<PngByteSink*>(png_get_io_ptr(png));
    sink->out->insert(sink->out->end(), data, data + length);
}

void png_noop_flush(png_structp) {}

struct PngByteSource {
    const std::vector<uint8_t>* in;
    size_t pos = 0;
};

void png_vector_read(png_structp png, png_bytep data, png_size_t length) {
    auto* src = static_cast<PngByteSource*>(png_get_io_ptr(png));
    if (src->pos + length > src->in->size()) {
        png_error(png, "unexpected end of PNG stream");
    }
    std::memcpy(data, src->in->data() + src->pos, length);
    src->pos += length;
}

} // namespace

std::vector<uint8_t> encode_png(const Image& image, int compression_level) {
    if (image.empty()) throw ImageIoError("cannot encode an empty image");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageIoError("png_create_info_struct failed");
    }

    std::vector<uint8_t> out;
    PngByteSink sink{&out};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("libpng write error");
    }
    png_set_write_fn(png, &sink, png_vector_write, png_noop_flush);
    png_set_compression_level(png, compression_level);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y) {
        rows[y] = const_cast<png_bytep>(image.rgb.data() + static_cast<size_t>(y) * image.width * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw ImageIoError("not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageIoError("png_create_info_struct failed");
    }
    PngByteSource src{&bytes};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("libpng read error");
    }
    png_set_read_fn(png, &src, png_vector_read);
    png_read_info(png, info);

    // Normalize every PNG variant to 8-bit RGB.
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    Image im;
    im.width = static_cast<int>(png_get_image_width(png, info));
    im.height = static_cast<int>(png_get_image_height(png, info));
    size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<size_t>(im.width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("unexpected PNG row layout after normalization");
    }
    im.rgb.resize(static_cast<size_t>(im.width) * im.height * 3);
    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y) {
        rows[y] = im.rgb.data() + static_cast<size_t>(y) * rowbytes;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

void write_png(const std::filesystem::path& path, const Image& image, int compression_level) {
    auto bytes = encode_png(image, compression_level);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ImageIoError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ImageIoError("short write: " + path.string());
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ImageIoError("cannot open for reading: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

} // namespace uicrawl::img
