#include "radarseg4d/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

#include <png.h>

namespace radarseg4d {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, int color_type,
               std::size_t channels, std::span<const std::uint8_t> data) {
    if (data.size() != width * height * channels) {
        throw std::invalid_argument("write_png: pixel buffer size mismatch for " + path.string());
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng: failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < height; ++r) {
        png_write_row(png, const_cast<png_bytep>(data.data() + r * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels) {
    write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 1, pixels);
}

void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   std::span<const std::uint8_t> rgb) {
    write_png(path, width, height, PNG_COLOR_TYPE_RGB, 3, rgb);
}

GrayImage read_png_gray(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw std::runtime_error(path.string() + ": not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng: out of memory");
    }
    GrayImage img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng: failed reading " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != img.width) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path.string() + ": unsupported PNG layout");
    }
    img.pixels.resize(img.width * img.height);
    for (std::size_t r = 0; r < img.height; ++r) png_read_row(png, img.pixels.data() + r * img.width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    if (mask.rank() != 2) throw ShapeError("mask must be 2D");
    std::vector<std::uint8_t> px(mask.size());
    std::transform(mask.values().begin(), mask.values().end(), px.begin(),
                   [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
    write_png_gray(path, mask.dim(1), mask.dim(0), px);
}

Mask read_mask_png(const std::filesystem::path& path) {
    GrayImage img = read_png_gray(path);
    Mask mask({img.height, img.width});
    std::transform(img.pixels.begin(), img.pixels.end(), mask.data(),
                   [](std::uint8_t v) -> std::uint8_t { return v > 127 ? 1 : 0; });
    return mask;
}

Rgb viridis(float t) {
    static constexpr std::array<std::array<float, 3>, 10> kStops{{
        {68, 1, 84}, {72, 40, 120}, {62, 73, 137}, {49, 104, 142}, {38, 130, 142},
        {31, 158, 137}, {53, 183, 121}, {110, 206, 88}, {181, 222, 43}, {253, 231, 37},
    }};
    if (!(t > 0.0f)) t = 0.0f;  // also maps NaN to the lowest color
    t = std::min(t, 1.0f);
    const float pos = t * static_cast<float>(kStops.size() - 1);
    const std::size_t i0 = std::min(static_cast<std::size_t>(pos), kStops.size() - 2);
    const float f = pos - static_cast<float>(i0);
    Rgb out{};
    for (std::size_t c = 0; c < 3; ++c) {
        const float v = kStops[i0][c] + f * (kStops[i0 + 1][c] - kStops[i0][c]);
        out[c] = static_cast<std::uint8_t>(std::lround(v));
    }
    return out;
}

std::vector<std::uint8_t> colorize(const Matrix& normalized) {
    std::vector<std::uint8_t> rgb(normalized.size() * 3);
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        const Rgb c = viridis(normalized[i]);
        std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(i * 3));
    }
    return rgb;
}

std::vector<std::uint8_t> colorize_mask(const Mask& mask) {
    std::vector<std::uint8_t> rgb(mask.size() * 3, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) rgb[i * 3] = 255;
    }
    return rgb;
}

}  // namespace radarseg4d
