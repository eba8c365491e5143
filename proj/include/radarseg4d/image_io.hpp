#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

using Rgb = std::array<std::uint8_t, 3>;

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels);
void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   std::span<const std::uint8_t> rgb);
/// Reads any 8/16-bit PNG and converts it to 8-bit grayscale.
GrayImage read_png_gray(const std::filesystem::path& path);

/// Masks on disk: 8-bit grayscale, 0 = background, 255 = person.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
/// Pixels above 127 are person.
Mask read_mask_png(const std::filesystem::path& path);

/// Viridis, sampled at ten control points and interpolated; t is clamped to [0, 1].
Rgb viridis(float t);

/// Heatmap with values in [0, 1] to viridis RGB bytes.
std::vector<std::uint8_t> colorize(const Matrix& normalized);
/// Black background, red person.
std::vector<std::uint8_t> colorize_mask(const Mask& mask);

}  // namespace radarseg4d
