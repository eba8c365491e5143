#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radarseg4d/fov.hpp"
#include "radarseg4d/pointcloud.hpp"
#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

/// Shift subtracted from the strongest return of a cell. Observed powers start at 63.0,
/// so populated cells hold values >= 1.0 while empty cells stay at exactly 0.
inline constexpr double kPowerShift = 62.0;

struct AxisGrid {
    Axis axis = Axis::Elevation;
    Interval interval;
    std::size_t coarse_bins = 1;  // rasterization resolution
    std::size_t bins = 1;         // resolution after resize
};

struct ViewSpec {
    ViewId view = ViewId::EA;
    AxisGrid vertical;
    AxisGrid horizontal;

    std::size_t rows() const { return vertical.bins; }
    std::size_t cols() const { return horizontal.bins; }
    std::size_t coarse_rows() const { return vertical.coarse_bins; }
    std::size_t coarse_cols() const { return horizontal.coarse_bins; }
    void validate() const;
};

ViewSpec make_view_spec(ViewId view, const FieldOfView& fov, const BinConfig& bins);
std::array<ViewSpec, 5> make_view_specs(const FieldOfView& fov, const BinConfig& bins);

struct Heatmap {
    ViewId view = ViewId::EA;
    Matrix matrix;
    std::string frame_id;
    std::int64_t timestamp_ns = 0;
};

using FrameHeatmaps = std::array<Heatmap, 5>;

/// Bin of `value` in the half-open interval, or nullopt when outside.
std::optional<std::size_t> bin_index(double value, const Interval& interval, std::size_t n_bins);

/// Coarse grid: each cell holds max(power - 62) over its points, 0 when empty.
Matrix rasterize_view(std::span<const SphericalPoint> points, const ViewSpec& spec);

/// Separable corner-aligned linear interpolation. Axes whose size does not
/// change are copied untouched.
Matrix resize_linear(const Matrix& m, std::size_t new_rows, std::size_t new_cols);

/// Rasterizes every view on its coarse grid, then resizes to the final grid.
FrameHeatmaps project_frame(const PointCloud& cloud, const std::array<ViewSpec, 5>& specs);

struct ValueRange {
    float min = 0.0f;
    float max = 0.0f;
    friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

struct NormStats {
    std::array<ValueRange, 5> views{};

    const ValueRange& operator[](ViewId v) const { return views[view_index(v)]; }
    ValueRange& operator[](ViewId v) { return views[view_index(v)]; }
    friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Incremental per-view min/max reduction; order independent.
class NormStatsAccumulator {
public:
    void add(const Heatmap& h);
    void merge(const NormStatsAccumulator& other);
    /// Throws std::invalid_argument when any view has not received a heatmap.
    NormStats finish() const;

private:
    std::array<std::optional<ValueRange>, 5> views_{};
};

NormStats compute_global_stats(std::span<const FrameHeatmaps> frames);

Matrix normalize(const Matrix& m, const ValueRange& range);
Heatmap normalize(const Heatmap& h, const NormStats& stats);
Matrix denormalize(const Matrix& m, const ValueRange& range);

// Heatmap files: little-endian float32, row-major, no header.
void write_heatmap_bin(const std::filesystem::path& path, const Matrix& m);
Matrix read_heatmap_bin(const std::filesystem::path& path, std::size_t rows, std::size_t cols);
std::string heatmap_sidecar_json(const Heatmap& h);

}  // namespace radarseg4d
