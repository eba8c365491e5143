#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

namespace radarseg4d {

enum class Axis { Elevation, Azimuth, Range, Doppler };
inline constexpr std::array<Axis, 4> kAllAxes{Axis::Elevation, Axis::Azimuth, Axis::Range, Axis::Doppler};

enum class ViewId { EA, ER, ED, RA, DA };
inline constexpr std::array<ViewId, 5> kAllViews{ViewId::EA, ViewId::ER, ViewId::ED, ViewId::RA, ViewId::DA};

std::string_view axis_name(Axis axis);
std::string_view view_name(ViewId view);  // lower case: "ea", "er", ...
std::optional<ViewId> parse_view(std::string_view name);

inline constexpr std::size_t axis_index(Axis a) { return static_cast<std::size_t>(a); }
inline constexpr std::size_t view_index(ViewId v) { return static_cast<std::size_t>(v); }

/// Axes of a view as (vertical, horizontal).
constexpr std::array<Axis, 2> view_axes(ViewId view) {
    switch (view) {
        case ViewId::EA: return {Axis::Elevation, Axis::Azimuth};
        case ViewId::ER: return {Axis::Elevation, Axis::Range};
        case ViewId::ED: return {Axis::Elevation, Axis::Doppler};
        case ViewId::RA: return {Axis::Range, Axis::Azimuth};
        case ViewId::DA: return {Axis::Doppler, Axis::Azimuth};
    }
    return {Axis::Elevation, Axis::Azimuth};
}

/// Half-open value interval [lo, hi).
struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double v) const { return v >= lo && v < hi; }
    double width() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Value intervals covered by the heatmap grids. Angles in radians.
struct FieldOfView {
    Interval elevation{deg2rad(-20.0), deg2rad(20.0)};
    Interval azimuth{deg2rad(-60.0), deg2rad(60.0)};
    Interval range{0.0, 42.0};
    Interval doppler{-16.0, 16.0};

    const Interval& interval(Axis axis) const;
    Interval& interval(Axis axis);
    void validate() const;  // throws std::invalid_argument when lo >= hi
    friend bool operator==(const FieldOfView&, const FieldOfView&) = default;
};

/// Bin counts per axis. Elevation and azimuth are first rasterized at the
/// coarse counts and then resized to the final counts.
struct BinConfig {
    std::size_t elevation_coarse = 28;
    std::size_t azimuth_coarse = 44;
    std::size_t elevation = 128;
    std::size_t azimuth = 128;
    std::size_t range = 256;
    std::size_t doppler = 256;

    std::size_t coarse(Axis axis) const;
    std::size_t final_bins(Axis axis) const;
    void validate() const;
    friend bool operator==(const BinConfig&, const BinConfig&) = default;
};

}  // namespace radarseg4d
