#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "radarseg4d/fov.hpp"

namespace radarseg4d {

/// One radar return in the sensor frame (x forward, y left, z up).
struct RadarPoint {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;
    float doppler = 0.0f;  // signed radial velocity, m/s
    float power = 0.0f;    // dimensionless return power

    friend bool operator==(const RadarPoint&, const RadarPoint&) = default;
};

struct PointCloud {
    std::int64_t timestamp_ns = 0;
    std::vector<RadarPoint> points;

    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct SphericalPoint {
    double range = 0.0;
    double azimuth = 0.0;    // 0 straight ahead, positive left
    double elevation = 0.0;  // 0 horizontal, positive up
    double doppler = 0.0;
    double power = 0.0;

    double value(Axis axis) const {
        switch (axis) {
            case Axis::Elevation: return elevation;
            case Axis::Azimuth: return azimuth;
            case Axis::Range: return range;
            case Axis::Doppler: return doppler;
        }
        return 0.0;
    }
};

/// Power range observed on the real sensor; values outside are accepted but counted.
inline constexpr double kMinObservedPower = 63.0;
inline constexpr double kMaxObservedPower = 132.6;

class PcdError : public std::runtime_error {
public:
    PcdError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parses ASCII PCD v0.7 with FIELDS x y z doppler power. Timestamp is left at 0.
PointCloud parse_pcd(std::string_view bytes);
std::string serialize_pcd(const PointCloud& cloud);

PointCloud read_pcd_file(const std::filesystem::path& path);
void write_pcd_file(const std::filesystem::path& path, const PointCloud& cloud);

/// "<nanoseconds>.pcd" -> nanoseconds.
std::optional<std::int64_t> timestamp_from_filename(const std::filesystem::path& path);
std::string timestamp_filename(std::int64_t timestamp_ns, std::string_view extension);

SphericalPoint to_spherical(const RadarPoint& p);
/// Inverse of to_spherical on the position axes (double precision).
std::array<double, 3> to_cartesian(const SphericalPoint& s);

std::vector<SphericalPoint> to_spherical(const PointCloud& cloud);

struct CloudReport {
    std::size_t total = 0;
    std::size_t power_out_of_range = 0;
    std::array<std::size_t, 4> outside_axis{};  // indexed by axis_index
    std::array<std::size_t, 5> inside_view{};   // indexed by view_index
    std::array<std::size_t, 5> outside_view{};

    std::size_t outside(Axis a) const { return outside_axis[axis_index(a)]; }
    std::size_t inside(ViewId v) const { return inside_view[view_index(v)]; }
};

CloudReport validate_cloud(const PointCloud& cloud, const FieldOfView& fov);

}  // namespace radarseg4d
