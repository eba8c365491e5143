#include "radarseg4d/pointcloud.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace radarseg4d {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool parse_size(std::string_view tok, std::size_t& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_float(std::string_view tok, float& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

void expect_tokens(std::size_t line, const std::vector<std::string_view>& toks,
                   std::initializer_list<std::string_view> want) {
    if (toks.size() != want.size() + 1) {
        throw PcdError(line, "expected " + std::to_string(want.size()) + " values for " +
                                 std::string(toks[0]));
    }
    std::size_t i = 1;
    for (std::string_view w : want) {
        if (toks[i] != w) {
            throw PcdError(line, std::string(toks[0]) + " must be '" + std::string(w) + "', got '" +
                                     std::string(toks[i]) + "'");
        }
        ++i;
    }
}

std::string format_float(float v) {
    char buf[32];
    // %.9g round-trips every finite binary32 value.
    int n = std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace

PointCloud parse_pcd(std::string_view bytes) {
    enum Key { kVersion, kFields, kSize, kType, kCount, kWidth, kHeight, kViewpoint, kPoints, kData, kNumKeys };
    static constexpr std::array<std::string_view, kNumKeys> kKeys{
        "VERSION", "FIELDS", "SIZE", "TYPE", "COUNT", "WIDTH", "HEIGHT", "VIEWPOINT", "POINTS", "DATA"};

    std::array<bool, kNumKeys> seen{};
    std::size_t width = 0;
    std::size_t points = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;

    auto next_line = [&](std::string_view& line) {
        if (pos >= bytes.size()) return false;
        std::size_t end = bytes.find('\n', pos);
        if (end == std::string_view::npos) end = bytes.size();
        line = bytes.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        return true;
    };

    std::string_view line;
    while (!seen[kData]) {
        if (!next_line(line)) throw PcdError(line_no, "unexpected end of header");
        auto toks = split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;

        std::size_t key = kNumKeys;
        for (std::size_t k = 0; k < kNumKeys; ++k) {
            if (toks[0] == kKeys[k]) key = k;
        }
        if (key == kNumKeys) throw PcdError(line_no, "unknown header key '" + std::string(toks[0]) + "'");
        if (seen[key]) throw PcdError(line_no, "duplicate header key " + std::string(toks[0]));
        for (std::size_t k = key + 1; k < kNumKeys; ++k) {
            if (seen[k]) throw PcdError(line_no, "header key " + std::string(toks[0]) + " out of order");
        }
        seen[key] = true;

        switch (key) {
            case kVersion: expect_tokens(line_no, toks, {"0.7"}); break;
            case kFields: expect_tokens(line_no, toks, {"x", "y", "z", "doppler", "power"}); break;
            case kSize: expect_tokens(line_no, toks, {"4", "4", "4", "4", "4"}); break;
            case kType: expect_tokens(line_no, toks, {"F", "F", "F", "F", "F"}); break;
            case kCount: expect_tokens(line_no, toks, {"1", "1", "1", "1", "1"}); break;
            case kHeight: expect_tokens(line_no, toks, {"1"}); break;
            case kViewpoint: expect_tokens(line_no, toks, {"0", "0", "0", "1", "0", "0", "0"}); break;
            case kData: expect_tokens(line_no, toks, {"ascii"}); break;
            case kWidth:
            case kPoints: {
                std::size_t v = 0;
                if (toks.size() != 2 || !parse_size(toks[1], v)) {
                    throw PcdError(line_no, std::string(toks[0]) + " must be a non-negative integer");
                }
                (key == kWidth ? width : points) = v;
                break;
            }
            default: break;
        }
    }
    for (std::size_t k = 0; k < kNumKeys; ++k) {
        if (!seen[k]) throw PcdError(line_no, "missing header key " + std::string(kKeys[k]));
    }
    if (width != points) throw PcdError(line_no, "WIDTH and POINTS disagree");

    PointCloud cloud;
    // Guard against absurd POINTS values on corrupt input.
    cloud.points.reserve(std::min<std::size_t>(points, bytes.size() / 10 + 1));
    while (cloud.points.size() < points) {
        if (!next_line(line)) {
            throw PcdError(line_no, "expected " + std::to_string(points) + " data rows, found " +
                                        std::to_string(cloud.points.size()));
        }
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 5) {
            throw PcdError(line_no, "expected 5 fields, found " + std::to_string(toks.size()));
        }
        std::array<float, 5> v{};
        for (std::size_t i = 0; i < 5; ++i) {
            if (!parse_float(toks[i], v[i])) {
                throw PcdError(line_no, "invalid number '" + std::string(toks[i]) + "'");
            }
            if (!std::isfinite(v[i])) throw PcdError(line_no, "non-finite value");
        }
        cloud.points.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
    while (next_line(line)) {
        if (!split_ws(line).empty()) throw PcdError(line_no, "data after declared POINTS");
    }
    return cloud;
}

std::string serialize_pcd(const PointCloud& cloud) {
    const std::size_t n = cloud.points.size();
    std::string out;
    out.reserve(256 + n * 64);
    out += "VERSION 0.7\nFIELDS x y z doppler power\nSIZE 4 4 4 4 4\nTYPE F F F F F\nCOUNT 1 1 1 1 1\n";
    out += "WIDTH " + std::to_string(n) + "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
    out += "POINTS " + std::to_string(n) + "\nDATA ascii\n";
    for (const RadarPoint& p : cloud.points) {
        out += format_float(p.x) + ' ' + format_float(p.y) + ' ' + format_float(p.z) + ' ' +
               format_float(p.doppler) + ' ' + format_float(p.power) + '\n';
    }
    return out;
}

PointCloud read_pcd_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    PointCloud cloud;
    try {
        cloud = parse_pcd(ss.str());
    } catch (const PcdError& e) {
        throw PcdError(e.line(), path.string() + ": " + e.what());
    }
    cloud.timestamp_ns = timestamp_from_filename(path).value_or(0);
    return cloud;
}

void write_pcd_file(const std::filesystem::path& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize_pcd(cloud);
}

std::optional<std::int64_t> timestamp_from_filename(const std::filesystem::path& path) {
    const std::string stem = path.stem().string();
    std::int64_t ts = 0;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), ts);
    if (ec != std::errc() || ptr != stem.data() + stem.size() || ts < 0) return std::nullopt;
    return ts;
}

std::string timestamp_filename(std::int64_t timestamp_ns, std::string_view extension) {
    return std::to_string(timestamp_ns) + std::string(extension);
}

SphericalPoint to_spherical(const RadarPoint& p) {
    const double x = p.x, y = p.y, z = p.z;
    const double ground = std::hypot(x, y);
    SphericalPoint s;
    s.range = std::sqrt(x * x + y * y + z * z);
    // atan2(0, 0) is 0, so the origin lands on azimuth = elevation = 0.
    s.azimuth = std::atan2(y, x);
    s.elevation = std::atan2(z, ground);
    s.doppler = p.doppler;
    s.power = p.power;
    return s;
}

std::array<double, 3> to_cartesian(const SphericalPoint& s) {
    const double ground = s.range * std::cos(s.elevation);
    return {ground * std::cos(s.azimuth), ground * std::sin(s.azimuth), s.range * std::sin(s.elevation)};
}

std::vector<SphericalPoint> to_spherical(const PointCloud& cloud) {
    std::vector<SphericalPoint> out;
    out.reserve(cloud.points.size());
    for (const RadarPoint& p : cloud.points) out.push_back(to_spherical(p));
    return out;
}

CloudReport validate_cloud(const PointCloud& cloud, const FieldOfView& fov) {
    CloudReport r;
    r.total = cloud.points.size();
    for (const RadarPoint& p : cloud.points) {
        if (p.power < kMinObservedPower || p.power > kMaxObservedPower) ++r.power_out_of_range;
        const SphericalPoint s = to_spherical(p);
        std::array<bool, 4> inside{};
        for (Axis a : kAllAxes) {
            inside[axis_index(a)] = fov.interval(a).contains(s.value(a));
            if (!inside[axis_index(a)]) ++r.outside_axis[axis_index(a)];
        }
        for (ViewId v : kAllViews) {
            auto [va, ha] = view_axes(v);
            if (inside[axis_index(va)] && inside[axis_index(ha)]) {
                ++r.inside_view[view_index(v)];
            } else {
                ++r.outside_view[view_index(v)];
            }
        }
    }
    return r;
}

}  // namespace radarseg4d
