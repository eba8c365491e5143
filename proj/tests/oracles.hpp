#pragma once
// Slow, direct reimplementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "radarseg4d/pointcloud.hpp"
#include "radarseg4d/projection.hpp"
#include "radarseg4d/tensor.hpp"

namespace oracle {

using namespace radarseg4d;

/// floor((v - lo) / (hi - lo) * n) on [lo, hi), -1 outside.
inline long bin_of(double v, const Interval& iv, std::size_t n) {
    if (!(v >= iv.lo && v < iv.hi)) return -1;
    long i = static_cast<long>(std::floor((v - iv.lo) / (iv.hi - iv.lo) * static_cast<double>(n)));
    return std::min(i, static_cast<long>(n) - 1);
}

/// Per-cell max scan: every cell takes the max over the points whose bins equal it.
/// Candidates are filtered by row first, so the cost is O(points x (rows + cols)).
inline Matrix rasterize_scan(const std::vector<SphericalPoint>& pts, const ViewSpec& spec) {
    const std::size_t R = spec.coarse_rows(), C = spec.coarse_cols();
    const auto [va, ha] = view_axes(spec.view);
    std::vector<long> rows(pts.size()), cols(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        rows[i] = bin_of(pts[i].value(va), spec.vertical.interval, R);
        cols[i] = bin_of(pts[i].value(ha), spec.horizontal.interval, C);
    }
    Matrix m({R, C});
    std::vector<std::size_t> in_row;
    for (std::size_t r = 0; r < R; ++r) {
        in_row.clear();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rows[i] == long(r)) in_row.push_back(i);
        }
        for (std::size_t c = 0; c < C; ++c) {
            float best = 0.0f;
            for (std::size_t i : in_row) {
                if (cols[i] == long(c)) best = std::max(best, static_cast<float>(pts[i].power - 62.0));
            }
            m.at(r, c) = best;
        }
    }
    return m;
}

/// Same cell rule with per-point scatter (for large clouds).
inline Matrix rasterize_scatter(const std::vector<SphericalPoint>& pts, const ViewSpec& spec) {
    const std::size_t R = spec.coarse_rows(), C = spec.coarse_cols();
    const auto [va, ha] = view_axes(spec.view);
    Matrix m({R, C});
    for (const auto& p : pts) {
        const long r = bin_of(p.value(va), spec.vertical.interval, R);
        const long c = bin_of(p.value(ha), spec.horizontal.interval, C);
        if (r < 0 || c < 0) continue;
        m.at(r, c) = std::max(m.at(r, c), static_cast<float>(p.power - 62.0));
    }
    return m;
}

/// Bilinear corner-aligned resize evaluated directly per output pixel.
inline Matrix resize_direct(const Matrix& m, std::size_t R, std::size_t C) {
    const std::size_t r0 = m.dim(0), c0 = m.dim(1);
    Matrix out({R, C});
    auto pos = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
        return n_out == n_in ? double(i) : double(i) * double(n_in - 1) / double(n_out - 1);
    };
    for (std::size_t i = 0; i < R; ++i) {
        const double y = pos(i, R, r0);
        const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(y), r0 - 1);
        const std::size_t y1 = std::min(y0 + 1, r0 - 1);
        const double fy = y - double(y0);
        for (std::size_t j = 0; j < C; ++j) {
            const double x = pos(j, C, c0);
            const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(x), c0 - 1);
            const std::size_t x1 = std::min(x0 + 1, c0 - 1);
            const double fx = x - double(x0);
            const double v = (1 - fy) * ((1 - fx) * m.at(y0, x0) + fx * m.at(y0, x1)) +
                             fy * ((1 - fx) * m.at(y1, x0) + fx * m.at(y1, x1));
            out.at(i, j) = static_cast<float>(v);
        }
    }
    return out;
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double spill = 0.1) {
    std::uniform_real_distribution<double> r(0.5, 42.0 * (1 + spill)), az(-1.2, 1.2), el(-0.45, 0.45),
        dop(-17.0, 17.0), pw(63.0, 132.6);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        SphericalPoint s{r(rng), az(rng), el(rng), dop(rng), pw(rng)};
        const auto xyz = to_cartesian(s);
        c.points.push_back({float(xyz[0]), float(xyz[1]), float(xyz[2]), float(s.doppler), float(s.power)});
    }
    return c;
}

/// Temporary directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("radarseg4d_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& s) const { return path / s; }
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// True when both trees hold the same relative paths with identical bytes.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, std::string* diff = nullptr) {
    namespace fs = std::filesystem;
    std::vector<std::string> fa, fb;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a).string());
    }
    for (const auto& e : fs::recursive_directory_iterator(b)) {
        if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b).string());
    }
    std::sort(fa.begin(), fa.end());
    std::sort(fb.begin(), fb.end());
    if (fa != fb) {
        if (diff) *diff = "file lists differ";
        return false;
    }
    for (const auto& f : fa) {
        if (slurp(a / f) != slurp(b / f)) {
            if (diff) *diff = f;
            return false;
        }
    }
    return true;
}

}  // namespace oracle
