#include "radarseg4d/projection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace radarseg4d {

void ViewSpec::validate() const {
    for (const AxisGrid* g : {&vertical, &horizontal}) {
        if (!(g->interval.lo < g->interval.hi)) {
            throw std::invalid_argument(std::string(view_name(view)) + ": empty " +
                                        std::string(axis_name(g->axis)) + " interval");
        }
        if (g->coarse_bins == 0 || g->bins == 0) {
            throw std::invalid_argument(std::string(view_name(view)) + ": zero bin count");
        }
        if (g->coarse_bins == 1 && g->bins != 1) {
            throw std::invalid_argument(std::string(view_name(view)) +
                                        ": cannot resize an axis of length 1");
        }
    }
}

ViewSpec make_view_spec(ViewId view, const FieldOfView& fov, const BinConfig& bins) {
    auto [va, ha] = view_axes(view);
    ViewSpec spec;
    spec.view = view;
    spec.vertical = {va, fov.interval(va), bins.coarse(va), bins.final_bins(va)};
    spec.horizontal = {ha, fov.interval(ha), bins.coarse(ha), bins.final_bins(ha)};
    spec.validate();
    return spec;
}

std::array<ViewSpec, 5> make_view_specs(const FieldOfView& fov, const BinConfig& bins) {
    std::array<ViewSpec, 5> specs;
    for (ViewId v : kAllViews) specs[view_index(v)] = make_view_spec(v, fov, bins);
    return specs;
}

std::optional<std::size_t> bin_index(double value, const Interval& interval, std::size_t n_bins) {
    if (n_bins == 0 || !interval.contains(value)) return std::nullopt;
    const double scaled = (value - interval.lo) / (interval.hi - interval.lo) * static_cast<double>(n_bins);
    // Rounding can push values just below hi onto n_bins.
    return std::min(static_cast<std::size_t>(std::floor(scaled)), n_bins - 1);
}

Matrix rasterize_view(std::span<const SphericalPoint> points, const ViewSpec& spec) {
    const std::size_t rows = spec.coarse_rows();
    const std::size_t cols = spec.coarse_cols();
    Matrix grid({rows, cols}, 0.0f);
    for (const SphericalPoint& p : points) {
        auto r = bin_index(p.value(spec.vertical.axis), spec.vertical.interval, rows);
        if (!r) continue;
        auto c = bin_index(p.value(spec.horizontal.axis), spec.horizontal.interval, cols);
        if (!c) continue;
        const float shifted = static_cast<float>(p.power - kPowerShift);
        float& cell = grid.at(*r, *c);
        cell = std::max(cell, shifted);
    }
    return grid;
}

namespace {

struct Tap {
    std::size_t i0;
    std::size_t i1;
    double frac;
};

std::vector<Tap> linear_taps(std::size_t n_src, std::size_t n_dst) {
    std::vector<Tap> taps(n_dst);
    for (std::size_t i = 0; i < n_dst; ++i) {
        const double pos = n_dst == 1 ? 0.0
                                      : static_cast<double>(i) * static_cast<double>(n_src - 1) /
                                            static_cast<double>(n_dst - 1);
        std::size_t i0 = std::min(static_cast<std::size_t>(std::floor(pos)), n_src - 1);
        std::size_t i1 = std::min(i0 + 1, n_src - 1);
        taps[i] = {i0, i1, i0 == i1 ? 0.0 : pos - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

Matrix resize_linear(const Matrix& m, std::size_t new_rows, std::size_t new_cols) {
    if (m.rank() != 2) throw ShapeError("resize_linear expects a matrix");
    const std::size_t rows = m.dim(0);
    const std::size_t cols = m.dim(1);
    if (new_rows == 0 || new_cols == 0) throw std::invalid_argument("resize_linear: zero target size");
    if ((rows < 2 && new_rows != rows) || (cols < 2 && new_cols != cols)) {
        throw std::invalid_argument("resize_linear: cannot resize an axis of length " +
                                    std::to_string(rows < 2 && new_rows != rows ? rows : cols));
    }

    // Rows first into double, then columns; a + f * (b - a) keeps constants exact.
    std::vector<double> tmp(new_rows * cols);
    if (new_rows == rows) {
        std::copy(m.values().begin(), m.values().end(), tmp.begin());
    } else {
        const auto taps = linear_taps(rows, new_rows);
        for (std::size_t r = 0; r < new_rows; ++r) {
            const Tap& t = taps[r];
            for (std::size_t c = 0; c < cols; ++c) {
                const double a = m.at(t.i0, c);
                const double b = m.at(t.i1, c);
                tmp[r * cols + c] = a + t.frac * (b - a);
            }
        }
    }

    Matrix out({new_rows, new_cols});
    if (new_cols == cols) {
        std::transform(tmp.begin(), tmp.end(), out.data(), [](double v) { return static_cast<float>(v); });
        return out;
    }
    const auto taps = linear_taps(cols, new_cols);
    for (std::size_t r = 0; r < new_rows; ++r) {
        const double* row = &tmp[r * cols];
        for (std::size_t c = 0; c < new_cols; ++c) {
            const Tap& t = taps[c];
            const double a = row[t.i0];
            const double b = row[t.i1];
            out.at(r, c) = static_cast<float>(a + t.frac * (b - a));
        }
    }
    return out;
}

FrameHeatmaps project_frame(const PointCloud& cloud, const std::array<ViewSpec, 5>& specs) {
    const auto points = to_spherical(cloud);
    FrameHeatmaps out;
    for (ViewId v : kAllViews) {
        const ViewSpec& spec = specs[view_index(v)];
        if (spec.view != v) throw std::invalid_argument("view specs out of order");
        Matrix coarse = rasterize_view(points, spec);
        Heatmap& h = out[view_index(v)];
        h.view = v;
        h.timestamp_ns = cloud.timestamp_ns;
        h.matrix = resize_linear(coarse, spec.rows(), spec.cols());
    }
    return out;
}

void NormStatsAccumulator::add(const Heatmap& h) {
    if (h.matrix.empty()) return;
    auto [lo, hi] = std::minmax_element(h.matrix.values().begin(), h.matrix.values().end());
    auto& slot = views_[view_index(h.view)];
    if (!slot) {
        slot = ValueRange{*lo, *hi};
    } else {
        slot->min = std::min(slot->min, *lo);
        slot->max = std::max(slot->max, *hi);
    }
}

void NormStatsAccumulator::merge(const NormStatsAccumulator& other) {
    for (std::size_t i = 0; i < views_.size(); ++i) {
        if (!other.views_[i]) continue;
        if (!views_[i]) {
            views_[i] = other.views_[i];
        } else {
            views_[i]->min = std::min(views_[i]->min, other.views_[i]->min);
            views_[i]->max = std::max(views_[i]->max, other.views_[i]->max);
        }
    }
}

NormStats NormStatsAccumulator::finish() const {
    NormStats s;
    for (ViewId v : kAllViews) {
        const auto& slot = views_[view_index(v)];
        if (!slot) {
            throw std::invalid_argument("no heatmaps for view " + std::string(view_name(v)));
        }
        s[v] = *slot;
    }
    return s;
}

NormStats compute_global_stats(std::span<const FrameHeatmaps> frames) {
    NormStatsAccumulator acc;
    for (const FrameHeatmaps& f : frames) {
        for (const Heatmap& h : f) acc.add(h);
    }
    return acc.finish();
}

Matrix normalize(const Matrix& m, const ValueRange& range) {
    Matrix out(m.shape(), 0.0f);
    const float span = range.max - range.min;
    if (!(span > 0.0f)) return out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = std::clamp((m[i] - range.min) / span, 0.0f, 1.0f);
    }
    return out;
}

Heatmap normalize(const Heatmap& h, const NormStats& stats) {
    Heatmap out = h;
    out.matrix = normalize(h.matrix, stats[h.view]);
    return out;
}

Matrix denormalize(const Matrix& m, const ValueRange& range) {
    Matrix out(m.shape());
    const float span = range.max - range.min;
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] * span + range.min;
    return out;
}

void write_heatmap_bin(const std::filesystem::path& path, const Matrix& m) {
    std::string bytes(m.size() * 4, '\0');
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(m[i]);
        for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Matrix read_heatmap_bin(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != rows * cols * 4) {
        throw std::runtime_error(path.string() + ": expected " + std::to_string(rows * cols * 4) +
                                 " bytes, found " + std::to_string(bytes.size()));
    }
    Matrix m({rows, cols});
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        }
        m[i] = std::bit_cast<float>(bits);
    }
    return m;
}

std::string heatmap_sidecar_json(const Heatmap& h) {
    nlohmann::ordered_json j;
    j["frame_id"] = h.frame_id;
    j["view"] = view_name(h.view);
    j["rows"] = h.matrix.dim(0);
    j["cols"] = h.matrix.dim(1);
    j["timestamp_ns"] = h.timestamp_ns;
    return j.dump(2) + "\n";
}

}  // namespace radarseg4d
