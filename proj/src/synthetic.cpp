#include "radarseg4d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "radarseg4d/projection.hpp"

namespace radarseg4d {
namespace {

constexpr std::int64_t kTimeOrigin = 1'000'000'000;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

struct Person {
    double range0;
    double velocity;
    double azimuth;
    double elevation;
};

double range_margin(const SynthConfig& cfg) {
    const double duration = static_cast<double>(cfg.frames_per_sequence - 1) *
                            static_cast<double>(cfg.frame_period_ns) * 1e-9;
    return cfg.person_speed_max * duration;
}

std::vector<Person> sample_persons(const SynthConfig& cfg, std::size_t sequence) {
    auto rng = make_rng(cfg.seed, 1, sequence);
    std::discrete_distribution<std::size_t> count(cfg.person_count_weights.begin(), cfg.person_count_weights.end());
    const std::size_t n = count(rng);
    const double margin = range_margin(cfg);
    std::uniform_real_distribution<double> range(cfg.person_range.lo + margin, cfg.person_range.hi - margin);
    std::uniform_real_distribution<double> speed(-cfg.person_speed_max, cfg.person_speed_max);
    std::uniform_real_distribution<double> az(cfg.person_azimuth.lo, cfg.person_azimuth.hi);
    std::uniform_real_distribution<double> el(cfg.person_elevation.lo, cfg.person_elevation.hi);
    std::vector<Person> persons(n);
    for (Person& p : persons) {
        p.range0 = range(rng);
        p.velocity = speed(rng);
        p.azimuth = az(rng);
        p.elevation = el(rng);
    }
    return persons;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Probability mass of N(mean, sigma) in each of n equal bins over the interval.
std::vector<double> bin_masses(double mean, double sigma, const Interval& iv, std::size_t n) {
    std::vector<double> out(n);
    const double w = iv.width() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = iv.lo + w * static_cast<double>(i);
        out[i] = standard_normal_cdf((a + w - mean) / sigma) - standard_normal_cdf((a - mean) / sigma);
    }
    return out;
}

double pixels_per_coarse_cell(std::size_t coarse, std::size_t final_bins) {
    if (coarse == final_bins) return 1.0;
    return static_cast<double>(final_bins - 1) / static_cast<double>(coarse - 1);
}

}  // namespace

void SynthConfig::validate(const FieldOfView& fov) const {
    if (frames_per_sequence == 0) throw std::invalid_argument("synth: frames_per_sequence must be positive");
    if (frame_period_ns <= 0) throw std::invalid_argument("synth: frame_period_ns must be positive");
    if (mask_jitter_ns < 0) throw std::invalid_argument("synth: mask_jitter_ns must be non-negative");
    if (person_count_weights.empty() ||
        std::any_of(person_count_weights.begin(), person_count_weights.end(), [](double w) { return w < 0.0; }) ||
        std::accumulate(person_count_weights.begin(), person_count_weights.end(), 0.0) <= 0.0) {
        throw std::invalid_argument("synth: person_count_weights must be non-negative with positive sum");
    }
    if (person_points_min == 0 || person_points_min > person_points_max) {
        throw std::invalid_argument("synth: invalid person point count range");
    }
    if (person_sigma_lateral <= 0 || person_sigma_vertical <= 0 || person_sigma_depth < 0 ||
        person_speed_max < 0 || person_doppler_noise < 0 || person_power_sd < 0 || clutter_points_mean < 0 ||
        clutter_doppler_sd < 0) {
        throw std::invalid_argument("synth: spreads and rates must be non-negative");
    }
    auto within = [](const Interval& inner, const Interval& outer) {
        return inner.lo < inner.hi && inner.lo >= outer.lo && inner.hi <= outer.hi;
    };
    const double margin = range_margin(*this);
    if (!within(person_range, fov.range) || person_range.lo + margin >= person_range.hi - margin) {
        throw std::invalid_argument("synth: person range must lie inside the field of view and leave room to walk");
    }
    if (!within(person_azimuth, fov.azimuth) || !within(person_elevation, fov.elevation)) {
        throw std::invalid_argument("synth: person angles must lie inside the field of view");
    }
    if (!fov.doppler.contains(person_speed_max) || !fov.doppler.contains(-person_speed_max)) {
        throw std::invalid_argument("synth: person speed exceeds the Doppler interval");
    }
    if (!(clutter_power.lo <= clutter_power.hi)) throw std::invalid_argument("synth: invalid clutter power interval");
}

double SynthConfig::mean_persons() const {
    double total = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < person_count_weights.size(); ++k) {
        total += person_count_weights[k];
        weighted += static_cast<double>(k) * person_count_weights[k];
    }
    return weighted / total;
}

Mask mask_from_points(const std::vector<RadarPoint>& person_points, const FieldOfView& fov, const BinConfig& bins) {
    const ViewSpec ea = make_view_spec(ViewId::EA, fov, bins);
    Matrix occupancy({ea.coarse_rows(), ea.coarse_cols()}, 0.0f);
    for (const RadarPoint& p : person_points) {
        const SphericalPoint s = to_spherical(p);
        auto r = bin_index(s.elevation, ea.vertical.interval, ea.coarse_rows());
        auto c = bin_index(s.azimuth, ea.horizontal.interval, ea.coarse_cols());
        if (r && c) occupancy.at(*r, *c) = 1.0f;
    }
    const Matrix up = resize_linear(occupancy, ea.rows(), ea.cols());
    Mask mask({ea.rows(), ea.cols()}, 0);
    for (std::size_t i = 0; i < up.size(); ++i) mask[i] = up[i] > 0.5f ? 1 : 0;
    return mask;
}

SyntheticFrame generate_synthetic_scene(const SynthConfig& cfg, const FieldOfView& fov, const BinConfig& bins,
                                        std::size_t frame_index) {
    cfg.validate(fov);
    const std::size_t sequence = frame_index / cfg.frames_per_sequence;
    const std::size_t step = frame_index % cfg.frames_per_sequence;
    const double t = static_cast<double>(step) * static_cast<double>(cfg.frame_period_ns) * 1e-9;

    const std::vector<Person> persons = sample_persons(cfg, sequence);
    auto rng = make_rng(cfg.seed, 2, frame_index);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticFrame frame;
    frame.persons = persons.size();
    frame.cloud.timestamp_ns = kTimeOrigin + static_cast<std::int64_t>(frame_index) * cfg.frame_period_ns;
    std::uniform_int_distribution<std::int64_t> jitter(-cfg.mask_jitter_ns, cfg.mask_jitter_ns);
    frame.mask_timestamp_ns = frame.cloud.timestamp_ns + jitter(rng);

    std::vector<RadarPoint> person_points;
    std::uniform_int_distribution<std::size_t> n_points(cfg.person_points_min, cfg.person_points_max);
    for (const Person& p : persons) {
        const double range = p.range0 + p.velocity * t;
        const double ce = std::cos(p.elevation), se = std::sin(p.elevation);
        const double ca = std::cos(p.azimuth), sa = std::sin(p.azimuth);
        const double radial[3] = {ce * ca, ce * sa, se};
        const double lateral[3] = {-sa, ca, 0.0};
        const std::size_t n = n_points(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = range + cfg.person_sigma_depth * normal(rng);
            const double l = cfg.person_sigma_lateral * normal(rng);
            const double v = cfg.person_sigma_vertical * normal(rng);
            RadarPoint pt;
            pt.x = static_cast<float>(radial[0] * d + lateral[0] * l);
            pt.y = static_cast<float>(radial[1] * d + lateral[1] * l);
            pt.z = static_cast<float>(radial[2] * d + v);
            pt.doppler = static_cast<float>(p.velocity + cfg.person_doppler_noise * normal(rng));
            pt.power = static_cast<float>(std::clamp(cfg.person_power_mean + cfg.person_power_sd * normal(rng),
                                                     kMinObservedPower, kMaxObservedPower));
            person_points.push_back(pt);
        }
    }
    frame.mask = mask_from_points(person_points, fov, bins);
    frame.cloud.points = person_points;

    const auto clutter_max = static_cast<std::size_t>(std::llround(2.0 * cfg.clutter_points_mean));
    std::uniform_int_distribution<std::size_t> n_clutter(0, clutter_max);
    std::uniform_real_distribution<double> cr(fov.range.lo, fov.range.hi);
    std::uniform_real_distribution<double> caz(fov.azimuth.lo, fov.azimuth.hi);
    std::uniform_real_distribution<double> cel(fov.elevation.lo, fov.elevation.hi);
    std::uniform_real_distribution<double> cpow(cfg.clutter_power.lo, cfg.clutter_power.hi);
    const std::size_t n = n_clutter(rng);
    for (std::size_t i = 0; i < n; ++i) {
        SphericalPoint s;
        s.range = cr(rng);
        s.azimuth = caz(rng);
        s.elevation = cel(rng);
        const auto xyz = to_cartesian(s);
        RadarPoint pt{static_cast<float>(xyz[0]), static_cast<float>(xyz[1]), static_cast<float>(xyz[2]),
                      static_cast<float>(cfg.clutter_doppler_sd * normal(rng)), static_cast<float>(cpow(rng))};
        frame.cloud.points.push_back(pt);
    }
    return frame;
}

double implied_person_fraction(const SynthConfig& cfg, const FieldOfView& fov, const BinConfig& bins) {
    cfg.validate(fov);
    constexpr std::size_t kRangeNodes = 16, kAzimuthNodes = 24, kElevationNodes = 12;
    const double margin = range_margin(cfg);
    const Interval ranges{cfg.person_range.lo + margin, cfg.person_range.hi - margin};
    const std::size_t n_lo = cfg.person_points_min, n_hi = cfg.person_points_max;
    const std::size_t rows = bins.elevation_coarse, cols = bins.azimuth_coarse;

    auto node = [](const Interval& iv, std::size_t i, std::size_t n) {
        return iv.lo + iv.width() * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    };

    double cells = 0.0;
    for (std::size_t ir = 0; ir < kRangeNodes; ++ir) {
        const double r = node(ranges, ir, kRangeNodes);
        for (std::size_t ie = 0; ie < kElevationNodes; ++ie) {
            const double el = node(cfg.person_elevation, ie, kElevationNodes);
            const double sigma_el = cfg.person_sigma_vertical * std::cos(el) / r;
            const double sigma_az = cfg.person_sigma_lateral / (r * std::cos(el));
            const auto qe = bin_masses(el, sigma_el, fov.elevation, rows);
            for (std::size_t ia = 0; ia < kAzimuthNodes; ++ia) {
                const double az = node(cfg.person_azimuth, ia, kAzimuthNodes);
                const auto qa = bin_masses(az, sigma_az, fov.azimuth, cols);
                for (std::size_t i = 0; i < rows; ++i) {
                    if (qe[i] < 1e-9) continue;
                    for (std::size_t j = 0; j < cols; ++j) {
                        const double q = qe[i] * qa[j];
                        if (q < 1e-12) continue;
                        // P(cell hit) averaged over the uniform point count.
                        double hit = 0.0;
                        for (std::size_t n = n_lo; n <= n_hi; ++n) hit += 1.0 - std::pow(1.0 - q, static_cast<double>(n));
                        cells += hit / static_cast<double>(n_hi - n_lo + 1);
                    }
                }
            }
        }
    }
    cells /= static_cast<double>(kRangeNodes * kAzimuthNodes * kElevationNodes);

    const double pixels = cells * pixels_per_coarse_cell(rows, bins.elevation) *
                          pixels_per_coarse_cell(cols, bins.azimuth);
    return cfg.mean_persons() * pixels / static_cast<double>(bins.elevation * bins.azimuth);
}

}  // namespace radarseg4d
