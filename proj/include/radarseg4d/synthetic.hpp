#pragma once

#include <cstdint>
#include <vector>

#include "radarseg4d/fov.hpp"
#include "radarseg4d/pointcloud.hpp"
#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

/// Labeled scene generator settings. Persons are Gaussian point clusters that
/// keep their placement within a sequence and walk radially, so their Doppler
/// is coherent; clutter is uniform over the field of view at lower power.
struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t frames_per_sequence = 20;
    std::int64_t frame_period_ns = 100'000'000;
    std::int64_t mask_jitter_ns = 20'000'000;

    // Probability of k persons in a sequence, indexed by k.
    std::vector<double> person_count_weights{0.39, 0.41, 0.15, 0.05};
    Interval person_range{4.0, 30.0};
    Interval person_azimuth{deg2rad(-50.0), deg2rad(50.0)};
    Interval person_elevation{deg2rad(-8.0), deg2rad(4.0)};
    std::size_t person_points_min = 30;
    std::size_t person_points_max = 60;
    double person_sigma_lateral = 0.22;   // m
    double person_sigma_vertical = 0.40;  // m
    double person_sigma_depth = 0.15;     // m
    double person_speed_max = 1.5;        // m/s, radial
    double person_doppler_noise = 0.1;    // m/s
    double person_power_mean = 105.0;
    double person_power_sd = 6.0;

    double clutter_points_mean = 60.0;  // per frame, count uniform in [0, 2 * mean]
    Interval clutter_power{63.0, 85.0};
    double clutter_doppler_sd = 0.2;

    void validate(const FieldOfView& fov) const;
    double mean_persons() const;
    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SyntheticFrame {
    PointCloud cloud;
    Mask mask;
    std::int64_t mask_timestamp_ns = 0;
    std::size_t persons = 0;
};

/// Deterministic in (cfg.seed, frame_index). The mask marks the coarse EA cells hit by
/// person points, resized to the final EA grid and thresholded at 0.5.
SyntheticFrame generate_synthetic_scene(const SynthConfig& cfg, const FieldOfView& fov, const BinConfig& bins,
                                        std::size_t frame_index);

/// EA label mask for a set of person points: coarse occupancy -> resize -> (> 0.5).
Mask mask_from_points(const std::vector<RadarPoint>& person_points, const FieldOfView& fov, const BinConfig& bins);

/// Expected person-pixel fraction of the generated masks, by quadrature over person
/// placement with a Gaussian angular footprint model (no sampling of points).
double implied_person_fraction(const SynthConfig& cfg, const FieldOfView& fov, const BinConfig& bins);

}  // namespace radarseg4d
