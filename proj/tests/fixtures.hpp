#pragma once
// Small synthetic corpora and networks sized to match them.

#include <filesystem>

#include "radarseg4d/dataset.hpp"
#include "radarseg4d/network.hpp"

namespace fixture {

using namespace radarseg4d;

/// 16 x 16 EA grid; range and Doppler 32 bins.
inline BinConfig small_bins() {
    BinConfig b;
    b.elevation_coarse = 8;
    b.azimuth_coarse = 8;
    b.elevation = 16;
    b.azimuth = 16;
    b.range = 32;
    b.doppler = 32;
    return b;
}

/// Window of 3 frames on small_bins() views.
inline NetworkConfig small_network() {
    NetworkConfig c;
    c.window = 3;
    c.temporal_kernels = {3, 1};
    c.view_dims = {{{16, 16}, {16, 32}, {16, 32}, {32, 16}, {32, 16}}};
    c.conv3d_channels = {4, 4};
    c.conv2d_channels = {4, 4};
    c.aspp_dilations = {1, 2};
    c.aspp_branch_channels = 4;
    c.aspp_out_channels = 4;
    c.latent = {4, 4};
    c.decoder_channels = {8, 4};
    return c;
}

struct Corpus {
    DatasetConfig config;
    SynthConfig synth;
    std::size_t frames = 40;
};

inline Corpus small_corpus(std::size_t frames = 40, std::uint64_t seed = 1) {
    Corpus c;
    c.config.bins = small_bins();
    c.config.split_ratios = {0.5, 0.25, 0.25};
    c.config.split_seed = seed;
    c.synth.seed = seed;
    c.synth.frames_per_sequence = 10;
    c.synth.person_count_weights = {0.1, 0.6, 0.3};
    c.frames = frames;
    return c;
}

inline CompiledDataset build(const Corpus& c, const std::filesystem::path& dir) {
    DatasetConfig cfg = c.config;
    cfg.synth = c.synth;
    compile_dataset(synthesize_raw(c.synth, cfg.fov, cfg.bins, c.frames), cfg, dir);
    return CompiledDataset::open(dir);
}

}  // namespace fixture
