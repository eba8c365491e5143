#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "radarseg4d/config.hpp"

using namespace radarseg4d;
using nlohmann::json;

namespace {

void expect_near(const Interval& a, const Interval& b) {
    EXPECT_NEAR(a.lo, b.lo, 1e-12);
    EXPECT_NEAR(a.hi, b.hi, 1e-12);
}

}  // namespace

TEST(ConfigJson, NetworkRoundTrip) {
    for (const auto& c : {NetworkConfig::reference(), NetworkConfig::compact(), NetworkConfig::tiny(),
                          fixture::small_network()}) {
        EXPECT_EQ(json(c).get<NetworkConfig>(), c);
    }
}

TEST(ConfigJson, PresetWithOverrides) {
    const auto c = json::parse(R"({"preset": "compact", "aspp_out_channels": 6})").get<NetworkConfig>();
    NetworkConfig want = NetworkConfig::compact();
    want.aspp_out_channels = 6;
    EXPECT_EQ(c, want);
    EXPECT_THROW(json::parse(R"({"preset": "huge"})").get<NetworkConfig>(), std::invalid_argument);
}

TEST(ConfigJson, DatasetRoundTrip) {
    DatasetConfig d;
    d.bins = fixture::small_bins();
    d.split_seed = 17;
    d.max_subsequence_frames = 50;
    d.exclude_empty_subsequences = true;
    d.synth = SynthConfig{};
    d.synth->person_count_weights = {0.5, 0.5};
    const auto back = json(d).get<DatasetConfig>();
    EXPECT_EQ(back.bins, d.bins);
    EXPECT_EQ(back.split_seed, 17u);
    EXPECT_EQ(back.max_subsequence_frames, 50u);
    EXPECT_TRUE(back.exclude_empty_subsequences);
    expect_near(back.fov.azimuth, d.fov.azimuth);
    expect_near(back.fov.elevation, d.fov.elevation);
    EXPECT_EQ(back.fov.range, d.fov.range);
    ASSERT_TRUE(back.synth.has_value());
    EXPECT_EQ(back.synth->person_count_weights, d.synth->person_count_weights);
    expect_near(back.synth->person_azimuth, d.synth->person_azimuth);
}

TEST(ConfigJson, AnglesAreDegrees) {
    const json j = FieldOfView{};
    EXPECT_NEAR(j["azimuth_deg"][1].get<double>(), 60.0, 1e-12);
    EXPECT_EQ(j["range_m"][1].get<double>(), 42.0);
}

TEST(ConfigJson, HyperparamsRoundTrip) {
    Hyperparams h;
    h.epochs = 3;
    h.loss.sdice = 2.5;
    h.val_split = "train";
    const auto back = json(h).get<Hyperparams>();
    EXPECT_EQ(back.epochs, 3u);
    EXPECT_EQ(back.loss.sdice, 2.5);
    EXPECT_EQ(back.val_split, "train");
}

TEST(AppConfig, SectionsAndErrors) {
    const json j = json::parse(R"({
        "bins": {"elevation_coarse": 8, "azimuth_coarse": 8, "elevation": 16, "azimuth": 16, "range": 32, "doppler": 32},
        "synth": {"frames_per_sequence": 10},
        "train": {"frames": 3, "epochs": 1}
    })");
    const AppConfig c = parse_app_config(j);
    EXPECT_EQ(c.dataset.bins, fixture::small_bins());
    EXPECT_EQ(c.synth.frames_per_sequence, 10u);
    EXPECT_EQ(c.train.frames, 3u);
    EXPECT_FALSE(c.has_network);

    EXPECT_THROW(parse_app_config(json::parse(R"({"trian": {}})")), std::invalid_argument);
    EXPECT_THROW(parse_app_config(json::parse(R"({"train": {"epoch": 3}})")), std::invalid_argument);
    EXPECT_THROW(parse_app_config(json::parse(R"({"train": {"epochs": "many"}})")), std::invalid_argument);
    EXPECT_THROW(parse_app_config(json::parse(R"({"train": {"val_split": "dev"}})")), std::invalid_argument);
    EXPECT_THROW(parse_app_config(json::parse(R"({"network": {"window": 4}})")), std::invalid_argument);
    EXPECT_THROW(parse_app_config(json::parse(R"({"fov": {"range_m": [10, 5]}})")), std::invalid_argument);
}

TEST(AppConfig, LoadFromFile) {
    oracle::TempDir dir("cfg");
    std::ofstream(dir / "ok.json") << R"({"network": {"preset": "tiny"}})";
    std::ofstream(dir / "bad.json") << "{ not json";
    const AppConfig c = load_app_config(dir / "ok.json");
    EXPECT_TRUE(c.has_network);
    EXPECT_EQ(c.network, NetworkConfig::tiny());
    EXPECT_THROW(load_app_config(dir / "bad.json"), std::invalid_argument);
    EXPECT_THROW(load_app_config(dir / "absent.json"), std::invalid_argument);
}

TEST(StatsJson, RoundTrip) {
    NormStats n;
    for (ViewId v : kAllViews) n[v] = {0.0f, 10.0f + float(view_index(v))};
    DatasetStats s;
    s.masks = 4;
    s.pixels = 400;
    s.person_pixels = 12;
    s.nonempty_masks = 3;
    const json j = stats_to_json(n, s);
    EXPECT_NEAR(j["class_weights"]["person"].get<double>(), 1 - 0.03, 1e-12);
    NormStats n2;
    DatasetStats s2;
    stats_from_json(j, n2, s2);
    EXPECT_EQ(n2, n);
    EXPECT_EQ(s2.person_pixels, 12u);
    EXPECT_EQ(s2.nonempty_masks, 3u);
}
