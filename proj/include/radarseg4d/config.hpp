#pragma once

#include <filesystem>

#include <json.hpp>

#include "radarseg4d/dataset.hpp"
#include "radarseg4d/fov.hpp"
#include "radarseg4d/network.hpp"
#include "radarseg4d/projection.hpp"
#include "radarseg4d/synthetic.hpp"
#include "radarseg4d/trainer.hpp"

namespace radarseg4d {

// JSON mappings. Angles are written in degrees. Readers fill missing keys with defaults
// and reject unknown keys.
void to_json(nlohmann::json& j, const FieldOfView& fov);
void from_json(const nlohmann::json& j, FieldOfView& fov);
void to_json(nlohmann::json& j, const BinConfig& b);
void from_json(const nlohmann::json& j, BinConfig& b);
void to_json(nlohmann::json& j, const SplitRatios& r);
void from_json(const nlohmann::json& j, SplitRatios& r);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const Hyperparams& h);
void from_json(const nlohmann::json& j, Hyperparams& h);

nlohmann::json stats_to_json(const NormStats& norm, const DatasetStats& stats);
void stats_from_json(const nlohmann::json& j, NormStats& norm, DatasetStats& stats);

/// Whole-pipeline settings from one JSON file with optional sections
/// "fov", "bins", "dataset", "synth", "network", "train".
struct AppConfig {
    DatasetConfig dataset;  // carries fov and bins
    SynthConfig synth;
    NetworkConfig network;
    Hyperparams train;
    bool has_network = false;  // the file had a "network" section
};

/// Parses and validates. Throws std::invalid_argument on bad content.
AppConfig parse_app_config(const nlohmann::json& j);
AppConfig load_app_config(const std::filesystem::path& path);

}  // namespace radarseg4d
