#include "radarseg4d/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

using nlohmann::json;

namespace radarseg4d {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* section) {
    if (!j.is_object()) throw std::invalid_argument(std::string(section) + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.count(key)) throw std::invalid_argument(std::string(section) + ": unknown key '" + key + "'");
    }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

json interval_json(const Interval& i, bool degrees) {
    return degrees ? json::array({rad2deg(i.lo), rad2deg(i.hi)}) : json::array({i.lo, i.hi});
}

void read_interval(const json& j, const char* key, Interval& out, bool degrees) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw std::invalid_argument(std::string(key) + ": expected [lo, hi]");
    out.lo = a[0].get<double>();
    out.hi = a[1].get<double>();
    if (degrees) {
        out.lo = deg2rad(out.lo);
        out.hi = deg2rad(out.hi);
    }
}

json dims_json(const ViewDims& d) { return json::array({d.rows, d.cols}); }

ViewDims dims_from(const json& a) {
    if (!a.is_array() || a.size() != 2) throw std::invalid_argument("view dims: expected [rows, cols]");
    return {a[0].get<std::size_t>(), a[1].get<std::size_t>()};
}

}  // namespace

void to_json(json& j, const FieldOfView& fov) {
    j = {{"elevation_deg", interval_json(fov.elevation, true)},
         {"azimuth_deg", interval_json(fov.azimuth, true)},
         {"range_m", interval_json(fov.range, false)},
         {"doppler_mps", interval_json(fov.doppler, false)}};
}

void from_json(const json& j, FieldOfView& fov) {
    check_keys(j, {"elevation_deg", "azimuth_deg", "range_m", "doppler_mps"}, "fov");
    read_interval(j, "elevation_deg", fov.elevation, true);
    read_interval(j, "azimuth_deg", fov.azimuth, true);
    read_interval(j, "range_m", fov.range, false);
    read_interval(j, "doppler_mps", fov.doppler, false);
}

void to_json(json& j, const BinConfig& b) {
    j = {{"elevation_coarse", b.elevation_coarse}, {"azimuth_coarse", b.azimuth_coarse}, {"elevation", b.elevation},
         {"azimuth", b.azimuth},                   {"range", b.range},                   {"doppler", b.doppler}};
}

void from_json(const json& j, BinConfig& b) {
    check_keys(j, {"elevation_coarse", "azimuth_coarse", "elevation", "azimuth", "range", "doppler"}, "bins");
    read(j, "elevation_coarse", b.elevation_coarse);
    read(j, "azimuth_coarse", b.azimuth_coarse);
    read(j, "elevation", b.elevation);
    read(j, "azimuth", b.azimuth);
    read(j, "range", b.range);
    read(j, "doppler", b.doppler);
}

void to_json(json& j, const SplitRatios& r) { j = {{"train", r.train}, {"val", r.val}, {"test", r.test}}; }

void from_json(const json& j, SplitRatios& r) {
    check_keys(j, {"train", "val", "test"}, "split_ratios");
    read(j, "train", r.train);
    read(j, "val", r.val);
    read(j, "test", r.test);
}

void to_json(json& j, const SynthConfig& c) {
    j = {{"seed", c.seed},
         {"frames_per_sequence", c.frames_per_sequence},
         {"frame_period_ns", c.frame_period_ns},
         {"mask_jitter_ns", c.mask_jitter_ns},
         {"person_count_weights", c.person_count_weights},
         {"person_range_m", interval_json(c.person_range, false)},
         {"person_azimuth_deg", interval_json(c.person_azimuth, true)},
         {"person_elevation_deg", interval_json(c.person_elevation, true)},
         {"person_points_min", c.person_points_min},
         {"person_points_max", c.person_points_max},
         {"person_sigma_lateral", c.person_sigma_lateral},
         {"person_sigma_vertical", c.person_sigma_vertical},
         {"person_sigma_depth", c.person_sigma_depth},
         {"person_speed_max", c.person_speed_max},
         {"person_doppler_noise", c.person_doppler_noise},
         {"person_power_mean", c.person_power_mean},
         {"person_power_sd", c.person_power_sd},
         {"clutter_points_mean", c.clutter_points_mean},
         {"clutter_power", interval_json(c.clutter_power, false)},
         {"clutter_doppler_sd", c.clutter_doppler_sd}};
}

void from_json(const json& j, SynthConfig& c) {
    check_keys(j,
               {"seed", "frames_per_sequence", "frame_period_ns", "mask_jitter_ns", "person_count_weights",
                "person_range_m", "person_azimuth_deg", "person_elevation_deg", "person_points_min",
                "person_points_max", "person_sigma_lateral", "person_sigma_vertical", "person_sigma_depth",
                "person_speed_max", "person_doppler_noise", "person_power_mean", "person_power_sd",
                "clutter_points_mean", "clutter_power", "clutter_doppler_sd"},
               "synth");
    read(j, "seed", c.seed);
    read(j, "frames_per_sequence", c.frames_per_sequence);
    read(j, "frame_period_ns", c.frame_period_ns);
    read(j, "mask_jitter_ns", c.mask_jitter_ns);
    read(j, "person_count_weights", c.person_count_weights);
    read_interval(j, "person_range_m", c.person_range, false);
    read_interval(j, "person_azimuth_deg", c.person_azimuth, true);
    read_interval(j, "person_elevation_deg", c.person_elevation, true);
    read(j, "person_points_min", c.person_points_min);
    read(j, "person_points_max", c.person_points_max);
    read(j, "person_sigma_lateral", c.person_sigma_lateral);
    read(j, "person_sigma_vertical", c.person_sigma_vertical);
    read(j, "person_sigma_depth", c.person_sigma_depth);
    read(j, "person_speed_max", c.person_speed_max);
    read(j, "person_doppler_noise", c.person_doppler_noise);
    read(j, "person_power_mean", c.person_power_mean);
    read(j, "person_power_sd", c.person_power_sd);
    read(j, "clutter_points_mean", c.clutter_points_mean);
    read_interval(j, "clutter_power", c.clutter_power, false);
    read(j, "clutter_doppler_sd", c.clutter_doppler_sd);
}

void to_json(json& j, const DatasetConfig& c) {
    j = {{"fov", c.fov},
         {"bins", c.bins},
         {"pairing_threshold_ns", c.pairing_threshold_ns},
         {"split_ratios", c.split_ratios},
         {"split_seed", c.split_seed},
         {"max_subsequence_frames", c.max_subsequence_frames},
         {"exclude_empty_subsequences", c.exclude_empty_subsequences}};
    if (c.synth) j["synth"] = *c.synth;
}

void from_json(const json& j, DatasetConfig& c) {
    check_keys(j,
               {"fov", "bins", "pairing_threshold_ns", "split_ratios", "split_seed", "max_subsequence_frames",
                "exclude_empty_subsequences", "synth"},
               "dataset");
    read(j, "fov", c.fov);
    read(j, "bins", c.bins);
    read(j, "pairing_threshold_ns", c.pairing_threshold_ns);
    read(j, "split_ratios", c.split_ratios);
    read(j, "split_seed", c.split_seed);
    read(j, "max_subsequence_frames", c.max_subsequence_frames);
    read(j, "exclude_empty_subsequences", c.exclude_empty_subsequences);
    if (j.contains("synth")) c.synth = j.at("synth").get<SynthConfig>();
}

void to_json(json& j, const NetworkConfig& c) {
    json dims = json::object();
    for (ViewId v : kAllViews) dims[std::string(view_name(v))] = dims_json(c.input_dims(v));
    j = {{"window", c.window},
         {"temporal_kernels", c.temporal_kernels},
         {"view_dims", dims},
         {"conv3d_channels", c.conv3d_channels},
         {"conv2d_channels", c.conv2d_channels},
         {"aspp_dilations", c.aspp_dilations},
         {"aspp_branch_channels", c.aspp_branch_channels},
         {"aspp_out_channels", c.aspp_out_channels},
         {"latent", dims_json(c.latent)},
         {"decoder_channels", c.decoder_channels},
         {"classes", c.classes}};
}

void from_json(const json& j, NetworkConfig& c) {
    check_keys(j,
               {"preset", "window", "temporal_kernels", "view_dims", "conv3d_channels", "conv2d_channels",
                "aspp_dilations", "aspp_branch_channels", "aspp_out_channels", "latent", "decoder_channels",
                "classes"},
               "network");
    if (j.contains("preset")) {
        const auto p = j.at("preset").get<std::string>();
        if (p == "reference") c = NetworkConfig::reference();
        else if (p == "compact") c = NetworkConfig::compact();
        else if (p == "tiny") c = NetworkConfig::tiny();
        else throw std::invalid_argument("network: unknown preset '" + p + "'");
    }
    read(j, "window", c.window);
    read(j, "temporal_kernels", c.temporal_kernels);
    if (j.contains("view_dims")) {
        const auto& d = j.at("view_dims");
        check_keys(d, {"ea", "er", "ed", "ra", "da"}, "network.view_dims");
        for (ViewId v : kAllViews) {
            const std::string name(view_name(v));
            if (d.contains(name)) c.view_dims[view_index(v)] = dims_from(d.at(name));
        }
    }
    read(j, "conv3d_channels", c.conv3d_channels);
    read(j, "conv2d_channels", c.conv2d_channels);
    read(j, "aspp_dilations", c.aspp_dilations);
    read(j, "aspp_branch_channels", c.aspp_branch_channels);
    read(j, "aspp_out_channels", c.aspp_out_channels);
    if (j.contains("latent")) c.latent = dims_from(j.at("latent"));
    read(j, "decoder_channels", c.decoder_channels);
    read(j, "classes", c.classes);
}

void to_json(json& j, const Hyperparams& h) {
    j = {{"frames", h.frames},
         {"batch_size", h.batch_size},
         {"learning_rate", h.learning_rate},
         {"lr_step_epochs", h.lr_step_epochs},
         {"lr_decay", h.lr_decay},
         {"epochs", h.epochs},
         {"eval_interval_steps", h.eval_interval_steps},
         {"seed", h.seed},
         {"augment", h.augment},
         {"lambda_wce", h.loss.wce},
         {"lambda_sdice", h.loss.sdice},
         {"val_split", h.val_split}};
}

void from_json(const json& j, Hyperparams& h) {
    check_keys(j,
               {"frames", "batch_size", "learning_rate", "lr_step_epochs", "lr_decay", "epochs",
                "eval_interval_steps", "seed", "augment", "lambda_wce", "lambda_sdice", "val_split"},
               "train");
    read(j, "frames", h.frames);
    read(j, "batch_size", h.batch_size);
    read(j, "learning_rate", h.learning_rate);
    read(j, "lr_step_epochs", h.lr_step_epochs);
    read(j, "lr_decay", h.lr_decay);
    read(j, "epochs", h.epochs);
    read(j, "eval_interval_steps", h.eval_interval_steps);
    read(j, "seed", h.seed);
    read(j, "augment", h.augment);
    read(j, "lambda_wce", h.loss.wce);
    read(j, "lambda_sdice", h.loss.sdice);
    read(j, "val_split", h.val_split);
}

json stats_to_json(const NormStats& norm, const DatasetStats& stats) {
    json views = json::object();
    for (ViewId v : kAllViews) views[std::string(view_name(v))] = {{"min", norm[v].min}, {"max", norm[v].max}};
    const ClassWeights w = class_weights(stats);
    return {{"normalization", views},
            {"masks", stats.masks},
            {"pixels", stats.pixels},
            {"person_pixels", stats.person_pixels},
            {"nonempty_masks", stats.nonempty_masks},
            {"person_fraction", stats.person_fraction()},
            {"class_weights", {{"background", w.background}, {"person", w.person}}}};
}

void stats_from_json(const json& j, NormStats& norm, DatasetStats& stats) {
    const auto& views = j.at("normalization");
    for (ViewId v : kAllViews) {
        const auto& r = views.at(std::string(view_name(v)));
        norm[v].min = r.at("min").get<float>();
        norm[v].max = r.at("max").get<float>();
    }
    stats.masks = j.at("masks").get<std::uint64_t>();
    stats.pixels = j.at("pixels").get<std::uint64_t>();
    stats.person_pixels = j.at("person_pixels").get<std::uint64_t>();
    stats.nonempty_masks = j.at("nonempty_masks").get<std::uint64_t>();
}

AppConfig parse_app_config(const json& j) {
    check_keys(j, {"fov", "bins", "dataset", "synth", "network", "train"}, "config");
    AppConfig c;
    try {
        if (j.contains("dataset")) c.dataset = j.at("dataset").get<DatasetConfig>();
        read(j, "fov", c.dataset.fov);
        read(j, "bins", c.dataset.bins);
        read(j, "synth", c.synth);
        if (j.contains("network")) {
            c.network = j.at("network").get<NetworkConfig>();
            c.has_network = true;
        }
        read(j, "train", c.train);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.dataset.validate();
    c.synth.validate(c.dataset.fov);
    c.network.validate();
    c.train.validate();
    return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return parse_app_config(j);
}

}  // namespace radarseg4d
