#include "radarseg4d/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "radarseg4d/config.hpp"
#include "radarseg4d/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace radarseg4d {

std::string_view split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(std::string_view name) {
    for (Split s : kAllSplits) {
        if (split_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string frame_id_string(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return buf;
}

PairingResult pair_annotations(std::span<const std::int64_t> cloud_ts, std::span<const std::int64_t> mask_ts,
                               std::int64_t max_delta_ns) {
    PairingResult result;
    if (mask_ts.empty()) {
        result.dropped.resize(cloud_ts.size());
        std::iota(result.dropped.begin(), result.dropped.end(), std::size_t{0});
        return result;
    }
    for (std::size_t i = 0; i < cloud_ts.size(); ++i) {
        const std::int64_t t = cloud_ts[i];
        // First mask at or after t; the candidate before it wins ties.
        const auto it = std::lower_bound(mask_ts.begin(), mask_ts.end(), t);
        std::size_t best = static_cast<std::size_t>(it - mask_ts.begin());
        if (best == mask_ts.size()) {
            best = mask_ts.size() - 1;
        } else if (best > 0 && t - mask_ts[best - 1] <= mask_ts[best] - t) {
            --best;
        }
        // Equal timestamps: move to the earliest mask carrying that time.
        while (best > 0 && mask_ts[best - 1] == mask_ts[best]) --best;
        const std::int64_t delta = mask_ts[best] - t;
        if (std::llabs(delta) > max_delta_ns) {
            result.dropped.push_back(i);
        } else {
            result.pairs.push_back({i, best, delta});
        }
    }
    return result;
}

SplitAssignment split_sequences(std::vector<std::string> names, const SplitRatios& ratios, std::uint64_t seed) {
    double sum = 0.0;
    std::size_t positive = 0;
    for (Split s : kAllSplits) {
        if (ratios[s] < 0.0) throw std::invalid_argument("split ratios must be non-negative");
        sum += ratios[s];
        positive += ratios[s] > 0.0 ? 1 : 0;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
    if (names.size() < positive) {
        throw std::invalid_argument("need at least " + std::to_string(positive) + " sequences for " +
                                    std::to_string(positive) + " splits, got " + std::to_string(names.size()));
    }

    std::sort(names.begin(), names.end());
    std::mt19937_64 rng(seed);
    std::shuffle(names.begin(), names.end(), rng);

    const std::size_t n = names.size();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = ratios[kAllSplits[i]] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i) {
            if (remainders[i] > remainders[best] + 1e-12) best = i;
        }
        ++counts[best];
        remainders[best] = -1.0;
        ++assigned;
    }
    // Splits with a positive ratio must not end up empty.
    for (std::size_t i = 0; i < 3; ++i) {
        if (ratios[kAllSplits[i]] > 0.0 && counts[i] == 0) {
            const auto donor = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            --counts[donor];
            ++counts[i];
        }
    }

    SplitAssignment out;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        auto& bucket = out[kAllSplits[i]];
        bucket.assign(names.begin() + static_cast<std::ptrdiff_t>(offset),
                      names.begin() + static_cast<std::ptrdiff_t>(offset + counts[i]));
        std::sort(bucket.begin(), bucket.end());
        offset += counts[i];
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n_frames, std::size_t max_len) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n_frames == 0) return out;
    if (max_len == 0) max_len = n_frames;
    for (std::size_t b = 0; b < n_frames; b += max_len) out.emplace_back(b, std::min(n_frames, b + max_len));
    return out;
}

void DatasetStats::add(const Mask& m) {
    ++masks;
    pixels += m.size();
    const auto persons = static_cast<std::uint64_t>(std::count_if(m.values().begin(), m.values().end(),
                                                                  [](std::uint8_t v) { return v != 0; }));
    person_pixels += persons;
    nonempty_masks += persons > 0 ? 1 : 0;
}

DatasetStats class_stats(std::span<const Mask> masks) {
    DatasetStats s;
    for (const Mask& m : masks) s.add(m);
    return s;
}

ClassWeights class_weights(const DatasetStats& stats) {
    if (stats.pixels == 0) throw std::invalid_argument("class weights need at least one mask");
    const double person = stats.person_fraction();
    const double background = double(stats.pixels - stats.person_pixels) / double(stats.pixels);
    return {1.0 - background, 1.0 - person};
}

ClassWeights class_weights(std::span<const Mask> masks) { return class_weights(class_stats(masks)); }

void DatasetConfig::validate() const {
    fov.validate();
    bins.validate();
    if (pairing_threshold_ns < 0) throw std::invalid_argument("pairing threshold must be non-negative");
    if (synth) synth->validate(fov);
}

// ---------------------------------------------------------------------------

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return json::parse(in);
}

void prepare_output_dir(const fs::path& out_dir) {
    if (fs::exists(out_dir)) {
        if (!fs::is_directory(out_dir)) throw std::runtime_error(out_dir.string() + " is not a directory");
        if (!fs::is_empty(out_dir)) {
            // Only a previously compiled dataset may be replaced.
            if (!fs::exists(out_dir / "config.json") || !fs::exists(out_dir / "splits.json")) {
                throw std::runtime_error(out_dir.string() + " is not empty and is not a compiled dataset");
            }
            fs::remove_all(out_dir);
        }
    }
    fs::create_directories(out_dir);
}

struct CompiledFrame {
    FrameRecord record;
    FrameHeatmaps heatmaps;
    Mask mask;
};

struct CompiledSequence {
    std::string name;
    std::vector<CompiledFrame> frames;
};

}  // namespace

std::vector<RawSequence> load_raw_directory(const fs::path& raw_dir, std::vector<std::string>& failures) {
    if (!fs::is_directory(raw_dir)) throw std::runtime_error("raw directory not found: " + raw_dir.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(raw_dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());

    std::vector<RawSequence> out;
    for (const fs::path& dir : dirs) {
        RawSequence seq;
        seq.name = dir.filename().string();
        auto sorted_files = [&](const fs::path& sub, const std::string& ext) {
            std::vector<fs::path> files;
            if (!fs::is_directory(dir / sub)) {
                failures.push_back((dir / sub).string() + ": missing directory");
                return files;
            }
            for (const auto& e : fs::directory_iterator(dir / sub)) {
                if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            return files;
        };
        for (const fs::path& f : sorted_files("pointclouds", ".pcd")) {
            if (!timestamp_from_filename(f)) {
                failures.push_back(f.string() + ": file name is not a nanosecond timestamp");
                continue;
            }
            try {
                seq.clouds.push_back(read_pcd_file(f));
            } catch (const std::exception& e) {
                failures.push_back(std::string(e.what()));
            }
        }
        for (const fs::path& f : sorted_files("masks", ".png")) {
            auto ts = timestamp_from_filename(f);
            if (!ts) {
                failures.push_back(f.string() + ": file name is not a nanosecond timestamp");
                continue;
            }
            try {
                Mask m = read_mask_png(f);
                seq.masks.push_back({*ts, std::move(m)});
            } catch (const std::exception& e) {
                failures.push_back(f.string() + ": " + e.what());
            }
        }
        if (!seq.clouds.empty()) out.push_back(std::move(seq));
    }
    return out;
}

CompileSummary compile_dataset(std::vector<RawSequence> sequences, const DatasetConfig& config,
                               const fs::path& out_dir) {
    config.validate();
    if (sequences.empty()) throw std::invalid_argument("no sequences");
    const auto specs = make_view_specs(config.fov, config.bins);
    const std::size_t mask_rows = config.bins.elevation, mask_cols = config.bins.azimuth;

    CompileSummary summary;
    std::vector<CompiledSequence> compiled;
    std::set<std::string> names;

    std::sort(sequences.begin(), sequences.end(),
              [](const RawSequence& a, const RawSequence& b) { return a.name < b.name; });
    for (RawSequence& raw : sequences) {
        if (!names.insert(raw.name).second) throw std::runtime_error("duplicate sequence name " + raw.name);
        auto by_time = [](const auto& a, const auto& b) { return a.timestamp_ns < b.timestamp_ns; };
        std::stable_sort(raw.clouds.begin(), raw.clouds.end(), by_time);
        std::stable_sort(raw.masks.begin(), raw.masks.end(), by_time);
        for (std::size_t i = 1; i < raw.clouds.size(); ++i) {
            if (raw.clouds[i].timestamp_ns == raw.clouds[i - 1].timestamp_ns) {
                throw std::runtime_error(raw.name + ": duplicate cloud timestamp " +
                                         std::to_string(raw.clouds[i].timestamp_ns));
            }
        }

        std::vector<std::int64_t> cloud_ts, mask_ts;
        for (const auto& c : raw.clouds) cloud_ts.push_back(c.timestamp_ns);
        for (const auto& m : raw.masks) mask_ts.push_back(m.timestamp_ns);
        const PairingResult pairing = pair_annotations(cloud_ts, mask_ts, config.pairing_threshold_ns);
        for (std::size_t d : pairing.dropped) {
            summary.failures.push_back(raw.name + "/" + std::to_string(cloud_ts[d]) +
                                       ".pcd: no mask within the pairing threshold");
        }

        std::vector<AnnotationPair> usable;
        for (const AnnotationPair& p : pairing.pairs) {
            const Mask& m = raw.masks[p.mask].mask;
            if (m.rank() != 2 || m.dim(0) != mask_rows || m.dim(1) != mask_cols) {
                summary.failures.push_back(raw.name + "/" + std::to_string(mask_ts[p.mask]) + ".png: mask is " +
                                           shape_string(m.shape()) + ", expected " +
                                           shape_string({mask_rows, mask_cols}));
                continue;
            }
            usable.push_back(p);
        }

        const auto chunks = chunk_ranges(usable.size(), config.max_subsequence_frames);
        for (std::size_t k = 0; k < chunks.size(); ++k) {
            CompiledSequence seq;
            seq.name = chunks.size() > 1 ? raw.name + "_" + frame_id_string(k).substr(3) : raw.name;
            bool any_person = false;
            for (std::size_t i = chunks[k].first; i < chunks[k].second; ++i) {
                const AnnotationPair& p = usable[i];
                CompiledFrame f;
                f.record.frame_id = frame_id_string(i - chunks[k].first);
                f.record.cloud_timestamp_ns = cloud_ts[p.cloud];
                f.record.mask_timestamp_ns = mask_ts[p.mask];
                f.mask = raw.masks[p.mask].mask;
                any_person = any_person || std::any_of(f.mask.values().begin(), f.mask.values().end(),
                                                       [](std::uint8_t v) { return v != 0; });
                f.heatmaps = project_frame(raw.clouds[p.cloud], specs);
                for (Heatmap& h : f.heatmaps) h.frame_id = f.record.frame_id;
                seq.frames.push_back(std::move(f));
            }
            if (config.exclude_empty_subsequences && !any_person) {
                ++summary.excluded_sequences;
                continue;
            }
            if (!names.insert(seq.name).second && chunks.size() > 1) {
                throw std::runtime_error("sub-sequence name collides: " + seq.name);
            }
            compiled.push_back(std::move(seq));
        }
    }
    if (compiled.empty()) throw std::runtime_error("no sequences with paired frames");

    NormStatsAccumulator norm_acc;
    for (const auto& seq : compiled) {
        for (const auto& f : seq.frames) {
            for (const Heatmap& h : f.heatmaps) norm_acc.add(h);
            summary.stats.add(f.mask);
        }
        summary.frames += seq.frames.size();
    }
    const NormStats norm = norm_acc.finish();
    summary.sequences = compiled.size();

    std::vector<std::string> seq_names;
    for (const auto& seq : compiled) seq_names.push_back(seq.name);
    const SplitAssignment splits = split_sequences(seq_names, config.split_ratios, config.split_seed);

    prepare_output_dir(out_dir);
    for (const auto& seq : compiled) {
        const fs::path dir = out_dir / seq.name;
        for (ViewId v : kAllViews) fs::create_directories(dir / std::string(view_name(v)));
        fs::create_directories(dir / "annotations");
        json frames = json::array();
        for (const auto& f : seq.frames) {
            for (const Heatmap& h : f.heatmaps) {
                const fs::path base = dir / std::string(view_name(h.view)) / f.record.frame_id;
                write_heatmap_bin(fs::path(base).replace_extension(".bin"), h.matrix);
                write_text(fs::path(base).replace_extension(".json"), heatmap_sidecar_json(h));
            }
            write_mask_png(dir / "annotations" / (f.record.frame_id + ".png"), f.mask);
            frames.push_back({{"frame_id", f.record.frame_id},
                              {"cloud_timestamp_ns", f.record.cloud_timestamp_ns},
                              {"mask_timestamp_ns", f.record.mask_timestamp_ns}});
        }
        write_text(dir / "frames.json", json{{"sequence", seq.name}, {"frames", frames}}.dump(2) + "\n");
    }

    write_text(out_dir / "stats.json", stats_to_json(norm, summary.stats).dump(2) + "\n");
    json sj;
    for (Split s : kAllSplits) sj[std::string(split_name(s))] = splits.at(s);
    write_text(out_dir / "splits.json", sj.dump(2) + "\n");
    write_text(out_dir / "config.json", json(config).dump(2) + "\n");
    return summary;
}

CompileSummary compile_dataset(const fs::path& raw_dir, const DatasetConfig& config, const fs::path& out_dir) {
    std::vector<std::string> failures;
    auto sequences = load_raw_directory(raw_dir, failures);
    if (sequences.empty()) throw std::invalid_argument("no sequences");
    CompileSummary summary = compile_dataset(std::move(sequences), config, out_dir);
    summary.failures.insert(summary.failures.begin(), failures.begin(), failures.end());
    return summary;
}

std::vector<RawSequence> synthesize_raw(const SynthConfig& cfg, const FieldOfView& fov, const BinConfig& bins,
                                        std::size_t n_frames) {
    std::vector<RawSequence> out;
    for (std::size_t i = 0; i < n_frames; ++i) {
        const std::size_t seq = i / cfg.frames_per_sequence;
        if (seq >= out.size()) {
            RawSequence rs;
            char buf[32];
            std::snprintf(buf, sizeof buf, "synth_%04zu", seq);
            rs.name = buf;
            out.push_back(std::move(rs));
        }
        SyntheticFrame f = generate_synthetic_scene(cfg, fov, bins, i);
        out.back().clouds.push_back(std::move(f.cloud));
        out.back().masks.push_back({f.mask_timestamp_ns, std::move(f.mask)});
    }
    return out;
}

void write_raw_directory(const std::vector<RawSequence>& sequences, const fs::path& raw_dir) {
    for (const RawSequence& seq : sequences) {
        fs::create_directories(raw_dir / seq.name / "pointclouds");
        fs::create_directories(raw_dir / seq.name / "masks");
        for (const PointCloud& c : seq.clouds) {
            write_pcd_file(raw_dir / seq.name / "pointclouds" / timestamp_filename(c.timestamp_ns, ".pcd"), c);
        }
        for (const TimedMask& m : seq.masks) {
            write_mask_png(raw_dir / seq.name / "masks" / timestamp_filename(m.timestamp_ns, ".png"), m.mask);
        }
    }
}

// ---------------------------------------------------------------------------

CompiledDataset CompiledDataset::open(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset not found: " + dir.string());
    CompiledDataset ds;
    ds.root_ = dir;
    ds.config_ = read_json(dir / "config.json").get<DatasetConfig>();
    stats_from_json(read_json(dir / "stats.json"), ds.norm_, ds.stats_);
    const json splits = read_json(dir / "splits.json");
    for (Split s : kAllSplits) {
        for (const auto& name : splits.at(std::string(split_name(s)))) {
            SequenceRecord rec;
            rec.name = name.get<std::string>();
            rec.split = s;
            const json frames = read_json(dir / rec.name / "frames.json");
            for (const auto& f : frames.at("frames")) {
                rec.frames.push_back({f.at("frame_id").get<std::string>(), f.at("cloud_timestamp_ns").get<std::int64_t>(),
                                      f.at("mask_timestamp_ns").get<std::int64_t>()});
            }
            ds.sequences_.push_back(std::move(rec));
        }
    }
    std::sort(ds.sequences_.begin(), ds.sequences_.end(),
              [](const SequenceRecord& a, const SequenceRecord& b) { return a.name < b.name; });
    return ds;
}

std::vector<WindowRef> CompiledDataset::windows(Split split, std::size_t n_frames) const {
    if (n_frames == 0) throw std::invalid_argument("window length must be positive");
    std::vector<WindowRef> out;
    for (std::size_t s = 0; s < sequences_.size(); ++s) {
        if (sequences_[s].split != split) continue;
        for (std::size_t t = n_frames - 1; t < sequences_[s].frames.size(); ++t) out.push_back({s, t});
    }
    return out;
}

fs::path CompiledDataset::heatmap_path(std::size_t sequence, std::size_t frame, ViewId view) const {
    const auto& seq = sequences_.at(sequence);
    return root_ / seq.name / std::string(view_name(view)) / (seq.frames.at(frame).frame_id + ".bin");
}

fs::path CompiledDataset::mask_path(std::size_t sequence, std::size_t frame) const {
    const auto& seq = sequences_.at(sequence);
    return root_ / seq.name / "annotations" / (seq.frames.at(frame).frame_id + ".png");
}

Matrix CompiledDataset::load_heatmap(std::size_t sequence, std::size_t frame, ViewId view) const {
    const ViewSpec spec = make_view_spec(view, config_.fov, config_.bins);
    return read_heatmap_bin(heatmap_path(sequence, frame, view), spec.rows(), spec.cols());
}

Mask CompiledDataset::load_mask(std::size_t sequence, std::size_t frame) const {
    Mask m = read_mask_png(mask_path(sequence, frame));
    require_shape(m.shape(), {config_.bins.elevation, config_.bins.azimuth}, mask_path(sequence, frame).string());
    return m;
}

std::vector<Mask> CompiledDataset::masks(Split split) const {
    std::vector<Mask> out;
    for (std::size_t s = 0; s < sequences_.size(); ++s) {
        if (sequences_[s].split != split) continue;
        for (std::size_t f = 0; f < sequences_[s].frames.size(); ++f) out.push_back(load_mask(s, f));
    }
    return out;
}

Window CompiledDataset::load_window(std::size_t sequence, std::size_t t, std::size_t n_frames) const {
    if (sequence >= sequences_.size()) throw std::out_of_range("sequence index out of range");
    const auto& seq = sequences_[sequence];
    if (n_frames == 0 || t >= seq.frames.size() || t + 1 < n_frames) {
        throw std::out_of_range(seq.name + ": no window of " + std::to_string(n_frames) + " frames ends at t=" +
                                std::to_string(t));
    }
    Window w;
    w.sequence = seq.name;
    w.frame_id = seq.frames[t].frame_id;
    for (ViewId v : kAllViews) {
        const ViewSpec spec = make_view_spec(v, config_.fov, config_.bins);
        Tensor<float> stack({n_frames, spec.rows(), spec.cols()});
        const std::size_t plane = spec.rows() * spec.cols();
        for (std::size_t k = 0; k < n_frames; ++k) {
            const Matrix m = normalize(load_heatmap(sequence, t + 1 - n_frames + k, v), norm_[v]);
            std::copy(m.values().begin(), m.values().end(), stack.data() + k * plane);
        }
        w.views[view_index(v)] = std::move(stack);
    }
    w.mask = load_mask(sequence, t);
    return w;
}

std::optional<std::pair<std::size_t, std::size_t>> CompiledDataset::find_frame(std::string_view key) const {
    const auto slash = key.rfind('/');
    if (slash == std::string_view::npos) return std::nullopt;
    const std::string_view seq = key.substr(0, slash), frame = key.substr(slash + 1);
    for (std::size_t s = 0; s < sequences_.size(); ++s) {
        if (sequences_[s].name != seq) continue;
        for (std::size_t f = 0; f < sequences_[s].frames.size(); ++f) {
            if (sequences_[s].frames[f].frame_id == frame) return std::make_pair(s, f);
        }
    }
    return std::nullopt;
}

}  // namespace radarseg4d
