#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radarseg4d/fov.hpp"
#include "radarseg4d/pointcloud.hpp"
#include "radarseg4d/projection.hpp"
#include "radarseg4d/synthetic.hpp"
#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

enum class Split { Train, Val, Test };
inline constexpr std::array<Split, 3> kAllSplits{Split::Train, Split::Val, Split::Test};
std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

// ---------------------------------------------------------------------------
// Pairing

struct AnnotationPair {
    std::size_t cloud = 0;  // index into the cloud timestamps
    std::size_t mask = 0;   // index into the mask timestamps
    std::int64_t delta_ns = 0;
};

struct PairingResult {
    std::vector<AnnotationPair> pairs;
    std::vector<std::size_t> dropped;  // cloud indices with no mask within the threshold
};

/// Pairs each cloud with the temporally closest mask; ties go to the earlier mask.
/// Both inputs must be sorted ascending.
PairingResult pair_annotations(std::span<const std::int64_t> cloud_ts, std::span<const std::int64_t> mask_ts,
                               std::int64_t max_delta_ns);

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;

    double operator[](Split s) const { return s == Split::Train ? train : s == Split::Val ? val : test; }
    friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

using SplitAssignment = std::map<Split, std::vector<std::string>>;

/// Shuffles the sequence names with `seed` and apportions them by largest remainder.
/// Every split with a positive ratio receives at least one sequence.
SplitAssignment split_sequences(std::vector<std::string> names, const SplitRatios& ratios, std::uint64_t seed);

/// Half-open [begin, end) frame ranges of at most max_len frames (0 = no splitting).
std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n_frames, std::size_t max_len);

// ---------------------------------------------------------------------------
// Class statistics

struct DatasetStats {
    std::uint64_t masks = 0;
    std::uint64_t pixels = 0;
    std::uint64_t person_pixels = 0;
    std::uint64_t nonempty_masks = 0;

    double person_fraction() const { return pixels ? double(person_pixels) / double(pixels) : 0.0; }
    double nonempty_fraction() const { return masks ? double(nonempty_masks) / double(masks) : 0.0; }
    void add(const Mask& m);
};

struct ClassWeights {
    double background = 0.5;
    double person = 0.5;
    friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

DatasetStats class_stats(std::span<const Mask> masks);
/// w_k = 1 - prevalence(c_k).
ClassWeights class_weights(const DatasetStats& stats);
ClassWeights class_weights(std::span<const Mask> masks);

// ---------------------------------------------------------------------------
// Compilation

struct DatasetConfig {
    FieldOfView fov;
    BinConfig bins;
    std::int64_t pairing_threshold_ns = 100'000'000;
    SplitRatios split_ratios;
    std::uint64_t split_seed = 0;
    std::size_t max_subsequence_frames = 0;  // 0 keeps recorded sequences whole
    bool exclude_empty_subsequences = false;
    std::optional<SynthConfig> synth;  // recorded in config.json when the corpus is synthetic

    void validate() const;
};

struct TimedMask {
    std::int64_t timestamp_ns = 0;
    Mask mask;
};

struct RawSequence {
    std::string name;
    std::vector<PointCloud> clouds;
    std::vector<TimedMask> masks;
};

struct CompileSummary {
    std::size_t sequences = 0;  // after sub-sequence splitting and exclusion
    std::size_t frames = 0;
    std::size_t excluded_sequences = 0;
    std::vector<std::string> failures;
    DatasetStats stats;
};

/// Reads raw/<sequence>/pointclouds/<ns>.pcd and raw/<sequence>/masks/<ns>.png.
/// Unreadable files are reported in `failures` and skipped.
std::vector<RawSequence> load_raw_directory(const std::filesystem::path& raw_dir, std::vector<std::string>& failures);

/// Writes the compiled layout under out_dir. Output bytes depend only on the inputs.
CompileSummary compile_dataset(std::vector<RawSequence> sequences, const DatasetConfig& config,
                               const std::filesystem::path& out_dir);
CompileSummary compile_dataset(const std::filesystem::path& raw_dir, const DatasetConfig& config,
                               const std::filesystem::path& out_dir);

/// Builds a raw corpus with the synthetic generator: sequences of cfg.frames_per_sequence frames.
std::vector<RawSequence> synthesize_raw(const SynthConfig& cfg, const FieldOfView& fov, const BinConfig& bins,
                                        std::size_t n_frames);
void write_raw_directory(const std::vector<RawSequence>& sequences, const std::filesystem::path& raw_dir);

// ---------------------------------------------------------------------------
// Compiled dataset access

struct FrameRecord {
    std::string frame_id;
    std::int64_t cloud_timestamp_ns = 0;
    std::int64_t mask_timestamp_ns = 0;
};

struct SequenceRecord {
    std::string name;
    Split split = Split::Train;
    std::vector<FrameRecord> frames;
};

/// Network input for one time step: per view a T x rows x cols stack (oldest first),
/// normalized with the dataset statistics, plus the mask of the newest frame.
struct Window {
    std::string sequence;
    std::string frame_id;
    std::array<Tensor<float>, 5> views;
    Mask mask;
};

struct WindowRef {
    std::size_t sequence = 0;  // index into CompiledDataset::sequences()
    std::size_t t = 0;
};

class CompiledDataset {
public:
    static CompiledDataset open(const std::filesystem::path& dir);

    const std::filesystem::path& root() const { return root_; }
    const DatasetConfig& config() const { return config_; }
    const NormStats& norm_stats() const { return norm_; }
    const DatasetStats& stats() const { return stats_; }
    const std::vector<SequenceRecord>& sequences() const { return sequences_; }
    std::array<ViewSpec, 5> view_specs() const { return make_view_specs(config_.fov, config_.bins); }

    /// Windows ending at t >= n_frames - 1, in sequence order.
    std::vector<WindowRef> windows(Split split, std::size_t n_frames) const;
    Window load_window(std::size_t sequence, std::size_t t, std::size_t n_frames) const;
    Window load_window(const WindowRef& ref, std::size_t n_frames) const { return load_window(ref.sequence, ref.t, n_frames); }

    Matrix load_heatmap(std::size_t sequence, std::size_t frame, ViewId view) const;
    Mask load_mask(std::size_t sequence, std::size_t frame) const;
    std::vector<Mask> masks(Split split) const;
    /// Finds "<sequence>/<frame_id>".
    std::optional<std::pair<std::size_t, std::size_t>> find_frame(std::string_view key) const;

    std::filesystem::path heatmap_path(std::size_t sequence, std::size_t frame, ViewId view) const;
    std::filesystem::path mask_path(std::size_t sequence, std::size_t frame) const;

private:
    std::filesystem::path root_;
    DatasetConfig config_;
    NormStats norm_;
    DatasetStats stats_;
    std::vector<SequenceRecord> sequences_;
};

std::string frame_id_string(std::size_t index);

}  // namespace radarseg4d
