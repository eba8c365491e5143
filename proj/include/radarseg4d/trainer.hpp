#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "radarseg4d/dataset.hpp"
#include "radarseg4d/layers.hpp"
#include "radarseg4d/loss_metrics.hpp"
#include "radarseg4d/network.hpp"

namespace radarseg4d {

struct Hyperparams {
    std::size_t frames = 5;
    std::size_t batch_size = 6;
    double learning_rate = 1e-4;
    std::size_t lr_step_epochs = 2;
    double lr_decay = 0.9;
    std::size_t epochs = 24;
    std::size_t eval_interval_steps = 0;  // 0: once at the end of every epoch
    std::uint64_t seed = 0;
    bool augment = true;
    LossWeights loss;
    std::string val_split = "val";

    void validate() const;
};

/// learning_rate * lr_decay^floor(epoch / lr_step_epochs).
double lr_schedule(std::size_t epoch, const Hyperparams& hp = {});

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update of every parameter from its accumulated gradient.
/// Throws std::runtime_error naming the parameter when a gradient is not finite.
void adam_step(ParameterStore<float>& params, AdamState& state, double lr);

/// Network inputs and label for one window, ready for the model.
struct Sample {
    std::string sequence;
    std::string frame_id;
    ViewStacks<float> views;
    Mask mask;
};

struct EvalOptions {
    Split split = Split::Test;
    std::optional<std::filesystem::path> dump_per_frame;  // JSONL, one record per frame
};

/// Runs the model over every window of a split. Loss uses `weights`.
MetricsReport evaluate(Tmva4d<float>& model, const CompiledDataset& ds, const EvalOptions& opts,
                       const ClassWeights& weights);

/// Evaluates PNG masks <pred_dir>/<sequence>/<frame_id>.png against the split's labels.
MetricsReport evaluate_prediction_pngs(const CompiledDataset& ds, Split split, std::size_t frames,
                                       const std::filesystem::path& pred_dir);

/// Writes <out_dir>/<sequence>/<frame_id>.png (0 background, 255 person). Returns the
/// number of masks written. `frame` selects a single "<sequence>/<frame_id>".
std::size_t predict(Tmva4d<float>& model, const CompiledDataset& ds, Split split,
                    const std::optional<std::string>& frame, const std::filesystem::path& out_dir);

struct EvalRecord {
    std::size_t index = 0;
    std::size_t epoch = 0;
    std::size_t step = 0;
    Scores scores;
};

struct TrainResult {
    std::vector<EvalRecord> evaluations;
    std::optional<std::size_t> best_eval;  // index into evaluations
    double best_mean_dice = 0.0;
    std::size_t steps = 0;
    std::vector<double> epoch_losses;  // mean batch loss per epoch
    std::filesystem::path log_path;
    std::filesystem::path best_checkpoint;
};

/// Trains on the dataset's train split and keeps the checkpoint with the highest
/// validation mean Dice (earlier evaluation wins ties) at <out_dir>/best.ckpt. The log
/// goes to <out_dir>/train_log.jsonl. `on_eval` sees every evaluation; returning false
/// ends training after it.
using EvalCallback = std::function<bool(const EvalRecord&)>;
TrainResult train(const CompiledDataset& ds, const NetworkConfig& net, const Hyperparams& hp,
                  const std::filesystem::path& out_dir, const EvalCallback& on_eval = {});

}  // namespace radarseg4d
