#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "radarseg4d/tensor.hpp"

namespace radarseg4d {

inline constexpr double kLogClamp = 1e-7;
inline constexpr double kDiceSmoothing = 1e-6;

/// Loss terms for one frame. P is K x H x W probabilities, the label mask H x W holds
/// class indices (one-hot across classes).
struct LossComponents {
    double wce = 0.0;
    double sdice = 0.0;
    double total = 0.0;
};

struct LossWeights {
    double wce = 1.0;
    double sdice = 10.0;
};

/// -(1/K) sum_k w_k sum_ij y log(max(p, 1e-7)). Adds dL/dP into `grad` when given.
template <typename T>
double weighted_cross_entropy(const Tensor<T>& probs, const Mask& labels, std::span<const double> class_weights,
                              Tensor<T>* grad = nullptr, double scale = 1.0);

/// (1/K) sum_k (1 - (2 sum yp + 1e-6) / (sum y^2 + sum p^2 + 1e-6)). A class absent from
/// both P and Y contributes 0.
template <typename T>
double soft_dice(const Tensor<T>& probs, const Mask& labels, Tensor<T>* grad = nullptr, double scale = 1.0);

/// lambda_wce * wCE + lambda_sdice * SDice. `grad` (if given) is overwritten with
/// scale * dL/dP.
template <typename T>
LossComponents combined_loss(const Tensor<T>& probs, const Mask& labels, std::span<const double> class_weights,
                             const LossWeights& lambdas = {}, Tensor<T>* grad = nullptr, double scale = 1.0);

// ---------------------------------------------------------------------------
// Flip augmentation

struct FlipChoice {
    bool azimuth = false;
    bool elevation = false;
    friend bool operator==(const FlipChoice&, const FlipChoice&) = default;
};

/// Reverses the last axis (columns) or the second to last axis (rows).
template <typename T>
void flip_columns(Tensor<T>& t);
template <typename T>
void flip_rows(Tensor<T>& t);

/// Views in EA, ER, ED, RA, DA order; each view is rows x cols or T x rows x cols.
void apply_flip(std::array<Tensor<float>, 5>& views, Mask& mask, FlipChoice flip);
/// Draws each flip with probability 0.5 and applies it.
FlipChoice augment_flip(std::array<Tensor<float>, 5>& views, Mask& mask, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Metrics

/// Per-pixel argmax over the class axis; ties go to the lower class index.
template <typename T>
Mask argmax_classes(const Tensor<T>& probs);

struct ClassCounts {
    std::uint64_t intersection = 0;
    std::uint64_t predicted = 0;
    std::uint64_t truth = 0;

    std::uint64_t union_count() const { return predicted + truth - intersection; }
    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Pixel counts per class, summable over frames.
struct SegmentationCounts {
    std::vector<ClassCounts> classes;

    explicit SegmentationCounts(std::size_t n_classes = 2) : classes(n_classes) {}
    void add(const Mask& prediction, const Mask& truth);
    void merge(const SegmentationCounts& other);
    friend bool operator==(const SegmentationCounts&, const SegmentationCounts&) = default;
};

struct ClassScores {
    double iou = 1.0;
    double dice = 1.0;
};

struct Scores {
    std::vector<ClassScores> per_class;
    double mean_iou = 0.0;
    double mean_dice = 0.0;
};

/// IoU and Dice per class; a class absent from both prediction and truth scores 1.
Scores scores_from_counts(const SegmentationCounts& counts);
Scores iou_dice(const Mask& prediction, const Mask& truth, std::size_t n_classes = 2);

std::string class_name(std::size_t k, std::size_t n_classes);

/// Aggregate report over a split. `aggregate` sums pixel counts over all frames;
/// `per_frame` averages the per-frame scores.
struct MetricsReport {
    std::size_t frames = 0;
    SegmentationCounts counts;
    Scores aggregate;
    Scores per_frame;
    LossComponents loss;  // mean over frames
    bool has_loss = false;

    nlohmann::ordered_json to_json() const;
};

nlohmann::ordered_json scores_to_json(const Scores& s);

/// Accumulates frame results into a report.
class MetricsAccumulator {
public:
    explicit MetricsAccumulator(std::size_t n_classes = 2) : counts_(n_classes), n_classes_(n_classes) {}
    /// Returns the frame's own scores.
    Scores add(const Mask& prediction, const Mask& truth);
    void add_loss(const LossComponents& loss);
    MetricsReport finish() const;

private:
    SegmentationCounts counts_;
    std::size_t n_classes_;
    std::size_t frames_ = 0;
    std::vector<double> iou_sum_, dice_sum_;
    LossComponents loss_sum_;
    std::size_t loss_frames_ = 0;
};

}  // namespace radarseg4d
