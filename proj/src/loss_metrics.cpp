#include "radarseg4d/loss_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radarseg4d {

namespace {

template <typename T>
void check_conform(const Tensor<T>& probs, const Mask& labels, const char* where) {
    if (probs.rank() != 3 || labels.rank() != 2 || probs.dim(1) != labels.dim(0) || probs.dim(2) != labels.dim(1)) {
        throw ShapeError(std::string(where) + ": probabilities " + shape_string(probs.shape()) +
                         " do not conform to labels " + shape_string(labels.shape()));
    }
    const std::size_t K = probs.dim(0);
    for (std::uint8_t v : labels.values()) {
        if (v >= K) throw std::invalid_argument(std::string(where) + ": label " + std::to_string(v) + " >= K");
    }
}

template <typename T>
void prepare_grad(Tensor<T>* grad, const Tensor<T>& probs) {
    if (grad && grad->shape() != probs.shape()) *grad = Tensor<T>(probs.shape());
}

}  // namespace

template <typename T>
double weighted_cross_entropy(const Tensor<T>& probs, const Mask& labels, std::span<const double> class_weights,
                              Tensor<T>* grad, double scale) {
    check_conform(probs, labels, "weighted_cross_entropy");
    const std::size_t K = probs.dim(0), N = labels.size();
    if (class_weights.size() != K) throw std::invalid_argument("weighted_cross_entropy: need one weight per class");
    prepare_grad(grad, probs);
    double loss = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t k = labels[i];
        const double p = static_cast<double>(probs[k * N + i]);
        const double clamped = std::max(p, kLogClamp);
        loss -= class_weights[k] * std::log(clamped);
        if (grad && p > kLogClamp) {
            (*grad)[k * N + i] += static_cast<T>(-scale * class_weights[k] / (static_cast<double>(K) * p));
        }
    }
    return loss / static_cast<double>(K);
}

template <typename T>
double soft_dice(const Tensor<T>& probs, const Mask& labels, Tensor<T>* grad, double scale) {
    check_conform(probs, labels, "soft_dice");
    const std::size_t K = probs.dim(0), N = labels.size();
    prepare_grad(grad, probs);
    double loss = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double inter = 0.0, yy = 0.0, pp = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double y = labels[i] == k ? 1.0 : 0.0;
            const double p = static_cast<double>(probs[k * N + i]);
            inter += y * p;
            yy += y * y;
            pp += p * p;
        }
        const double denom = yy + pp + kDiceSmoothing;
        const double num = 2.0 * inter + kDiceSmoothing;
        loss += 1.0 - num / denom;
        if (grad) {
            const double c = scale / static_cast<double>(K);
            for (std::size_t i = 0; i < N; ++i) {
                const double y = labels[i] == k ? 1.0 : 0.0;
                const double p = static_cast<double>(probs[k * N + i]);
                (*grad)[k * N + i] += static_cast<T>(c * (-2.0 * y / denom + 2.0 * num * p / (denom * denom)));
            }
        }
    }
    return loss / static_cast<double>(K);
}

template <typename T>
LossComponents combined_loss(const Tensor<T>& probs, const Mask& labels, std::span<const double> class_weights,
                             const LossWeights& lambdas, Tensor<T>* grad, double scale) {
    if (grad) *grad = Tensor<T>(probs.shape());
    LossComponents out;
    out.wce = weighted_cross_entropy(probs, labels, class_weights, grad, scale * lambdas.wce);
    out.sdice = soft_dice(probs, labels, grad, scale * lambdas.sdice);
    out.total = lambdas.wce * out.wce + lambdas.sdice * out.sdice;
    return out;
}

template double weighted_cross_entropy<float>(const Tensor<float>&, const Mask&, std::span<const double>,
                                              Tensor<float>*, double);
template double weighted_cross_entropy<double>(const Tensor<double>&, const Mask&, std::span<const double>,
                                               Tensor<double>*, double);
template double soft_dice<float>(const Tensor<float>&, const Mask&, Tensor<float>*, double);
template double soft_dice<double>(const Tensor<double>&, const Mask&, Tensor<double>*, double);
template LossComponents combined_loss<float>(const Tensor<float>&, const Mask&, std::span<const double>,
                                             const LossWeights&, Tensor<float>*, double);
template LossComponents combined_loss<double>(const Tensor<double>&, const Mask&, std::span<const double>,
                                              const LossWeights&, Tensor<double>*, double);

// ---------------------------------------------------------------------------

template <typename T>
void flip_columns(Tensor<T>& t) {
    if (t.rank() < 2) throw ShapeError("flip_columns: rank must be at least 2");
    const std::size_t cols = t.dim(t.rank() - 1);
    for (std::size_t off = 0; off < t.size(); off += cols) std::reverse(t.data() + off, t.data() + off + cols);
}

template <typename T>
void flip_rows(Tensor<T>& t) {
    if (t.rank() < 2) throw ShapeError("flip_rows: rank must be at least 2");
    const std::size_t cols = t.dim(t.rank() - 1), rows = t.dim(t.rank() - 2), plane = rows * cols;
    for (std::size_t off = 0; off < t.size(); off += plane) {
        for (std::size_t r = 0; r < rows / 2; ++r) {
            std::swap_ranges(t.data() + off + r * cols, t.data() + off + (r + 1) * cols,
                             t.data() + off + (rows - 1 - r) * cols);
        }
    }
}

template void flip_columns<float>(Tensor<float>&);
template void flip_columns<double>(Tensor<double>&);
template void flip_columns<std::uint8_t>(Tensor<std::uint8_t>&);
template void flip_rows<float>(Tensor<float>&);
template void flip_rows<double>(Tensor<double>&);
template void flip_rows<std::uint8_t>(Tensor<std::uint8_t>&);

void apply_flip(std::array<Tensor<float>, 5>& views, Mask& mask, FlipChoice flip) {
    // View order EA, ER, ED, RA, DA: azimuth is the column axis of EA, RA, DA and
    // elevation the row axis of EA, ER, ED.
    if (flip.azimuth) {
        for (std::size_t v : {0, 3, 4}) flip_columns(views[v]);
        flip_columns(mask);
    }
    if (flip.elevation) {
        for (std::size_t v : {0, 1, 2}) flip_rows(views[v]);
        flip_rows(mask);
    }
}

FlipChoice augment_flip(std::array<Tensor<float>, 5>& views, Mask& mask, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    FlipChoice flip;
    flip.azimuth = coin(rng);
    flip.elevation = coin(rng);
    apply_flip(views, mask, flip);
    return flip;
}

// ---------------------------------------------------------------------------

template <typename T>
Mask argmax_classes(const Tensor<T>& probs) {
    if (probs.rank() != 3) throw ShapeError("argmax_classes: expected K x H x W, got " + shape_string(probs.shape()));
    const std::size_t K = probs.dim(0), N = probs.dim(1) * probs.dim(2);
    Mask out({probs.dim(1), probs.dim(2)});
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < K; ++k) {
            if (probs[k * N + i] > probs[best * N + i]) best = k;
        }
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

template Mask argmax_classes<float>(const Tensor<float>&);
template Mask argmax_classes<double>(const Tensor<double>&);

void SegmentationCounts::add(const Mask& prediction, const Mask& truth) {
    require_shape(prediction.shape(), truth.shape(), "segmentation counts");
    const std::size_t K = classes.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::size_t p = prediction[i], g = truth[i];
        if (p >= K || g >= K) throw std::invalid_argument("segmentation counts: label out of range");
        ++classes[p].predicted;
        ++classes[g].truth;
        if (p == g) ++classes[p].intersection;
    }
}

void SegmentationCounts::merge(const SegmentationCounts& other) {
    if (other.classes.size() != classes.size()) throw std::invalid_argument("segmentation counts: class mismatch");
    for (std::size_t k = 0; k < classes.size(); ++k) {
        classes[k].intersection += other.classes[k].intersection;
        classes[k].predicted += other.classes[k].predicted;
        classes[k].truth += other.classes[k].truth;
    }
}

Scores scores_from_counts(const SegmentationCounts& counts) {
    Scores s;
    for (const ClassCounts& c : counts.classes) {
        ClassScores cs;
        const std::uint64_t uni = c.union_count();
        if (uni > 0) {
            cs.iou = static_cast<double>(c.intersection) / static_cast<double>(uni);
            cs.dice = 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.predicted + c.truth);
        }
        s.per_class.push_back(cs);
        s.mean_iou += cs.iou;
        s.mean_dice += cs.dice;
    }
    if (!s.per_class.empty()) {
        s.mean_iou /= static_cast<double>(s.per_class.size());
        s.mean_dice /= static_cast<double>(s.per_class.size());
    }
    return s;
}

Scores iou_dice(const Mask& prediction, const Mask& truth, std::size_t n_classes) {
    SegmentationCounts c(n_classes);
    c.add(prediction, truth);
    return scores_from_counts(c);
}

std::string class_name(std::size_t k, std::size_t n_classes) {
    if (n_classes == 2) return k == 0 ? "background" : "person";
    return "class_" + std::to_string(k);
}

nlohmann::ordered_json scores_to_json(const Scores& s) {
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < s.per_class.size(); ++k) {
        per_class[class_name(k, s.per_class.size())] = {{"iou", s.per_class[k].iou}, {"dice", s.per_class[k].dice}};
    }
    return {{"per_class", per_class}, {"mean_iou", s.mean_iou}, {"mean_dice", s.mean_dice}};
}

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json j = scores_to_json(aggregate);
    if (has_loss) j["loss"] = {{"wce", loss.wce}, {"sdice", loss.sdice}, {"total", loss.total}};
    j["frames"] = frames;
    j["per_frame_mean"] = scores_to_json(per_frame);
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < counts.classes.size(); ++k) {
        const auto& cc = counts.classes[k];
        c[class_name(k, counts.classes.size())] = {
            {"intersection", cc.intersection}, {"predicted", cc.predicted}, {"truth", cc.truth}};
    }
    j["counts"] = c;
    return j;
}

Scores MetricsAccumulator::add(const Mask& prediction, const Mask& truth) {
    SegmentationCounts frame(n_classes_);
    frame.add(prediction, truth);
    counts_.merge(frame);
    const Scores s = scores_from_counts(frame);
    iou_sum_.resize(n_classes_, 0.0);
    dice_sum_.resize(n_classes_, 0.0);
    for (std::size_t k = 0; k < n_classes_; ++k) {
        iou_sum_[k] += s.per_class[k].iou;
        dice_sum_[k] += s.per_class[k].dice;
    }
    ++frames_;
    return s;
}

void MetricsAccumulator::add_loss(const LossComponents& loss) {
    loss_sum_.wce += loss.wce;
    loss_sum_.sdice += loss.sdice;
    loss_sum_.total += loss.total;
    ++loss_frames_;
}

MetricsReport MetricsAccumulator::finish() const {
    MetricsReport r;
    r.frames = frames_;
    r.counts = counts_;
    r.aggregate = scores_from_counts(counts_);
    r.per_frame.per_class.resize(n_classes_);
    if (frames_ > 0) {
        const double n = static_cast<double>(frames_);
        for (std::size_t k = 0; k < n_classes_; ++k) {
            r.per_frame.per_class[k] = {iou_sum_[k] / n, dice_sum_[k] / n};
            r.per_frame.mean_iou += r.per_frame.per_class[k].iou;
            r.per_frame.mean_dice += r.per_frame.per_class[k].dice;
        }
        r.per_frame.mean_iou /= static_cast<double>(n_classes_);
        r.per_frame.mean_dice /= static_cast<double>(n_classes_);
    }
    if (loss_frames_ > 0) {
        const double n = static_cast<double>(loss_frames_);
        r.loss = {loss_sum_.wce / n, loss_sum_.sdice / n, loss_sum_.total / n};
        r.has_loss = true;
    }
    return r;
}

}  // namespace radarseg4d
