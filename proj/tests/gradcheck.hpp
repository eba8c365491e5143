#pragma once
// Finite-difference check of the full network on the combined loss, in double.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "radarseg4d/loss_metrics.hpp"
#include "radarseg4d/network.hpp"

namespace gradcheck {

using namespace radarseg4d;

struct Result {
    double max_rel_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

struct Problem {
    ViewStacks<double> inputs;
    Mask labels;
    std::vector<double> weights{0.3, 0.7};
};

/// Dense random inputs in [0, 1] and a random label mask.
inline Problem make_problem(const NetworkConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Problem p;
    for (ViewId v : kAllViews) {
        const auto d = cfg.input_dims(v);
        Tensor<double> t({cfg.window, d.rows, d.cols});
        for (double& x : t.values()) x = u(rng);
        p.inputs[view_index(v)] = std::move(t);
    }
    const auto o = cfg.output_dims();
    p.labels = Mask({o.rows, o.cols});
    std::bernoulli_distribution person(0.3);
    for (auto& y : p.labels.values()) y = person(rng) ? 1 : 0;
    return p;
}

/// Replaces the zero bias initialization with small random values so that every
/// parameter carries gradient.
inline void randomize_biases(Tmva4d<double>& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.02, 0.2);
    for (auto& p : model.params().entries()) {
        if (!p.is_bias) continue;
        for (double& v : p.value.values()) v = u(rng);
    }
}

inline double loss_of(Tmva4d<double>& model, const Problem& p) {
    return combined_loss(model.forward(p.inputs), p.labels, p.weights).total;
}

/// |analytic - numeric| / max(|analytic|, |numeric|, floor) over every parameter scalar
/// (or every `stride`-th one).
inline Result check(Tmva4d<double>& model, const Problem& p, double h = 1e-5, double floor = 1e-6,
                    std::size_t stride = 1) {
    model.zero_grad();
    const auto probs = model.forward(p.inputs);
    Tensor<double> grad;
    combined_loss(probs, p.labels, p.weights, LossWeights{}, &grad);
    model.backward(grad);

    Result r;
    std::size_t flat = 0;
    for (auto& param : model.params().entries()) {
        for (std::size_t i = 0; i < param.value.size(); ++i, ++flat) {
            if (flat % stride) continue;
            const double keep = param.value[i];
            param.value[i] = keep + h;
            const double lp = loss_of(model, p);
            param.value[i] = keep - h;
            const double lm = loss_of(model, p);
            param.value[i] = keep;
            const double numeric = (lp - lm) / (2 * h);
            const double analytic = param.grad[i];
            const double rel =
                std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
            ++r.checked;
            if (rel > r.max_rel_error) {
                r.max_rel_error = rel;
                r.worst = param.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return r;
}

}  // namespace gradcheck
