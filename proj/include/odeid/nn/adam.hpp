#pragma once

#include "odeid/nn/mlp.hpp"

#include <cstdint>

namespace odeid::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Multiplicative learning-rate decay applied once per epoch by trainers.
    double decay = 1.0;
    double min_learning_rate = 0.0;
};

struct AdamState {
    std::uint64_t step_count = 0;
    MlpParams first_moment;
    MlpParams second_moment;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_model(const MlpModel& m, const AdamConfig& cfg = {}) {
        AdamState s;
        s.first_moment = MlpParams::zeros_like(m.params);
        s.second_moment = MlpParams::zeros_like(m.params);
        s.learning_rate = cfg.learning_rate;
        s.beta1 = cfg.beta1;
        s.beta2 = cfg.beta2;
        s.epsilon = cfg.epsilon;
        return s;
    }
};

namespace detail {

template <typename T>
void adam_update(T& p, const T& g, T& m, T& v, double b1, double b2, double lr_t, double eps_t) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr_t * m.array() / (v.array().sqrt() + eps_t);
}

}  // namespace detail

/// One bias-corrected Adam update, in place.
inline void adam_step(MlpModel& model, const MlpParams& grads, AdamState& s) {
    if (!grads.same_shape(model.params) || !s.first_moment.same_shape(model.params) ||
        !s.second_moment.same_shape(model.params))
        throw DimensionMismatch("adam_step: parameter/gradient/state shapes differ");
    ++s.step_count;
    const auto t = static_cast<double>(s.step_count);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    // lr·m̂/(√v̂ + ε) written with the corrections folded into the step size.
    const double lr_t = s.learning_rate * std::sqrt(bc2) / bc1;
    const double eps_t = s.epsilon * std::sqrt(bc2);
    auto& P = model.params;
    for (std::size_t h = 0; h < P.weights.size(); ++h) {
        detail::adam_update(P.weights[h], grads.weights[h], s.first_moment.weights[h], s.second_moment.weights[h],
                            s.beta1, s.beta2, lr_t, eps_t);
        detail::adam_update(P.biases[h], grads.biases[h], s.first_moment.biases[h], s.second_moment.biases[h],
                            s.beta1, s.beta2, lr_t, eps_t);
    }
}

}  // namespace odeid::nn
