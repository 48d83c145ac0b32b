#pragma once

// Sampled Lipschitz estimate of a network: the largest absolute entry of the
// input Jacobian over a finite probe set, plus the parameter gradient of that
// entry used by the Lipschitz penalty.

#include "odeid/nn/mlp.hpp"

#include <cstdint>

namespace odeid::nn {

/// Axis-aligned box, one [lo, hi] interval per dimension.
struct Box {
    Vec lo;
    Vec hi;

    std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }

    void validate() const {
        require_dims(lo.size() == hi.size(), "box bounds have different lengths");
        require(lo.size() > 0, "box has zero dimensions");
        for (Eigen::Index k = 0; k < lo.size(); ++k)
            if (!(hi[k] > lo[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k]))
                throw InvalidArgument("degenerate box in dimension " + std::to_string(k));
    }

    /// Bounding box of the rows of `pts`.
    static Box bounding(const Mat& pts) {
        require(pts.rows() > 0, "bounding box of empty point set");
        return Box{pts.colwise().minCoeff().transpose(), pts.colwise().maxCoeff().transpose()};
    }
};

/// Uniform points in `box`. Point i depends only on (seed, i), so the first n
/// points of a larger draw coincide with a smaller draw.
inline Mat sample_box(const Box& box, std::size_t n, std::uint64_t seed) {
    box.validate();
    const auto d = static_cast<Eigen::Index>(box.dim());
    Mat pts(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        for (Eigen::Index k = 0; k < d; ++k)
            pts(i, k) = box.lo[k] + (box.hi[k] - box.lo[k]) * counter_uniform(seed, i, k);
    return pts;
}

struct JacobianMax {
    double value = 0.0;
    Eigen::Index sample = 0;
    Eigen::Index input = 0;
    Eigen::Index output = 0;
    double sign = 1.0;  // sign of the maximising Jacobian entry
};

/// max over probes, outputs and inputs of |∂N_o/∂x_k|.
inline JacobianMax max_abs_input_gradient(const MlpModel& m, const Mat& probes) {
    require(probes.rows() > 0, "Lipschitz estimate needs at least one probe point");
    JacobianMax best;
    best.value = -1.0;
    for (std::size_t o = 0; o < m.spec.output_dim; ++o) {
        const Mat g = input_gradients(m, probes, o);
        Eigen::Index r = 0, c = 0;
        const double v = g.cwiseAbs().maxCoeff(&r, &c);
        if (v > best.value) {
            best = {v, r, c, static_cast<Eigen::Index>(o), g(r, c) < 0.0 ? -1.0 : 1.0};
        }
    }
    return best;
}

/// Parameter gradient of the Jacobian entry ∂N_out/∂x_in at `x`.
///
/// With the activation pattern frozen, J = W_L D_{L-1} W_{L-1} ... D_1 W_1 S
/// (S the input scaling). For layer h, J_{o,k} = a_hᵀ W_h b_h with a_h the
/// backward row vector and b_h the forward tangent, so ∂J/∂W_h = a_h b_hᵀ.
/// Biases only move the kinks and have zero gradient almost everywhere.
inline MlpParams jacobian_entry_param_gradient(const MlpModel& m, const Vec& x, Eigen::Index in,
                                               Eigen::Index out) {
    const double slope = m.spec.lrelu_slope;
    const std::size_t L = m.num_layers();
    const ForwardCache c = forward_cached(m, x.transpose());

    // forward tangents b_h (input to layer h)
    std::vector<Vec> tangent(L);
    Vec b = Vec::Zero(static_cast<Eigen::Index>(m.spec.input_dim));
    b[in] = m.has_input_map() ? m.input_scale[in] : 1.0;
    for (std::size_t h = 0; h < L; ++h) {
        tangent[h] = b;
        if (h + 1 < L) {
            Vec u = m.params.weights[h] * b;
            for (Eigen::Index i = 0; i < u.size(); ++i) u[i] *= lrelu_derivative(c.pre[h](0, i), slope);
            b = std::move(u);
        }
    }

    MlpParams g = MlpParams::zeros_like(m.params);
    Vec a = Vec::Zero(static_cast<Eigen::Index>(m.spec.output_dim));
    a[out] = 1.0;
    for (std::size_t h = L; h-- > 0;) {
        g.weights[h].noalias() = a * tangent[h].transpose();
        if (h > 0) {
            Vec prev = m.params.weights[h].transpose() * a;
            for (Eigen::Index i = 0; i < prev.size(); ++i) prev[i] *= lrelu_derivative(c.pre[h - 1](0, i), slope);
            a = std::move(prev);
        }
    }
    return g;
}

}  // namespace odeid::nn
