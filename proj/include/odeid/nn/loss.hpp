#pragma once

#include "odeid/nn/lipschitz.hpp"
#include "odeid/nn/mlp.hpp"

#include <limits>
#include <variant>

namespace odeid::nn {

/// (1/N) Σ ‖y_i − N(x_i)‖²
struct MseLoss {};

/// (1/N) Σ ‖Δt·N(x_i) + s_i − y_i‖², where s_i is the state slice of the
/// input starting at column `state_offset` (0 for the per-timestep networks,
/// 1 when the input carries time first).
struct EulerResidualLoss {
    double dt = 0.0;
    std::size_t state_offset = 0;
};

/// Mean squared error plus α · max_{p ∈ probes} |∂N/∂x|_∞.
struct MseLipschitzLoss {
    double alpha = 0.0;
    Mat probes;  // one probe point per row
};

using LossFn = std::variant<MseLoss, EulerResidualLoss, MseLipschitzLoss>;

struct LossGradient {
    double loss = 0.0;
    double data_term = 0.0;  // the squared-error part of `loss`
    double lipschitz = std::numeric_limits<double>::quiet_NaN();  // set by MseLipschitzLoss
    MlpParams grads;
};

namespace detail {

inline void check_batch(const MlpModel& m, const Mat& x, const Mat& y, std::size_t target_dim) {
    if (x.rows() == 0) throw InvalidArgument("empty batch");
    require_dims(static_cast<std::size_t>(x.cols()) == m.spec.input_dim, "batch input dimension mismatch");
    require_dims(y.rows() == x.rows(), "batch inputs and targets have different row counts");
    require_dims(static_cast<std::size_t>(y.cols()) == target_dim, "batch target dimension mismatch");
}

}  // namespace detail

/// Loss value and exact parameter gradients for a full batch.
inline LossGradient mlp_param_gradients(const MlpModel& m, const Mat& x, const Mat& y, const LossFn& loss) {
    const auto n = static_cast<double>(x.rows());
    LossGradient out;
    out.grads = MlpParams::zeros_like(m.params);

    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            detail::check_batch(m, x, y, m.spec.output_dim);
            const ForwardCache c = forward_cached(m, x);
            Mat resid;
            double scale = 1.0;
            if constexpr (std::is_same_v<L, EulerResidualLoss>) {
                const auto d = static_cast<Eigen::Index>(m.spec.output_dim);
                require(l.dt > 0.0, "Euler residual needs dt > 0");
                require_dims(static_cast<Eigen::Index>(l.state_offset) + d <= x.cols(),
                             "Euler residual state slice out of range");
                resid = l.dt * c.output + x.middleCols(static_cast<Eigen::Index>(l.state_offset), d) - y;
                scale = l.dt;
            } else {
                resid = c.output - y;
            }
            out.data_term = resid.squaredNorm() / n;
            out.loss = out.data_term;
            backward(m, c, (2.0 * scale / n) * resid, &out.grads);

            if constexpr (std::is_same_v<L, MseLipschitzLoss>) {
                const JacobianMax jm = max_abs_input_gradient(m, l.probes);
                out.lipschitz = jm.value;
                out.loss += l.alpha * jm.value;
                if (l.alpha != 0.0) {
                    const MlpParams gj =
                        jacobian_entry_param_gradient(m, l.probes.row(jm.sample).transpose(), jm.input, jm.output);
                    out.grads.add_scaled(gj, l.alpha * jm.sign);
                }
            }
        },
        loss);
    return out;
}

/// Loss value only (used by finite-difference checks).
inline double mlp_loss(const MlpModel& m, const Mat& x, const Mat& y, const LossFn& loss) {
    return mlp_param_gradients(m, x, y, loss).loss;
}

}  // namespace odeid::nn
