#pragma once

// Minimal feed-forward network engine shared by the generator ensemble, the
// interpolation network and the multistep baseline.
//
// A network with hidden widths n_1..n_{L-1} computes
//
//   N(x) = W_L σ(W_{L-1} σ( ... σ(W_1 x̃ + b_1) ... ) + b_{L-1}) + b_L
//
// where σ is the leaky ReLU and x̃ = (x - shift) ⊙ scale is an optional fixed
// input normalisation (identity by default). The final layer is affine.
//
// Batches are stored one sample per row (N × dim).

#include "odeid/common.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace odeid::nn {

inline constexpr double kDefaultSlope = 0.01;

inline double lrelu(double x, double slope) { return x < 0.0 ? slope * x : x; }

/// Subgradient choice σ'(0) = slope.
inline double lrelu_derivative(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

struct MlpSpec {
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::vector<std::size_t> hidden_widths;
    double lrelu_slope = kDefaultSlope;
    std::uint64_t seed = 0;

    void validate() const {
        if (input_dim == 0 || output_dim == 0)
            throw InvalidArgument("invalid MlpSpec: zero input/output dimension");
        if (hidden_widths.empty())
            throw InvalidArgument("invalid MlpSpec: hidden_widths must be non-empty");
        for (auto w : hidden_widths)
            if (w == 0) throw InvalidArgument("invalid MlpSpec: zero-width layer");
        if (!(lrelu_slope > 0.0 && lrelu_slope < 1.0))
            throw InvalidArgument("invalid MlpSpec: lrelu_slope must lie in (0,1)");
    }

    /// Widths n_0 .. n_L including input and output.
    std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> s;
        s.reserve(hidden_widths.size() + 2);
        s.push_back(input_dim);
        s.insert(s.end(), hidden_widths.begin(), hidden_widths.end());
        s.push_back(output_dim);
        return s;
    }

    std::size_t num_layers() const { return hidden_widths.size() + 1; }

    bool operator==(const MlpSpec&) const = default;
};

/// Convenience: `depth` hidden layers of `width` neurons.
inline std::vector<std::size_t> uniform_widths(std::size_t depth, std::size_t width) {
    return std::vector<std::size_t>(depth, width);
}

/// Weights and biases; also used for gradients and optimizer moments.
struct MlpParams {
    std::vector<Mat> weights;  // W_h: n_h × n_{h-1}
    std::vector<Vec> biases;   // b_h: n_h

    static MlpParams zeros_like(const MlpParams& p) {
        MlpParams z;
        for (const auto& w : p.weights) z.weights.push_back(Mat::Zero(w.rows(), w.cols()));
        for (const auto& b : p.biases) z.biases.push_back(Vec::Zero(b.size()));
        return z;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
        for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
        return n;
    }

    bool same_shape(const MlpParams& o) const {
        if (weights.size() != o.weights.size() || biases.size() != o.biases.size()) return false;
        for (std::size_t h = 0; h < weights.size(); ++h)
            if (weights[h].rows() != o.weights[h].rows() || weights[h].cols() != o.weights[h].cols())
                return false;
        for (std::size_t h = 0; h < biases.size(); ++h)
            if (biases[h].size() != o.biases[h].size()) return false;
        return true;
    }

    bool all_finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }

    /// Flat view by index, in (weights..., biases...) column-major order.
    double& at(std::size_t idx) {
        for (auto& w : weights) {
            if (idx < static_cast<std::size_t>(w.size())) return w.data()[idx];
            idx -= static_cast<std::size_t>(w.size());
        }
        for (auto& b : biases) {
            if (idx < static_cast<std::size_t>(b.size())) return b.data()[idx];
            idx -= static_cast<std::size_t>(b.size());
        }
        throw InvalidArgument("parameter index out of range");
    }
    double at(std::size_t idx) const { return const_cast<MlpParams*>(this)->at(idx); }

    void add_scaled(const MlpParams& o, double c) {
        for (std::size_t h = 0; h < weights.size(); ++h) weights[h] += c * o.weights[h];
        for (std::size_t h = 0; h < biases.size(); ++h) biases[h] += c * o.biases[h];
    }
};

struct MlpModel {
    MlpSpec spec;
    MlpParams params;
    // Fixed input normalisation x̃ = (x - shift) ⊙ scale; empty means identity.
    Vec input_shift;
    Vec input_scale;

    bool has_input_map() const { return input_scale.size() > 0; }

    /// Map the box [lo, hi] per input dimension onto [-1, 1].
    void set_input_box(const Vec& lo, const Vec& hi) {
        require_dims(lo.size() == static_cast<Eigen::Index>(spec.input_dim) && hi.size() == lo.size(),
                     "input box dimension mismatch");
        input_shift = 0.5 * (lo + hi);
        input_scale.resize(lo.size());
        for (Eigen::Index k = 0; k < lo.size(); ++k) {
            const double half = 0.5 * (hi[k] - lo[k]);
            input_scale[k] = half > 0.0 ? 1.0 / half : 1.0;
        }
    }

    std::size_t num_layers() const { return params.weights.size(); }
};

// ---------------------------------------------------------------------------
// Initialisation
// ---------------------------------------------------------------------------

/// He-style uniform fan-in initialisation for leaky-ReLU layers:
/// W ~ U(-a, a), a = sqrt(6 / ((1 + slope²) fan_in)); b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline MlpModel mlp_init(const MlpSpec& spec) {
    spec.validate();
    MlpModel m;
    m.spec = spec;
    const auto sizes = spec.layer_sizes();
    Rng rng(hash_seed(spec.seed, 0x4D4C50ULL));
    for (std::size_t h = 1; h < sizes.size(); ++h) {
        const auto fan_in = static_cast<double>(sizes[h - 1]);
        const double a = std::sqrt(6.0 / ((1.0 + spec.lrelu_slope * spec.lrelu_slope) * fan_in));
        const double c = 1.0 / std::sqrt(fan_in);
        Mat w(sizes[h], sizes[h - 1]);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-a, a);
        Vec b(sizes[h]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-c, c);
        m.params.weights.push_back(std::move(w));
        m.params.biases.push_back(std::move(b));
    }
    return m;
}

/// All-zero parameters with the shapes implied by `spec`.
inline MlpModel mlp_zeros(const MlpSpec& spec) {
    spec.validate();
    MlpModel m;
    m.spec = spec;
    const auto sizes = spec.layer_sizes();
    for (std::size_t h = 1; h < sizes.size(); ++h) {
        m.params.weights.push_back(Mat::Zero(sizes[h], sizes[h - 1]));
        m.params.biases.push_back(Vec::Zero(sizes[h]));
    }
    return m;
}

/// Check shapes chain from input_dim to output_dim and entries are finite.
inline void validate_model(const MlpModel& m) {
    const auto& W = m.params.weights;
    const auto& B = m.params.biases;
    if (W.empty() || W.size() != B.size()) throw InvalidArgument("model has inconsistent layer count");
    if (static_cast<std::size_t>(W.front().cols()) != m.spec.input_dim ||
        static_cast<std::size_t>(W.back().rows()) != m.spec.output_dim)
        throw DimensionMismatch("model weights do not match spec dimensions");
    for (std::size_t h = 0; h < W.size(); ++h) {
        if (B[h].size() != W[h].rows()) throw DimensionMismatch("bias length mismatch");
        if (h > 0 && W[h].cols() != W[h - 1].rows()) throw DimensionMismatch("layer shapes do not chain");
    }
    if (m.has_input_map() && (m.input_scale.size() != static_cast<Eigen::Index>(m.spec.input_dim) ||
                              m.input_shift.size() != m.input_scale.size()))
        throw DimensionMismatch("input map dimension mismatch");
    if (!m.params.all_finite()) throw InvalidArgument("model has non-finite parameters");
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace detail {

inline Mat apply_input_map(const MlpModel& m, const Mat& x) {
    if (!m.has_input_map()) return x;
    return (x.rowwise() - m.input_shift.transpose()).array().rowwise() *
           m.input_scale.transpose().array();
}

inline void lrelu_inplace(Mat& z, double slope) {
    z = z.unaryExpr([slope](double v) { return v < 0.0 ? slope * v : v; });
}

inline Mat lrelu_derivative(const Mat& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

}  // namespace detail

/// Per-layer pre-activations and activations of a batch forward pass.
struct ForwardCache {
    std::vector<Mat> act;  // act[0] = mapped input, act[h] = σ(pre[h]) for hidden h
    std::vector<Mat> pre;  // pre[h-1] = pre-activation of layer h (h = 1..L)
    Mat output;
};

inline ForwardCache forward_cached(const MlpModel& m, const Mat& x) {
    const double slope = m.spec.lrelu_slope;
    const std::size_t L = m.num_layers();
    ForwardCache c;
    c.act.reserve(L);
    c.pre.reserve(L);
    c.act.push_back(detail::apply_input_map(m, x));
    for (std::size_t h = 0; h < L; ++h) {
        Mat z = c.act.back() * m.params.weights[h].transpose();
        z.rowwise() += m.params.biases[h].transpose();
        c.pre.push_back(z);
        if (h + 1 < L) {
            detail::lrelu_inplace(z, slope);
            c.act.push_back(std::move(z));
        } else {
            c.output = std::move(z);
        }
    }
    return c;
}

/// Batch forward: rows of `x` are samples (N × input_dim) → N × output_dim.
inline Mat mlp_forward_batch(const MlpModel& m, const Mat& x) {
    require_dims(static_cast<std::size_t>(x.cols()) == m.spec.input_dim, "mlp_forward: input dimension mismatch");
    const double slope = m.spec.lrelu_slope;
    const std::size_t L = m.num_layers();
    Mat a = detail::apply_input_map(m, x);
    for (std::size_t h = 0; h < L; ++h) {
        Mat z = a * m.params.weights[h].transpose();
        z.rowwise() += m.params.biases[h].transpose();
        if (h + 1 < L) detail::lrelu_inplace(z, slope);
        a = std::move(z);
    }
    return a;
}

inline Vec mlp_forward(const MlpModel& m, const Vec& x) {
    require_dims(static_cast<std::size_t>(x.size()) == m.spec.input_dim, "mlp_forward: input dimension mismatch");
    if (!x.allFinite()) throw InvalidArgument("mlp_forward: non-finite input");
    const double slope = m.spec.lrelu_slope;
    Vec a = m.has_input_map() ? Vec((x - m.input_shift).cwiseProduct(m.input_scale)) : x;
    const std::size_t L = m.num_layers();
    for (std::size_t h = 0; h < L; ++h) {
        Vec z = m.params.weights[h] * a + m.params.biases[h];
        if (h + 1 < L)
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = lrelu(z[i], slope);
        a = std::move(z);
    }
    return a;
}

/// Backpropagate dL/d(output) through a cached forward pass. Accumulates
/// parameter gradients into `grads` (if non-null) and returns dL/d(raw input).
inline Mat backward(const MlpModel& m, const ForwardCache& c, Mat g, MlpParams* grads) {
    const double slope = m.spec.lrelu_slope;
    const std::size_t L = m.num_layers();
    for (std::size_t h = L; h-- > 0;) {
        if (grads) {
            grads->weights[h].noalias() += g.transpose() * c.act[h];
            grads->biases[h].noalias() += g.colwise().sum().transpose();
        }
        Mat prev = g * m.params.weights[h];
        if (h > 0) prev.array() *= detail::lrelu_derivative(c.pre[h - 1], slope).array();
        g = std::move(prev);
    }
    if (m.has_input_map()) g.array().rowwise() *= m.input_scale.transpose().array();
    return g;
}

/// Gradient of output component `out` with respect to the input, for every
/// row of `x`: returns N × input_dim.
inline Mat input_gradients(const MlpModel& m, const Mat& x, std::size_t out = 0) {
    require_dims(static_cast<std::size_t>(x.cols()) == m.spec.input_dim, "input_gradients: input dimension mismatch");
    require_dims(out < m.spec.output_dim, "input_gradients: output index out of range");
    const ForwardCache c = forward_cached(m, x);
    Mat seed = Mat::Zero(x.rows(), static_cast<Eigen::Index>(m.spec.output_dim));
    seed.col(static_cast<Eigen::Index>(out)).setOnes();
    return backward(m, c, std::move(seed), nullptr);
}

/// Exact Jacobian (output_dim × input_dim) at one input under σ'(0) = slope.
inline Mat mlp_input_jacobian(const MlpModel& m, const Vec& x) {
    require_dims(static_cast<std::size_t>(x.size()) == m.spec.input_dim,
                 "mlp_input_jacobian: input dimension mismatch");
    const Mat xrow = x.transpose();
    const ForwardCache c = forward_cached(m, xrow);
    const auto out = static_cast<Eigen::Index>(m.spec.output_dim);
    Mat jac(out, static_cast<Eigen::Index>(m.spec.input_dim));
    for (Eigen::Index o = 0; o < out; ++o) {
        Mat seed = Mat::Zero(1, out);
        seed(0, o) = 1.0;
        jac.row(o) = backward(m, c, std::move(seed), nullptr).row(0);
    }
    return jac;
}

}  // namespace odeid::nn
