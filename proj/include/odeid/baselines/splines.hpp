#pragma once

// Spline-derivative velocity targets.
//
// λ = 0: the not-a-knot cubic interpolant (exact on cubics).
// λ > 0: the natural cubic smoothing spline minimising
//        Σ (y_i − g(t_i))² + λ ∫ g''(t)² dt      (Reinsch form).
// Without an explicit λ, it is chosen per trajectory and component by
// generalised cross-validation.

#include "odeid/data/dataset.hpp"
#include "odeid/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>

namespace odeid::baselines {

/// Piecewise cubic in value/second-derivative form on the knots `t`.
struct CubicSpline {
    std::vector<double> t;
    Vec value;   // g(t_i)
    Vec second;  // g''(t_i)
    double lambda = 0.0;

    std::size_t segment(double x) const {
        const auto it = std::upper_bound(t.begin(), t.end(), x);
        const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - t.begin())) - 1;
        return std::min(i, t.size() - 2);
    }

    double operator()(double x) const {
        const std::size_t i = segment(x);
        const double h = t[i + 1] - t[i], a = (t[i + 1] - x) / h, b = (x - t[i]) / h;
        const auto I = static_cast<Eigen::Index>(i);
        return a * value[I] + b * value[I + 1] +
               ((a * a * a - a) * second[I] + (b * b * b - b) * second[I + 1]) * h * h / 6.0;
    }

    double derivative(double x) const {
        const std::size_t i = segment(x);
        const double h = t[i + 1] - t[i], a = (t[i + 1] - x) / h, b = (x - t[i]) / h;
        const auto I = static_cast<Eigen::Index>(i);
        return (value[I + 1] - value[I]) / h +
               ((1.0 - 3.0 * a * a) * second[I] + (3.0 * b * b - 1.0) * second[I + 1]) * h / 6.0;
    }
};

namespace detail {

/// Tridiagonal Reinsch matrices: Q is n × (n−2), R is (n−2) × (n−2).
inline std::pair<Mat, Mat> reinsch_matrices(const std::vector<double>& t) {
    const auto n = static_cast<Eigen::Index>(t.size());
    Mat Q = Mat::Zero(n, n - 2), R = Mat::Zero(n - 2, n - 2);
    for (Eigen::Index j = 1; j + 1 < n; ++j) {
        const double h0 = t[static_cast<std::size_t>(j)] - t[static_cast<std::size_t>(j - 1)];
        const double h1 = t[static_cast<std::size_t>(j + 1)] - t[static_cast<std::size_t>(j)];
        const Eigen::Index c = j - 1;
        Q(j - 1, c) = 1.0 / h0;
        Q(j, c) = -1.0 / h0 - 1.0 / h1;
        Q(j + 1, c) = 1.0 / h1;
        R(c, c) = (h0 + h1) / 3.0;
        if (c + 1 < n - 2) R(c, c + 1) = R(c + 1, c) = h1 / 6.0;
    }
    return {Q, R};
}

inline void check_knots(const std::vector<double>& t, std::size_t n_values) {
    if (t.size() < 4) throw InvalidArgument("cubic spline needs at least 4 points");
    require_dims(t.size() == n_values, "spline knots and values differ in length");
    for (std::size_t i = 1; i < t.size(); ++i) require(t[i] > t[i - 1], "spline knots must be increasing");
}

}  // namespace detail

/// Not-a-knot cubic interpolant through (t_i, y_i).
inline CubicSpline interpolating_spline(const std::vector<double>& t, const Vec& y) {
    detail::check_knots(t, static_cast<std::size_t>(y.size()));
    const auto n = static_cast<Eigen::Index>(t.size());
    auto h = [&](Eigen::Index i) { return t[static_cast<std::size_t>(i + 1)] - t[static_cast<std::size_t>(i)]; };
    Mat A = Mat::Zero(n, n);
    Vec rhs = Vec::Zero(n);
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        A(i, i - 1) = h(i - 1);
        A(i, i) = 2.0 * (h(i - 1) + h(i));
        A(i, i + 1) = h(i);
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h(i) - (y[i] - y[i - 1]) / h(i - 1));
    }
    // Third derivative continuous across the second and penultimate knots.
    A(0, 0) = -1.0 / h(0);
    A(0, 1) = 1.0 / h(0) + 1.0 / h(1);
    A(0, 2) = -1.0 / h(1);
    A(n - 1, n - 3) = -1.0 / h(n - 3);
    A(n - 1, n - 2) = 1.0 / h(n - 3) + 1.0 / h(n - 2);
    A(n - 1, n - 1) = -1.0 / h(n - 2);
    CubicSpline s;
    s.t = t;
    s.value = y;
    s.second = A.partialPivLu().solve(rhs);
    return s;
}

/// Smoothing spline for a fixed λ > 0, or chosen by GCV when `lambda` is empty.
inline CubicSpline smoothing_spline(const std::vector<double>& t, const Vec& y, std::optional<double> lambda) {
    detail::check_knots(t, static_cast<std::size_t>(y.size()));
    if (lambda) require(*lambda > 0.0, "smoothing_spline: lambda must be positive");
    const auto n = static_cast<Eigen::Index>(t.size());
    const auto [Q, R] = detail::reinsch_matrices(t);
    // K = Q R⁻¹ Qᵀ is symmetric PSD; with K = U diag(k) Uᵀ the smoother is
    // A(λ) = U diag(1 / (1 + λ k)) Uᵀ.
    const Mat K = Q * R.ldlt().solve(Q.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (K + K.transpose()));
    // K has rank n − 2; its null space (the linear functions) is never shrunk.
    Vec k = es.eigenvalues().cwiseMax(0.0);
    k.head(2).setZero();
    const Mat& U = es.eigenvectors();
    const Vec z = U.transpose() * y;

    auto gcv = [&](double lam) {
        double rss = 0.0, tr = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double shrink = lam * k[i] / (1.0 + lam * k[i]);  // eigenvalue of I − A
            rss += shrink * shrink * z[i] * z[i];
            tr += shrink;
        }
        return static_cast<double>(n) * rss / (tr * tr);
    };

    double lam = lambda.value_or(0.0);
    if (!lambda) {
        const double kmax = k.maxCoeff();
        double kmin = kmax;
        for (Eigen::Index i = 0; i < n; ++i)
            if (k[i] > 1e-12 * kmax) kmin = std::min(kmin, k[i]);
        // Log-spaced scan, then golden-section refinement around the best node.
        const double lo = std::log(1e-8 / kmax), hi = std::log(1e6 / kmin);
        const int steps = 120;
        int best = 0;
        double best_v = std::numeric_limits<double>::infinity();
        for (int s = 0; s <= steps; ++s) {
            const double v = gcv(std::exp(lo + (hi - lo) * s / steps));
            if (v < best_v) best_v = v, best = s;
        }
        double a = lo + (hi - lo) * std::max(0, best - 1) / steps, b = lo + (hi - lo) * std::min(steps, best + 1) / steps;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 60; ++it) {
            const double c = b - g * (b - a), d = a + g * (b - a);
            if (gcv(std::exp(c)) < gcv(std::exp(d)))
                b = d;
            else
                a = c;
        }
        lam = std::exp(0.5 * (a + b));
    }
    Vec shrink(n);
    for (Eigen::Index i = 0; i < n; ++i) shrink[i] = 1.0 / (1.0 + lam * k[i]);
    CubicSpline s;
    s.t = t;
    s.lambda = lam;
    s.value = U * shrink.cwiseProduct(z);
    Vec gamma = Vec::Zero(n);
    gamma.segment(1, n - 2) = R.ldlt().solve(Q.transpose() * s.value);
    s.second = gamma;
    return s;
}

inline CubicSpline fit_spline(const std::vector<double>& t, const Vec& y, std::optional<double> lambda) {
    if (lambda && *lambda == 0.0) return interpolating_spline(t, y);
    return smoothing_spline(t, y, lambda);
}

struct SplineSettings {
    std::optional<double> lambda;  // empty: GCV per trajectory and component
    std::size_t jobs = 1;
};

/// Spline derivatives at t_1..t_{M−1}: a K × (M−1) × d tensor aligned with
/// the generator's velocity layout.
inline data::Tensor3 splines_targets(const data::TrajectoryDataset& ds, const SplineSettings& cfg = {}) {
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    if (M < 4) throw InvalidArgument("splines_targets: need at least 4 time samples");
    if (cfg.lambda) require(*cfg.lambda >= 0.0, "splines_targets: lambda must be non-negative");
    data::Tensor3 v(K, M - 1, d);
    parallel_for(K, cfg.jobs, [&](std::size_t i) {
        Vec y(static_cast<Eigen::Index>(M));
        for (std::size_t k = 0; k < d; ++k) {
            for (std::size_t j = 0; j < M; ++j) y[static_cast<Eigen::Index>(j)] = ds.states(i, j, k);
            const CubicSpline s = fit_spline(ds.times, y, cfg.lambda);
            for (std::size_t j = 0; j + 1 < M; ++j) v(i, j, k) = s.derivative(ds.times[j]);
        }
    });
    return v;
}

}  // namespace odeid::baselines
