#include "odeid/nn/adam.hpp"
#include "odeid/nn/lipschitz.hpp"
#include "odeid/nn/loss.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/nn/train.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace odeid;
using namespace odeid::nn;

namespace {

MlpModel affine_model(const Mat& W, const Vec& b) {
    MlpModel m;
    m.spec.input_dim = static_cast<std::size_t>(W.cols());
    m.spec.output_dim = static_cast<std::size_t>(W.rows());
    m.params.weights = {W};
    m.params.biases = {b};
    return m;
}

// σ(x·1 − 2)·3: the two-layer hand case.
MlpModel hand_two_layer() {
    MlpModel m;
    m.spec.input_dim = 1;
    m.spec.output_dim = 1;
    m.spec.hidden_widths = {1};
    m.params.weights = {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 3.0)};
    m.params.biases = {Vec::Constant(1, -2.0), Vec::Zero(1)};
    return m;
}

MlpModel random_model(std::size_t in, std::vector<std::size_t> hidden, std::size_t out, std::uint64_t seed) {
    MlpSpec s;
    s.input_dim = in;
    s.output_dim = out;
    s.hidden_widths = std::move(hidden);
    s.seed = seed;
    return mlp_init(s);
}

Mat random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 2.0 * counter_uniform(seed, i, j) - 1.0;
    return m;
}

// Smallest |pre-activation| over every hidden unit and sample.
double min_kink_distance(const MlpModel& m, const Mat& x) {
    const ForwardCache c = forward_cached(m, x);
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h + 1 < c.pre.size(); ++h) d = std::min(d, c.pre[h].cwiseAbs().minCoeff());
    return d;
}

// Central-difference check of `count` randomly chosen parameters.
void check_param_gradients(const MlpModel& model, const Mat& x, const Mat& y, const LossFn& loss, std::uint64_t seed,
                           std::size_t count = 20) {
    const LossGradient lg = mlp_param_gradients(model, x, y, loss);
    const std::size_t P = model.params.count();
    Rng rng(seed);
    for (std::size_t q = 0; q < count; ++q) {
        const std::size_t idx = rng.below(P);
        const double h = 1e-6;
        MlpModel plus = model, minus = model;
        plus.params.at(idx) += h;
        minus.params.at(idx) -= h;
        const double fd = (mlp_loss(plus, x, y, loss) - mlp_loss(minus, x, y, loss)) / (2.0 * h);
        const double an = lg.grads.at(idx);
        const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-8);
        EXPECT_LE(rel, 1e-4) << "parameter " << idx << ": analytic " << an << " vs finite difference " << fd;
    }
}

}  // namespace

TEST(Lrelu, BranchValues) {
    EXPECT_EQ(lrelu(0.0, 0.01), 0.0);
    EXPECT_EQ(lrelu(2.0, 0.01), 2.0);
    EXPECT_DOUBLE_EQ(lrelu(-1.0, 0.01), -0.01);
    EXPECT_EQ(lrelu_derivative(0.0, 0.01), 0.01);
}

TEST(MlpInit, DeterministicBytes) {
    MlpSpec s;
    s.hidden_widths = {10, 10};
    s.seed = 7;
    const MlpModel a = mlp_init(s), b = mlp_init(s);
    ASSERT_EQ(a.params.count(), b.params.count());
    for (std::size_t h = 0; h < a.params.weights.size(); ++h) {
        EXPECT_EQ(0, std::memcmp(a.params.weights[h].data(), b.params.weights[h].data(),
                                 sizeof(double) * static_cast<std::size_t>(a.params.weights[h].size())));
        EXPECT_EQ(0, std::memcmp(a.params.biases[h].data(), b.params.biases[h].data(),
                                 sizeof(double) * static_cast<std::size_t>(a.params.biases[h].size())));
    }
    s.seed = 8;
    EXPECT_NE(mlp_init(s).params.weights[0](0, 0), a.params.weights[0](0, 0));
}

TEST(MlpInit, LayerShapes) {
    const MlpModel one_dim = random_model(2, uniform_widths(8, 20), 1, 1);
    EXPECT_EQ(one_dim.num_layers(), 9u);
    for (std::size_t h = 0; h < 8; ++h) EXPECT_EQ(one_dim.params.weights[h].rows(), 20);

    const MlpModel pend = random_model(2, uniform_widths(5, 60), 2, 2);
    EXPECT_EQ(pend.params.weights.front().cols(), 2);
    EXPECT_EQ(pend.params.weights.back().rows(), 2);
    EXPECT_EQ(pend.params.count(), 2u * 60 + 60 + 4 * (60 * 60 + 60) + 60 * 2 + 2);
    EXPECT_NO_THROW(validate_model(pend));
}

TEST(MlpInit, RejectsBadSpecs) {
    MlpSpec s;
    EXPECT_THROW(mlp_init(s), InvalidArgument);  // no hidden layer
    s.hidden_widths = {4, 0};
    EXPECT_THROW(mlp_init(s), InvalidArgument);
    s.hidden_widths = {4};
    s.lrelu_slope = 1.5;
    EXPECT_THROW(mlp_init(s), InvalidArgument);
}

TEST(MlpForward, HandCases) {
    const MlpModel affine = affine_model(Mat::Constant(1, 1, 2.0), Vec::Constant(1, 1.0));
    EXPECT_DOUBLE_EQ(mlp_forward(affine, Vec::Constant(1, 3.0))[0], 7.0);
    EXPECT_NEAR(mlp_forward(hand_two_layer(), Vec::Constant(1, 1.0))[0], -0.03, 1e-15);

    MlpSpec s;
    s.input_dim = 3;
    s.output_dim = 2;
    s.hidden_widths = {5, 5};
    const MlpModel z = mlp_zeros(s);
    EXPECT_TRUE(mlp_forward(z, Vec::Constant(3, 4.2)).isZero(0.0));
}

TEST(MlpForward, BatchAgreesWithSingle) {
    const MlpModel m = random_model(3, {7, 5}, 2, 11);
    const Mat x = random_matrix(9, 3, 5);
    const Mat b = mlp_forward_batch(m, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        EXPECT_LE((b.row(i).transpose() - mlp_forward(m, x.row(i).transpose())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MlpForward, RejectsBadInput) {
    const MlpModel m = random_model(2, {4}, 1, 3);
    EXPECT_THROW(mlp_forward(m, Vec::Zero(3)), DimensionMismatch);
    Vec bad = Vec::Zero(2);
    bad[1] = std::nan("");
    EXPECT_THROW(mlp_forward(m, bad), InvalidArgument);
}

TEST(MlpForward, InputBoxMapsToUnitCube) {
    MlpModel m = affine_model(Mat::Identity(2, 2), Vec::Zero(2));
    Vec lo(2), hi(2);
    lo << 0.0, -4.0;
    hi << 2.0, 0.0;
    m.set_input_box(lo, hi);
    EXPECT_TRUE(mlp_forward(m, lo).isApprox(Vec::Constant(2, -1.0)));
    EXPECT_TRUE(mlp_forward(m, hi).isApprox(Vec::Constant(2, 1.0)));
}

TEST(MlpJacobian, AffineIsWeightMatrix) {
    Mat W(2, 3);
    W << 1, -2, 3, 0.5, 4, -1;
    const MlpModel m = affine_model(W, Vec::Ones(2));
    EXPECT_TRUE(mlp_input_jacobian(m, Vec::Constant(3, 0.3)).isApprox(W));
}

TEST(MlpJacobian, HandTwoLayer) {
    EXPECT_NEAR(mlp_input_jacobian(hand_two_layer(), Vec::Constant(1, 1.0))(0, 0), 0.03, 1e-15);
}

TEST(MlpJacobian, MatchesCentralDifferences) {
    const MlpModel m = random_model(2, {10}, 2, 21);
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const Vec x = random_matrix(2, 1, 100 + trial).col(0);
        const double h = 1e-5;
        if (min_kink_distance(m, x.transpose()) < 1e-3) continue;
        const Mat J = mlp_input_jacobian(m, x);
        for (Eigen::Index k = 0; k < 2; ++k) {
            Vec xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const Vec fd = (mlp_forward(m, xp) - mlp_forward(m, xm)) / (2.0 * h);
            EXPECT_LE((J.col(k) - fd).cwiseAbs().maxCoeff(), 1e-5);
        }
    }
}

TEST(ParamGradients, ZeroLossGivesZeroGradient) {
    const MlpModel m = random_model(2, {6, 6}, 2, 4);
    const Mat x = random_matrix(15, 2, 9);
    const LossGradient lg = mlp_param_gradients(m, x, mlp_forward_batch(m, x), MseLoss{});
    EXPECT_EQ(lg.loss, 0.0);
    for (std::size_t i = 0; i < lg.grads.count(); ++i) EXPECT_EQ(lg.grads.at(i), 0.0);
}

TEST(ParamGradients, ScalarLinearClosedForm) {
    const double w = 1.7, xv = 0.8, yv = -0.4;
    const MlpModel m = affine_model(Mat::Constant(1, 1, w), Vec::Zero(1));
    const LossGradient lg = mlp_param_gradients(m, Mat::Constant(1, 1, xv), Mat::Constant(1, 1, yv), MseLoss{});
    EXPECT_NEAR(lg.grads.weights[0](0, 0), 2.0 * (w * xv - yv) * xv, 1e-14);
    EXPECT_NEAR(lg.loss, (w * xv - yv) * (w * xv - yv), 1e-14);
}

TEST(ParamGradients, MseMatchesFiniteDifferences) {
    MlpModel m = random_model(3, {8, 8}, 2, 31);
    m.set_input_box(Vec::Constant(3, -2.0), Vec::Constant(3, 2.0));
    const Mat x = random_matrix(40, 3, 32), y = random_matrix(40, 2, 33);
    check_param_gradients(m, x, y, MseLoss{}, 34);
}

TEST(ParamGradients, EulerResidualMatchesFiniteDifferences) {
    const MlpModel m = random_model(3, {8}, 2, 41);
    const Mat x = random_matrix(30, 3, 42), y = random_matrix(30, 2, 43);
    check_param_gradients(m, x, y, EulerResidualLoss{0.04, 1}, 44);
}

TEST(ParamGradients, LipschitzPenaltyMatchesFiniteDifferences) {
    const MlpModel m = random_model(2, {6, 6}, 1, 51);
    const Mat x = random_matrix(25, 2, 52), y = random_matrix(25, 1, 53);
    // Probes fixed so the arg-max stays put under small perturbations.
    check_param_gradients(m, x, y, MseLipschitzLoss{0.3, random_matrix(50, 2, 54)}, 55);
}

TEST(Adam, ZeroGradientKeepsParameters) {
    MlpModel m = random_model(2, {4}, 1, 61);
    const MlpModel before = m;
    AdamState s = AdamState::for_model(m);
    adam_step(m, MlpParams::zeros_like(m.params), s);
    for (std::size_t i = 0; i < m.params.count(); ++i) EXPECT_EQ(m.params.at(i), before.params.at(i));

    s.first_moment.weights[0].setConstant(1.0);
    s.second_moment.weights[0].setConstant(1.0);
    adam_step(m, MlpParams::zeros_like(m.params), s);
    EXPECT_NEAR(s.first_moment.weights[0](0, 0), 0.9, 1e-15);
    EXPECT_NEAR(s.second_moment.weights[0](0, 0), 0.999, 1e-15);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
    MlpModel m = random_model(2, {4}, 1, 62);
    const MlpModel before = m;
    MlpParams g = MlpParams::zeros_like(m.params);
    for (std::size_t i = 0; i < g.count(); ++i) g.at(i) = (i % 2 ? -1.0 : 1.0) * (0.1 + 0.05 * static_cast<double>(i));
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    AdamState s = AdamState::for_model(m, cfg);
    adam_step(m, g, s);
    for (std::size_t i = 0; i < g.count(); ++i) {
        const double step = before.params.at(i) - m.params.at(i);
        EXPECT_NEAR(step, 0.01 * (g.at(i) > 0 ? 1.0 : -1.0), 1e-8);
    }
}

TEST(Adam, Deterministic) {
    MlpModel a = random_model(2, {4}, 1, 63), b = a;
    AdamState sa = AdamState::for_model(a), sb = AdamState::for_model(b);
    const Mat x = random_matrix(10, 2, 1), y = random_matrix(10, 1, 2);
    for (int k = 0; k < 5; ++k) {
        adam_step(a, mlp_param_gradients(a, x, y, MseLoss{}).grads, sa);
        adam_step(b, mlp_param_gradients(b, x, y, MseLoss{}).grads, sb);
    }
    for (std::size_t i = 0; i < a.params.count(); ++i) EXPECT_EQ(a.params.at(i), b.params.at(i));
}

TEST(Adam, ShapeMismatchThrows) {
    MlpModel m = random_model(2, {4}, 1, 64);
    AdamState s = AdamState::for_model(m);
    EXPECT_THROW(adam_step(m, random_model(2, {5}, 1, 1).params, s), DimensionMismatch);
}

TEST(Lipschitz, AffineNetIsExact) {
    Mat W(1, 2);
    W << 3.0, -4.0;
    const MlpModel m = affine_model(W, Vec::Constant(1, 0.5));
    const Box box{Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)};
    EXPECT_EQ(max_abs_input_gradient(m, sample_box(box, 100, 1)).value, 4.0);
}

TEST(Train, FitsAffineData) {
    MlpModel m = random_model(1, {10}, 1, 71);
    Mat x(50, 1);
    for (Eigen::Index i = 0; i < 50; ++i) x(i, 0) = -1.0 + 2.0 * static_cast<double>(i) / 49.0;
    const Mat y = (2.0 * x.array() + 0.5).matrix();
    AdamConfig a;
    a.learning_rate = 1e-2;
    const FitResult r = fit_full_batch(m, x, y, [](std::size_t) { return LossFn{MseLoss{}}; }, a, 3000);
    EXPECT_LT(r.last.loss, 1e-5);
    EXPECT_LT(r.last.loss, r.first.loss);
}

TEST(Train, DivergenceRaises) {
    MlpModel m = random_model(1, {10}, 1, 72);
    const Mat x = random_matrix(20, 1, 3);
    const Mat y = Mat::Constant(20, 1, 1e300) * 1e10;
    EXPECT_THROW(fit_full_batch(m, x, y, [](std::size_t) { return LossFn{MseLoss{}}; }, AdamConfig{}, 10),
                 TrainingFailure);
}

TEST(Serialize, RoundTripIsExact) {
    MlpModel m = random_model(2, {5, 3}, 2, 81);
    m.set_input_box(Vec::Constant(2, -1.5), Vec::Constant(2, 3.0));
    const auto path = std::filesystem::temp_directory_path() / "odeid_nn_roundtrip.json";
    save_model(path, m);
    const MlpModel r = load_model(path);
    std::filesystem::remove(path);
    const Mat x = random_matrix(7, 2, 4);
    EXPECT_EQ(mlp_forward_batch(m, x), mlp_forward_batch(r, x));
    EXPECT_EQ(r.spec.hidden_widths, m.spec.hidden_widths);
}
