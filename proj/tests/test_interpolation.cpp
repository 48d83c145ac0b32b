#include "odeid/interpolation.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace odeid;
using namespace odeid::interp;

namespace {

data::TrajectoryDataset dataset(const std::string& label, std::size_t K, double t_end,
                                std::vector<std::pair<double, double>> box) {
    data::ProblemSpec p;
    p.rhs = ode::catalog_lookup(label);
    p.t_end = t_end;
    p.dt = 0.04;
    p.n_trajectories = K;
    p.ic_box = std::move(box);
    p.ic_seed = 8;
    return data::generate_dataset(p, ode::IntegratorConfig::reference());
}

// Exact field values at every (t_j, x_i(t_j)), j < M.
data::InterpSampleSet exact_samples(const data::TrajectoryDataset& ds, double noise_std = 0.0) {
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    data::Tensor3 v(K, M - 1, d);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j + 1 < M; ++j) {
            const Vec f = ode::catalog_lookup(ds.problem_label)(ds.times[j], ds.state(i, j));
            for (std::size_t k = 0; k < d; ++k)
                v(i, j, k) = f[static_cast<Eigen::Index>(k)] +
                             noise_std * (2.0 * counter_uniform(99, i * M + j, k) - 1.0) * std::sqrt(3.0);
        }
    return data::build_interp_samples(ds, v, 5);
}

InterpConfig small_config(std::size_t d, std::size_t epochs) {
    InterpConfig c;
    c.net_spec.input_dim = d + 1;
    c.net_spec.output_dim = 1;
    c.net_spec.hidden_widths = {16, 16};
    c.epochs = epochs;
    c.adam.learning_rate = 3e-3;
    c.lip_sample_count = 200;
    c.seed = 21;
    return c;
}

}  // namespace

TEST(Interpolation, FitsSmoothFieldOnExactTargets) {
    const auto ds = dataset("exp_sin", 60, 0.8, {{-2.0, 2.0}});
    const auto s = exact_samples(ds);
    const auto m = train_interpolation(s, small_config(1, 2000));
    ASSERT_EQ(m.dim(), 1u);
    EXPECT_LT(m.relative_train_mse(0), 0.5);
    EXPECT_LT(m.relative_test_mse(0), 1.0);
    EXPECT_EQ(m.fits[0].epochs_run, 2000u);

    const ode::RhsFunction f = as_rhs(std::make_shared<const InterpolationModel>(m));
    const Mat tx = s.test_inputs();
    const Mat pred = f.batch(tx);
    for (Eigen::Index r = 0; r < 5; ++r)
        EXPECT_DOUBLE_EQ(pred(r, 0), eval_rhs(m, tx(r, 0), tx.row(r).tail(1).transpose())[0]);
}

TEST(Interpolation, OneNetworkPerComponent) {
    const auto ds = dataset("pendulum", 30, 0.4, {{0.0, 2.0}, {0.0, 2.0}});
    const auto s = exact_samples(ds);
    auto c = small_config(2, 300);
    const auto m = train_interpolation(s, c);
    ASSERT_EQ(m.dim(), 2u);
    EXPECT_EQ(m.component_nets[0].spec.output_dim, 1u);
    EXPECT_NE(m.component_nets[0].params.weights[0], m.component_nets[1].params.weights[0]);
    c.jobs = 2;
    const auto p = train_interpolation(s, c);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(m.fits[k].train_mse, p.fits[k].train_mse);
}

TEST(Interpolation, TargetMseStopsEarly) {
    const auto ds = dataset("exp_sin", 40, 0.8, {{-2.0, 2.0}});
    const auto s = exact_samples(ds);
    auto c = small_config(1, 5000);
    const double energy = s.targets.squaredNorm() / static_cast<double>(s.targets.rows());
    c.target_train_mse = {0.01 * energy};
    const auto m = train_interpolation(s, c);
    EXPECT_TRUE(m.fits[0].reached_target);
    EXPECT_LT(m.fits[0].epochs_run, 5000u);
    EXPECT_LE(m.fits[0].train_mse, 0.01 * energy);
}

TEST(Interpolation, PenaltyLowersLipschitzEstimate) {
    const auto ds = dataset("exp_sin", 60, 0.8, {{-2.0, 2.0}});
    const auto s = exact_samples(ds, 0.3);
    auto c = small_config(1, 1500);
    const auto plain = train_interpolation(s, c);
    c.alpha = 0.05;
    const auto reg = train_interpolation(s, c);
    EXPECT_LT(reg.fits[0].estimated_lipschitz, plain.fits[0].estimated_lipschitz);
    EXPECT_EQ(reg.fits[0].alpha, 0.05);
}

TEST(Interpolation, AlphaSearchKeepsBaselineCandidate) {
    const auto ds = dataset("exp_sin", 30, 0.8, {{-2.0, 2.0}});
    const auto s = exact_samples(ds, 0.3);
    const auto r = select_alpha(s, small_config(1, 400), {0.0, 0.01, 0.1});
    ASSERT_EQ(r.candidates.size(), 1u);
    ASSERT_EQ(r.candidates[0].size(), 3u);
    EXPECT_EQ(r.candidates[0][0].alpha, 0.0);
    EXPECT_TRUE(r.candidates[0][0].eligible);
    EXPECT_LE(r.selected.fits[0].test_mse, r.baseline.fits[0].test_mse);
    for (const auto& cand : r.candidates[0]) {
        if (!cand.eligible) continue;
        EXPECT_LE(cand.fit.train_mse, r.baseline.fits[0].train_mse);
    }
}

TEST(Interpolation, LipschitzEstimateOfAffineNet) {
    nn::MlpModel m;
    m.spec.input_dim = 2;
    m.spec.output_dim = 1;
    m.params.weights = {(Mat(1, 2) << 0.5, -2.5).finished()};
    m.params.biases = {Vec::Constant(1, 1.0)};
    const nn::Box box{Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)};
    EXPECT_DOUBLE_EQ(estimate_lipschitz(m, box, 50, 1), 2.5);
}

TEST(Interpolation, SaveLoadRoundTrip) {
    const auto ds = dataset("exp_sin", 20, 0.4, {{-1.0, 1.0}});
    const auto s = exact_samples(ds);
    const auto m = train_interpolation(s, small_config(1, 50));
    const auto dir = std::filesystem::temp_directory_path() / "odeid_interp_test";
    save_interpolation(dir, m);
    const auto back = load_interpolation(dir);
    std::filesystem::remove_all(dir);
    EXPECT_EQ(eval_rhs_batch(back, s.inputs), eval_rhs_batch(m, s.inputs));
    EXPECT_EQ(back.fits[0].train_mse, m.fits[0].train_mse);
    EXPECT_EQ(back.lip_domain.lo, m.lip_domain.lo);
}

TEST(Interpolation, RejectsBadConfigs) {
    const auto ds = dataset("exp_sin", 10, 0.4, {{-1.0, 1.0}});
    const auto s = exact_samples(ds);
    auto c = small_config(1, 10);
    c.net_spec.input_dim = 3;
    EXPECT_THROW(train_interpolation(s, c), DimensionMismatch);
    c = small_config(1, 10);
    c.alpha = -1.0;
    EXPECT_THROW(train_interpolation(s, c), InvalidArgument);
    c = small_config(1, 10);
    c.target_train_mse = {1.0, 2.0};
    EXPECT_THROW(train_interpolation(s, c), InvalidArgument);
}
