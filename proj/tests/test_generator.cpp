#include "odeid/generator.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace odeid;
using namespace odeid::generator;

namespace {

data::TrajectoryDataset dataset(const ode::RhsFunction& rhs, std::size_t K, double t_end, double dt,
                                std::pair<double, double> box) {
    data::ProblemSpec p;
    p.rhs = rhs;
    p.t_end = t_end;
    p.dt = dt;
    p.n_trajectories = K;
    p.ic_box = {box};
    p.ic_seed = 3;
    return data::generate_dataset(p, ode::IntegratorConfig::reference());
}

GeneratorConfig small_config(std::size_t epochs) {
    GeneratorConfig c;
    c.net_spec.input_dim = 1;
    c.net_spec.output_dim = 1;
    c.net_spec.hidden_widths = {10, 10};
    c.epochs = epochs;
    c.adam.learning_rate = 3e-3;
    c.seed = 17;
    c.split_seed = 4;
    return c;
}

}  // namespace

TEST(Generator, UnitRhsRecoversOne) {
    const auto one = ode::make_rhs("one", 1, [](double, const Vec&) { return Vec(Vec::Ones(1)); });
    const auto ds = dataset(one, 100, 0.4, 0.04, {-2.0, 2.0});
    auto c = small_config(10000);
    c.adam.learning_rate = 3e-2;
    const auto ens = train_generator(ds, c);
    ASSERT_EQ(ens.size(), 10u);
    for (double l : ens.training_losses) EXPECT_LE(l, 1e-6);
    // Sampled inputs the networks were fit on.
    for (std::size_t j = 1; j <= ens.size(); ++j) {
        const auto s = data::build_generator_samples(ds, j, c.split_seed);
        const Mat out = nn::mlp_forward_batch(ens.networks[j - 1], s.train_inputs());
        EXPECT_GE(out.minCoeff(), 0.999) << "network " << j;
        EXPECT_LE(out.maxCoeff(), 1.001) << "network " << j;
    }
    // Every sample, held-out rows included.
    const data::Tensor3 v = predict_velocities(ens, ds);
    for (double x : v.raw()) {
        EXPECT_GE(x, 0.99);
        EXPECT_LE(x, 1.01);
    }
}

TEST(Generator, ConstantTrajectoriesGiveZero) {
    const auto zero = ode::make_rhs("zero", 1, [](double, const Vec&) { return Vec(Vec::Zero(1)); });
    const auto ds = dataset(zero, 100, 0.4, 0.04, {-2.0, 2.0});
    auto c = small_config(10000);
    c.adam.learning_rate = 3e-2;
    const auto ens = train_generator(ds, c);
    for (std::size_t j = 1; j <= ens.size(); ++j) {
        const auto s = data::build_generator_samples(ds, j, c.split_seed);
        const Mat out = nn::mlp_forward_batch(ens.networks[j - 1], s.train_inputs());
        EXPECT_LE(out.cwiseAbs().maxCoeff(), 1e-3) << "network " << j;
    }
    // Held-out rows near the ends of the state range are extrapolated.
    const data::Tensor3 v = predict_velocities(ens, ds);
    for (double x : v.raw()) EXPECT_LE(std::abs(x), 1e-2);
}

TEST(Generator, EulerImpliedRateOnExponentialData) {
    const auto growth = ode::make_rhs("growth", 1, [](double, const Vec& x) { return Vec(x); });
    const double dt = 0.04;
    const auto ds = dataset(growth, 200, 0.12, dt, {0.5, 1.5});
    auto c = small_config(10000);
    c.adam.learning_rate = 1e-2;
    const auto ens = train_generator(ds, c);
    const data::Tensor3 v = predict_velocities(ens, ds);
    const double rate = (std::exp(dt) - 1.0) / dt;
    double sq = 0.0, mean = 0.0;
    const double n = 3.0 * static_cast<double>(ds.num_trajectories());
    for (std::size_t i = 0; i < ds.num_trajectories(); ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double ratio = v(i, j, 0) / ds.states(i, j, 0);
            sq += (ratio - rate) * (ratio - rate);
            mean += ratio / n;
        }
    EXPECT_LE(std::sqrt(sq / n), 2e-3);
    EXPECT_NEAR(mean, rate, 1e-3);
    EXPECT_GT(mean - 1.0, 0.015);  // the Euler-implied rate, not ẋ/x = 1
}

TEST(Generator, ZeroEnsembleGivesZeroVelocities) {
    const auto ds = dataset(ode::catalog_lookup("exp_sin"), 20, 0.2, 0.04, {-1.0, 1.0});
    GeneratorEnsemble ens;
    ens.dt = ds.dt();
    auto c = small_config(1);
    for (std::size_t j = 0; j < 5; ++j) ens.networks.push_back(nn::mlp_zeros(c.net_spec));
    const data::Tensor3 v = predict_velocities(ens, ds);
    for (double x : v.raw()) EXPECT_EQ(x, 0.0);
    ens.networks.pop_back();
    EXPECT_THROW(predict_velocities(ens, ds), InvalidArgument);
}

TEST(Generator, DeterministicAcrossJobCounts) {
    const auto ds = dataset(ode::catalog_lookup("cubic_cos"), 50, 0.2, 0.04, {-0.7, 0.9});
    auto c = small_config(200);
    const auto a = train_generator(ds, c);
    c.jobs = 3;
    const auto b = train_generator(ds, c);
    EXPECT_EQ(a.training_losses, b.training_losses);
    for (std::size_t j = 0; j < a.size(); ++j)
        EXPECT_EQ(a.networks[j].params.weights[0], b.networks[j].params.weights[0]);
}

TEST(Generator, SaveLoadRoundTrip) {
    const auto ds = dataset(ode::catalog_lookup("cubic_cos"), 30, 0.2, 0.04, {-0.7, 0.9});
    const auto ens = train_generator(ds, small_config(50));
    const auto dir = std::filesystem::temp_directory_path() / "odeid_generator_test";
    save_ensemble(dir, ens);
    const auto back = load_ensemble(dir);
    std::filesystem::remove_all(dir);
    EXPECT_EQ(predict_velocities(back, ds), predict_velocities(ens, ds));
}

TEST(Generator, RejectsMismatchedSpec) {
    const auto ds = dataset(ode::catalog_lookup("exp_sin"), 10, 0.2, 0.04, {-1.0, 1.0});
    auto c = small_config(5);
    c.net_spec.input_dim = 2;
    EXPECT_THROW(train_generator(ds, c), DimensionMismatch);
}
