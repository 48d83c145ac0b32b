#include "odeid/baselines/multistep.hpp"
#include "odeid/baselines/polyfit.hpp"
#include "odeid/baselines/sindy.hpp"
#include "odeid/baselines/splines.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace odeid;
using namespace odeid::baselines;

namespace {

data::TrajectoryDataset dataset(const std::string& label, std::size_t K, double t_end, double dt,
                                std::vector<std::pair<double, double>> box) {
    data::ProblemSpec p;
    p.rhs = ode::catalog_lookup(label);
    p.t_end = t_end;
    p.dt = dt;
    p.n_trajectories = K;
    p.ic_box = std::move(box);
    p.ic_seed = 6;
    return data::generate_dataset(p, ode::IntegratorConfig::reference());
}

data::Tensor3 exact_velocities(const data::TrajectoryDataset& ds) {
    const auto& f = ode::catalog_lookup(ds.problem_label);
    data::Tensor3 v(ds.num_trajectories(), ds.num_times() - 1, ds.dim());
    for (std::size_t i = 0; i < ds.num_trajectories(); ++i)
        for (std::size_t j = 0; j + 1 < ds.num_times(); ++j) {
            const Vec fx = f(ds.times[j], ds.state(i, j));
            for (std::size_t k = 0; k < ds.dim(); ++k) v(i, j, k) = fx[static_cast<Eigen::Index>(k)];
        }
    return v;
}

std::size_t term(const SparseModel& m, const std::string& name) {
    const auto it = std::find(m.names.begin(), m.names.end(), name);
    if (it == m.names.end()) throw std::runtime_error("no term " + name);
    return static_cast<std::size_t>(it - m.names.begin());
}

double coef(const SparseModel& m, const std::string& name, std::size_t k) {
    return m.coefficients(static_cast<Eigen::Index>(term(m, name)), static_cast<Eigen::Index>(k));
}

}  // namespace

TEST(Splines, InterpolantReproducesCubics) {
    const auto t = ode::uniform_grid(0.0, 0.8, 0.04);
    Vec y(static_cast<Eigen::Index>(t.size()));
    for (std::size_t j = 0; j < t.size(); ++j) y[static_cast<Eigen::Index>(j)] = t[j] * t[j] * t[j] - 2.0 * t[j] + 1.0;
    const CubicSpline s = fit_spline(t, y, 0.0);
    for (double x : {0.0, 0.013, 0.4, 0.77, 0.8}) {
        EXPECT_NEAR(s(x), x * x * x - 2.0 * x + 1.0, 1e-12);
        EXPECT_NEAR(s.derivative(x), 3.0 * x * x - 2.0, 1e-10);
    }
}

TEST(Splines, DerivativeOfSquare) {
    const auto t = ode::uniform_grid(0.0, 1.0, 0.1);
    Vec y(static_cast<Eigen::Index>(t.size()));
    for (std::size_t j = 0; j < t.size(); ++j) y[static_cast<Eigen::Index>(j)] = t[j] * t[j];
    const CubicSpline s = interpolating_spline(t, y);
    for (std::size_t j = 0; j < t.size(); ++j) EXPECT_NEAR(s.derivative(t[j]), 2.0 * t[j], 1e-12);
}

TEST(Splines, SmoothingLimits) {
    const auto t = ode::uniform_grid(0.0, 1.0, 0.05);
    Vec y(static_cast<Eigen::Index>(t.size()));
    for (std::size_t j = 0; j < t.size(); ++j)
        y[static_cast<Eigen::Index>(j)] = 2.0 * t[j] + 0.3 + 0.05 * (2.0 * counter_uniform(3, j) - 1.0);
    // Very large λ: the least-squares line.
    const CubicSpline flat = smoothing_spline(t, y, 1e12);
    Mat X(static_cast<Eigen::Index>(t.size()), 2);
    for (std::size_t j = 0; j < t.size(); ++j) X.row(static_cast<Eigen::Index>(j)) << 1.0, t[j];
    const Vec beta = X.colPivHouseholderQr().solve(y);
    EXPECT_NEAR(flat.derivative(0.5), beta[1], 1e-6);
    EXPECT_NEAR(flat(0.0), beta[0], 1e-6);
    // Tiny λ: nearly interpolates.
    const CubicSpline tight = smoothing_spline(t, y, 1e-12);
    for (std::size_t j = 0; j < t.size(); ++j) EXPECT_NEAR(tight(t[j]), y[static_cast<Eigen::Index>(j)], 1e-6);
    // GCV lands in between and recovers the slope roughly.
    const CubicSpline gcv = smoothing_spline(t, y, std::nullopt);
    EXPECT_GT(gcv.lambda, 0.0);
    EXPECT_NEAR(gcv.derivative(0.5), 2.0, 0.3);
    EXPECT_THROW(smoothing_spline(t, y, -1.0), InvalidArgument);
}

TEST(Splines, TargetsLayoutAndAccuracy) {
    const auto ds = dataset("exp_sin", 5, 0.8, 0.04, {{-1.0, 1.0}});
    SplineSettings st;
    st.lambda = 0.0;
    const data::Tensor3 v = splines_targets(ds, st);
    EXPECT_EQ(v.dim1(), 20u);
    const data::Tensor3 ref = exact_velocities(ds);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 20; ++j) EXPECT_NEAR(v(i, j, 0), ref(i, j, 0), 2e-3);
    st.jobs = 3;
    EXPECT_EQ(splines_targets(ds, st), v);
}

TEST(Polyfit, MonomialOrdering) {
    const auto m = monomials(2, 2);
    const std::vector<Exponents> want{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    EXPECT_EQ(m, want);
    EXPECT_EQ(monomials(3, 20).size(), 1771u);
}

TEST(Polyfit, RecoversPolynomialField) {
    // ẋ = 1 + 2x − t x², exactly representable at degree 3.
    const auto ds = dataset("exp_sin", 40, 0.8, 0.04, {{-1.0, 1.0}});
    data::Tensor3 v(40, 20, 1);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 20; ++j) {
            const double t = ds.times[j], x = ds.states(i, j, 0);
            v(i, j, 0) = 1.0 + 2.0 * x - t * x * x;
        }
    const auto s = data::build_interp_samples(ds, v, 1);
    PolyfitConfig c;
    c.degree = 3;
    const PolyModel m = polyfit(s, c);
    EXPECT_FALSE(m.rank_deficient);
    EXPECT_LT((m.predict(s.test_inputs()) - s.test_targets()).cwiseAbs().maxCoeff(), 1e-9);
    const Mat orig = m.original_coefficients();
    auto at = [&](Exponents e) {
        const auto it = std::find(m.terms.begin(), m.terms.end(), e);
        return orig(static_cast<Eigen::Index>(it - m.terms.begin()), 0);
    };
    EXPECT_NEAR(at({0, 0}), 1.0, 1e-8);
    EXPECT_NEAR(at({0, 1}), 2.0, 1e-8);
    EXPECT_NEAR(at({1, 2}), -1.0, 1e-8);
    EXPECT_NEAR(at({2, 0}), 0.0, 1e-8);

    const PolyModel back = polymodel_from_json(to_json(m));
    EXPECT_EQ(back.predict(s.inputs), m.predict(s.inputs));
}

TEST(Polyfit, TooFewRowsRejected) {
    const auto ds = dataset("exp_sin", 2, 0.2, 0.04, {{-1.0, 1.0}});
    const auto s = data::build_interp_samples(ds, exact_velocities(ds), 1);
    PolyfitConfig c;
    c.degree = 20;
    EXPECT_THROW(polyfit(s, c), InvalidArgument);
}

TEST(Sindy, StlsqRecoversPendulumCoefficients) {
    const auto ds = dataset("pendulum", 200, 0.8, 0.04, {{0.0, 10.0}, {0.0, 10.0}});
    const auto s = data::build_interp_samples(ds, exact_velocities(ds), 2);
    LibrarySpec spec;
    spec.polynomial_degree = 3;
    spec.functions = {};
    StlsqConfig cfg;
    cfg.threshold = 0.05;
    const SparseModel m = sindy_stlsq(s, spec, cfg);
    EXPECT_NEAR(coef(m, "x1", 0), 0.0, 1e-3);
    EXPECT_NEAR(coef(m, "x2", 0), 1.0, 1e-3);
    EXPECT_NEAR(coef(m, "x1", 1), -0.5, 1e-3);
    EXPECT_NEAR(coef(m, "x2", 1), 0.0, 1e-3);
    for (std::size_t k = 0; k < 2; ++k) {
        std::size_t active = 0;
        for (bool b : m.active[k]) active += b;
        EXPECT_EQ(active, 1u);
    }
    EXPECT_EQ(format_equations(m), "dx1/dt = 1.000*x2\ndx2/dt = -0.500*x1\n");
}

TEST(Sindy, StlsqOnSplineTargetsFromNoiselessData) {
    const auto ds = dataset("pendulum", 100, 0.8, 0.04, {{0.0, 10.0}, {0.0, 10.0}});
    SplineSettings st;
    st.lambda = 0.0;
    const auto s = data::build_interp_samples(ds, splines_targets(ds, st), 2);
    LibrarySpec spec;
    spec.polynomial_degree = 2;
    spec.functions = {"sin", "cos"};
    const SparseModel m = sindy_stlsq(s, spec, StlsqConfig{});
    EXPECT_NEAR(coef(m, "x2", 0), 1.0, 1e-3);
    EXPECT_NEAR(coef(m, "x1", 1), -0.5, 1e-3);
    EXPECT_EQ(coef(m, "x1", 0), 0.0);
    EXPECT_EQ(coef(m, "x2", 1), 0.0);
}

TEST(Sindy, CubicCosWithFrequencyLibrary) {
    const auto ds = dataset("cubic_cos", 100, 1.0, 0.04, {{-0.7, 0.9}});
    const auto s = data::build_interp_samples(ds, exact_velocities(ds), 2);
    LibrarySpec spec;
    spec.polynomial_degree = 5;
    spec.functions = {"sin", "cos"};
    spec.frequencies = {1.0, 2.0, 3.0};
    const SparseModel m = sindy_stlsq(s, spec, StlsqConfig{});
    EXPECT_NEAR(coef(m, "cos(3x)", 0), 1.0, 1e-6);
    EXPECT_NEAR(coef(m, "x^3", 0), 1.0, 1e-6);
    EXPECT_NEAR(coef(m, "x", 0), -1.0, 1e-6);
    std::size_t active = 0;
    for (bool b : m.active[0]) active += b;
    EXPECT_EQ(active, 3u);
}

TEST(Sindy, LibraryConstruction) {
    Mat dom(2, 3);
    dom << 0.0, 0.5, -1.0, 1.0, 2.0, 1.0;
    LibrarySpec spec;
    spec.polynomial_degree = 1;
    spec.functions = {"sin", "log"};
    spec.frequencies = {1.0, 2.5};
    spec.include_time = true;
    const auto lib = build_library(spec, 2, dom);
    // log(x2) is dropped: x2 reaches −1 on the domain.
    const std::vector<std::string> want{"1", "x1", "x2", "sin(x1)", "sin(2.5x1)", "sin(x2)", "sin(2.5x2)",
                                        "log(x1)", "t", "t^2", "t*x1", "t*x2"};
    EXPECT_EQ(lib.names(), want);
    const Mat th = lib.evaluate(dom);
    EXPECT_DOUBLE_EQ(th(1, 4), std::sin(5.0));
    EXPECT_DOUBLE_EQ(th(1, 11), 1.0);

    spec.functions = {"tanh"};
    EXPECT_THROW(build_library(spec, 2, dom), InvalidArgument);
    EXPECT_THROW(select_terms(lib, {"x3"}), InvalidArgument);
}

TEST(Sindy, EmptyLibraryAndEmptyModel) {
    const auto ds = dataset("exp_sin", 5, 0.2, 0.04, {{-1.0, 1.0}});
    const auto s = data::build_interp_samples(ds, exact_velocities(ds), 1);
    EXPECT_THROW(sindy_stlsq(s, FunctionLibrary{}, StlsqConfig{}), InvalidArgument);
    StlsqConfig huge;
    huge.threshold = 1e6;
    LibrarySpec spec;
    spec.polynomial_degree = 1;
    spec.functions = {};
    const SparseModel m = sindy_stlsq(s, spec, huge);
    EXPECT_TRUE(m.empty[0]);
    EXPECT_EQ(format_equations(m), "dx1/dt = 0\n");
    EXPECT_EQ(m.predict(s.inputs).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sindy, JsonRoundTrip) {
    const auto ds = dataset("cubic_cos", 20, 1.0, 0.04, {{0.1, 0.9}});
    const auto s = data::build_interp_samples(ds, exact_velocities(ds), 2);
    LibrarySpec spec;
    spec.polynomial_degree = 3;
    spec.frequencies = {1.0, 3.0};
    const SparseModel m = sindy_stlsq(s, spec, StlsqConfig{});
    const SparseModel back = sparse_model_from_json(to_json(m), 1);
    EXPECT_EQ(back.names, m.names);
    EXPECT_EQ(back.predict(s.inputs), m.predict(s.inputs));
}

TEST(Multistep, LearnsConstantField) {
    const auto one = ode::make_rhs("one", 1, [](double, const Vec&) { return Vec(Vec::Ones(1)); });
    data::ProblemSpec p;
    p.rhs = one;
    p.t_end = 0.4;
    p.dt = 0.04;
    p.n_trajectories = 50;
    p.ic_box = {{-1.0, 1.0}};
    const auto ds = data::generate_dataset(p, ode::IntegratorConfig::reference());
    MultistepConfig c;
    c.net_spec.input_dim = 2;
    c.net_spec.output_dim = 1;
    c.net_spec.hidden_widths = {10, 10};
    c.epochs = 3000;
    c.adam.learning_rate = 1e-2;
    c.seed = 4;
    const auto m = std::make_shared<const MultistepModel>(multistep_train(ds, c));
    EXPECT_EQ(m->dt, 0.04);
    const auto f = as_rhs(m);
    for (double x : {-0.8, 0.0, 1.2}) EXPECT_NEAR(f(0.2, Vec::Constant(1, x))[0], 1.0, 0.02);

    const auto dir = std::filesystem::temp_directory_path() / "odeid_multistep_test";
    save_multistep(dir, *m);
    const auto back = load_multistep(dir);
    std::filesystem::remove_all(dir);
    EXPECT_EQ(back.train_loss, m->train_loss);
    EXPECT_EQ(nn::mlp_forward(back.net, Vec::Constant(2, 0.3)), nn::mlp_forward(m->net, Vec::Constant(2, 0.3)));

    c.net_spec.output_dim = 2;
    EXPECT_THROW(multistep_train(ds, c), DimensionMismatch);
}
