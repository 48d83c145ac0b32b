#pragma once

// Single-network Euler baseline: one network N(t, x) trained so that
// Δt·N(t_j, x_i(t_j)) + x_i(t_j) ≈ x_i(t_{j+1}) over all (i, j) pairs.

#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/nn/train.hpp"
#include "odeid/ode/rhs.hpp"

#include <filesystem>
#include <memory>

namespace odeid::baselines {

struct MultistepConfig {
    nn::MlpSpec net_spec;  // input_dim = 1 + d, output_dim = d
    std::size_t epochs = 2000;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    bool normalize_inputs = true;
};

struct MultistepModel {
    nn::MlpModel net;
    double dt = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;

    std::size_t dim() const { return net.spec.output_dim; }
};

/// Pairs (t_j, x_i(t_j)) → x_i(t_{j+1}) with the interpolation-style row
/// order and a seeded 80/20 split.
struct MultistepSamples {
    Mat inputs;   // N × (1+d)
    Mat targets;  // N × d, the next state
    data::Split split;
};

inline MultistepSamples build_multistep_samples(const data::TrajectoryDataset& ds, std::uint64_t split_seed) {
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    require(M >= 2, "multistep: need at least two time samples");
    MultistepSamples s;
    const auto N = static_cast<Eigen::Index>(K * (M - 1));
    s.inputs.resize(N, static_cast<Eigen::Index>(d + 1));
    s.targets.resize(N, static_cast<Eigen::Index>(d));
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j + 1 < M; ++j, ++r) {
            s.inputs(r, 0) = ds.times[j];
            for (std::size_t k = 0; k < d; ++k) {
                s.inputs(r, static_cast<Eigen::Index>(k + 1)) = ds.states(i, j, k);
                s.targets(r, static_cast<Eigen::Index>(k)) = ds.states(i, j + 1, k);
            }
        }
    s.split = data::split_rows(static_cast<std::size_t>(N), hash_seed(split_seed, 0x3A5));
    return s;
}

inline MultistepModel multistep_train(const data::TrajectoryDataset& ds, const MultistepConfig& cfg) {
    const std::size_t d = ds.dim();
    require_dims(cfg.net_spec.input_dim == d + 1 && cfg.net_spec.output_dim == d,
                 "multistep network must map 1+d inputs to d outputs");
    require(cfg.epochs > 0, "multistep epochs must be positive");
    const MultistepSamples s = build_multistep_samples(ds, cfg.split_seed);
    const Mat x = data::take_rows(s.inputs, s.split.train), y = data::take_rows(s.targets, s.split.train);
    MultistepModel m;
    m.dt = ds.dt();
    nn::MlpSpec spec = cfg.net_spec;
    spec.seed = hash_seed(cfg.seed, 0x3A5);
    m.net = nn::mlp_init(spec);
    if (cfg.normalize_inputs) {
        const nn::Box box = nn::Box::bounding(x);
        Vec lo = box.lo, hi = box.hi;
        for (Eigen::Index c = 0; c < lo.size(); ++c)
            if (!(hi[c] > lo[c])) lo[c] -= 0.5, hi[c] += 0.5;
        m.net.set_input_box(lo, hi);
    }
    const nn::LossFn loss = nn::EulerResidualLoss{m.dt, 1};
    try {
        m.train_loss = nn::fit_full_batch(m.net, x, y, [&](std::size_t) { return loss; }, cfg.adam, cfg.epochs).last.loss;
    } catch (const TrainingFailure& e) {
        throw TrainingFailure(std::string("multistep network: ") + e.what());
    }
    m.test_loss = s.split.test.empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : nn::mlp_loss(m.net, data::take_rows(s.inputs, s.split.test),
                                     data::take_rows(s.targets, s.split.test), loss);
    return m;
}

inline ode::RhsFunction as_rhs(std::shared_ptr<const MultistepModel> m, std::string label = "multistep") {
    ode::RhsFunction f;
    f.dim = m->dim();
    f.label = std::move(label);
    f.eval = [m](double t, const Vec& x) {
        Vec in(x.size() + 1);
        in[0] = t;
        in.tail(x.size()) = x;
        return nn::mlp_forward(m->net, in);
    };
    f.eval_batch = [m](const Mat& tx) { return nn::mlp_forward_batch(m->net, tx); };
    return f;
}

inline void save_multistep(const std::filesystem::path& dir, const MultistepModel& m) {
    std::filesystem::create_directories(dir);
    nn::save_model(dir / "network.json", m.net);
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    nn::write_json_file(dir / "manifest.json", {{"format_version", 1},
                                                {"dt", m.dt},
                                                {"train_loss", num(m.train_loss)},
                                                {"test_loss", num(m.test_loss)},
                                                {"network", "network.json"}});
}

inline MultistepModel load_multistep(const std::filesystem::path& dir) {
    const auto j = nn::read_json_file(dir / "manifest.json");
    MultistepModel m;
    m.dt = j.at("dt").get<double>();
    auto num = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    m.train_loss = num(j.at("train_loss"));
    m.test_loss = num(j.at("test_loss"));
    m.net = nn::load_model(dir / j.at("network").get<std::string>());
    return m;
}

}  // namespace odeid::baselines
