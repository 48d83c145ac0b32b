#pragma once

// Target data generator: one network N_j per interior time step, each trained
// so that an Euler step Δt·N_j(x_i(t_j)) + x_i(t_j) lands on x_i(t_{j+1}).
// The trained ensemble yields velocity estimates for the interpolation block.

#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/nn/train.hpp"
#include "odeid/parallel.hpp"

#include <filesystem>

namespace odeid::generator {

struct GeneratorConfig {
    nn::MlpSpec net_spec;  // input_dim = output_dim = d; seed is replaced per network
    std::size_t epochs = 2000;
    nn::AdamConfig adam;
    double dt = 0.0;  // 0 means "take it from the dataset"
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    bool normalize_inputs = true;
    bool keep_best = true;  // return the lowest-loss iterate instead of the last one
    std::size_t jobs = 1;
};

struct GeneratorEnsemble {
    std::vector<nn::MlpModel> networks;  // networks[j-1] is N_j
    double dt = 0.0;
    std::vector<double> training_losses;  // final L_j on the train split
    std::vector<double> test_losses;      // L_j on the held-out split (NaN if empty)

    std::size_t size() const { return networks.size(); }
};

/// Seed of network j, independent of training order.
inline std::uint64_t network_seed(std::uint64_t seed, std::size_t j) { return hash_seed(seed, 0x4E6A, j); }

inline nn::MlpModel initial_network(const GeneratorConfig& cfg, std::size_t d, std::size_t j) {
    nn::MlpSpec spec = cfg.net_spec;
    require_dims(spec.input_dim == d && spec.output_dim == d, "generator network dims must equal the state dimension");
    spec.seed = network_seed(cfg.seed, j);
    return nn::mlp_init(spec);
}

struct NetworkResult {
    nn::MlpModel model;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

/// Train N_j on the train split of its sample set.
inline NetworkResult train_network(const data::GeneratorSampleSet& samples, const GeneratorConfig& cfg) {
    const std::size_t j = samples.time_index;
    const auto d = static_cast<std::size_t>(samples.inputs.cols());
    const double dt = cfg.dt > 0.0 ? cfg.dt : samples.dt;
    NetworkResult r;
    r.model = initial_network(cfg, d, j);
    const Mat x = samples.train_inputs();
    const Mat y = samples.train_targets();
    if (cfg.normalize_inputs) {
        const nn::Box box = nn::Box::bounding(x);
        r.model.set_input_box(box.lo, box.hi);
    }
    const nn::LossFn loss = nn::EulerResidualLoss{dt, 0};
    try {
        // Full-batch Adam is not monotone; keep the lowest-loss iterate.
        nn::MlpModel best = r.model;
        double best_loss = std::numeric_limits<double>::infinity();
        auto track = [&](const nn::EpochStats& s) {
            if (cfg.keep_best && s.loss < best_loss) {
                best_loss = s.loss;
                best.params = r.model.params;
            }
            return false;
        };
        const auto fit = nn::fit_full_batch(r.model, x, y, [&](std::size_t) { return loss; }, cfg.adam, cfg.epochs, track);
        r.train_loss = fit.last.loss;
        if (cfg.keep_best && best_loss < fit.last.loss) {
            r.model = std::move(best);
            r.train_loss = best_loss;
        }
    } catch (const TrainingFailure& e) {
        throw TrainingFailure("generator network " + std::to_string(j) + ": " + e.what(), static_cast<long>(j));
    }
    if (!samples.split.test.empty())
        r.test_loss = nn::mlp_loss(r.model, samples.test_inputs(), samples.test_targets(), loss);
    else
        r.test_loss = std::numeric_limits<double>::quiet_NaN();
    return r;
}

inline GeneratorEnsemble train_generator(const data::TrajectoryDataset& ds, const GeneratorConfig& cfg) {
    const std::size_t M = ds.num_times();
    require(M >= 2, "generator needs at least two time samples");
    require(cfg.epochs > 0, "generator epochs must be positive");
    const double dt = cfg.dt > 0.0 ? cfg.dt : ds.dt();
    GeneratorEnsemble ens;
    ens.dt = dt;
    ens.networks.resize(M - 1);
    ens.training_losses.resize(M - 1);
    ens.test_losses.resize(M - 1);
    GeneratorConfig c = cfg;
    c.dt = dt;
    parallel_for(M - 1, cfg.jobs, [&](std::size_t idx) {
        const std::size_t j = idx + 1;
        const auto samples = data::build_generator_samples(ds, j, cfg.split_seed);
        NetworkResult r = train_network(samples, c);
        ens.networks[idx] = std::move(r.model);
        ens.training_losses[idx] = r.train_loss;
        ens.test_losses[idx] = r.test_loss;
    });
    return ens;
}

/// Entry (i, j, :) = N_{j+1}(x_i(t_j)) in 0-based time indexing.
inline data::Tensor3 predict_velocities(const GeneratorEnsemble& ens, const data::TrajectoryDataset& ds) {
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    if (ens.size() + 1 != M) throw InvalidArgument("ensemble size does not match the dataset time grid");
    if (std::abs(ens.dt - ds.dt()) > 1e-9) throw InvalidArgument("ensemble dt does not match the dataset");
    data::Tensor3 v(K, M - 1, d);
    Mat x(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j + 1 < M; ++j) {
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t k = 0; k < d; ++k)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ds.states(i, j, k);
        const Mat out = nn::mlp_forward_batch(ens.networks[j], x);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t k = 0; k < d; ++k)
                v(i, j, k) = out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    if (!v.all_finite()) throw TrainingFailure("generator produced non-finite velocities");
    return v;
}

// ---------------------------------------------------------------------------
// Serialisation: <dir>/manifest.json + <dir>/net_XXX.json
// ---------------------------------------------------------------------------

inline std::string network_file_name(std::size_t j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "net_%03zu.json", j);
    return buf;
}

inline void save_ensemble(const std::filesystem::path& dir, const GeneratorEnsemble& ens) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["num_times"] = ens.size() + 1;
    manifest["dt"] = ens.dt;
    manifest["spec"] = ens.networks.empty() ? nlohmann::json() : nn::to_json(ens.networks.front().spec);
    manifest["training_losses"] = ens.training_losses;
    auto test = nlohmann::json::array();
    for (double v : ens.test_losses) test.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
    manifest["test_losses"] = test;
    auto files = nlohmann::json::array();
    for (std::size_t j = 1; j <= ens.size(); ++j) {
        files.push_back(network_file_name(j));
        nn::save_model(dir / network_file_name(j), ens.networks[j - 1]);
    }
    manifest["networks"] = files;
    nn::write_json_file(dir / "manifest.json", manifest);
}

inline GeneratorEnsemble load_ensemble(const std::filesystem::path& dir) {
    const auto manifest = nn::read_json_file(dir / "manifest.json");
    GeneratorEnsemble ens;
    ens.dt = manifest.at("dt").get<double>();
    ens.training_losses = manifest.at("training_losses").get<std::vector<double>>();
    for (const auto& v : manifest.at("test_losses"))
        ens.test_losses.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    for (const auto& f : manifest.at("networks")) ens.networks.push_back(nn::load_model(dir / f.get<std::string>()));
    if (ens.networks.size() + 1 != manifest.at("num_times").get<std::size_t>())
        throw InvalidArgument("ensemble manifest network count mismatch");
    return ens;
}

}  // namespace odeid::generator
