#pragma once

// Lipschitz-regularised interpolation network.
//
// One scalar network per output component maps (t, x) to that component of
// the velocity. Component k minimises
//
//   (1/N) Σ_h (Y_h,k − N_k(X_h))² + α · max_{s ∈ S} ‖∇N_k(s)‖_∞
//
// where S is a set of uniform probe points in the data domain, redrawn each
// epoch from a seeded counter stream (or held fixed). The max is
// differentiated through its maximising probe.

#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/nn/train.hpp"
#include "odeid/ode/rhs.hpp"
#include "odeid/parallel.hpp"

#include <filesystem>
#include <limits>
#include <optional>

namespace odeid::interp {

struct InterpConfig {
    nn::MlpSpec net_spec;  // input_dim = 1 + d, output_dim = 1; seed replaced per component
    double alpha = 0.0;
    std::size_t lip_sample_count = 1000;
    std::optional<nn::Box> lip_domain;  // default: bounding box of the training inputs
    bool resample_each_epoch = true;
    // Stopping rule: fixed `epochs`, or `target_train_mse` (per component, or one
    // value for all) with `epochs` acting as the cap.
    std::size_t epochs = 2000;
    std::vector<double> target_train_mse;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
    bool normalize_inputs = true;
    std::size_t jobs = 1;

    void validate(std::size_t d) const {
        require(alpha >= 0.0, "alpha must be non-negative");
        require(lip_sample_count > 0, "lip_sample_count must be positive");
        require(epochs > 0, "epochs must be positive");
        require_dims(net_spec.input_dim == d + 1 && net_spec.output_dim == 1,
                "interpolation component nets must map 1+d inputs to one output");
        require(target_train_mse.empty() || target_train_mse.size() == 1 || target_train_mse.size() == d,
                "target_train_mse needs one value or one per component");
        if (lip_domain) lip_domain->validate();
    }

    std::optional<double> target_for(std::size_t k) const {
        if (target_train_mse.empty()) return std::nullopt;
        return target_train_mse.size() == 1 ? target_train_mse[0] : target_train_mse[k];
    }
};

struct ComponentFit {
    double alpha = 0.0;
    double train_mse = 0.0;  // plain MSE on the train split
    double test_mse = std::numeric_limits<double>::quiet_NaN();
    double target_energy = 0.0;  // mean squared target over all rows
    double estimated_lipschitz = 0.0;
    std::size_t epochs_run = 0;
    bool reached_target = false;
};

struct InterpolationModel {
    std::vector<nn::MlpModel> component_nets;  // each (1+d) → 1
    std::vector<ComponentFit> fits;
    nn::Box lip_domain;

    std::size_t dim() const { return component_nets.size(); }

    /// Train/test MSE relative to the mean squared target, in percent.
    double relative_train_mse(std::size_t k) const { return 100.0 * fits[k].train_mse / fits[k].target_energy; }
    double relative_test_mse(std::size_t k) const { return 100.0 * fits[k].test_mse / fits[k].target_energy; }
};

inline std::uint64_t component_seed(std::uint64_t seed, std::size_t k) { return hash_seed(seed, 0x1A7, k); }

/// max over n uniform probes in `domain` of the largest |∂N/∂x_k|.
inline double estimate_lipschitz(const nn::MlpModel& net, const nn::Box& domain, std::size_t n, std::uint64_t seed) {
    require(n >= 1, "estimate_lipschitz needs n >= 1");
    domain.validate();
    require_dims(domain.dim() == net.spec.input_dim, "Lipschitz domain dimension mismatch");
    return nn::max_abs_input_gradient(net, nn::sample_box(domain, n, seed)).value;
}

inline Vec eval_rhs(const InterpolationModel& m, double t, const Vec& x) {
    require_dims(static_cast<std::size_t>(x.size()) == m.dim(), "eval_rhs: state dimension mismatch");
    Vec in(x.size() + 1);
    in[0] = t;
    in.tail(x.size()) = x;
    Vec out(x.size());
    for (std::size_t k = 0; k < m.dim(); ++k) out[static_cast<Eigen::Index>(k)] = nn::mlp_forward(m.component_nets[k], in)[0];
    return out;
}

/// Rows (t, x) → rows of the stacked component outputs.
inline Mat eval_rhs_batch(const InterpolationModel& m, const Mat& tx) {
    require_dims(static_cast<std::size_t>(tx.cols()) == m.dim() + 1, "eval_rhs_batch: input dimension mismatch");
    Mat out(tx.rows(), static_cast<Eigen::Index>(m.dim()));
    for (std::size_t k = 0; k < m.dim(); ++k) out.col(static_cast<Eigen::Index>(k)) = nn::mlp_forward_batch(m.component_nets[k], tx).col(0);
    return out;
}

inline ode::RhsFunction as_rhs(std::shared_ptr<const InterpolationModel> m, std::string label = "interpolation") {
    ode::RhsFunction f;
    f.dim = m->dim();
    f.label = std::move(label);
    f.eval = [m](double t, const Vec& x) { return eval_rhs(*m, t, x); };
    f.eval_batch = [m](const Mat& tx) { return eval_rhs_batch(*m, tx); };
    return f;
}

namespace detail {

inline double mean_square(const Eigen::Ref<const Vec>& v) { return v.size() ? v.squaredNorm() / static_cast<double>(v.size()) : 0.0; }

}  // namespace detail

/// Train component k of the interpolation model.
inline std::pair<nn::MlpModel, ComponentFit> train_component(const data::InterpSampleSet& samples,
                                                             const InterpConfig& cfg, std::size_t k,
                                                             const nn::Box& domain) {
    const Mat x = samples.train_inputs();
    const Mat y = samples.train_targets().col(static_cast<Eigen::Index>(k));
    nn::MlpSpec spec = cfg.net_spec;
    spec.seed = component_seed(cfg.seed, k);
    nn::MlpModel net = nn::mlp_init(spec);
    if (cfg.normalize_inputs) net.set_input_box(domain.lo, domain.hi);

    const std::uint64_t probe_seed = hash_seed(cfg.seed, 0x5E7, k);
    const Mat fixed_probes = cfg.alpha > 0.0 && !cfg.resample_each_epoch
                                 ? nn::sample_box(domain, cfg.lip_sample_count, probe_seed)
                                 : Mat();
    auto loss_for = [&](std::size_t epoch) -> nn::LossFn {
        if (cfg.alpha == 0.0) return nn::MseLoss{};
        if (!cfg.resample_each_epoch) return nn::MseLipschitzLoss{cfg.alpha, fixed_probes};
        return nn::MseLipschitzLoss{cfg.alpha, nn::sample_box(domain, cfg.lip_sample_count, hash_seed(probe_seed, epoch))};
    };

    ComponentFit fit;
    fit.alpha = cfg.alpha;
    const auto target = cfg.target_for(k);
    nn::FitResult r;
    try {
        if (target)
            r = nn::fit_full_batch(net, x, y, loss_for, cfg.adam, cfg.epochs,
                                   [&](const nn::EpochStats& s) { return s.data_term <= *target; });
        else
            r = nn::fit_full_batch(net, x, y, loss_for, cfg.adam, cfg.epochs);
    } catch (const TrainingFailure& e) {
        throw TrainingFailure("interpolation component " + std::to_string(k + 1) + ": " + e.what(),
                              static_cast<long>(k));
    }
    fit.epochs_run = r.epochs_run;
    fit.reached_target = target ? r.last.data_term <= *target : true;
    fit.train_mse = r.last.data_term;
    const auto test_rows = samples.rows(data::SplitTag::Test);
    if (!test_rows.empty()) {
        const Mat xt = data::take_rows(samples.inputs, test_rows);
        const Vec yt = data::take_rows(samples.targets, test_rows).col(static_cast<Eigen::Index>(k));
        fit.test_mse = detail::mean_square(nn::mlp_forward_batch(net, xt).col(0) - yt);
    }
    fit.target_energy = detail::mean_square(samples.targets.col(static_cast<Eigen::Index>(k)));
    fit.estimated_lipschitz = estimate_lipschitz(net, domain, cfg.lip_sample_count, hash_seed(cfg.seed, 0xE57, k));
    return {std::move(net), fit};
}

inline nn::Box training_domain(const data::InterpSampleSet& samples, const InterpConfig& cfg) {
    if (cfg.lip_domain) return *cfg.lip_domain;
    nn::Box box = nn::Box::bounding(samples.train_inputs());
    // A flat direction (e.g. a single time sample) still needs a valid box.
    for (Eigen::Index c = 0; c < box.lo.size(); ++c)
        if (!(box.hi[c] > box.lo[c])) {
            box.lo[c] -= 0.5;
            box.hi[c] += 0.5;
        }
    return box;
}

inline InterpolationModel train_interpolation(const data::InterpSampleSet& samples, const InterpConfig& cfg) {
    const std::size_t d = samples.dim();
    cfg.validate(d);
    if (samples.rows(data::SplitTag::Train).empty()) throw InvalidArgument("interpolation: empty train split");
    InterpolationModel m;
    m.lip_domain = training_domain(samples, cfg);
    m.component_nets.resize(d);
    m.fits.resize(d);
    parallel_for(d, cfg.jobs, [&](std::size_t k) {
        auto [net, fit] = train_component(samples, cfg, k, m.lip_domain);
        m.component_nets[k] = std::move(net);
        m.fits[k] = fit;
    });
    return m;
}

// ---------------------------------------------------------------------------
// Regularisation-parameter search under matched training MSE
// ---------------------------------------------------------------------------

struct AlphaCandidate {
    double alpha = 0.0;
    ComponentFit fit;
    bool eligible = false;  // reached the matched training MSE within the epoch cap
};

struct AlphaSearchResult {
    InterpolationModel baseline;  // α = 0, fixed epoch budget
    InterpolationModel selected;  // per component, the eligible α with the lowest test MSE
    std::vector<std::vector<AlphaCandidate>> candidates;  // [component][alpha]
};

/// The α = 0 run trains for `cfg.epochs`; its final training MSE becomes the
/// target for every α > 0 run (capped at `cap_factor`·epochs). Among runs that
/// reach the target, the lowest test MSE wins; α = 0 is kept if none does.
inline AlphaSearchResult select_alpha(const data::InterpSampleSet& samples, const InterpConfig& cfg,
                                      const std::vector<double>& alphas, double cap_factor = 4.0) {
    const std::size_t d = samples.dim();
    AlphaSearchResult res;
    InterpConfig base = cfg;
    base.alpha = 0.0;
    base.target_train_mse.clear();
    res.baseline = train_interpolation(samples, base);
    res.selected = res.baseline;
    res.candidates.assign(d, {});
    for (std::size_t k = 0; k < d; ++k) res.candidates[k].push_back({0.0, res.baseline.fits[k], true});

    for (double a : alphas) {
        if (a <= 0.0) continue;
        InterpConfig c = cfg;
        c.alpha = a;
        c.epochs = static_cast<std::size_t>(cap_factor * static_cast<double>(cfg.epochs));
        c.target_train_mse.clear();
        for (std::size_t k = 0; k < d; ++k) c.target_train_mse.push_back(res.baseline.fits[k].train_mse);
        InterpolationModel m = train_interpolation(samples, c);
        for (std::size_t k = 0; k < d; ++k) {
            const bool ok = m.fits[k].reached_target;
            res.candidates[k].push_back({a, m.fits[k], ok});
            if (ok && m.fits[k].test_mse < res.selected.fits[k].test_mse) {
                res.selected.component_nets[k] = m.component_nets[k];
                res.selected.fits[k] = m.fits[k];
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Serialisation: <dir>/manifest.json + <dir>/component_K.json
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ComponentFit& f) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    return {{"alpha", f.alpha},
            {"train_mse", num(f.train_mse)},
            {"test_mse", num(f.test_mse)},
            {"target_energy", num(f.target_energy)},
            {"estimated_lipschitz", num(f.estimated_lipschitz)},
            {"epochs_run", f.epochs_run},
            {"reached_target", f.reached_target}};
}

inline ComponentFit component_fit_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    ComponentFit f;
    f.alpha = j.at("alpha").get<double>();
    f.train_mse = num(j.at("train_mse"));
    f.test_mse = num(j.at("test_mse"));
    f.target_energy = num(j.at("target_energy"));
    f.estimated_lipschitz = num(j.at("estimated_lipschitz"));
    f.epochs_run = j.at("epochs_run").get<std::size_t>();
    f.reached_target = j.at("reached_target").get<bool>();
    return f;
}

inline void save_interpolation(const std::filesystem::path& dir, const InterpolationModel& m) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["dim"] = m.dim();
    manifest["lip_domain"] = {{"lo", nn::detail::vec_to_json(m.lip_domain.lo)}, {"hi", nn::detail::vec_to_json(m.lip_domain.hi)}};
    auto comps = nlohmann::json::array();
    for (std::size_t k = 0; k < m.dim(); ++k) {
        const std::string file = "component_" + std::to_string(k + 1) + ".json";
        nn::save_model(dir / file, m.component_nets[k]);
        auto c = to_json(m.fits[k]);
        c["file"] = file;
        comps.push_back(std::move(c));
    }
    manifest["components"] = comps;
    nn::write_json_file(dir / "manifest.json", manifest);
}

inline InterpolationModel load_interpolation(const std::filesystem::path& dir) {
    const auto manifest = nn::read_json_file(dir / "manifest.json");
    InterpolationModel m;
    m.lip_domain.lo = nn::detail::vec_from_json(manifest.at("lip_domain").at("lo"));
    m.lip_domain.hi = nn::detail::vec_from_json(manifest.at("lip_domain").at("hi"));
    for (const auto& c : manifest.at("components")) {
        m.component_nets.push_back(nn::load_model(dir / c.at("file").get<std::string>()));
        m.fits.push_back(component_fit_from_json(c));
    }
    if (m.dim() != manifest.at("dim").get<std::size_t>()) throw InvalidArgument("interpolation manifest dim mismatch");
    return m;
}

}  // namespace odeid::interp
