#pragma once

// Experiment harness: dataset generation, per-method training and
// evaluation, comparison tables and re-integration of learned models.
//
// Output layout under the configured (or --out) directory:
//
//   data/noise_<L>.csv|json           datasets (noisy + clean states)
//   models/<method>/noise_<L>/        model artifacts + details.json
//   reports/<method>_noise_<L>.json   EvaluationReport (+ .txt)
//   grids/<method>_noise_<L>.csv      optional lattice dump
//   compare/{recovery,solution}.csv, compare/table.txt

#include "odeid/baselines/multistep.hpp"
#include "odeid/baselines/polyfit.hpp"
#include "odeid/baselines/sindy.hpp"
#include "odeid/baselines/splines.hpp"
#include "odeid/data/io.hpp"
#include "odeid/experiment/config.hpp"
#include "odeid/generator.hpp"
#include "odeid/interpolation.hpp"
#include "odeid/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace odeid::experiment {

/// A dataset, model or report that a command needs does not exist.
class MissingArtifact : public Error {
public:
    using Error::Error;
};

inline std::string noise_tag(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", level);
    return buf;
}

struct Layout {
    std::filesystem::path root;

    std::filesystem::path dataset_stem(double level) const { return root / "data" / ("noise_" + noise_tag(level)); }
    std::filesystem::path model_dir(const std::string& method, double level) const {
        return root / "models" / method / ("noise_" + noise_tag(level));
    }
    std::filesystem::path report_json(const std::string& method, double level) const {
        return root / "reports" / (method + "_noise_" + noise_tag(level) + ".json");
    }
    std::filesystem::path report_txt(const std::string& method, double level) const {
        return root / "reports" / (method + "_noise_" + noise_tag(level) + ".txt");
    }
    std::filesystem::path grid_csv(const std::string& method, double level) const {
        return root / "grids" / (method + "_noise_" + noise_tag(level) + ".csv");
    }
    std::filesystem::path compare_dir() const { return root / "compare"; }
};

struct RunOptions {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
};

/// Apply command-line overrides. A new seed re-derives every seed the
/// config did not pin explicitly, so it is applied before parsing.
inline Layout layout_for(const ExperimentConfig& cfg, const RunOptions& opt) {
    return Layout{opt.out ? *opt.out : cfg.output_dir};
}

inline ExperimentConfig load_with_overrides(const std::filesystem::path& path, const RunOptions& opt) {
    if (!opt.seed) return load_config(path);
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception&) {
        return load_config(path);  // reports the error with its position
    }
    if (root.IsMap()) root["seed"] = *opt.seed;
    return parse_config(root, path.string());
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

inline std::vector<std::filesystem::path> generate_datasets(const ExperimentConfig& cfg, const Layout& layout) {
    const data::ProblemSpec problem = cfg.problem.to_problem();
    const data::TrajectoryDataset clean = data::generate_dataset(problem, cfg.integrator);
    const std::string scale = cfg.noise.scale == data::NoiseScale::StdDev ? "std" : "variance";
    std::vector<std::filesystem::path> written;
    for (double level : cfg.noise.levels) {
        const data::TrajectoryDataset ds = data::add_noise(clean, level, cfg.noise.seed, cfg.noise.scale);
        const auto stem = layout.dataset_stem(level);
        data::save_dataset(stem, ds, data::make_sidecar(ds, &problem, scale));
        written.push_back(data::dataset_paths(stem).csv);
    }
    return written;
}

inline data::TrajectoryDataset load_dataset_for(const Layout& layout, double level) {
    const auto stem = layout.dataset_stem(level);
    const auto files = data::dataset_paths(stem);
    if (!std::filesystem::exists(files.csv) || !std::filesystem::exists(files.sidecar))
        throw MissingArtifact("dataset " + files.csv.string() + " not found (run 'generate' first)");
    return data::load_dataset(stem).first;
}

/// The dataset as a learning method may see it: the noisy states only.
inline data::TrajectoryDataset training_view(const data::TrajectoryDataset& ds) {
    data::TrajectoryDataset v = ds;
    v.clean_states.reset();
    return v;
}

// ---------------------------------------------------------------------------
// Method fitting
// ---------------------------------------------------------------------------

/// A trained method reduced to what evaluation needs.
struct FittedMethod {
    ode::RhsFunction rhs;
    metrics::SplitErrors split;
    std::vector<double> lipschitz;  // per component; empty when not applicable
    nlohmann::json details = nlohmann::json::object();
};

namespace detail {

inline nn::MlpSpec spec_for(const NetSettings& n, std::size_t in, std::size_t out) {
    nn::MlpSpec s;
    s.input_dim = in;
    s.output_dim = out;
    s.hidden_widths = n.hidden;
    s.lrelu_slope = n.lrelu_slope;
    return s;
}

inline generator::GeneratorConfig generator_config(const ExperimentConfig& cfg, const NetSettings& n, std::size_t d,
                                                   std::size_t jobs) {
    generator::GeneratorConfig g;
    g.net_spec = spec_for(n, d, d);
    g.epochs = n.epochs;
    g.adam = n.adam();
    g.seed = cfg.method_seed("generator");
    g.split_seed = cfg.split_seed;
    g.normalize_inputs = n.normalize_inputs;
    g.jobs = jobs;
    return g;
}

inline interp::InterpConfig interp_config(const ExperimentConfig& cfg, const InterpSettings& s, std::size_t d,
                                          double level, const std::string& method, std::size_t jobs) {
    interp::InterpConfig c;
    c.net_spec = spec_for(s.net, d + 1, 1);
    c.alpha = s.alpha_for(level);
    c.lip_sample_count = s.lip_samples;
    c.resample_each_epoch = s.resample_probes;
    c.epochs = s.net.epochs;
    c.adam = s.net.adam();
    c.seed = cfg.method_seed(method + "/interpolation");
    c.normalize_inputs = s.net.normalize_inputs;
    c.jobs = jobs;
    return c;
}

inline NetSettings generator_settings(const ExperimentConfig& cfg) {
    for (const auto& m : cfg.methods)
        if (const auto* e = std::get_if<EnsembleSettings>(&m.params)) return e->generator;
    NetSettings n;
    n.hidden = nn::uniform_widths(3, 10);
    return n;
}

/// Train the interpolation block (with the α search when configured).
inline interp::InterpolationModel fit_interpolation(const ExperimentConfig& cfg, const InterpSettings& s,
                                                    const data::InterpSampleSet& samples, double level,
                                                    const std::string& method, std::size_t jobs,
                                                    nlohmann::json& details) {
    const interp::InterpConfig ic = interp_config(cfg, s, samples.dim(), level, method, jobs);
    if (s.alpha_grid.empty()) {
        details["alpha_selection"] = "fixed";
        return interp::train_interpolation(samples, ic);
    }
    interp::AlphaSearchResult r = interp::select_alpha(samples, ic, s.alpha_grid, s.cap_factor);
    details["alpha_selection"] = "matched_train_mse";
    auto cands = nlohmann::json::array();
    for (std::size_t k = 0; k < r.candidates.size(); ++k)
        for (const auto& c : r.candidates[k]) {
            auto j = interp::to_json(c.fit);
            j["component"] = k + 1;
            j["eligible"] = c.eligible;
            j["relative_train_mse"] = 100.0 * c.fit.train_mse / c.fit.target_energy;
            j["relative_test_mse"] = 100.0 * c.fit.test_mse / c.fit.target_energy;
            cands.push_back(std::move(j));
        }
    details["alpha_candidates"] = cands;
    return std::move(r.selected);
}

inline nlohmann::json interp_details(const interp::InterpolationModel& m) {
    auto comps = nlohmann::json::array();
    for (const auto& f : m.fits) comps.push_back(interp::to_json(f));
    return comps;
}

inline std::vector<double> lipschitz_of(const interp::InterpolationModel& m) {
    std::vector<double> l;
    for (const auto& f : m.fits) l.push_back(f.estimated_lipschitz);
    return l;
}

/// Velocity samples for the regression baselines.
inline data::Tensor3 regression_targets(const ExperimentConfig& cfg, TargetSource src, std::optional<double> lambda,
                                        const data::TrajectoryDataset& view, const std::filesystem::path& dir,
                                        bool train, std::size_t jobs) {
    switch (src) {
        case TargetSource::Splines: return baselines::splines_targets(view, {lambda, jobs});
        case TargetSource::FiniteDifference: {
            const std::size_t K = view.num_trajectories(), M = view.num_times(), d = view.dim();
            data::Tensor3 v(K, M - 1, d);
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j + 1 < M; ++j)
                    for (std::size_t k = 0; k < d; ++k)
                        v(i, j, k) = (view.states(i, j + 1, k) - view.states(i, j, k)) / (view.times[j + 1] - view.times[j]);
            return v;
        }
        case TargetSource::Generator: {
            generator::GeneratorEnsemble ens;
            if (train) {
                ens = generator::train_generator(view, generator_config(cfg, generator_settings(cfg), view.dim(), jobs));
                generator::save_ensemble(dir / "generator", ens);
            } else {
                ens = generator::load_ensemble(dir / "generator");
            }
            return generator::predict_velocities(ens, view);
        }
    }
    throw InvalidArgument("unknown target source");
}

/// Multistep split errors expressed on velocities: N(t_j, x_j) against the
/// difference quotient (x_{j+1} − x_j)/Δt.
inline metrics::SplitErrors multistep_split_errors(const baselines::MultistepModel& m,
                                                   const baselines::MultistepSamples& s) {
    const Mat x = s.inputs;
    const auto d = static_cast<Eigen::Index>(m.dim());
    const Mat q = (s.targets - x.rightCols(d)) / m.dt;
    const Mat pred = nn::mlp_forward_batch(m.net, x);
    return metrics::split_errors(data::take_rows(pred, s.split.train), data::take_rows(q, s.split.train),
                                 data::take_rows(pred, s.split.test), data::take_rows(q, s.split.test));
}

inline void write_details(const std::filesystem::path& dir, const nlohmann::json& details) {
    nn::write_json_file(dir / "details.json", details);
}

inline nlohmann::json read_details(const std::filesystem::path& dir) {
    const auto p = dir / "details.json";
    return std::filesystem::exists(p) ? nn::read_json_file(p) : nlohmann::json::object();
}

}  // namespace detail

/// Train (`train = true`, writing artifacts to `dir`) or reload (`train =
/// false`) one method on the noisy view of a dataset.
inline FittedMethod fit_or_load(const ExperimentConfig& cfg, const MethodSettings& method, double level,
                                const data::TrajectoryDataset& view, const std::filesystem::path& dir, bool train,
                                std::size_t jobs) {
    require(!view.clean_states, "methods must be trained on the noisy view of a dataset");
    if (!train && !std::filesystem::exists(dir))
        throw MissingArtifact("model directory " + dir.string() + " not found (run 'train' first)");
    const std::size_t d = view.dim();
    FittedMethod out;
    if (train) std::filesystem::create_directories(dir);
    nlohmann::json details = train ? nlohmann::json::object() : detail::read_details(dir);

    if (const auto* e = std::get_if<EnsembleSettings>(&method.params)) {
        generator::GeneratorEnsemble ens;
        if (train) {
            ens = generator::train_generator(view, detail::generator_config(cfg, e->generator, d, jobs));
            generator::save_ensemble(dir / "generator", ens);
        } else {
            ens = generator::load_ensemble(dir / "generator");
        }
        const auto samples = data::build_interp_samples(view, generator::predict_velocities(ens, view), cfg.split_seed);
        auto m = std::make_shared<interp::InterpolationModel>(
            train ? detail::fit_interpolation(cfg, e->interpolation, samples, level, method.name, jobs, details)
                  : interp::load_interpolation(dir / "interpolation"));
        if (train) {
            interp::save_interpolation(dir / "interpolation", *m);
            double tr = 0.0, te = 0.0;
            std::size_t n_te = 0;
            for (std::size_t j = 0; j < ens.size(); ++j) {
                tr += ens.training_losses[j];
                if (std::isfinite(ens.test_losses[j])) te += ens.test_losses[j], ++n_te;
            }
            details["generator"] = {{"networks", ens.size()},
                                    {"mean_train_loss", tr / static_cast<double>(ens.size())},
                                    {"mean_test_loss", n_te ? te / static_cast<double>(n_te) : 0.0}};
            details["interpolation"] = detail::interp_details(*m);
        }
        out.rhs = interp::as_rhs(m, method.name);
        out.split = metrics::split_errors(out.rhs, samples);
        out.lipschitz = detail::lipschitz_of(*m);
    } else if (const auto* sp = std::get_if<SplinesSettings>(&method.params)) {
        const auto samples =
            data::build_interp_samples(view, baselines::splines_targets(view, {sp->lambda, jobs}), cfg.split_seed);
        auto m = std::make_shared<interp::InterpolationModel>(
            train ? detail::fit_interpolation(cfg, sp->interpolation, samples, level, method.name, jobs, details)
                  : interp::load_interpolation(dir / "interpolation"));
        if (train) {
            interp::save_interpolation(dir / "interpolation", *m);
            details["lambda"] = sp->lambda ? nlohmann::json(*sp->lambda) : nlohmann::json("gcv");
            details["interpolation"] = detail::interp_details(*m);
        }
        out.rhs = interp::as_rhs(m, method.name);
        out.split = metrics::split_errors(out.rhs, samples);
        out.lipschitz = detail::lipschitz_of(*m);
    } else if (const auto* ms = std::get_if<MultistepSettings>(&method.params)) {
        baselines::MultistepConfig mc;
        mc.net_spec = detail::spec_for(ms->net, d + 1, d);
        mc.epochs = ms->net.epochs;
        mc.adam = ms->net.adam();
        mc.seed = cfg.method_seed(method.name);
        mc.split_seed = cfg.split_seed;
        mc.normalize_inputs = ms->net.normalize_inputs;
        auto m = std::make_shared<baselines::MultistepModel>(train ? baselines::multistep_train(view, mc)
                                                                   : baselines::load_multistep(dir));
        if (train) {
            baselines::save_multistep(dir, *m);
            details["train_residual"] = m->train_loss;
            details["test_residual"] = std::isfinite(m->test_loss) ? nlohmann::json(m->test_loss) : nlohmann::json();
        }
        out.rhs = baselines::as_rhs(m, method.name);
        out.split = detail::multistep_split_errors(*m, baselines::build_multistep_samples(view, cfg.split_seed));
    } else if (const auto* pf = std::get_if<PolyfitSettings>(&method.params)) {
        const auto samples = data::build_interp_samples(
            view, detail::regression_targets(cfg, pf->targets, pf->spline_lambda, view, dir, train, jobs), cfg.split_seed);
        std::shared_ptr<baselines::PolyModel> m;
        if (train) {
            m = std::make_shared<baselines::PolyModel>(baselines::polyfit(samples, {pf->degree, pf->use_time}));
            nn::write_json_file(dir / "polynomial.json", baselines::to_json(*m));
            details["targets"] = to_string(pf->targets);
            details["terms"] = m->terms.size();
            details["rank"] = m->rank;
            details["rank_deficient"] = m->rank_deficient;
        } else {
            m = std::make_shared<baselines::PolyModel>(baselines::polymodel_from_json(nn::read_json_file(dir / "polynomial.json")));
        }
        out.rhs = baselines::as_rhs(std::shared_ptr<const baselines::PolyModel>(m), method.name);
        out.split = metrics::split_errors(out.rhs, samples);
    } else if (const auto* sd = std::get_if<SindySettings>(&method.params)) {
        const auto samples = data::build_interp_samples(
            view, detail::regression_targets(cfg, sd->targets, sd->spline_lambda, view, dir, train, jobs), cfg.split_seed);
        std::shared_ptr<baselines::SparseModel> m;
        if (train) {
            m = std::make_shared<baselines::SparseModel>(baselines::sindy_stlsq(samples, sd->library, sd->stlsq));
            nn::write_json_file(dir / "sparse_model.json", baselines::to_json(*m));
            details["targets"] = to_string(sd->targets);
            details["equations"] = baselines::format_equations(*m);
            details["library_size"] = m->names.size();
        } else {
            m = std::make_shared<baselines::SparseModel>(
                baselines::sparse_model_from_json(nn::read_json_file(dir / "sparse_model.json"), d));
        }
        out.rhs = baselines::as_rhs(std::shared_ptr<const baselines::SparseModel>(m), method.name);
        out.split = metrics::split_errors(out.rhs, samples);
    }
    if (train) detail::write_details(dir, details);
    out.details = details;
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

inline metrics::EvaluationReport evaluate_fitted(const ExperimentConfig& cfg, const std::string& method, double level,
                                                 const data::TrajectoryDataset& ds, const FittedMethod& fit,
                                                 const Layout& layout, std::size_t jobs) {
    const ode::RhsFunction& truth = ode::catalog_lookup(cfg.problem.rhs);
    metrics::EvaluationReport r;
    r.method = method;
    r.problem = cfg.problem.rhs;
    r.noise_level = level;
    r.set_split(fit.split);
    if (!fit.lipschitz.empty()) {
        r.lipschitz_per_component = fit.lipschitz;
        r.estimated_lipschitz = *std::max_element(fit.lipschitz.begin(), fit.lipschitz.end());
    }
    const metrics::EvaluationGrid grid = metrics::default_grid(ds, cfg.evaluation.grid);
    r.set_recovery(metrics::recovery_error(fit.rhs, truth, grid));
    Mat ics = metrics::initial_states(ds);
    if (cfg.evaluation.solution_ics && *cfg.evaluation.solution_ics < static_cast<std::size_t>(ics.rows()))
        ics = ics.topRows(static_cast<Eigen::Index>(*cfg.evaluation.solution_ics)).eval();
    r.details = fit.details;
    try {
        r.set_solution(metrics::solution_error(fit.rhs, truth, ics, ds.times, ode::IntegratorConfig::rk4(ds.dt()), jobs));
    } catch (const IntegrationFailure& e) {
        const double inf = std::numeric_limits<double>::infinity();
        r.set_solution({inf, std::vector<double>(ds.dim(), inf)});
        r.details["solution_failure"] = e.what();
    }
    r.details["grid"] = {{"points", grid.size()},
                         {"time_axis", metrics::to_string(cfg.evaluation.grid.time_axis)},
                         {"x_range", metrics::to_string(cfg.evaluation.grid.x_range)}};
    r.details["solution_ics"] = ics.rows();
    if (cfg.evaluation.dump_grid) metrics::write_grid_csv(layout.grid_csv(method, level), fit.rhs, truth, grid);
    return r;
}

inline void write_report(const Layout& layout, const metrics::EvaluationReport& r) {
    metrics::save_report(layout.report_json(r.method, r.noise_level), r);
    std::ofstream f(layout.report_txt(r.method, r.noise_level));
    if (!f) throw Error("cannot write " + layout.report_txt(r.method, r.noise_level).string());
    f << metrics::format_report(r);
}

inline void check_noise_level(const ExperimentConfig& cfg, double level) {
    if (!cfg.has_noise_level(level))
        throw ConfigError(cfg.source.string() + ": noise level " + noise_tag(level) + " is not listed in noise.levels");
}

/// `train`: fit, save the model, evaluate and write the report.
inline metrics::EvaluationReport train_method(const ExperimentConfig& cfg, const std::string& method, double level,
                                              const Layout& layout, std::size_t jobs = 1) {
    check_noise_level(cfg, level);
    const MethodSettings& m = cfg.method(method);
    const data::TrajectoryDataset ds = load_dataset_for(layout, level);
    const FittedMethod fit = fit_or_load(cfg, m, level, training_view(ds), layout.model_dir(method, level), true, jobs);
    metrics::EvaluationReport r = evaluate_fitted(cfg, method, level, ds, fit, layout, jobs);
    write_report(layout, r);
    return r;
}

/// `evaluate`: reload a trained model and recompute its report.
inline metrics::EvaluationReport evaluate_method(const ExperimentConfig& cfg, const std::string& method, double level,
                                                 const Layout& layout, std::size_t jobs = 1) {
    check_noise_level(cfg, level);
    const MethodSettings& m = cfg.method(method);
    const data::TrajectoryDataset ds = load_dataset_for(layout, level);
    const FittedMethod fit = fit_or_load(cfg, m, level, training_view(ds), layout.model_dir(method, level), false, jobs);
    metrics::EvaluationReport r = evaluate_fitted(cfg, method, level, ds, fit, layout, jobs);
    write_report(layout, r);
    return r;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct ComparisonTable {
    std::vector<std::string> methods;
    std::vector<double> levels;
    Mat recovery;  // methods × levels, percent
    Mat solution;
};

inline ComparisonTable collect_reports(const ExperimentConfig& cfg, const Layout& layout) {
    ComparisonTable t;
    for (const auto& m : cfg.methods) t.methods.push_back(m.name);
    t.levels = cfg.noise.levels;
    const auto R = static_cast<Eigen::Index>(t.methods.size()), C = static_cast<Eigen::Index>(t.levels.size());
    t.recovery.resize(R, C);
    t.solution.resize(R, C);
    for (Eigen::Index r = 0; r < R; ++r)
        for (Eigen::Index c = 0; c < C; ++c) {
            const auto p = layout.report_json(t.methods[static_cast<std::size_t>(r)], t.levels[static_cast<std::size_t>(c)]);
            if (!std::filesystem::exists(p)) throw MissingArtifact("report " + p.string() + " not found (run 'train' first)");
            const auto rep = metrics::load_report(p);
            t.recovery(r, c) = rep.recovery_rel_mse;
            t.solution(r, c) = rep.solution_rel_mse;
        }
    return t;
}

inline std::string table_csv(const ComparisonTable& t, const Mat& values) {
    std::ostringstream os;
    os << "method";
    for (double l : t.levels) os << ",noise_" << noise_tag(l);
    os << '\n';
    char buf[32];
    for (std::size_t r = 0; r < t.methods.size(); ++r) {
        os << t.methods[r];
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.6g", values(static_cast<Eigen::Index>(r), c));
            os << ',' << buf;
        }
        os << '\n';
    }
    return os.str();
}

inline std::string table_text(const ComparisonTable& t, const std::string& problem) {
    std::ostringstream os;
    auto block = [&](const std::string& title, const Mat& v) {
        os << title << " (" << problem << ")\n";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-12s", "noise");
        os << buf;
        for (const auto& m : t.methods) {
            std::snprintf(buf, sizeof buf, " %12s", m.c_str());
            os << buf;
        }
        os << '\n';
        for (std::size_t c = 0; c < t.levels.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%-12s", metrics::percent(100.0 * t.levels[c]).c_str());
            os << buf;
            for (std::size_t r = 0; r < t.methods.size(); ++r) {
                std::snprintf(buf, sizeof buf, " %12s",
                              metrics::percent(v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))).c_str());
                os << buf;
            }
            os << '\n';
        }
    };
    block("Relative MSE in the recovery of the RHS", t.recovery);
    os << '\n';
    block("Relative MSE in the solution", t.solution);
    return os.str();
}

/// `compare`: methods × noise-level tables of recovery and solution error.
inline std::string compare(const ExperimentConfig& cfg, const Layout& layout) {
    const ComparisonTable t = collect_reports(cfg, layout);
    const auto dir = layout.compare_dir();
    std::filesystem::create_directories(dir);
    const std::string text = table_text(t, cfg.problem.rhs);
    std::ofstream(dir / "recovery.csv") << table_csv(t, t.recovery);
    std::ofstream(dir / "solution.csv") << table_csv(t, t.solution);
    std::ofstream(dir / "table.txt") << text;
    return text;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

/// Integrate a trained model from `x0` on the problem's sampling grid
/// (optionally extended to `t_end`) with fixed-step RK4 at the sampling Δt.
inline std::pair<std::vector<double>, Mat> solve(const ExperimentConfig& cfg, const std::string& method, double level,
                                                 const Vec& x0, std::optional<double> t_end, const Layout& layout) {
    check_noise_level(cfg, level);
    const MethodSettings& m = cfg.method(method);
    const data::TrajectoryDataset ds = load_dataset_for(layout, level);
    if (static_cast<std::size_t>(x0.size()) != ds.dim())
        throw InvalidArgument("initial condition needs " + std::to_string(ds.dim()) + " components");
    const FittedMethod fit = fit_or_load(cfg, m, level, training_view(ds), layout.model_dir(method, level), false, 1);
    const double end = t_end.has_value() ? *t_end : cfg.problem.t_end;
    const std::vector<double> times = ode::uniform_grid(cfg.problem.t_start, end, cfg.problem.dt);
    return {times, ode::integrate(fit.rhs, x0, times, ode::IntegratorConfig::rk4(cfg.problem.dt))};
}

/// Convenience: generate, train every (method, noise) cell, then compare.
inline std::string run_all(const ExperimentConfig& cfg, const Layout& layout, std::size_t jobs = 1) {
    generate_datasets(cfg, layout);
    for (const auto& m : cfg.methods)
        for (double level : cfg.noise.levels) train_method(cfg, m.name, level, layout, jobs);
    return compare(cfg, layout);
}

}  // namespace odeid::experiment
