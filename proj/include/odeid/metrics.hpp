#pragma once

// Error measures for learned right-hand sides: plain and relative MSE,
// generalisation gap, recovery error on a (t, x) lattice, error in the
// re-integrated solution, and the Hoeffding test-size bound.
//
// Relative errors are reported in percent.

#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/ode/integrate.hpp"
#include "odeid/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace odeid::metrics {

inline constexpr double kMinEnergy = 1e-300;

inline double mse(const Mat& pred, const Mat& target) {
    require_dims(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shape mismatch");
    require(pred.size() > 0, "mse: empty input");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

/// mean ‖pred − target‖² / mean ‖target‖², in percent.
inline double relative_mse(const Mat& pred, const Mat& target) {
    require_dims(pred.rows() == target.rows() && pred.cols() == target.cols(), "relative_mse: shape mismatch");
    require(pred.size() > 0, "relative_mse: empty input");
    const double energy = target.squaredNorm() / static_cast<double>(target.size());
    if (!(energy >= kMinEnergy)) throw UndefinedRelativeError("relative_mse: target has zero energy");
    return 100.0 * mse(pred, target) / energy;
}

/// Column-wise relative MSE, in percent.
inline std::vector<double> relative_mse_per_column(const Mat& pred, const Mat& target) {
    require_dims(pred.rows() == target.rows() && pred.cols() == target.cols(), "relative_mse: shape mismatch");
    std::vector<double> out;
    for (Eigen::Index k = 0; k < pred.cols(); ++k) out.push_back(relative_mse(pred.col(k), target.col(k)));
    return out;
}

inline double generalization_gap(double train_mse, double test_mse) { return test_mse - train_mse; }

/// Train and test error of a predictor on a split sample set. Both are
/// normalised by the mean squared target over all rows so the gap is a
/// difference of like quantities.
struct SplitErrors {
    double train = 0.0;
    double test = 0.0;
    std::vector<double> train_per_component;
    std::vector<double> test_per_component;
    double gap() const { return generalization_gap(train, test); }
};

inline SplitErrors split_errors(const Mat& pred_train, const Mat& y_train, const Mat& pred_test, const Mat& y_test) {
    require(y_train.rows() > 0 && y_test.rows() > 0, "split_errors: both splits must be non-empty");
    require_dims(y_train.cols() == y_test.cols(), "split_errors: column mismatch");
    const auto d = y_train.cols();
    const double n_all = static_cast<double>(y_train.rows() + y_test.rows());
    SplitErrors e;
    const double energy = (y_train.squaredNorm() + y_test.squaredNorm()) / (n_all * static_cast<double>(d));
    if (!(energy >= kMinEnergy)) throw UndefinedRelativeError("split_errors: targets have zero energy");
    e.train = 100.0 * mse(pred_train, y_train) / energy;
    e.test = 100.0 * mse(pred_test, y_test) / energy;
    for (Eigen::Index k = 0; k < d; ++k) {
        const double ek = (y_train.col(k).squaredNorm() + y_test.col(k).squaredNorm()) / n_all;
        if (!(ek >= kMinEnergy)) throw UndefinedRelativeError("split_errors: a target component has zero energy");
        e.train_per_component.push_back(100.0 * mse(pred_train.col(k), y_train.col(k)) / ek);
        e.test_per_component.push_back(100.0 * mse(pred_test.col(k), y_test.col(k)) / ek);
    }
    return e;
}

/// Split errors of a vector field on an interpolation sample set.
inline SplitErrors split_errors(const ode::RhsFunction& model, const data::InterpSampleSet& s) {
    return split_errors(model.batch(s.train_inputs()), s.train_targets(), model.batch(s.test_inputs()),
                        s.test_targets());
}

inline double hoeffding_bound_raw(double eps, std::size_t m) {
    require(eps > 0.0 && m >= 1, "hoeffding_bound: need eps > 0 and m >= 1");
    return 2.0 * std::exp(-2.0 * eps * eps * static_cast<double>(m));
}

/// P(|gap estimate − gap| ≥ eps) ≤ 2 exp(−2 eps² m), clamped to [0, 1].
inline double hoeffding_bound(double eps, std::size_t m) { return std::min(1.0, hoeffding_bound_raw(eps, m)); }

// ---------------------------------------------------------------------------
// Evaluation lattice
// ---------------------------------------------------------------------------

enum class TimeAxis { Uniform, SampleTimes };

inline TimeAxis time_axis_from_string(const std::string& s) {
    if (s == "uniform") return TimeAxis::Uniform;
    if (s == "sample_times") return TimeAxis::SampleTimes;
    throw InvalidArgument("unknown time_axis '" + s + "' (expected uniform | sample_times)");
}

inline std::string to_string(TimeAxis a) { return a == TimeAxis::Uniform ? "uniform" : "sample_times"; }

enum class XRange { Box, TimeSlice };

inline XRange x_range_from_string(const std::string& s) {
    if (s == "box") return XRange::Box;
    if (s == "time_slice") return XRange::TimeSlice;
    throw InvalidArgument("unknown x_range '" + s + "' (expected box | time_slice)");
}

inline std::string to_string(XRange r) { return r == XRange::Box ? "box" : "time_slice"; }

/// Lattice over (t, x_1..x_d). Dimension 0 is time; `time_values`, when set,
/// replaces the uniform time axis. `slice_lo/slice_hi`, when set, give
/// per-time-value state bounds that replace lo/hi for the state dimensions.
struct EvaluationGrid {
    std::vector<double> lo, hi;
    std::vector<std::size_t> counts;
    std::vector<double> time_values;
    std::vector<std::vector<double>> slice_lo, slice_hi;  // [time index][state component]

    std::size_t input_dim() const { return lo.size(); }

    std::vector<double> time_axis() const {
        if (!time_values.empty()) return time_values;
        return linspace(lo[0], hi[0], counts[0]);
    }

    std::size_t size() const {
        std::size_t n = time_axis().size();
        for (std::size_t c = 1; c < input_dim(); ++c) n *= counts[c];
        return n;
    }

    void validate() const {
        require(lo.size() >= 2 && lo.size() == hi.size() && lo.size() == counts.size(),
                "evaluation grid: inconsistent dims");
        for (std::size_t c = 0; c < lo.size(); ++c) {
            if (c == 0 && !time_values.empty()) continue;
            require(counts[c] >= 2, "evaluation grid: need at least 2 points per dimension");
            require(hi[c] > lo[c], "evaluation grid: degenerate bounds");
        }
        if (!slice_lo.empty())
            require(slice_lo.size() == time_axis().size() && slice_hi.size() == slice_lo.size(),
                    "evaluation grid: one slice bound per time value");
    }

    /// All lattice points, one per row; time varies slowest, the last state
    /// component fastest.
    Mat points() const {
        validate();
        const std::vector<double> ts = time_axis();
        const std::size_t d = input_dim() - 1;
        std::size_t per_slice = 1;
        for (std::size_t c = 1; c <= d; ++c) per_slice *= counts[c];
        Mat p(static_cast<Eigen::Index>(ts.size() * per_slice), static_cast<Eigen::Index>(d + 1));
        Eigen::Index r = 0;
        for (std::size_t a = 0; a < ts.size(); ++a) {
            std::vector<std::vector<double>> axes;
            for (std::size_t k = 0; k < d; ++k) {
                const double l = slice_lo.empty() ? lo[k + 1] : slice_lo[a][k];
                const double h = slice_lo.empty() ? hi[k + 1] : slice_hi[a][k];
                axes.push_back(linspace(l, h, counts[k + 1]));
            }
            std::vector<std::size_t> idx(d, 0);
            for (std::size_t q = 0; q < per_slice; ++q, ++r) {
                p(r, 0) = ts[a];
                for (std::size_t k = 0; k < d; ++k) p(r, static_cast<Eigen::Index>(k + 1)) = axes[k][idx[k]];
                for (std::size_t k = d; k-- > 0;) {
                    if (++idx[k] < counts[k + 1]) break;
                    idx[k] = 0;
                }
            }
        }
        return p;
    }

    static std::vector<double> linspace(double a, double b, std::size_t n) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
        return v;
    }
};

struct GridSettings {
    std::size_t points_per_dim = 200;
    std::size_t max_points = 1'000'000;
    TimeAxis time_axis = TimeAxis::Uniform;
    XRange x_range = XRange::Box;
};

/// Lattice over [t_1, t_M] and the (clean, if available) state data. With
/// XRange::Box the state bounds are the global bounding box; with
/// XRange::TimeSlice they are the range of the trajectories (linearly
/// interpolated between samples) at each lattice time.
inline EvaluationGrid default_grid(const data::TrajectoryDataset& ds, const GridSettings& s = {}) {
    const std::size_t d = ds.dim(), D = d + 1, K = ds.num_trajectories(), M = ds.num_times();
    const data::Tensor3& x = ds.clean_states ? *ds.clean_states : ds.states;
    EvaluationGrid g;
    g.lo.assign(D, std::numeric_limits<double>::infinity());
    g.hi.assign(D, -std::numeric_limits<double>::infinity());
    g.lo[0] = ds.times.front();
    g.hi[0] = ds.times.back();
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j)
            for (std::size_t k = 0; k < d; ++k) {
                g.lo[k + 1] = std::min(g.lo[k + 1], x(i, j, k));
                g.hi[k + 1] = std::max(g.hi[k + 1], x(i, j, k));
            }
    std::size_t n = s.points_per_dim;
    const std::size_t nt = s.time_axis == TimeAxis::SampleTimes ? M : 0;
    auto total = [&](std::size_t per) {
        double t = nt ? static_cast<double>(nt) : static_cast<double>(per);
        for (std::size_t k = 0; k < d; ++k) t *= static_cast<double>(per);
        return t;
    };
    while (n > 2 && total(n) > static_cast<double>(s.max_points)) --n;
    g.counts.assign(D, n);
    if (nt) {
        g.time_values = ds.times;
        g.counts[0] = nt;
    }
    if (s.x_range == XRange::TimeSlice) {
        for (double t : g.time_axis()) {
            const auto it = std::upper_bound(ds.times.begin(), ds.times.end(), t);
            const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - ds.times.begin())) - 1, M - 2);
            const double w = std::clamp((t - ds.times[j]) / (ds.times[j + 1] - ds.times[j]), 0.0, 1.0);
            std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t k = 0; k < d; ++k) {
                    const double v = (1.0 - w) * x(i, j, k) + w * x(i, j + 1, k);
                    lo[k] = std::min(lo[k], v);
                    hi[k] = std::max(hi[k], v);
                }
            for (std::size_t k = 0; k < d; ++k)
                if (!(hi[k] > lo[k])) lo[k] -= 0.5e-9, hi[k] += 0.5e-9;
            g.slice_lo.push_back(std::move(lo));
            g.slice_hi.push_back(std::move(hi));
        }
    }
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Recovery and solution errors
// ---------------------------------------------------------------------------

struct ComponentwiseError {
    double overall = 0.0;
    std::vector<double> per_component;
};

/// Relative MSE between the learned and the true field over the lattice.
inline ComponentwiseError recovery_error(const ode::RhsFunction& model, const ode::RhsFunction& truth,
                                         const EvaluationGrid& grid) {
    require_dims(model.dim == truth.dim && grid.input_dim() == truth.dim + 1, "recovery_error: dimension mismatch");
    const Mat p = grid.points();
    const Mat pred = model.batch(p), ref = truth.batch(p);
    return {relative_mse(pred, ref), relative_mse_per_column(pred, ref)};
}

/// Integrate both fields from each initial condition (row of `ics`) on
/// `times` and compare the stacked solutions.
inline ComponentwiseError solution_error(const ode::RhsFunction& model, const ode::RhsFunction& truth, const Mat& ics,
                                         const std::vector<double>& times, const ode::IntegratorConfig& cfg,
                                         std::size_t jobs = 1) {
    require_dims(model.dim == truth.dim && static_cast<std::size_t>(ics.cols()) == truth.dim,
                 "solution_error: dimension mismatch");
    require(ics.rows() > 0, "solution_error: no initial conditions");
    const auto n = static_cast<std::size_t>(ics.rows());
    const auto M = static_cast<Eigen::Index>(times.size());
    Mat pred(static_cast<Eigen::Index>(n) * M, ics.cols()), ref(pred.rows(), pred.cols());
    parallel_for(n, jobs, [&](std::size_t i) {
        const Vec x0 = ics.row(static_cast<Eigen::Index>(i)).transpose();
        const auto r0 = static_cast<Eigen::Index>(i) * M;
        ref.middleRows(r0, M) = ode::integrate(truth, x0, times, cfg);
        try {
            pred.middleRows(r0, M) = ode::integrate(model, x0, times, cfg);
        } catch (const IntegrationFailure& e) {
            throw IntegrationFailure("initial condition " + std::to_string(i) + ": " + e.what(), e.time(),
                                     static_cast<long>(i));
        }
    });
    return {relative_mse(pred, ref), relative_mse_per_column(pred, ref)};
}

/// Clean initial states of a dataset (noisy ones if no clean copy is kept).
inline Mat initial_states(const data::TrajectoryDataset& ds) {
    Mat x0(static_cast<Eigen::Index>(ds.num_trajectories()), static_cast<Eigen::Index>(ds.dim()));
    for (std::size_t i = 0; i < ds.num_trajectories(); ++i)
        x0.row(static_cast<Eigen::Index>(i)) = (ds.clean_states ? ds.clean_state(i, 0) : ds.state(i, 0)).transpose();
    return x0;
}

/// Dump `t,x1..xd,true_1..d,pred_1..d` for external plotting.
inline void write_grid_csv(const std::filesystem::path& path, const ode::RhsFunction& model,
                           const ode::RhsFunction& truth, const EvaluationGrid& grid) {
    const Mat p = grid.points();
    const Mat pred = model.batch(p), ref = truth.batch(p);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    const std::size_t d = truth.dim;
    f << "t";
    for (std::size_t k = 1; k <= d; ++k) f << ",x" << k;
    for (std::size_t k = 1; k <= d; ++k) f << ",true_" << k;
    for (std::size_t k = 1; k <= d; ++k) f << ",pred_" << k;
    f << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        f << buf;
    };
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        put(p(r, 0));
        for (Eigen::Index c = 1; c < p.cols(); ++c) f << ',', put(p(r, c));
        for (Eigen::Index c = 0; c < ref.cols(); ++c) f << ',', put(ref(r, c));
        for (Eigen::Index c = 0; c < pred.cols(); ++c) f << ',', put(pred(r, c));
        f << '\n';
    }
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct EvaluationReport {
    std::string method;
    std::string problem;
    double noise_level = 0.0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double generalization_gap = 0.0;
    std::optional<double> estimated_lipschitz;
    double recovery_rel_mse = 0.0;
    double solution_rel_mse = 0.0;
    std::vector<double> train_mse_per_component;
    std::vector<double> test_mse_per_component;
    std::vector<double> lipschitz_per_component;
    std::vector<double> recovery_per_component;
    std::vector<double> solution_per_component;
    nlohmann::json details = nlohmann::json::object();  // method-specific extras (alpha, equations, ...)

    void set_split(const SplitErrors& e) {
        train_mse = e.train;
        test_mse = e.test;
        generalization_gap = e.gap();
        train_mse_per_component = e.train_per_component;
        test_mse_per_component = e.test_per_component;
    }
    void set_recovery(const ComponentwiseError& e) {
        recovery_rel_mse = e.overall;
        recovery_per_component = e.per_component;
    }
    void set_solution(const ComponentwiseError& e) {
        solution_rel_mse = e.overall;
        solution_per_component = e.per_component;
    }
};

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["method"] = r.method;
    j["problem"] = r.problem;
    j["noise_level"] = r.noise_level;
    j["train_mse"] = r.train_mse;
    j["test_mse"] = r.test_mse;
    j["generalization_gap"] = r.generalization_gap;
    j["estimated_lipschitz"] = r.estimated_lipschitz ? nlohmann::json(*r.estimated_lipschitz) : nlohmann::json();
    j["recovery_rel_mse"] = r.recovery_rel_mse;
    j["solution_rel_mse"] = r.solution_rel_mse;
    j["per_component"] = {{"train_mse", r.train_mse_per_component},
                          {"test_mse", r.test_mse_per_component},
                          {"estimated_lipschitz", r.lipschitz_per_component},
                          {"recovery_rel_mse", r.recovery_per_component},
                          {"solution_rel_mse", r.solution_per_component}};
    j["details"] = r.details;
    return j;
}

namespace detail {
// Diverged solutions are stored as null and read back as +inf.
inline double finite_or_inf(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}
inline std::vector<double> finite_or_inf_list(const nlohmann::json& j) {
    std::vector<double> v;
    for (const auto& e : j) v.push_back(finite_or_inf(e));
    return v;
}
}  // namespace detail

inline EvaluationReport report_from_json(const nlohmann::json& j) {
    EvaluationReport r;
    r.method = j.at("method").get<std::string>();
    r.problem = j.at("problem").get<std::string>();
    r.noise_level = j.at("noise_level").get<double>();
    r.train_mse = j.at("train_mse").get<double>();
    r.test_mse = j.at("test_mse").get<double>();
    r.generalization_gap = j.at("generalization_gap").get<double>();
    if (!j.at("estimated_lipschitz").is_null()) r.estimated_lipschitz = j.at("estimated_lipschitz").get<double>();
    r.recovery_rel_mse = j.at("recovery_rel_mse").get<double>();
    r.solution_rel_mse = detail::finite_or_inf(j.at("solution_rel_mse"));
    const auto& pc = j.at("per_component");
    r.train_mse_per_component = pc.at("train_mse").get<std::vector<double>>();
    r.test_mse_per_component = pc.at("test_mse").get<std::vector<double>>();
    r.lipschitz_per_component = pc.at("estimated_lipschitz").get<std::vector<double>>();
    r.recovery_per_component = pc.at("recovery_rel_mse").get<std::vector<double>>();
    r.solution_per_component = detail::finite_or_inf_list(pc.at("solution_rel_mse"));
    if (j.contains("details")) r.details = j.at("details");
    return r;
}

/// Three significant digits, e.g. "0.0957%" or "5.7e-05%".
inline std::string percent(double v) {
    if (!std::isfinite(v)) return "diverged";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g%%", v);
    return buf;
}

inline std::string format_report(const EvaluationReport& r) {
    std::ostringstream os;
    auto line = [&](const std::string& key, const std::string& value) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "  %-22s %s\n", key.c_str(), value.c_str());
        os << buf;
    };
    auto list = [](const std::vector<double>& v, bool pct) {
        std::string s;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (k) s += " / ";
            if (pct) {
                s += percent(v[k]);
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.3g", v[k]);
                s += buf;
            }
        }
        return s;
    };
    os << r.method << " on " << r.problem << " (noise " << percent(100.0 * r.noise_level) << ")\n";
    line("train MSE", percent(r.train_mse));
    line("test MSE", percent(r.test_mse));
    line("generalization gap", percent(r.generalization_gap));
    if (r.estimated_lipschitz) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", *r.estimated_lipschitz);
        line("estimated Lipschitz", buf);
    }
    line("recovery rel. MSE", percent(r.recovery_rel_mse));
    line("solution rel. MSE", percent(r.solution_rel_mse));
    if (r.recovery_per_component.size() > 1) {
        line("recovery per comp.", list(r.recovery_per_component, true));
        line("solution per comp.", list(r.solution_per_component, true));
        if (!r.lipschitz_per_component.empty()) line("Lipschitz per comp.", list(r.lipschitz_per_component, false));
    }
    return os.str();
}

inline void save_report(const std::filesystem::path& p, const EvaluationReport& r) { nn::write_json_file(p, to_json(r)); }
inline EvaluationReport load_report(const std::filesystem::path& p) { return report_from_json(nn::read_json_file(p)); }

}  // namespace odeid::metrics
