#pragma once

#include "odeid/ode/integrate.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace odeid::data {

/// Dense K × M × d tensor (trajectory, time index, component), row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t n0, std::size_t n1, std::size_t n2, double fill = 0.0)
        : n0_(n0), n1_(n1), n2_(n2), data_(n0 * n1 * n2, fill) {}

    double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * n1_ + j) * n2_ + k]; }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * n1_ + j) * n2_ + k]; }

    std::size_t dim0() const { return n0_; }
    std::size_t dim1() const { return n1_; }
    std::size_t dim2() const { return n2_; }
    const std::vector<double>& raw() const& { return data_; }
    std::vector<double>& raw() & { return data_; }
    std::vector<double> raw() && { return std::move(data_); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t n0_ = 0, n1_ = 0, n2_ = 0;
    std::vector<double> data_;
};

struct ProblemSpec {
    ode::RhsFunction rhs;
    double t_start = 0.0;
    double t_end = 1.0;
    double dt = 0.1;
    std::size_t n_trajectories = 1;
    std::vector<std::pair<double, double>> ic_box;  // one [low, high] per state dimension
    std::uint64_t ic_seed = 0;

    void validate() const {
        require(t_end > t_start, "problem: t_start must be < t_end");
        require(dt > 0.0, "problem: dt must be positive");
        require(n_trajectories > 0, "problem: n_trajectories must be positive");
        require_dims(ic_box.size() == rhs.dim, "problem: ic_box must have one interval per state dimension");
        for (const auto& [lo, hi] : ic_box) require(hi > lo, "problem: degenerate ic_box interval");
        (void)times();  // checks the grid divides evenly
    }

    std::vector<double> times() const { return ode::uniform_grid(t_start, t_end, dt); }

    /// Initial condition i, uniform in ic_box and a pure function of (ic_seed, i).
    Vec initial_condition(std::size_t i) const {
        Vec x(static_cast<Eigen::Index>(ic_box.size()));
        for (std::size_t k = 0; k < ic_box.size(); ++k) {
            const auto [lo, hi] = ic_box[k];
            x[static_cast<Eigen::Index>(k)] = lo + (hi - lo) * counter_uniform(ic_seed, 0x1C, i, k);
        }
        return x;
    }
};

struct TrajectoryDataset {
    std::vector<double> times;
    Tensor3 states;  // K × M × d (possibly noisy)
    double noise_level = 0.0;
    std::optional<Tensor3> clean_states;
    std::string problem_label;
    std::uint64_t seed = 0;  // noise seed (0 for clean data)

    std::size_t num_trajectories() const { return states.dim0(); }
    std::size_t num_times() const { return states.dim1(); }
    std::size_t dim() const { return states.dim2(); }
    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }

    Vec state(std::size_t i, std::size_t j) const {
        Vec x(static_cast<Eigen::Index>(dim()));
        for (std::size_t k = 0; k < dim(); ++k) x[static_cast<Eigen::Index>(k)] = states(i, j, k);
        return x;
    }

    Vec clean_state(std::size_t i, std::size_t j) const {
        if (!clean_states) throw InvalidArgument("dataset carries no clean states");
        Vec x(static_cast<Eigen::Index>(dim()));
        for (std::size_t k = 0; k < dim(); ++k) x[static_cast<Eigen::Index>(k)] = (*clean_states)(i, j, k);
        return x;
    }

    void validate() const {
        require(times.size() >= 2, "dataset needs at least two time samples");
        require_dims(states.dim1() == times.size(), "dataset states/time grid mismatch");
        const double dt0 = dt();
        for (std::size_t j = 1; j < times.size(); ++j) {
            require(times[j] > times[j - 1], "dataset times must be strictly increasing");
            require(std::abs((times[j] - times[j - 1]) - dt0) <= 1e-9, "dataset times must be uniformly spaced");
        }
        require(states.all_finite(), "dataset states must be finite");
        require(noise_level >= 0.0 && noise_level <= 0.10, "dataset noise_level must lie in [0, 0.10]");
        if (clean_states) {
            require_dims(clean_states->dim0() == states.dim0() && clean_states->dim1() == states.dim1() &&
                             clean_states->dim2() == states.dim2(),
                         "clean_states shape mismatch");
            if (noise_level == 0.0) require(*clean_states == states, "noiseless dataset must equal its clean states");
        }
    }
};

// ---------------------------------------------------------------------------

inline TrajectoryDataset generate_dataset(const ProblemSpec& problem, const ode::IntegratorConfig& cfg) {
    problem.validate();
    TrajectoryDataset ds;
    ds.times = problem.times();
    ds.problem_label = problem.rhs.label;
    const std::size_t K = problem.n_trajectories, M = ds.times.size(), d = problem.rhs.dim;
    ds.states = Tensor3(K, M, d);
    for (std::size_t i = 0; i < K; ++i) {
        const Vec x0 = problem.initial_condition(i);
        Mat traj;
        try {
            traj = ode::integrate(problem.rhs, x0, ds.times, cfg);
        } catch (const IntegrationFailure& e) {
            throw IntegrationFailure("trajectory " + std::to_string(i) + ": " + e.what(), e.time(),
                                     static_cast<long>(i));
        }
        for (std::size_t j = 0; j < M; ++j)
            for (std::size_t k = 0; k < d; ++k)
                ds.states(i, j, k) = traj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    }
    ds.clean_states = ds.states;
    return ds;
}

// ---------------------------------------------------------------------------
// Noise model
// ---------------------------------------------------------------------------

/// How the noise level maps to the Gaussian draw n_ij: as its standard
/// deviation (default) or as its variance.
enum class NoiseScale { StdDev, Variance };

inline NoiseScale noise_scale_from_string(const std::string& s) {
    if (s == "std" || s == "stddev") return NoiseScale::StdDev;
    if (s == "variance") return NoiseScale::Variance;
    throw InvalidArgument("unknown noise scale '" + s + "' (expected std or variance)");
}

/// Per-component mean range M_k = (1/K) Σ_i |max_j x_i^k(t_j) − min_j x_i^k(t_j)|.
inline Vec mean_ranges(const Tensor3& x) {
    const std::size_t K = x.dim0(), M = x.dim1(), d = x.dim2();
    Vec r = Vec::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            double lo = x(i, 0, k), hi = x(i, 0, k);
            for (std::size_t j = 1; j < M; ++j) {
                lo = std::min(lo, x(i, j, k));
                hi = std::max(hi, x(i, j, k));
            }
            acc += std::abs(hi - lo);
        }
        r[static_cast<Eigen::Index>(k)] = K > 0 ? acc / static_cast<double>(K) : 0.0;
    }
    return r;
}

/// x̂_i^k(t_j) = x_i^k(t_j) + n(i, j, k)·M_k with a caller-supplied draw.
template <typename NoiseSource>
TrajectoryDataset add_noise_with(const TrajectoryDataset& ds, double level, NoiseSource&& draw) {
    require(level >= 0.0 && level <= 0.10, "noise level must lie in [0, 0.10]");
    require(ds.noise_level == 0.0, "dataset is already noisy");
    TrajectoryDataset out = ds;
    if (!out.clean_states) out.clean_states = ds.states;
    out.noise_level = level;
    if (level == 0.0) return out;
    const Vec mk = mean_ranges(ds.states);
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j)
            for (std::size_t k = 0; k < d; ++k)
                out.states(i, j, k) = ds.states(i, j, k) + draw(i, j, k) * mk[static_cast<Eigen::Index>(k)];
    return out;
}

/// Gaussian noise with one counter-based draw per (i, j, k).
inline TrajectoryDataset add_noise(const TrajectoryDataset& ds, double level, std::uint64_t seed,
                                   NoiseScale scale = NoiseScale::StdDev) {
    const double sigma = scale == NoiseScale::StdDev ? level : std::sqrt(level);
    TrajectoryDataset out = add_noise_with(ds, level, [&](std::size_t i, std::size_t j, std::size_t k) {
        return sigma * counter_normal(seed, i, j, k);
    });
    if (level > 0.0) out.seed = seed;
    return out;
}

// ---------------------------------------------------------------------------
// Training sample layouts
// ---------------------------------------------------------------------------

/// Row split produced by a seeded permutation: the first round(0.8 N)
/// permuted rows train, the rest test. Both lists are sorted.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline Split split_rows(std::size_t n, std::uint64_t seed, double train_fraction = 0.8) {
    require(train_fraction > 0.0 && train_fraction <= 1.0, "train fraction must lie in (0, 1]");
    const auto perm = permutation(n, seed);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, n > 0 ? 1 : 0, n);
    Split s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline Mat take_rows(const Mat& m, const std::vector<std::size_t>& rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

/// Inputs x_i(t_j) and targets x_i(t_{j+1}) for the j-th network (1-based j).
struct GeneratorSampleSet {
    std::size_t time_index = 1;
    Mat inputs;   // K × d
    Mat targets;  // K × d
    double dt = 0.0;
    Split split;

    Mat train_inputs() const { return take_rows(inputs, split.train); }
    Mat train_targets() const { return take_rows(targets, split.train); }
    Mat test_inputs() const { return take_rows(inputs, split.test); }
    Mat test_targets() const { return take_rows(targets, split.test); }
};

inline GeneratorSampleSet build_generator_samples(const TrajectoryDataset& ds, std::size_t j,
                                                  std::uint64_t split_seed = 0) {
    const std::size_t M = ds.num_times();
    if (j < 1 || j + 1 > M)
        throw InvalidArgument("generator time index " + std::to_string(j) + " outside [1, " + std::to_string(M - 1) + "]");
    const std::size_t K = ds.num_trajectories(), d = ds.dim();
    GeneratorSampleSet s;
    s.time_index = j;
    s.dt = ds.dt();
    s.inputs.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d));
    s.targets.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            s.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ds.states(i, j - 1, k);
            s.targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ds.states(i, j, k);
        }
    s.split = split_rows(K, hash_seed(split_seed, 0x6E, j));
    return s;
}

enum class SplitTag { Train, Test };

/// Rows (t_j, x_i(t_j)) → velocity estimate, for j = 1..M−1 (never t_M).
struct InterpSampleSet {
    Mat inputs;   // N × (1+d)
    Mat targets;  // N × d
    std::vector<SplitTag> split_tag;
    std::vector<std::pair<std::size_t, std::size_t>> origin;  // (trajectory i, 0-based time index)

    std::size_t dim() const { return static_cast<std::size_t>(targets.cols()); }

    std::vector<std::size_t> rows(SplitTag tag) const {
        std::vector<std::size_t> r;
        for (std::size_t h = 0; h < split_tag.size(); ++h)
            if (split_tag[h] == tag) r.push_back(h);
        return r;
    }
    Mat train_inputs() const { return take_rows(inputs, rows(SplitTag::Train)); }
    Mat train_targets() const { return take_rows(targets, rows(SplitTag::Train)); }
    Mat test_inputs() const { return take_rows(inputs, rows(SplitTag::Test)); }
    Mat test_targets() const { return take_rows(targets, rows(SplitTag::Test)); }
};

/// `velocities` is K × (M−1) × d, entry (i, j) estimating ẋ_i(t_{j+1}) in
/// 1-based time, i.e. the rate at times[j] in 0-based indexing.
inline InterpSampleSet build_interp_samples(const TrajectoryDataset& ds, const Tensor3& velocities,
                                            std::uint64_t split_seed) {
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    require_dims(velocities.dim0() == K && velocities.dim1() + 1 == M && velocities.dim2() == d,
                 "velocity tensor must be K x (M-1) x d");
    require(velocities.all_finite(), "velocity estimates must be finite");
    const std::size_t N = K * (M - 1);
    InterpSampleSet s;
    s.inputs.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d + 1));
    s.targets.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d));
    s.origin.reserve(N);
    std::size_t h = 0;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j + 1 < M; ++j, ++h) {
            const auto r = static_cast<Eigen::Index>(h);
            s.inputs(r, 0) = ds.times[j];
            for (std::size_t k = 0; k < d; ++k) {
                s.inputs(r, static_cast<Eigen::Index>(k + 1)) = ds.states(i, j, k);
                s.targets(r, static_cast<Eigen::Index>(k)) = velocities(i, j, k);
            }
            s.origin.emplace_back(i, j);
        }
    const Split sp = split_rows(N, split_seed);
    s.split_tag.assign(N, SplitTag::Test);
    for (auto r : sp.train) s.split_tag[r] = SplitTag::Train;
    return s;
}

}  // namespace odeid::data
