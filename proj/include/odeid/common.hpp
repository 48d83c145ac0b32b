#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace odeid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class IntegrationFailure : public Error {
public:
    IntegrationFailure(const std::string& what, double time, long index = -1)
        : Error(what), time_(time), index_(index) {}
    double time() const { return time_; }
    /// Trajectory / initial-condition index when known, else -1.
    long index() const { return index_; }

private:
    double time_;
    long index_;
};

class TrainingFailure : public Error {
public:
    TrainingFailure(const std::string& what, long network_index = -1)
        : Error(what), network_index_(network_index) {}
    long network_index() const { return network_index_; }

private:
    long network_index_;
};

class UndefinedRelativeError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
    if (!cond) throw DimensionMismatch(msg);
}

// ---------------------------------------------------------------------------
// Counter-based random numbers.
//
// Every draw is a pure function of (seed, counters...), so results do not
// depend on evaluation order or thread scheduling.
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    return splitmix64(seed ^ splitmix64(v + 0x632BE59BD9B4E019ULL));
}

template <typename... Ts>
constexpr std::uint64_t hash_seed(std::uint64_t seed, Ts... counters) {
    std::uint64_t h = splitmix64(seed);
    ((h = hash_combine(h, static_cast<std::uint64_t>(counters))), ...);
    return h;
}

/// Uniform double in [0, 1) from 53 high bits.
constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <typename... Ts>
double counter_uniform(std::uint64_t seed, Ts... counters) {
    return to_unit(hash_seed(seed, counters...));
}

/// Standard normal draw (Box-Muller on two counter-derived uniforms).
template <typename... Ts>
double counter_normal(std::uint64_t seed, Ts... counters) {
    const std::uint64_t h = hash_seed(seed, counters...);
    const double u1 = 1.0 - to_unit(splitmix64(h));  // (0, 1]
    const double u2 = to_unit(splitmix64(h ^ 0xD1B54A32D192ED03ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential generator for places where a stream is natural (init, shuffles).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix64(state_);
    }
    double uniform() { return to_unit(next()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        const std::uint64_t m = n;
        const std::uint64_t threshold = (0 - m) % m;  // rejection keeps the draw unbiased
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return static_cast<std::size_t>(r % m);
        }
    }

private:
    std::uint64_t state_;
};

/// Seeded Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
    return p;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace odeid
