#pragma once

#include "odeid/ode/rhs.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <sstream>
#include <string>

namespace odeid::ode {

enum class Method { Rk45Adaptive, Rk4Fixed, EulerFixed };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::Rk45Adaptive: return "rk45_adaptive";
        case Method::Rk4Fixed: return "rk4_fixed";
        case Method::EulerFixed: return "euler_fixed";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "rk45_adaptive") return Method::Rk45Adaptive;
    if (s == "rk4_fixed") return Method::Rk4Fixed;
    if (s == "euler_fixed") return Method::EulerFixed;
    throw InvalidArgument("unknown integrator method '" + s + "'");
}

struct IntegratorConfig {
    Method method = Method::Rk45Adaptive;
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double max_step = 0.01;
    double state_bound = 1e6;  // |x_k| beyond this aborts the integration

    void validate() const {
        require(abs_tol >= 1e-12 && rel_tol >= 1e-12, "integrator tolerances must be >= 1e-12");
        require(max_step > 0.0, "integrator max_step must be positive");
        require(state_bound > 0.0, "integrator state_bound must be positive");
    }

    /// Data generation setting: adaptive Dormand-Prince at 1e-9.
    static IntegratorConfig reference() { return {}; }

    /// One classical RK4 step per sampling interval.
    static IntegratorConfig rk4(double dt) {
        IntegratorConfig c;
        c.method = Method::Rk4Fixed;
        c.max_step = dt;
        return c;
    }
};

/// x + dt·f
inline Vec euler_step(const Vec& rhs_value, const Vec& x, double dt) {
    require_dims(rhs_value.size() == x.size(), "euler_step: shape mismatch");
    return x + dt * rhs_value;
}

/// Solve ẋ = f(t, x) from x(times[0]) = x0; row j of the result approximates
/// x(times[j]) and row 0 equals x0 exactly.
inline Mat integrate(const RhsFunction& rhs, const Vec& x0, const std::vector<double>& times,
                     const IntegratorConfig& cfg) {
    namespace oi = boost::numeric::odeint;
    using State = std::vector<double>;

    cfg.validate();
    require(!times.empty(), "integrate: empty time grid");
    for (std::size_t j = 1; j < times.size(); ++j)
        require(times[j] > times[j - 1], "integrate: times must be strictly increasing");
    require_dims(static_cast<std::size_t>(x0.size()) == rhs.dim, "integrate: x0 dimension mismatch");
    if (!x0.allFinite()) throw InvalidArgument("integrate: non-finite initial state");

    const std::size_t d = rhs.dim;
    const double bound = cfg.state_bound;

    auto check_state = [&](const State& x, double t) {
        for (double v : x) {
            if (!std::isfinite(v) || std::abs(v) > bound) {
                std::ostringstream msg;
                msg << "integration of '" << rhs.label << "' left the state box at t=" << t;
                throw IntegrationFailure(msg.str(), t);
            }
        }
    };

    auto system = [&](const State& x, State& dxdt, double t) {
        check_state(x, t);
        const Vec xv = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(d));
        const Vec f = rhs.eval(t, xv);
        for (std::size_t k = 0; k < d; ++k) {
            dxdt[k] = f[static_cast<Eigen::Index>(k)];
            if (!std::isfinite(dxdt[k])) {
                std::ostringstream msg;
                msg << "non-finite RHS value of '" << rhs.label << "' at t=" << t;
                throw IntegrationFailure(msg.str(), t);
            }
        }
    };

    Mat out(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(d));
    std::size_t row = 0;
    auto observer = [&](const State& x, double t) {
        check_state(x, t);
        for (std::size_t k = 0; k < d; ++k) out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = x[k];
        ++row;
    };

    State x(x0.data(), x0.data() + d);
    try {
        switch (cfg.method) {
            case Method::Rk45Adaptive: {
                auto stepper = oi::make_controlled(cfg.abs_tol, cfg.rel_tol, cfg.max_step,
                                                   oi::runge_kutta_dopri5<State>());
                const double dt0 = std::min(cfg.max_step, times.size() > 1 ? (times[1] - times[0]) : cfg.max_step);
                oi::integrate_times(stepper, system, x, times.begin(), times.end(), dt0, observer,
                                    oi::max_step_checker(100000));
                break;
            }
            case Method::Rk4Fixed:
                oi::integrate_times(oi::runge_kutta4<State>(), system, x, times.begin(), times.end(), cfg.max_step,
                                    observer);
                break;
            case Method::EulerFixed:
                oi::integrate_times(oi::euler<State>(), system, x, times.begin(), times.end(), cfg.max_step,
                                    observer);
                break;
        }
    } catch (const oi::odeint_error& e) {
        throw IntegrationFailure(std::string("integrator gave up: ") + e.what(),
                                 row < times.size() ? times[row] : times.back());
    }
    if (row != times.size()) throw IntegrationFailure("integrator did not reach the final time", times.back());
    // integrate_times reports x0 through the observer unchanged; make row 0 bit-exact regardless.
    out.row(0) = x0.transpose();
    return out;
}

/// t_start + j·dt for j = 0..M−1 where M−1 = round((t_end − t_start)/dt).
inline std::vector<double> uniform_grid(double t_start, double t_end, double dt) {
    require(t_end > t_start && dt > 0.0, "uniform_grid: need t_end > t_start and dt > 0");
    const double steps = (t_end - t_start) / dt;
    const auto n = static_cast<long>(std::llround(steps));
    require(n >= 1 && std::abs(steps - static_cast<double>(n)) <= 1e-9 * std::max(1.0, steps),
            "uniform_grid: (t_end - t_start)/dt must be a positive integer");
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (long j = 0; j <= n; ++j) t[static_cast<std::size_t>(j)] = t_start + static_cast<double>(j) * dt;
    return t;
}

}  // namespace odeid::ode
