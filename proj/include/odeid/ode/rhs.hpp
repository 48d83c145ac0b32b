#pragma once

#include "odeid/common.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>

namespace odeid::ode {

/// Right-hand side f(t, x) of ẋ = f(t, x).
struct RhsFunction {
    std::size_t dim = 1;
    std::string label;
    std::function<Vec(double, const Vec&)> eval;
    // Optional vectorised form: rows (t, x_1..x_d) → rows f. Falls back to `eval`.
    std::function<Mat(const Mat&)> eval_batch;

    Vec operator()(double t, const Vec& x) const {
        require_dims(static_cast<std::size_t>(x.size()) == dim, "rhs '" + label + "': state dimension mismatch");
        return eval(t, x);
    }

    Mat batch(const Mat& tx) const {
        require_dims(static_cast<std::size_t>(tx.cols()) == dim + 1, "rhs '" + label + "': batch needs 1+d columns");
        if (eval_batch) return eval_batch(tx);
        Mat out(tx.rows(), static_cast<Eigen::Index>(dim));
        for (Eigen::Index r = 0; r < tx.rows(); ++r)
            out.row(r) = eval(tx(r, 0), tx.row(r).tail(static_cast<Eigen::Index>(dim)).transpose()).transpose();
        return out;
    }
};

inline RhsFunction make_rhs(std::string label, std::size_t dim, std::function<Vec(double, const Vec&)> f) {
    return RhsFunction{dim, std::move(label), std::move(f), {}};
}

/// Label → RHS registry, pre-populated with the reference systems.
class Catalog {
public:
    static Catalog& instance() {
        static Catalog c;
        return c;
    }

    void add(const RhsFunction& f) {
        require(!f.label.empty(), "catalog entries need a label");
        entries_[f.label] = f;
    }

    bool contains(const std::string& label) const { return entries_.count(label) != 0; }

    const RhsFunction& get(const std::string& label) const {
        auto it = entries_.find(label);
        if (it == entries_.end()) throw InvalidArgument("unknown RHS label '" + label + "'");
        return it->second;
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& [k, _] : entries_) out.push_back(k);
        return out;
    }

private:
    Catalog() {
        using std::cos;
        using std::exp;
        using std::sin;
        // ẋ = x e^t + sin(x)² − x
        add(make_rhs("exp_sin", 1, [](double t, const Vec& x) {
            const double s = sin(x[0]);
            return Vec::Constant(1, x[0] * exp(t) + s * s - x[0]);
        }));
        // ẋ₁ = x₂, ẋ₂ = −0.5 x₁
        add(make_rhs("pendulum", 2, [](double, const Vec& x) {
            Vec f(2);
            f << x[1], -0.5 * x[0];
            return f;
        }));
        // ẋ = sign(t − 0.1), right-continuous at the switch: the value at
        // t = 0.1 is +1, the forward difference quotient from that instant.
        add(make_rhs("sign_shift", 1, [](double t, const Vec&) {
            return Vec::Constant(1, t < 0.1 ? -1.0 : 1.0);
        }));
        // ẋ = cos(50 t) x
        add(make_rhs("oscillatory", 1, [](double t, const Vec& x) { return Vec::Constant(1, cos(50.0 * t) * x[0]); }));
        // ẋ = cos(3x) + x³ − x
        add(make_rhs("cubic_cos", 1, [](double, const Vec& x) {
            const double v = x[0];
            return Vec::Constant(1, cos(3.0 * v) + v * v * v - v);
        }));
        // ẋ = t cos(x) + t² x
        add(make_rhs("nonautonomous", 1, [](double t, const Vec& x) {
            return Vec::Constant(1, t * cos(x[0]) + t * t * x[0]);
        }));
    }

    std::map<std::string, RhsFunction> entries_;
};

inline const RhsFunction& catalog_lookup(const std::string& label) { return Catalog::instance().get(label); }

}  // namespace odeid::ode
