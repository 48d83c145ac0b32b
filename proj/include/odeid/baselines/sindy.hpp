#pragma once

// Sparse regression over a dictionary of candidate terms, solved by
// sequentially thresholded least squares (STLSQ).

#include "odeid/baselines/polyfit.hpp"
#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/ode/rhs.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

namespace odeid::baselines {

struct BasisFunction {
    std::string name;
    std::function<Vec(const Mat& tx)> eval;  // rows (t, x) → one value per row
};

/// Recipe for a dictionary: monomials in the state up to `polynomial_degree`
/// plus elementary functions of each state component at the listed
/// frequencies, e.g. {sin, cos} × {1, 3} gives sin(x), cos(x), sin(3x), cos(3x).
struct LibrarySpec {
    int polynomial_degree = 10;
    std::vector<std::string> functions{"sin", "cos", "exp", "log"};
    std::vector<double> frequencies{1.0};
    bool include_time = false;  // adds t, t·x_k and t² terms

    void validate() const {
        require(polynomial_degree >= 0, "library polynomial_degree must be non-negative");
        static const std::set<std::string> known{"sin", "cos", "exp", "log"};
        for (const auto& f : functions)
            if (!known.count(f)) throw InvalidArgument("unknown library function '" + f + "'");
        for (double w : frequencies) require(w > 0.0, "library frequencies must be positive");
    }
};

struct FunctionLibrary {
    std::vector<BasisFunction> terms;

    std::size_t size() const { return terms.size(); }
    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& t : terms) n.push_back(t.name);
        return n;
    }

    void add(BasisFunction f) {
        for (const auto& t : terms)
            if (t.name == f.name) throw InvalidArgument("duplicate library term '" + f.name + "'");
        terms.push_back(std::move(f));
    }

    Mat evaluate(const Mat& tx) const {
        Mat theta(tx.rows(), static_cast<Eigen::Index>(terms.size()));
        for (std::size_t p = 0; p < terms.size(); ++p) theta.col(static_cast<Eigen::Index>(p)) = terms[p].eval(tx);
        return theta;
    }
};

namespace detail {

inline std::string var_name(std::size_t k, std::size_t d) { return d == 1 ? "x" : "x" + std::to_string(k + 1); }

inline std::string number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

inline std::string monomial_name(const Exponents& e, std::size_t d) {
    std::string s;
    for (std::size_t k = 0; k < d; ++k) {
        if (e[k] == 0) continue;
        if (!s.empty()) s += "*";
        s += var_name(k, d);
        if (e[k] > 1) s += "^" + std::to_string(e[k]);
    }
    return s.empty() ? "1" : s;
}

}  // namespace detail

/// Dictionary for a d-dimensional state. Terms that are not defined on the
/// whole of `domain` (rows (t, x); log of a non-positive value) are left out.
inline FunctionLibrary build_library(const LibrarySpec& spec, std::size_t d, const Mat& domain) {
    spec.validate();
    require_dims(static_cast<std::size_t>(domain.cols()) == d + 1, "library domain must have 1+d columns");
    FunctionLibrary lib;
    for (const auto& e : monomials(d, spec.polynomial_degree)) {
        lib.add({detail::monomial_name(e, d), [e](const Mat& tx) {
                     Vec v = Vec::Ones(tx.rows());
                     for (std::size_t k = 0; k < e.size(); ++k)
                         for (int p = 0; p < e[k]; ++p) v = v.cwiseProduct(tx.col(static_cast<Eigen::Index>(k + 1)));
                     return v;
                 }});
    }
    for (const auto& fn : spec.functions) {
        for (std::size_t k = 0; k < d; ++k) {
            const auto col = static_cast<Eigen::Index>(k + 1);
            const std::string x = detail::var_name(k, d);
            if (fn == "exp") {
                lib.add({"exp(" + x + ")", [col](const Mat& tx) { return Vec(tx.col(col).array().exp()); }});
            } else if (fn == "log") {
                if (domain.rows() > 0 && domain.col(col).minCoeff() > 0.0)
                    lib.add({"log(" + x + ")", [col](const Mat& tx) { return Vec(tx.col(col).array().log()); }});
            } else {
                for (double w : spec.frequencies) {
                    const std::string arg = (w == 1.0 ? "" : detail::number(w)) + x;
                    if (fn == "sin")
                        lib.add({"sin(" + arg + ")", [col, w](const Mat& tx) { return Vec((w * tx.col(col).array()).sin()); }});
                    else
                        lib.add({"cos(" + arg + ")", [col, w](const Mat& tx) { return Vec((w * tx.col(col).array()).cos()); }});
                }
            }
        }
    }
    if (spec.include_time) {
        lib.add({"t", [](const Mat& tx) { return Vec(tx.col(0)); }});
        lib.add({"t^2", [](const Mat& tx) { return Vec(tx.col(0).array().square()); }});
        for (std::size_t k = 0; k < d; ++k) {
            const auto col = static_cast<Eigen::Index>(k + 1);
            lib.add({"t*" + detail::var_name(k, d),
                     [col](const Mat& tx) { return Vec(tx.col(0).cwiseProduct(tx.col(col))); }});
        }
    }
    return lib;
}

/// Library given by explicit names drawn from a (larger) generated library.
inline FunctionLibrary select_terms(const FunctionLibrary& lib, const std::vector<std::string>& names) {
    FunctionLibrary out;
    for (const auto& n : names) {
        auto it = std::find_if(lib.terms.begin(), lib.terms.end(), [&](const BasisFunction& b) { return b.name == n; });
        if (it == lib.terms.end()) throw InvalidArgument("library has no term '" + n + "'");
        out.add(*it);
    }
    return out;
}

struct StlsqConfig {
    double threshold = 0.05;
    std::size_t max_iters = 20;
    double ridge = 0.0;  // optional Tikhonov term on the active coefficients
};

struct SparseModel {
    std::vector<std::string> names;
    Mat coefficients;  // |library| × d; inactive entries are exactly 0
    std::vector<std::vector<bool>> active;  // [component][term]
    double threshold = 0.0;
    std::vector<bool> empty;       // per component: every term eliminated
    std::vector<std::size_t> iterations;
    FunctionLibrary library;
    LibrarySpec spec;

    std::size_t dim() const { return static_cast<std::size_t>(coefficients.cols()); }
    Mat predict(const Mat& tx) const { return library.evaluate(tx) * coefficients; }
};

namespace detail {

inline Vec active_lsq(const Mat& theta, const Vec& y, const std::vector<bool>& mask, double ridge) {
    std::vector<Eigen::Index> cols;
    for (std::size_t p = 0; p < mask.size(); ++p)
        if (mask[p]) cols.push_back(static_cast<Eigen::Index>(p));
    Vec xi = Vec::Zero(theta.cols());
    if (cols.empty()) return xi;
    const auto n = static_cast<Eigen::Index>(cols.size());
    Mat A(theta.rows() + (ridge > 0.0 ? n : 0), n);
    for (Eigen::Index c = 0; c < n; ++c) A.col(c).head(theta.rows()) = theta.col(cols[static_cast<std::size_t>(c)]);
    Vec b = Vec::Zero(A.rows());
    b.head(y.size()) = y;
    if (ridge > 0.0) A.bottomRows(n) = std::sqrt(ridge * static_cast<double>(theta.rows())) * Mat::Identity(n, n);
    const Vec sol = A.colPivHouseholderQr().solve(b);
    for (Eigen::Index c = 0; c < n; ++c) xi[cols[static_cast<std::size_t>(c)]] = sol[c];
    return xi;
}

}  // namespace detail

/// STLSQ on a precomputed dictionary matrix, one target column at a time.
/// The support only shrinks; iteration stops at a fixed point.
inline SparseModel stlsq(const Mat& theta, const Mat& y, const StlsqConfig& cfg,
                         const std::vector<std::vector<bool>>* initial_mask = nullptr) {
    require(theta.cols() > 0, "sindy: empty library");
    require(cfg.threshold > 0.0, "sindy: threshold must be positive");
    require(cfg.max_iters >= 1, "sindy: max_iters must be at least 1");
    require_dims(theta.rows() == y.rows(), "sindy: dictionary and targets differ in rows");
    const auto P = static_cast<std::size_t>(theta.cols());
    SparseModel m;
    m.threshold = cfg.threshold;
    m.coefficients = Mat::Zero(theta.cols(), y.cols());
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
        std::vector<bool> mask = initial_mask ? (*initial_mask)[static_cast<std::size_t>(k)] : std::vector<bool>(P, true);
        Vec xi = detail::active_lsq(theta, y.col(k), mask, cfg.ridge);
        std::size_t it = 1;
        for (; it < cfg.max_iters + 1; ++it) {
            std::vector<bool> next(P);
            for (std::size_t p = 0; p < P; ++p) next[p] = mask[p] && std::abs(xi[static_cast<Eigen::Index>(p)]) >= cfg.threshold;
            if (next == mask) break;
            mask = std::move(next);
            xi = detail::active_lsq(theta, y.col(k), mask, cfg.ridge);
        }
        for (std::size_t p = 0; p < P; ++p)
            if (!mask[p]) xi[static_cast<Eigen::Index>(p)] = 0.0;
        m.coefficients.col(k) = xi;
        m.empty.push_back(std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }));
        m.active.push_back(std::move(mask));
        m.iterations.push_back(it);
    }
    return m;
}

/// Fit the train rows of `samples` against `lib`.
inline SparseModel sindy_stlsq(const data::InterpSampleSet& samples, const FunctionLibrary& lib,
                               const StlsqConfig& cfg) {
    if (lib.size() == 0) throw InvalidArgument("sindy: empty library");
    SparseModel m = stlsq(lib.evaluate(samples.train_inputs()), samples.train_targets(), cfg);
    m.names = lib.names();
    m.library = lib;
    return m;
}

inline SparseModel sindy_stlsq(const data::InterpSampleSet& samples, const LibrarySpec& spec, const StlsqConfig& cfg) {
    SparseModel m = sindy_stlsq(samples, build_library(spec, samples.dim(), samples.train_inputs()), cfg);
    m.spec = spec;
    return m;
}

/// e.g. "dx1/dt = 1.000*cos(3x) + 1.000*x^3 - 1.000*x"
inline std::string format_equations(const SparseModel& m, int precision = 3) {
    std::ostringstream os;
    for (std::size_t k = 0; k < m.dim(); ++k) {
        os << "dx" << (k + 1) << "/dt =";
        bool first = true;
        for (std::size_t p = 0; p < m.names.size(); ++p) {
            const double c = m.coefficients(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
            if (!m.active[k][p]) continue;
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.*f", precision, std::abs(c));
            if (first)
                os << (c < 0 ? " -" : " ") << buf;
            else
                os << (c < 0 ? " - " : " + ") << buf;
            if (m.names[p] != "1") os << "*" << m.names[p];
            first = false;
        }
        if (first) os << " 0";
        os << '\n';
    }
    return os.str();
}

inline ode::RhsFunction as_rhs(std::shared_ptr<const SparseModel> m, std::string label = "sindy") {
    ode::RhsFunction f;
    f.dim = m->dim();
    f.label = std::move(label);
    f.eval = [m](double t, const Vec& x) {
        Mat tx(1, x.size() + 1);
        tx(0, 0) = t;
        tx.rightCols(x.size()) = x.transpose();
        return Vec(m->predict(tx).row(0).transpose());
    };
    f.eval_batch = [m](const Mat& tx) { return m->predict(tx); };
    return f;
}

inline nlohmann::json to_json(const LibrarySpec& s) {
    return {{"polynomial_degree", s.polynomial_degree},
            {"functions", s.functions},
            {"frequencies", s.frequencies},
            {"include_time", s.include_time}};
}

inline LibrarySpec library_spec_from_json(const nlohmann::json& j) {
    LibrarySpec s;
    s.polynomial_degree = j.at("polynomial_degree").get<int>();
    s.functions = j.at("functions").get<std::vector<std::string>>();
    s.frequencies = j.at("frequencies").get<std::vector<double>>();
    s.include_time = j.at("include_time").get<bool>();
    s.validate();
    return s;
}

inline nlohmann::json to_json(const SparseModel& m) {
    auto coef = nlohmann::json::array();
    for (std::size_t k = 0; k < m.dim(); ++k) {
        nlohmann::json c = nlohmann::json::object();
        for (std::size_t p = 0; p < m.names.size(); ++p)
            if (m.active[k][p]) c[m.names[p]] = m.coefficients(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
        coef.push_back(c);
    }
    return {{"format_version", 1},
            {"library", to_json(m.spec)},
            {"terms", m.names},
            {"threshold", m.threshold},
            {"coefficients", coef},
            {"empty", m.empty},
            {"equations", format_equations(m)}};
}

/// Rebuilds the dictionary from its recipe; `domain` only matters for which
/// log terms exist, so the stored term list is authoritative.
inline SparseModel sparse_model_from_json(const nlohmann::json& j, std::size_t d) {
    SparseModel m;
    m.spec = library_spec_from_json(j.at("library"));
    m.names = j.at("terms").get<std::vector<std::string>>();
    m.threshold = j.at("threshold").get<double>();
    // Build with a positive dummy domain so every optional term exists, then select.
    const Mat domain = Mat::Ones(1, static_cast<Eigen::Index>(d + 1));
    m.library = select_terms(build_library(m.spec, d, domain), m.names);
    const auto& coef = j.at("coefficients");
    require_dims(coef.size() == d, "sindy model: component count mismatch");
    m.coefficients = Mat::Zero(static_cast<Eigen::Index>(m.names.size()), static_cast<Eigen::Index>(d));
    m.active.assign(d, std::vector<bool>(m.names.size(), false));
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t p = 0; p < m.names.size(); ++p)
            if (coef[k].contains(m.names[p])) {
                m.coefficients(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = coef[k][m.names[p]].get<double>();
                m.active[k][p] = true;
            }
    m.empty = j.at("empty").get<std::vector<bool>>();
    return m;
}

}  // namespace odeid::baselines
