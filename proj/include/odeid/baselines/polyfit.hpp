#pragma once

// Least-squares polynomial regression of velocity samples on (t, x).
//
// Each input is affinely mapped to [−1, 1] over the training rows before the
// monomials are formed; the solve is a complete orthogonal decomposition of
// the design matrix, so rank-deficient systems get the minimum-norm solution.

#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"
#include "odeid/ode/rhs.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>

namespace odeid::baselines {

using Exponents = std::vector<int>;

/// All exponent vectors over `vars` variables with total degree ≤ `degree`,
/// ordered by total degree, then lexicographically (descending in the first variable).
inline std::vector<Exponents> monomials(std::size_t vars, int degree) {
    require(degree >= 0, "polynomial degree must be non-negative");
    std::vector<Exponents> out;
    Exponents e(vars, 0);
    for (int total = 0; total <= degree; ++total) {
        auto rec = [&](auto& self, std::size_t v, int left) -> void {
            if (v + 1 == vars) {
                e[v] = left;
                out.push_back(e);
                return;
            }
            for (int p = left; p >= 0; --p) {
                e[v] = p;
                self(self, v + 1, left - p);
            }
        };
        if (vars == 0) {
            if (total == 0) out.push_back(e);
        } else {
            rec(rec, 0, total);
        }
    }
    return out;
}

struct PolyfitConfig {
    int degree = 20;
    bool use_time = true;
};

struct PolyModel {
    int degree = 0;
    bool use_time = true;
    std::vector<Exponents> terms;
    Vec shift, scale;  // z = (u − shift) ⊙ scale for the used inputs u
    Mat coef;          // |terms| × d, in the scaled variables z
    bool rank_deficient = false;
    Eigen::Index rank = 0;

    std::size_t dim() const { return static_cast<std::size_t>(coef.cols()); }

    /// Used input columns of a (t, x) batch.
    Mat select_inputs(const Mat& tx) const { return use_time ? tx : Mat(tx.rightCols(tx.cols() - 1)); }

    Mat design(const Mat& tx) const {
        const Mat u = select_inputs(tx);
        require_dims(u.cols() == shift.size(), "polyfit: input dimension mismatch");
        const Eigen::Index n = u.rows(), D = u.cols();
        // powers[c](r, p) = z_{r,c}^p
        std::vector<Mat> powers(static_cast<std::size_t>(D), Mat(n, degree + 1));
        for (Eigen::Index c = 0; c < D; ++c) {
            Mat& pw = powers[static_cast<std::size_t>(c)];
            pw.col(0).setOnes();
            const Vec z = ((u.col(c).array() - shift[c]) * scale[c]).matrix();
            for (int p = 1; p <= degree; ++p) pw.col(p) = pw.col(p - 1).cwiseProduct(z);
        }
        Mat X(n, static_cast<Eigen::Index>(terms.size()));
        for (std::size_t q = 0; q < terms.size(); ++q) {
            Vec col = Vec::Ones(n);
            for (Eigen::Index c = 0; c < D; ++c)
                if (terms[q][static_cast<std::size_t>(c)] > 0)
                    col = col.cwiseProduct(powers[static_cast<std::size_t>(c)].col(terms[q][static_cast<std::size_t>(c)]));
            X.col(static_cast<Eigen::Index>(q)) = col;
        }
        return X;
    }

    Mat predict(const Mat& tx) const { return design(tx) * coef; }

    /// Coefficients of the same monomials in the original (unscaled) inputs,
    /// by binomial expansion of each (s·u − s·m)^e factor.
    Mat original_coefficients() const {
        std::map<Exponents, std::size_t> index;
        for (std::size_t q = 0; q < terms.size(); ++q) index[terms[q]] = q;
        const auto D = static_cast<std::size_t>(shift.size());
        Mat out = Mat::Zero(coef.rows(), coef.cols());
        auto binom = [](int n, int k) {
            double r = 1.0;
            for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
            return r;
        };
        for (std::size_t q = 0; q < terms.size(); ++q) {
            // Enumerate r ≤ e componentwise.
            Exponents r(D, 0);
            for (;;) {
                double w = 1.0;
                for (std::size_t c = 0; c < D; ++c) {
                    const int e = terms[q][c], rc = r[c];
                    const double s = scale[static_cast<Eigen::Index>(c)], m = shift[static_cast<Eigen::Index>(c)];
                    w *= binom(e, rc) * std::pow(s, rc) * std::pow(-s * m, e - rc);
                }
                out.row(static_cast<Eigen::Index>(index.at(r))) += w * coef.row(static_cast<Eigen::Index>(q));
                std::size_t c = 0;
                while (c < D && r[c] == terms[q][c]) r[c++] = 0;
                if (c == D) break;
                ++r[c];
            }
        }
        return out;
    }
};

/// Per-component least squares over all monomials up to `cfg.degree` on the
/// train rows of `samples`.
inline PolyModel polyfit(const data::InterpSampleSet& samples, const PolyfitConfig& cfg) {
    require(cfg.degree >= 0, "polyfit: degree must be non-negative");
    const Mat tx = samples.train_inputs(), y = samples.train_targets();
    PolyModel m;
    m.degree = cfg.degree;
    m.use_time = cfg.use_time;
    const Mat u = m.select_inputs(tx);
    m.terms = monomials(static_cast<std::size_t>(u.cols()), cfg.degree);
    if (static_cast<std::size_t>(u.rows()) < m.terms.size())
        throw InvalidArgument("polyfit: " + std::to_string(u.rows()) + " rows cannot determine " +
                              std::to_string(m.terms.size()) + " coefficients");
    m.shift.resize(u.cols());
    m.scale.resize(u.cols());
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        const double lo = u.col(c).minCoeff(), hi = u.col(c).maxCoeff();
        m.shift[c] = 0.5 * (lo + hi);
        m.scale[c] = hi > lo ? 2.0 / (hi - lo) : 1.0;
    }
    const Mat X = m.design(tx);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(X);
    m.rank = cod.rank();
    m.rank_deficient = m.rank < X.cols();
    m.coef = cod.solve(y);
    return m;
}

inline ode::RhsFunction as_rhs(std::shared_ptr<const PolyModel> m, std::string label = "polyfit") {
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

inline nlohmann::json to_json(const PolyModel& m) {
    auto coef = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.coef.rows(); ++r) coef.push_back(nn::detail::vec_to_json(m.coef.row(r).transpose()));
    return {{"format_version", 1},
            {"degree", m.degree},
            {"use_time", m.use_time},
            {"terms", m.terms},
            {"shift", nn::detail::vec_to_json(m.shift)},
            {"scale", nn::detail::vec_to_json(m.scale)},
            {"coefficients_scaled", coef},
            {"rank", m.rank},
            {"rank_deficient", m.rank_deficient}};
}

inline PolyModel polymodel_from_json(const nlohmann::json& j) {
    PolyModel m;
    m.degree = j.at("degree").get<int>();
    m.use_time = j.at("use_time").get<bool>();
    m.terms = j.at("terms").get<std::vector<Exponents>>();
    m.shift = nn::detail::vec_from_json(j.at("shift"));
    m.scale = nn::detail::vec_from_json(j.at("scale"));
    const auto& c = j.at("coefficients_scaled");
    m.coef.resize(static_cast<Eigen::Index>(c.size()), c.empty() ? 0 : static_cast<Eigen::Index>(c[0].size()));
    for (std::size_t r = 0; r < c.size(); ++r) m.coef.row(static_cast<Eigen::Index>(r)) = nn::detail::vec_from_json(c[r]).transpose();
    m.rank = j.at("rank").get<Eigen::Index>();
    m.rank_deficient = j.at("rank_deficient").get<bool>();
    require_dims(m.terms.size() == static_cast<std::size_t>(m.coef.rows()), "polyfit model: term count mismatch");
    return m;
}

}  // namespace odeid::baselines
