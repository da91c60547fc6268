#pragma once

#include "drl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace drl {

/// Entropy in nats, with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

/// KL(p || q) in nats; +infinity when p is not absolutely continuous w.r.t. q.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ModelError("kl_divergence: size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
        d += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(d, 0.0);
}

/// Joint distribution table over rows x columns (e.g. [k][x]).
struct DiscreteJoint {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> table;

    double operator()(std::size_t r, std::size_t c) const { return table[r * cols + c]; }

    std::vector<double> row_marginal() const {
        std::vector<double> m(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) m[r] += (*this)(r, c);
        return m;
    }

    std::vector<double> col_marginal() const {
        std::vector<double> m(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) m[c] += (*this)(r, c);
        return m;
    }

    /// Conditional distribution of the column variable given row r.
    std::vector<double> conditional(std::size_t r) const {
        std::vector<double> out(table.begin() + std::ptrdiff_t(r * cols), table.begin() + std::ptrdiff_t((r + 1) * cols));
        double z = 0.0;
        for (double x : out) z += x;
        if (z > 0.0)
            for (double& x : out) x /= z;
        return out;
    }
};

/// I(row; col) = E_row[KL(P(col | row) || P(col))], in nats.
inline double mutual_information(const DiscreteJoint& j) {
    const auto pr = j.row_marginal();
    const auto pc = j.col_marginal();
    double mi = 0.0;
    for (std::size_t r = 0; r < j.rows; ++r)
        if (pr[r] > 0.0) mi += pr[r] * kl_divergence(j.conditional(r), pc);
    return std::max(mi, 0.0);
}

/// ln(1 + eps (1 - eps)^(1/eps - 1)): information gained per unit of eta by
/// each delegation of the agent.
inline double delegation_info_floor(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ModelError("epsilon must lie in (0,1)");
    return std::log1p(epsilon * std::pow(1.0 - epsilon, 1.0 / epsilon - 1.0));
}

struct PropositionCheck {
    bool hypothesis_holds = false;
    bool bound_holds = false;
    double lhs = 0.0; ///< mutual information
    double rhs = 0.0; ///< lower bound
};

/**
 * Largest eta for which the delegation-information hypothesis holds on joint
 * [k][x]: 1 - max over a of P_K[P(X=a|K) > 0 and (a = a* or P(X=a*|K) <= eps)].
 */
inline double delegation_hypothesis_slack(const DiscreteJoint& j, std::size_t a_star, double epsilon) {
    const auto pk = j.row_marginal();
    double worst = 0.0;
    for (std::size_t a = 0; a < j.cols; ++a) {
        double mass = 0.0;
        for (std::size_t k = 0; k < j.rows; ++k) {
            if (pk[k] <= 0.0) continue;
            const auto cond = j.conditional(k);
            if (cond[a] > 0.0 && (a == a_star || cond[a_star] <= epsilon)) mass += pk[k];
        }
        worst = std::max(worst, mass);
    }
    return 1.0 - worst;
}

/// Evaluates hypothesis and conclusion of the delegation-information lemma
/// exactly: I(K;X) >= eta * delegation_info_floor(eps).
inline PropositionCheck check_prop_delegation_information(const DiscreteJoint& j, std::size_t a_star, double epsilon,
                                                          double eta, double slack = 1e-12) {
    if (!(epsilon < 1.0 / double(j.cols))) throw ModelError("epsilon must be below 1/|A|");
    PropositionCheck out;
    out.hypothesis_holds = delegation_hypothesis_slack(j, a_star, epsilon) >= eta - slack;
    out.lhs = mutual_information(j);
    out.rhs = eta * delegation_info_floor(epsilon);
    out.bound_holds = out.lhs >= out.rhs - slack;
    return out;
}

/// Joint of (K, J, U) with U supported on a finite subset of [0,1].
struct ThompsonJoint {
    std::size_t n = 0;
    std::vector<double> support; ///< values of U
    std::vector<double> table;   ///< [k][j][u]

    double operator()(std::size_t k, std::size_t jj, std::size_t u) const {
        return table[(k * n + jj) * support.size() + u];
    }
};

struct ThompsonCheck {
    bool hypotheses_hold = false;
    bool bound_holds = false;
    double lhs = 0.0; ///< I(K; J, U)
    double rhs = 0.0; ///< 2 eta (E[U | K, J = K] - E[U])^2
};

/**
 * Checks the posterior-sampling information lemma by exact summation:
 * given equal marginals zeta for K and J, I(K;J) = 0 and zeta >= eta on its
 * support, I(K; J, U) >= 2 eta (sum_j zeta(j) E[U|K=j,J=j] - E[U])^2.
 */
inline ThompsonCheck check_prop_thompson(const ThompsonJoint& joint, double eta, double slack = 1e-12) {
    const std::size_t n = joint.n, m = joint.support.size();
    for (double u : joint.support)
        if (!(u >= 0.0 && u <= 1.0)) throw ModelError("U support must lie in [0,1]");

    DiscreteJoint kj{n, n, std::vector<double>(n * n, 0.0)};
    DiscreteJoint k_ju{n, n * m, joint.table};
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t jj = 0; jj < n; ++jj)
            for (std::size_t u = 0; u < m; ++u) kj.table[k * n + jj] += joint(k, jj, u);

    const auto zk = kj.row_marginal();
    const auto zj = kj.col_marginal();
    bool ok = true;
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(zk[k] - zj[k]) > slack) ok = false;
        if (zk[k] > 0.0 && zk[k] < eta - slack) ok = false;
    }
    if (mutual_information(kj) > slack) ok = false;

    ThompsonCheck out;
    out.hypotheses_hold = ok;
    double eu = 0.0, diag = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t jj = 0; jj < n; ++jj) {
            const double pkj = kj(k, jj);
            double mass_u = 0.0;
            for (std::size_t u = 0; u < m; ++u) {
                eu += joint(k, jj, u) * joint.support[u];
                mass_u += joint(k, jj, u) * joint.support[u];
            }
            if (k == jj && pkj > 0.0) diag += zj[jj] * (mass_u / pkj);
        }
    out.lhs = mutual_information(k_ju);
    out.rhs = 2.0 * eta * (diag - eu) * (diag - eu);
    out.bound_holds = out.lhs >= out.rhs - slack;
    return out;
}

} // namespace drl
