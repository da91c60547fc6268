#pragma once

#include "drl/error.hpp"
#include "drl/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace drl {

/// Memoryless stochastic policy pi(a|s), stored as [s][a].
struct StochasticPolicy {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;

    double prob(StateIndex s, ActionIndex a) const { return probs[s * n_actions + a]; }
};

inline StochasticPolicy deterministic_policy(const FiniteMdp& m, const std::vector<ActionIndex>& actions) {
    StochasticPolicy pi{m.n_states, m.n_actions, std::vector<double>(m.n_states * m.n_actions, 0.0)};
    for (StateIndex s = 0; s < m.n_states; ++s) pi.probs[s * m.n_actions + actions.at(s)] = 1.0;
    return pi;
}

inline StochasticPolicy uniform_policy(const FiniteMdp& m) {
    return {m.n_states, m.n_actions, std::vector<double>(m.n_states * m.n_actions, 1.0 / double(m.n_actions))};
}

/// Normalized discounted optimum: values and Q-values lie in [0,1].
struct PlanningSolution {
    double gamma = 0.0;
    std::vector<double> v;
    std::vector<double> q; ///< [s][a]
    std::vector<std::vector<ActionIndex>> optimal_actions;
    std::vector<ActionIndex> policy; ///< lowest-index optimal action per state

    double qv(StateIndex s, ActionIndex a) const { return q[s * (q.size() / v.size()) + a]; }
};

struct PlannerOptions {
    double tie_tolerance = 1e-9;
    double residual_tolerance = 1e-10;
};

namespace detail {

using LdVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using LdMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// Solves v = (1-gamma) R + gamma P_pi v in extended precision.
inline LdVector evaluate_ld(const FiniteMdp& m, const StochasticPolicy& pi, long double gamma) {
    const auto n = static_cast<Eigen::Index>(m.n_states);
    LdMatrix lhs = LdMatrix::Identity(n, n);
    LdVector rhs(n);
    LdVector row(n);
    for (StateIndex s = 0; s < m.n_states; ++s) {
        rhs(Eigen::Index(s)) = (1.0L - gamma) * static_cast<long double>(m.reward[s]);
        row.setZero();
        for (ActionIndex a = 0; a < m.n_actions; ++a) {
            const long double w = pi.prob(s, a);
            if (w == 0.0L) continue;
            for (StateIndex t = 0; t < m.n_states; ++t) row(Eigen::Index(t)) += w * static_cast<long double>(m.prob(s, a, t));
        }
        // Rows stored in double sum to 1 only up to double rounding; rescale so
        // the extended-precision system is exactly stochastic.
        row /= row.sum();
        lhs.row(Eigen::Index(s)) -= gamma * row.transpose();
    }
    return lhs.partialPivLu().solve(rhs);
}

inline std::vector<long double> q_from_v(const FiniteMdp& m, const LdVector& v, long double gamma) {
    std::vector<long double> q(m.n_states * m.n_actions);
    for (StateIndex s = 0; s < m.n_states; ++s)
        for (ActionIndex a = 0; a < m.n_actions; ++a) {
            long double ev = 0.0L, mass = 0.0L;
            for (StateIndex t = 0; t < m.n_states; ++t) {
                const long double p = m.prob(s, a, t);
                ev += p * v(Eigen::Index(t));
                mass += p;
            }
            ev /= mass;
            q[s * m.n_actions + a] = (1.0L - gamma) * static_cast<long double>(m.reward[s]) + gamma * ev;
        }
    return q;
}

struct DiscountedLd {
    LdVector v;
    std::vector<long double> q;
    std::vector<ActionIndex> policy;
};

/**
 * Howard policy iteration with extended-precision direct evaluation.
 * Switches action only on improvement above `improve_tol`, so the loop cannot
 * cycle on numerical ties; terminates in finitely many steps.
 */
inline DiscountedLd solve_ld(const FiniteMdp& m, long double gamma) {
    const long double improve_tol = 1e-15L;
    // Greedy start against the immediate reward of successors.
    std::vector<ActionIndex> policy(m.n_states, 0);
    {
        LdVector r(static_cast<Eigen::Index>(m.n_states));
        for (StateIndex s = 0; s < m.n_states; ++s) r(Eigen::Index(s)) = m.reward[s];
        auto q = q_from_v(m, r, gamma);
        for (StateIndex s = 0; s < m.n_states; ++s)
            for (ActionIndex a = 1; a < m.n_actions; ++a)
                if (q[s * m.n_actions + a] > q[s * m.n_actions + policy[s]]) policy[s] = a;
    }
    const std::size_t cap = 10 * m.n_states * m.n_actions + 100;
    for (std::size_t it = 0; it < cap; ++it) {
        LdVector v = evaluate_ld(m, deterministic_policy(m, policy), gamma);
        auto q = q_from_v(m, v, gamma);
        bool changed = false;
        for (StateIndex s = 0; s < m.n_states; ++s) {
            const long double* qs = q.data() + s * m.n_actions;
            ActionIndex best = 0;
            for (ActionIndex a = 1; a < m.n_actions; ++a)
                if (qs[a] > qs[best]) best = a;
            if (qs[best] > qs[policy[s]] + improve_tol) {
                policy[s] = best;
                changed = true;
            }
        }
        if (!changed) return {std::move(v), std::move(q), std::move(policy)};
    }
    throw NumericError("policy iteration did not converge within " + std::to_string(cap) + " iterations");
}

inline std::vector<ActionIndex> argmax_set(std::span<const long double> q, long double tol) {
    const long double best = *std::max_element(q.begin(), q.end());
    std::vector<ActionIndex> out;
    for (ActionIndex a = 0; a < q.size(); ++a)
        if (q[a] >= best - tol) out.push_back(a);
    return out;
}

inline void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ModelError("discount must lie in (0,1)");
}

inline double clamp01(long double x) { return static_cast<double>(std::clamp(x, 0.0L, 1.0L)); }

} // namespace detail

/**
 * Optimal normalized values V(s,gamma) and Q(s,a,gamma).
 *
 * Policy iteration with direct solves gives the exact fixed point up to
 * rounding; the Bellman residual of the result is checked before returning.
 */
inline PlanningSolution solve_discounted(const FiniteMdp& m, double gamma, const PlannerOptions& opts = {}) {
    detail::check_gamma(gamma);
    auto sol = detail::solve_ld(m, gamma);

    PlanningSolution out;
    out.gamma = gamma;
    out.v.resize(m.n_states);
    out.q.resize(sol.q.size());
    out.optimal_actions.resize(m.n_states);
    out.policy.resize(m.n_states);
    for (StateIndex s = 0; s < m.n_states; ++s) {
        std::span<const long double> qs(sol.q.data() + s * m.n_actions, m.n_actions);
        const long double best = *std::max_element(qs.begin(), qs.end());
        if (std::abs(best - sol.v(Eigen::Index(s))) > opts.residual_tolerance)
            throw NumericError("Bellman residual above tolerance at state " + std::to_string(s));
        out.v[s] = detail::clamp01(best);
        for (ActionIndex a = 0; a < m.n_actions; ++a) out.q[s * m.n_actions + a] = detail::clamp01(qs[a]);
        out.optimal_actions[s] = detail::argmax_set(qs, opts.tie_tolerance);
        out.policy[s] = out.optimal_actions[s].front();
    }
    return out;
}

/// Exact normalized value of a memoryless policy (direct linear solve).
inline std::vector<double> evaluate_policy(const FiniteMdp& m, const StochasticPolicy& pi, double gamma) {
    detail::check_gamma(gamma);
    if (pi.n_states != m.n_states || pi.n_actions != m.n_actions || pi.probs.size() != m.n_states * m.n_actions)
        throw ModelError("policy dimensions do not match the MDP");
    const long double g = gamma;
    auto v = detail::evaluate_ld(m, pi, g);
    long double residual = 0.0L;
    for (StateIndex s = 0; s < m.n_states; ++s) {
        long double rhs = (1.0L - g) * m.reward[s];
        for (ActionIndex a = 0; a < m.n_actions; ++a)
            for (StateIndex t = 0; t < m.n_states; ++t)
                rhs += g * pi.prob(s, a) * m.prob(s, a, t) * v(Eigen::Index(t));
        residual = std::max(residual, std::abs(rhs - v(Eigen::Index(s))));
    }
    if (!(residual <= 1e-10L)) throw NumericError("policy evaluation residual above tolerance");
    std::vector<double> out(m.n_states);
    for (StateIndex s = 0; s < m.n_states; ++s) out[s] = detail::clamp01(v(Eigen::Index(s)));
    return out;
}

struct TauOptions {
    std::size_t points = 48;
    /// Grid spans 1 - theta in ((1-gamma) * span_ratio, 1 - gamma).
    double span_ratio = 1e-3;
    /// Smallest 1 - gamma for which the finite differences stay resolvable.
    double min_gap = 1e-6;
};

/**
 * Grid estimate of sup over theta in (gamma, 1) of max_s |dV(s,theta)/dtheta|.
 *
 * Central differences with step 1% of (1 - theta) at log-spaced points in
 * 1 - theta. Throws NumericError when gamma is too close to 1 to resolve.
 */
inline double tau_bound(const FiniteMdp& m, double gamma, const TauOptions& opts = {}) {
    detail::check_gamma(gamma);
    const double gap = 1.0 - gamma;
    if (gap < opts.min_gap)
        throw NumericError("tau grid too close to 1 for numeric resolution; use gamma <= " +
                           std::to_string(1.0 - opts.min_gap));
    const std::size_t n = std::max<std::size_t>(opts.points, 32);
    const long double lo = std::log(static_cast<long double>(gap) * opts.span_ratio);
    const long double hi = std::log(static_cast<long double>(gap));
    long double tau = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double alpha = std::exp(hi + (lo - hi) * (static_cast<long double>(i) + 0.5L) / n);
        const long double h = alpha * 0.01L;
        const auto up = detail::solve_ld(m, 1.0L - alpha + h).v;
        const auto down = detail::solve_ld(m, 1.0L - alpha - h).v;
        // Differences at the level of solver round-off (which grows like
        // 1/alpha) carry no slope information; treat them as exact zeros.
        const long double noise = 1024.0L * std::numeric_limits<long double>::epsilon() / alpha;
        for (StateIndex s = 0; s < m.n_states; ++s) {
            const long double diff = std::abs(up(Eigen::Index(s)) - down(Eigen::Index(s)));
            if (diff > noise) tau = std::max(tau, diff / (2.0L * h));
        }
    }
    return static_cast<double>(tau);
}

/// Limits gamma -> 1 and the long-run action sets.
struct LimitSolution {
    std::vector<double> v0;
    std::vector<double> q0; ///< [s][a]
    std::vector<std::vector<ActionIndex>> trap_free;
    std::vector<std::vector<ActionIndex>> blackwell;
    /// Smallest swept discount from which the Blackwell sets stayed fixed.
    /// An observed surrogate for the existence threshold, not an exact value.
    double gamma_threshold = 0.0;
    double tau = 0.0;

    double q0v(StateIndex s, ActionIndex a) const { return q0[s * (q0.size() / v0.size()) + a]; }

    static bool contains(const std::vector<ActionIndex>& set, ActionIndex a) {
        return std::find(set.begin(), set.end(), a) != set.end();
    }
};

struct LimitOptions {
    double trap_tolerance = 1e-4;
    double tie_tolerance = 1e-9;
    /// Sweep uses gamma = 1 - 10^-e for each exponent, ascending.
    std::vector<int> sweep_exponents{2, 3, 4, 5, 6, 7};
    TauOptions tau{};
};

/**
 * V0, Q0 by polynomial (Richardson/Neville) extrapolation to 1 - gamma = 0
 * from the three largest swept discounts; A0 by the trap tolerance; Blackwell
 * sets from the argmax at the highest discount, required to coincide across
 * the top three sweep values.
 */
inline LimitSolution limit_quantities(const FiniteMdp& m, const LimitOptions& opts = {}) {
    const auto& exps = opts.sweep_exponents;
    if (exps.size() < 3) throw ModelError("limit sweep needs at least three discounts");
    const std::size_t S = m.n_states, A = m.n_actions;

    std::vector<long double> alphas;
    std::vector<std::vector<long double>> qs;
    std::vector<std::vector<std::vector<ActionIndex>>> argmaxes;
    for (int e : exps) {
        const long double alpha = std::pow(10.0L, -static_cast<long double>(e));
        auto sol = detail::solve_ld(m, 1.0L - alpha);
        std::vector<std::vector<ActionIndex>> sets(S);
        for (StateIndex s = 0; s < S; ++s)
            sets[s] = detail::argmax_set({sol.q.data() + s * A, A}, opts.tie_tolerance);
        alphas.push_back(alpha);
        qs.push_back(std::move(sol.q));
        argmaxes.push_back(std::move(sets));
    }

    const std::size_t n = alphas.size();
    LimitSolution out;
    out.q0.resize(S * A);
    out.v0.resize(S);
    out.trap_free.resize(S);
    for (std::size_t i = 0; i < S * A; ++i) {
        // Lagrange interpolation through the last three points, evaluated at 0.
        long double acc = 0.0L;
        for (std::size_t j = n - 3; j < n; ++j) {
            long double w = 1.0L;
            for (std::size_t l = n - 3; l < n; ++l)
                if (l != j) w *= alphas[l] / (alphas[l] - alphas[j]);
            acc += w * qs[j][i];
        }
        out.q0[i] = detail::clamp01(acc);
    }
    for (StateIndex s = 0; s < S; ++s) {
        const double* q0s = out.q0.data() + s * A;
        out.v0[s] = *std::max_element(q0s, q0s + A);
        for (ActionIndex a = 0; a < A; ++a)
            if (q0s[a] >= out.v0[s] - opts.trap_tolerance) out.trap_free[s].push_back(a);
    }

    const auto& top = argmaxes.back();
    for (std::size_t j = n - 3; j < n; ++j)
        for (StateIndex s = 0; s < S; ++s)
            if (argmaxes[j][s] != top[s])
                throw BlackwellUnstable("blackwell-unstable: argmax set at state " + std::to_string(s) +
                                        " changes between gamma = 1-1e-" + std::to_string(exps[j]) +
                                        " and gamma = 1-1e-" + std::to_string(exps.back()));
    std::size_t first_stable = n - 3;
    while (first_stable > 0 && argmaxes[first_stable - 1] == top) --first_stable;
    out.blackwell = top;
    out.gamma_threshold = static_cast<double>(1.0L - alphas[first_stable]);

    for (StateIndex s = 0; s < S; ++s)
        for (ActionIndex a : out.blackwell[s])
            if (!LimitSolution::contains(out.trap_free[s], a))
                throw BlackwellUnstable("blackwell-unstable: Blackwell action " + std::to_string(a) + " at state " +
                                        std::to_string(s) + " is not trap-free");

    const double tau_gamma = std::min(out.gamma_threshold, 1.0 - 10.0 * opts.tau.min_gap);
    out.tau = tau_bound(m, tau_gamma, opts.tau);
    return out;
}

} // namespace drl
