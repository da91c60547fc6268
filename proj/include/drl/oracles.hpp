#pragma once

// Randomized sweeps over small instances for the information lemmas and the
// regret decomposition. Used by `drl check-bounds` and the acceptance suite.

#include "drl/benchmarks.hpp"
#include "drl/harness.hpp"
#include "drl/infogain.hpp"
#include "drl/planner.hpp"
#include "drl/random.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace drl {

struct DelegationInstance {
    DiscreteJoint joint; ///< [k][x]
    std::size_t a_star = 0;
    double epsilon = 0.0;
    double eta = 0.0;
};

struct ThompsonInstance {
    ThompsonJoint joint;
    double eta = 0.0;
};

struct OracleSweep {
    std::size_t instances = 0;
    std::size_t hypothesis_failures = 0; ///< generated instances whose hypothesis did not hold
    std::size_t violations = 0;          ///< hypothesis held but the bound did not
    double min_gap = 0.0;                ///< min over instances of lhs - rhs

    bool ok() const { return violations == 0 && hypothesis_failures == 0; }
};

namespace detail {

inline std::vector<double> random_simplex(std::size_t n, RandomStream& rng, double zero_fraction) {
    std::vector<double> p(n, 0.0);
    const std::size_t keep = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * double(n)));
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == keep || rng.uniform() >= zero_fraction) p[i] = rng.uniform() + 1e-3;
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

} // namespace detail

/// Random stochastic policy with some zero entries in every row.
inline StochasticPolicy random_policy(std::size_t n_states, std::size_t n_actions, RandomStream& rng) {
    StochasticPolicy pi{n_states, n_actions, {}};
    for (std::size_t s = 0; s < n_states; ++s) {
        const auto row = detail::random_simplex(n_actions, rng, 0.3);
        pi.probs.insert(pi.probs.end(), row.begin(), row.end());
    }
    return pi;
}

/**
 * Random instance satisfying the delegation-information hypothesis with the
 * largest admissible eta. |A| in [2, max_actions], N in [2, max_hyps],
 * epsilon uniform below 1/|A|.
 */
inline DelegationInstance random_delegation_instance(RandomStream& rng, std::size_t max_actions = 4,
                                                     std::size_t max_hyps = 4) {
    for (;;) {
        DelegationInstance inst;
        const std::size_t A = 2 + static_cast<std::size_t>(rng.uniform() * double(max_actions - 1));
        const std::size_t N = 2 + static_cast<std::size_t>(rng.uniform() * double(max_hyps - 1));
        inst.epsilon = (0.02 + 0.97 * rng.uniform()) / double(A);
        inst.a_star = static_cast<std::size_t>(rng.uniform() * double(A));
        const auto pk = detail::random_simplex(N, rng, 0.0);
        inst.joint = {N, A, std::vector<double>(N * A, 0.0)};
        for (std::size_t k = 0; k < N; ++k) {
            auto cond = detail::random_simplex(A, rng, 0.45);
            for (std::size_t a = 0; a < A; ++a) inst.joint.table[k * A + a] = pk[k] * cond[a];
        }
        inst.eta = delegation_hypothesis_slack(inst.joint, inst.a_star, inst.epsilon);
        if (inst.eta > 1e-6) return inst;
    }
}

/// Random (K, J, U) with K, J independent and both distributed as zeta;
/// eta = min zeta.
inline ThompsonInstance random_thompson_instance(RandomStream& rng, std::size_t max_hyps = 3,
                                                 std::size_t max_support = 3) {
    ThompsonInstance inst;
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * double(max_hyps - 1));
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * double(max_support));
    const auto zeta = detail::random_simplex(n, rng, 0.0);
    inst.joint.n = n;
    for (std::size_t u = 0; u < m; ++u) inst.joint.support.push_back(rng.uniform());
    inst.joint.table.assign(n * n * m, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) {
            const auto pu = detail::random_simplex(m, rng, 0.3);
            for (std::size_t u = 0; u < m; ++u) inst.joint.table[(k * n + j) * m + u] = zeta[k] * zeta[j] * pu[u];
        }
    inst.eta = *std::min_element(zeta.begin(), zeta.end());
    return inst;
}

inline OracleSweep sweep_delegation_information(std::size_t count, std::uint64_t seed, double slack = 1e-12) {
    RandomStream rng(derive_seed({seed, 8}));
    OracleSweep out;
    out.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) {
        const auto inst = random_delegation_instance(rng);
        const auto chk = check_prop_delegation_information(inst.joint, inst.a_star, inst.epsilon, inst.eta, slack);
        ++out.instances;
        if (!chk.hypothesis_holds) ++out.hypothesis_failures;
        else if (!chk.bound_holds) ++out.violations;
        out.min_gap = std::min(out.min_gap, chk.lhs - chk.rhs);
    }
    return out;
}

inline OracleSweep sweep_thompson(std::size_t count, std::uint64_t seed, double slack = 1e-12) {
    RandomStream rng(derive_seed({seed, 10}));
    OracleSweep out;
    out.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) {
        const auto inst = random_thompson_instance(rng);
        const auto chk = check_prop_thompson(inst.joint, inst.eta, slack);
        ++out.instances;
        if (!chk.hypotheses_hold) ++out.hypothesis_failures;
        else if (!chk.bound_holds) ++out.violations;
        out.min_gap = std::min(out.min_gap, chk.lhs - chk.rhs);
    }
    return out;
}

struct IdentitySweep {
    std::size_t instances = 0;
    std::size_t violations = 0;
    double max_residual = 0.0;
    double bound = 0.0;

    bool ok() const { return violations == 0; }
};

/// Regret decomposition on random 3-state MDPs with random stochastic policies.
inline IdentitySweep sweep_regret_identity(std::size_t count, std::uint64_t seed, double gamma = 0.9,
                                           std::size_t horizon = 200) {
    RandomStream rng(derive_seed({seed, 7}));
    IdentitySweep out;
    for (std::size_t i = 0; i < count; ++i) {
        const auto m = bench::random_mdp(3, 2 + i % 2, rng);
        const auto pi = random_policy(m.n_states, m.n_actions, rng);
        const auto r = check_regret_identity(m, pi, gamma, horizon);
        ++out.instances;
        out.bound = r.bound;
        out.max_residual = std::max(out.max_residual, r.residual);
        if (r.residual > r.bound) ++out.violations;
    }
    return out;
}

} // namespace drl
