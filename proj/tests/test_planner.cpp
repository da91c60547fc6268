#include "drl/benchmarks.hpp"
#include "drl/planner.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

using namespace drl;

namespace {

// Plain value iteration on the normalized Bellman operator; an oracle that
// shares no code with the policy-iteration solver.
std::vector<double> value_iteration(const FiniteMdp& m, double gamma, int sweeps) {
    std::vector<double> v(m.n_states, 0.0), next(m.n_states);
    for (int it = 0; it < sweeps; ++it) {
        for (std::size_t s = 0; s < m.n_states; ++s) {
            double best = -1.0;
            for (std::size_t a = 0; a < m.n_actions; ++a) {
                double q = (1.0 - gamma) * m.reward[s];
                for (std::size_t t = 0; t < m.n_states; ++t) q += gamma * m.prob(s, a, t) * v[t];
                best = std::max(best, q);
            }
            next[s] = best;
        }
        v.swap(next);
    }
    return v;
}

// V(start) - V(X) changes sign at 1 - gamma ~ 1e-6: the argmax at the start
// state flips inside the top of the sweep.
FiniteMdp late_flip_mdp() {
    // 0 start (reward 0): a0 -> X, a1 -> Y. X absorbing (0.5). Y (1) -> Z. Z absorbing (0.5 - 5e-7).
    const std::size_t S = 4, A = 2;
    std::vector<double> t(S * A * S, 0.0);
    auto at = [&](std::size_t s, std::size_t a, std::size_t x) -> double& { return t[(s * A + a) * S + x]; };
    at(0, 0, 1) = at(0, 1, 2) = 1.0;
    for (std::size_t a = 0; a < A; ++a) {
        at(1, a, 1) = 1.0;
        at(2, a, 3) = 1.0;
        at(3, a, 3) = 1.0;
    }
    return make_mdp(S, A, 0, t, {0.0, 0.5, 1.0, 0.5 - 5e-7});
}

} // namespace

TEST(Planner, TrapValues) {
    const auto m = bench::trap_mdp();
    for (double g : {0.5, 0.9, 0.99, 0.999}) {
        const auto sol = solve_discounted(m, g);
        EXPECT_NEAR(sol.v[0], 1.0, 1e-12) << g;
        EXPECT_NEAR(sol.v[1], 0.0, 1e-12) << g;
        EXPECT_NEAR(sol.qv(0, 1), 1.0 - g, 1e-12) << g;
        EXPECT_EQ(sol.optimal_actions[0], std::vector<ActionIndex>{0});
        EXPECT_EQ(sol.policy[0], 0u);
    }
}

TEST(Planner, ConstantRewardValueIsTheConstant) {
    const auto m = bench::constant_reward_mdp(4, 3, 0.37);
    for (double g : {0.5, 0.9, 0.999})
        for (double v : solve_discounted(m, g).v) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Planner, MatchesValueIteration) {
    RandomStream rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = bench::random_mdp(2 + trial % 5, 1 + trial % 4, rng);
        const auto sol = solve_discounted(m, 0.9);
        const auto vi = value_iteration(m, 0.9, 400);
        for (std::size_t s = 0; s < m.n_states; ++s) EXPECT_NEAR(sol.v[s], vi[s], 1e-10);
    }
}

TEST(Planner, BellmanConsistency) {
    RandomStream rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = bench::random_mdp(5, 3, rng);
        const double g = 0.99;
        const auto sol = solve_discounted(m, g);
        for (std::size_t s = 0; s < m.n_states; ++s) {
            double best = 0.0;
            for (std::size_t a = 0; a < m.n_actions; ++a) {
                double q = (1 - g) * m.reward[s];
                for (std::size_t t = 0; t < m.n_states; ++t) q += g * m.prob(s, a, t) * sol.v[t];
                EXPECT_NEAR(sol.qv(s, a), q, 1e-10);
                best = std::max(best, q);
            }
            EXPECT_NEAR(sol.v[s], best, 1e-10);
            const double lo = *std::min_element(m.reward.begin(), m.reward.end());
            const double hi = *std::max_element(m.reward.begin(), m.reward.end());
            EXPECT_GE(sol.v[s], lo - 1e-12);
            EXPECT_LE(sol.v[s], hi + 1e-12);
        }
    }
}

TEST(Planner, MonotoneInReward) {
    RandomStream rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = bench::random_mdp(4, 2, rng);
        auto raised = m;
        const std::size_t s = trial % 4;
        raised.reward[s] = std::min(1.0, raised.reward[s] + 0.2);
        const auto v = solve_discounted(m, 0.95).v;
        const auto w = solve_discounted(raised, 0.95).v;
        for (std::size_t x = 0; x < 4; ++x) EXPECT_GE(w[x], v[x] - 1e-12);
    }
}

TEST(Planner, GammaOutsideUnitInterval) {
    const auto m = bench::trap_mdp();
    EXPECT_THROW(solve_discounted(m, 1.0), ModelError);
    EXPECT_THROW(solve_discounted(m, 0.0), ModelError);
    EXPECT_THROW(solve_discounted(m, 1.5), ModelError);
}

TEST(PolicyEvaluation, TrapPolicies) {
    const auto m = bench::trap_mdp();
    EXPECT_NEAR(evaluate_policy(m, deterministic_policy(m, {0, 0}), 0.9)[0], 1.0, 1e-12);
    EXPECT_NEAR(evaluate_policy(m, deterministic_policy(m, {1, 1}), 0.9)[0], 0.1, 1e-12);
}

TEST(PolicyEvaluation, OptimalPolicyAttainsOptimalValue) {
    RandomStream rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = bench::random_mdp(4, 3, rng);
        const auto sol = solve_discounted(m, 0.97);
        const auto v = evaluate_policy(m, deterministic_policy(m, sol.policy), 0.97);
        for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(v[s], sol.v[s], 1e-9);
        const auto u = evaluate_policy(m, uniform_policy(m), 0.97);
        for (std::size_t s = 0; s < 4; ++s) EXPECT_LE(u[s], sol.v[s] + 1e-12);
    }
}

TEST(Limits, Trap) {
    const auto lim = limit_quantities(bench::trap_mdp());
    EXPECT_NEAR(lim.v0[0], 1.0, 1e-9);
    EXPECT_NEAR(lim.v0[1], 0.0, 1e-9);
    EXPECT_EQ(lim.trap_free[0], std::vector<ActionIndex>{0});
    EXPECT_EQ(lim.blackwell[0], std::vector<ActionIndex>{0});
    EXPECT_EQ(lim.trap_free[1], (std::vector<ActionIndex>{0, 1}));
    EXPECT_EQ(lim.tau, 0.0);
}

TEST(Limits, BanditHasNoTraps) {
    const auto m = bench::bandit_mdp({0.2, 0.9, 0.5});
    const auto lim = limit_quantities(m);
    for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_EQ(lim.trap_free[s], (std::vector<ActionIndex>{0, 1, 2}));
        EXPECT_EQ(lim.blackwell[s], std::vector<ActionIndex>{1});
        EXPECT_NEAR(lim.v0[s], 0.9, 1e-9);
    }
}

TEST(Limits, BlackwellSetsAreTrapFreeAndMartingale) {
    RandomStream rng(12);
    std::vector<FiniteMdp> cases;
    for (std::size_t k = 0; k < 3; ++k) cases.push_back(bench::noisy_trap_triple().mdp(k));
    for (int i = 0; i < 12; ++i) cases.push_back(bench::random_mdp(3 + i % 3, 2 + i % 2, rng));
    std::size_t checked = 0;
    for (const auto& m : cases) {
        LimitSolution lim;
        try {
            lim = limit_quantities(m);
        } catch (const BlackwellUnstable&) {
            continue;
        }
        ++checked;
        for (std::size_t s = 0; s < m.n_states; ++s) {
            for (auto a : lim.blackwell[s]) EXPECT_TRUE(LimitSolution::contains(lim.trap_free[s], a));
            for (auto a : lim.trap_free[s]) {
                double next = 0.0;
                for (std::size_t t = 0; t < m.n_states; ++t) next += m.prob(s, a, t) * lim.v0[t];
                EXPECT_NEAR(next, lim.v0[s], 2e-4);
            }
        }
    }
    EXPECT_GE(checked, 12u);
}

TEST(Limits, LateArgmaxFlipIsUnstable) {
    EXPECT_THROW(limit_quantities(late_flip_mdp()), BlackwellUnstable);
}

TEST(Limits, GammaThresholdIsASweptValue) {
    const auto lim = limit_quantities(bench::trap_bench().mdp(0));
    EXPECT_GE(lim.gamma_threshold, 0.99);
    EXPECT_LT(lim.gamma_threshold, 1.0);
}

TEST(Tau, ClosedForms) {
    EXPECT_EQ(tau_bound(bench::constant_reward_mdp(3, 2, 0.6), 0.9), 0.0);
    EXPECT_NEAR(tau_bound(bench::trap_mdp(), 0.9), 0.0, 1e-12);
    EXPECT_NEAR(tau_bound(bench::two_phase_mdp(), 0.9), 1.0, 1e-6);
    EXPECT_NEAR(tau_bound(bench::two_phase_mdp(), 0.999), 1.0, 1e-6);
}

TEST(Tau, TooCloseToOne) {
    EXPECT_THROW(tau_bound(bench::trap_mdp(), 1.0 - 1e-7), NumericError);
}

TEST(Tau, MeanValueBound) {
    RandomStream rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = bench::random_mdp(3, 2, rng);
        LimitSolution lim;
        try {
            lim = limit_quantities(m);
        } catch (const BlackwellUnstable&) {
            continue;
        }
        for (double g : {0.9, 0.99}) {
            const double tau = tau_bound(m, g);
            const auto v = solve_discounted(m, g).v;
            for (std::size_t s = 0; s < 3; ++s) EXPECT_LE(std::abs(v[s] - lim.v0[s]), 1.1 * tau * (1 - g) + 1e-6);
        }
    }
}

TEST(Planner, TrapRuntime) {
    const auto t0 = std::chrono::steady_clock::now();
    for (double g : {0.9, 0.99}) solve_discounted(bench::trap_mdp(), g);
    limit_quantities(bench::trap_mdp());
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
}
