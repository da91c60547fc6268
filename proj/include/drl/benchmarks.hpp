#pragma once

// Canonical small instances used by the tests, the bundled configs and the
// acceptance suite.

#include "drl/mdp.hpp"
#include "drl/random.hpp"

#include <vector>

namespace drl::bench {

/// Two states, two actions. Action 0 keeps s0 (reward 1); action 1 falls into
/// the absorbing s1 (reward 0). With `swapped` the roles of the actions flip.
inline FiniteMdp trap_mdp(bool swapped = false) {
    const std::size_t safe = swapped ? 1 : 0;
    std::vector<double> t(2 * 2 * 2, 0.0);
    auto at = [&](std::size_t s, std::size_t a, std::size_t n) -> double& { return t[(s * 2 + a) * 2 + n]; };
    at(0, safe, 0) = 1.0;
    at(0, 1 - safe, 1) = 1.0;
    at(1, 0, 1) = 1.0;
    at(1, 1, 1) = 1.0;
    return make_mdp(2, 2, 0, std::move(t), {1.0, 0.0});
}

/// Deterministic advisor on the safe action in s0, uniform in the trap.
inline AdvisorPolicy trap_advisor(bool swapped, double epsilon) {
    const std::size_t safe = swapped ? 1 : 0;
    std::vector<double> p(4, 0.0);
    p[safe] = 1.0;
    p[2] = p[3] = 0.5;
    return make_advisor(2, 2, std::move(p), epsilon);
}

/// The trap MDP and its action-swapped twin as a two-hypothesis set.
inline HypothesisSet trap_pair(double epsilon = 0.4) {
    const auto m0 = trap_mdp(false);
    const auto m1 = trap_mdp(true);
    return make_hypotheses(2, 2, 0, m0.reward, {m0.transition, m1.transition},
                           {trap_advisor(false, epsilon), trap_advisor(true, epsilon)});
}

/// States equal the last action taken; reward depends on that action.
inline FiniteMdp bandit_mdp(const std::vector<double>& rewards) {
    const std::size_t n = rewards.size();
    std::vector<double> t(n * n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < n; ++a) t[(s * n + a) * n + a] = 1.0;
    return make_mdp(n, n, 0, std::move(t), rewards);
}

/// Deterministic cycle with the same reward everywhere.
inline FiniteMdp constant_reward_mdp(std::size_t n_states, std::size_t n_actions, double c) {
    std::vector<double> t(n_states * n_actions * n_states, 0.0);
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) t[(s * n_actions + a) * n_states + (s + a + 1) % n_states] = 1.0;
    return make_mdp(n_states, n_actions, 0, std::move(t), std::vector<double>(n_states, c));
}

/// Reward 0 in the start state, then an absorbing reward-1 state: V(s0, g) = g.
inline FiniteMdp two_phase_mdp() {
    return make_mdp(2, 1, 0, {0.0, 1.0, 0.0, 1.0}, {0.0, 1.0});
}

/**
 * Trap family with a safe fallback action.
 *
 * States: 0 = low (reward `low_reward`), 1 = high (reward 1), 2 = trap
 * (reward 0, absorbing). Actions: 0 and 1..N. Under hypothesis k, action 0
 * reaches high with probability noise[k] (else low), action 1+k reaches high,
 * and every other action 1+j falls into the trap. Advisor k takes action 0
 * with probability `advisor_fallback` and action 1+k otherwise; in the trap
 * it is uniform.
 */
inline HypothesisSet trap_family(const std::vector<double>& noise, double advisor_fallback, double epsilon,
                                 double low_reward = 0.5) {
    const std::size_t n = noise.size();
    const std::size_t S = 3, A = n + 1;
    std::vector<std::vector<double>> kernels;
    std::vector<AdvisorPolicy> advisors;
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> t(S * A * S, 0.0);
        auto at = [&](std::size_t s, std::size_t a, std::size_t x) -> double& { return t[(s * A + a) * S + x]; };
        for (std::size_t s = 0; s < 2; ++s) {
            at(s, 0, 1) = noise[k];
            at(s, 0, 0) = 1.0 - noise[k];
            for (std::size_t j = 0; j < n; ++j) at(s, 1 + j, j == k ? 1 : 2) = 1.0;
        }
        for (std::size_t a = 0; a < A; ++a) at(2, a, 2) = 1.0;
        kernels.push_back(std::move(t));

        std::vector<double> p(S * A, 0.0);
        for (std::size_t s = 0; s < 2; ++s) {
            p[s * A + 0] = advisor_fallback;
            p[s * A + 1 + k] = 1.0 - advisor_fallback;
        }
        for (std::size_t a = 0; a < A; ++a) p[2 * A + a] = 1.0 / double(A);
        advisors.push_back(make_advisor(S, A, std::move(p), epsilon));
    }
    return make_hypotheses(S, A, 0, {low_reward, 1.0, 0.0}, std::move(kernels), std::move(advisors));
}

/// Trap pair with a safe but slow fallback action; the regret benchmark.
inline HypothesisSet trap_bench(double epsilon = 0.2) { return trap_family({0.0, 0.0}, 0.7, epsilon); }

/// Three hypotheses with noisy evidence on the fallback action.
inline HypothesisSet noisy_trap_triple(double epsilon = 0.2) {
    return trap_family({0.2, 0.5, 0.8}, 0.6, epsilon);
}

/// Random dense MDP with rewards in [0,1]; roughly `zero_fraction` of kernel
/// entries are forced to zero (every row keeps at least one successor).
inline FiniteMdp random_mdp(std::size_t n_states, std::size_t n_actions, RandomStream& rng,
                            double zero_fraction = 0.3) {
    std::vector<double> t(n_states * n_actions * n_states);
    std::vector<double> r(n_states);
    for (auto& x : r) x = rng.uniform();
    for (std::size_t row = 0; row < n_states * n_actions; ++row) {
        double sum = 0.0;
        const std::size_t keep = static_cast<std::size_t>(rng.uniform() * double(n_states));
        for (std::size_t x = 0; x < n_states; ++x) {
            double w = (x == keep || rng.uniform() >= zero_fraction) ? rng.uniform() + 1e-3 : 0.0;
            t[row * n_states + x] = w;
            sum += w;
        }
        for (std::size_t x = 0; x < n_states; ++x) t[row * n_states + x] /= sum;
    }
    return make_mdp(n_states, n_actions, 0, std::move(t), std::move(r));
}

} // namespace drl::bench
