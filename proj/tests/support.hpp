#pragma once

// Oracles shared by the unit tests and the acceptance runner.

#include "drl/agent.hpp"
#include "drl/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace drl::testkit {

/// Probability of composed successor (t, c) after composed action `act` at
/// base state s under hypothesis k, written from the definition rather than
/// read from the composed kernel.
inline double successor_prob(const HypothesisSet& h, std::size_t k, std::size_t s, std::size_t act, std::size_t t,
                             std::size_t c) {
    const std::size_t A = h.n_actions, S = h.n_states;
    const auto kernel = [&](std::size_t a) { return h.kernels[k][(s * A + a) * S + t]; };
    if (act < A) return c == A ? kernel(act) : 0.0;
    return c == A ? 0.0 : kernel(c) * h.advisors[k].probs[s * A + c];
}

struct BayesReport {
    std::size_t histories = 0;
    double max_error = 0.0;
};

/**
 * Walks every history of length <= depth (all composed actions, every
 * successor with positive mixture probability) and compares the agent's
 * belief (eta = 0) with prior x likelihood, normalized once at the end.
 */
inline BayesReport bayes_exhaustive(const AgentModel& model, std::size_t depth) {
    const auto& h = model.hyps;
    const std::size_t N = h.size(), A = h.n_actions, S = h.n_states;
    AgentParams params;
    params.eta = 0.0;
    params.episode_len = 1;
    RandomStream rng(1);
    BayesReport rep;

    auto visit = [&](auto&& self, const AgentState& st, const std::vector<double>& lik, std::size_t s,
                     std::size_t left) -> void {
        ++rep.histories;
        double z = 0.0;
        for (double l : lik) z += l / double(N);
        for (std::size_t k = 0; k < N; ++k)
            rep.max_error = std::max(rep.max_error, std::abs(st.belief[k] - lik[k] / double(N) / z));
        if (left == 0) return;
        for (std::size_t act = 0; act <= A; ++act)
            for (std::size_t t = 0; t < S; ++t)
                for (std::size_t c = 0; c <= A; ++c) {
                    std::vector<double> next(N);
                    double mix = 0.0;
                    for (std::size_t k = 0; k < N; ++k) {
                        const double p = successor_prob(h, k, s, act, t, c);
                        next[k] = lik[k] * p;
                        mix += st.belief[k] * p;
                    }
                    if (mix <= 0.0) continue;
                    AgentState child = st;
                    observe_and_update(child, act, t * (A + 1) + c, model, params, rng);
                    self(self, child, next, t, left - 1);
                }
    };
    AgentState root = reset(model, params, rng);
    visit(visit, root, std::vector<double>(N, 1.0), h.initial_state, depth);
    return rep;
}

/// Two hypotheses on three states with full-support kernels and
/// synthesized sane advisors, so every history carries information.
inline HypothesisSet noisy_pair(std::uint64_t seed, double epsilon) {
    RandomStream rng(seed);
    std::vector<std::vector<double>> kernels;
    std::vector<AdvisorPolicy> advisors;
    std::vector<double> reward;
    for (std::size_t k = 0; k < 2; ++k) {
        for (;;) {
            auto m = bench::random_mdp(3, 2, rng, 0.0);
            if (k == 0) reward = m.reward;
            m.reward = reward;
            try {
                const auto lim = limit_quantities(m);
                advisors.push_back(synthesize_sane_advisor(m, lim, epsilon, 0.7));
            } catch (const BlackwellUnstable&) {
                continue;
            }
            kernels.push_back(m.transition);
            break;
        }
    }
    return make_hypotheses(3, 2, 0, reward, kernels, advisors);
}

} // namespace drl::testkit
