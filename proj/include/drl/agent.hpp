#pragma once

#include "drl/advisor.hpp"
#include "drl/error.hpp"
#include "drl/mdp.hpp"
#include "drl/planner.hpp"
#include "drl/random.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace drl {

/// External parameters of the delegative posterior-sampling policy.
struct AgentParams {
    /// Discard threshold. 0 disables discarding (belief is then the exact posterior).
    double eta = 0.1;
    /// Episode length: a fresh hypothesis is sampled every `episode_len` steps.
    std::size_t episode_len = 1;
    double epsilon = 0.1;
    /// Recorded only; the policy depends on the discount through eta and T.
    double gamma = 0.99;
};

inline void validate_params(const AgentParams& p) {
    if (!(p.eta >= 0.0 && p.eta < 1.0)) throw ModelError("eta must lie in [0,1)");
    if (p.episode_len < 1) throw ModelError("episode length must be at least 1");
}

/// Everything the agent knows a priori: hypotheses, their composed
/// environments, limit sets and per-hypothesis optimal action tables.
struct AgentModel {
    HypothesisSet hyps;
    std::vector<DelegativeEnv> envs;
    std::vector<LimitSolution> limits;
    std::vector<OptimalActionTable> tables;

    std::size_t size() const noexcept { return hyps.size(); }
    ActionIndex delegate_action() const noexcept { return hyps.n_actions; }
};

/// Builds the agent model; throws ModelError when some advisor is not
/// epsilon-sane for its own hypothesis.
inline AgentModel make_agent_model(const HypothesisSet& hyps, double epsilon, const LimitOptions& opts = {}) {
    AgentModel model;
    model.hyps = hyps;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        const FiniteMdp m = hyps.mdp(k);
        const auto& ad = hyps.advisors[k];
        auto lim = limit_quantities(m, opts);
        AdvisorPolicy at_level = ad;
        at_level.epsilon = epsilon;
        const auto cert = check_epsilon_sane(m, at_level, lim);
        if (!cert.is_sane) {
            std::string msg = "advisor " + std::to_string(k) + " is not " + std::to_string(epsilon) + "-sane:";
            for (const auto& v : cert.violations)
                msg += "\n  state " + std::to_string(v.state) + ": " + to_string(v.condition) + ": " + v.detail;
            throw ModelError(msg);
        }
        model.tables.push_back(build_optimal_table(m, ad, lim, epsilon));
        model.envs.push_back(compose_delegative(m, ad));
        model.limits.push_back(std::move(lim));
    }
    return model;
}

struct AgentCounters {
    std::uint64_t delegations = 0;
    std::uint64_t discard_events = 0;
    std::uint64_t fallback_events = 0;
};

/// Mutable per-rollout state; single owner.
struct AgentState {
    std::vector<double> belief;
    std::size_t hypothesis = 0;
    std::size_t step_in_episode = 0;
    StateIndex last_state = 0; ///< composed state
    AgentCounters counters;

    bool hypothesis_discarded() const { return belief[hypothesis] <= 0.0; }
};

/// Uniform belief, first hypothesis sampled, positioned at (s0, no advice).
inline AgentState reset(const AgentModel& model, const AgentParams& params, RandomStream& rng) {
    validate_params(params);
    const std::size_t n = model.size();
    AgentState st;
    st.belief.assign(n, 1.0 / double(n));
    st.hypothesis = rng.discrete(st.belief);
    st.step_in_episode = 0;
    st.last_state = model.envs.front().encode(model.hyps.initial_state, model.hyps.n_actions);
    return st;
}

namespace detail {

/// True when every hypothesis still in the belief's support gives `a` positive
/// advisor probability at base state s.
inline bool safe_under_support(const AgentModel& model, const std::vector<double>& belief, StateIndex s,
                               ActionIndex a) {
    for (std::size_t k = 0; k < belief.size(); ++k)
        if (belief[k] > 0.0 && model.hyps.advisors[k].prob(s, a) == 0.0) return false;
    return true;
}

} // namespace detail

/**
 * Chooses a composed action. With a live hypothesis J, proposes J's table
 * action and delegates if any surviving hypothesis' advisor would never take
 * it. With J discarded, takes the lowest-index action every surviving advisor
 * might take, else delegates.
 */
inline ActionIndex select_action(const AgentState& st, const AgentModel& model) {
    const StateIndex s = model.envs.front().base_state(st.last_state);
    const ActionIndex bottom = model.delegate_action();
    if (!st.hypothesis_discarded()) {
        const ActionIndex candidate = model.tables[st.hypothesis](s);
        return detail::safe_under_support(model, st.belief, s, candidate) ? candidate : bottom;
    }
    for (ActionIndex a = 0; a < model.hyps.n_actions; ++a)
        if (detail::safe_under_support(model, st.belief, s, a)) return a;
    return bottom;
}

/**
 * Bayes update on the observed composed successor, then the discard pass,
 * then episode bookkeeping. A zero normalizer (in either normalization)
 * resets the belief to uniform over all hypotheses and is counted.
 */
inline void observe_and_update(AgentState& st, ActionIndex taken, StateIndex next, const AgentModel& model,
                               const AgentParams& params, RandomStream& rng) {
    const std::size_t n = model.size();
    const auto& env0 = model.envs.front();
    if (env0.is_delegated(next)) ++st.counters.delegations;

    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        st.belief[k] *= model.envs[k].composed.prob(st.last_state, taken, next);
        total += st.belief[k];
    }
    auto reset_uniform = [&] {
        st.belief.assign(n, 1.0 / double(n));
        ++st.counters.fallback_events;
    };
    if (total > 0.0) {
        for (double& w : st.belief) w /= total;
    } else {
        reset_uniform();
    }

    if (params.eta > 0.0) {
        bool discarded = false;
        double kept = 0.0;
        for (double& w : st.belief) {
            if (w > 0.0 && w < params.eta) {
                w = 0.0;
                discarded = true;
            }
            kept += w;
        }
        if (discarded) {
            ++st.counters.discard_events;
            if (kept > 0.0) {
                for (double& w : st.belief) w /= kept;
            } else {
                reset_uniform();
            }
        }
    }

    st.last_state = next;
    if (++st.step_in_episode == params.episode_len) {
        st.step_in_episode = 0;
        st.hypothesis = rng.discrete(st.belief);
    }
}

struct RunResult {
    Trajectory trajectory;
    AgentState state;
};

/**
 * Runs the agent for `horizon` steps against `env` (the true L^K).
 * `on_step(from, action, to, state)` is invoked after every update; use it to
 * collect statistics without materializing the trajectory.
 */
template <class OnStep>
void run_policy(const DelegativeEnv& env, AgentState& st, const AgentModel& model, const AgentParams& params,
                std::size_t horizon, RandomStream& rng, OnStep&& on_step) {
    for (std::size_t n = 0; n < horizon; ++n) {
        const StateIndex from = st.last_state;
        const ActionIndex act = select_action(st, model);
        const StateIndex to = sample_step(env, from, act, rng);
        observe_and_update(st, act, to, model, params, rng);
        on_step(from, act, to, static_cast<const AgentState&>(st));
    }
}

inline RunResult run_policy(const DelegativeEnv& env, AgentState st, const AgentModel& model,
                            const AgentParams& params, std::size_t horizon, RandomStream& rng) {
    RunResult out;
    out.trajectory.steps.reserve(horizon);
    run_policy(env, st, model, params, horizon, rng, [&](StateIndex from, ActionIndex a, StateIndex to, const AgentState&) {
        out.trajectory.steps.push_back({from, a, to});
        out.trajectory.rewards.push_back(env.composed.reward[from]);
    });
    out.state = std::move(st);
    return out;
}

} // namespace drl
