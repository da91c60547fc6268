#pragma once

#include "drl/error.hpp"
#include "drl/mdp.hpp"
#include "drl/planner.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drl {

enum class SanityCondition { support_in_trap_free, bold_blackwell_action };

inline const char* to_string(SanityCondition c) {
    return c == SanityCondition::support_in_trap_free ? "condition i (support outside trap-free set)"
                                                      : "condition ii (no Blackwell action above epsilon)";
}

struct SanityViolation {
    StateIndex state;
    SanityCondition condition;
    std::string detail;
};

struct SanityCertificate {
    bool is_sane = true;
    std::vector<SanityViolation> violations;
    /// Per state: a Blackwell action with advisor probability above epsilon, if any.
    std::vector<std::optional<ActionIndex>> witness_actions;
};

/**
 * Checks both sanity conditions at every state: the advisor's support lies in
 * the trap-free set, and some Blackwell-optimal action has probability
 * strictly greater than epsilon.
 */
inline SanityCertificate check_epsilon_sane(const FiniteMdp& m, const AdvisorPolicy& ad, const LimitSolution& limits) {
    if (ad.n_states != m.n_states || ad.n_actions != m.n_actions)
        throw ModelError("advisor dimensions do not match the MDP");
    SanityCertificate cert;
    cert.witness_actions.resize(m.n_states);
    for (StateIndex s = 0; s < m.n_states; ++s) {
        for (ActionIndex a = 0; a < m.n_actions; ++a)
            if (ad.prob(s, a) > 0.0 && !LimitSolution::contains(limits.trap_free[s], a))
                cert.violations.push_back({s, SanityCondition::support_in_trap_free,
                                           "action " + std::to_string(a) + " has advisor probability " +
                                               std::to_string(ad.prob(s, a)) + " but is not trap-free"});
        for (ActionIndex a : limits.blackwell[s])
            if (ad.prob(s, a) > ad.epsilon) {
                cert.witness_actions[s] = a;
                break;
            }
        if (!cert.witness_actions[s])
            cert.violations.push_back({s, SanityCondition::bold_blackwell_action,
                                       "no Blackwell action with probability > " + std::to_string(ad.epsilon)});
    }
    cert.is_sane = cert.violations.empty();
    return cert;
}

/// Advisor putting `mix` on the lowest Blackwell action and spreading the rest
/// uniformly over the trap-free set. Sane at level `epsilon` by construction.
inline AdvisorPolicy synthesize_sane_advisor(const FiniteMdp& m, const LimitSolution& limits, double epsilon,
                                             double mix) {
    if (!(mix > 0.0 && mix <= 1.0)) throw ModelError("mix must lie in (0,1]");
    if (!(epsilon > 0.0 && epsilon < mix)) throw ModelError("epsilon must lie in (0, mix)");
    AdvisorPolicy ad{m.n_states, m.n_actions, std::vector<double>(m.n_states * m.n_actions, 0.0), epsilon};
    for (StateIndex s = 0; s < m.n_states; ++s) {
        const auto& safe = limits.trap_free[s];
        ad.probs[s * m.n_actions + limits.blackwell[s].front()] += mix;
        for (ActionIndex a : safe) ad.probs[s * m.n_actions + a] += (1.0 - mix) / double(safe.size());
    }
    return ad;
}

/// Per-state action that is Blackwell optimal and taken by the advisor with
/// probability above epsilon (lowest index among qualifying actions).
struct OptimalActionTable {
    std::vector<ActionIndex> action;

    ActionIndex operator()(StateIndex s) const { return action[s]; }
};

inline OptimalActionTable build_optimal_table(const FiniteMdp& m, const AdvisorPolicy& ad,
                                              const LimitSolution& limits, double epsilon) {
    OptimalActionTable table;
    table.action.resize(m.n_states);
    for (StateIndex s = 0; s < m.n_states; ++s) {
        bool found = false;
        for (ActionIndex a : limits.blackwell[s])
            if (ad.prob(s, a) > epsilon) {
                table.action[s] = a;
                found = true;
                break;
            }
        if (!found)
            throw ModelError("no Blackwell action with advisor probability > epsilon at state " + std::to_string(s) +
                             "; sanity certificate is stale");
    }
    return table;
}

} // namespace drl
