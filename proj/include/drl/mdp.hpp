#pragma once

#include "drl/error.hpp"
#include "drl/random.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace drl {

/// Row-sum tolerance for every probability vector in the library.
inline constexpr double kProbTolerance = 1e-9;

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/**
 * Finite Markov decision process with a state-only reward.
 *
 * The transition kernel is stored densely as [s][a][t]. Instances are plain
 * values; build them with make_mdp() to get validation and renormalization,
 * and treat them as immutable afterwards.
 */
struct FiniteMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    StateIndex initial_state = 0;
    std::vector<double> transition;
    std::vector<double> reward;

    double prob(StateIndex s, ActionIndex a, StateIndex t) const {
        return transition[(s * n_actions + a) * n_states + t];
    }

    std::span<const double> row(StateIndex s, ActionIndex a) const {
        return {transition.data() + (s * n_actions + a) * n_states, n_states};
    }
};

/// Memoryless stochastic advisor Ad(a|s) together with its claimed sanity level.
struct AdvisorPolicy {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;
    double epsilon = 0.0;

    double prob(StateIndex s, ActionIndex a) const { return probs[s * n_actions + a]; }
    std::span<const double> row(StateIndex s) const {
        return {probs.data() + s * n_actions, n_actions};
    }
};

struct Violation {
    std::string location;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }

    void add(std::string location, std::string message) {
        violations.push_back({std::move(location), std::move(message)});
    }

    void append(const ValidationReport& other, const std::string& prefix = {}) {
        for (const auto& v : other.violations) add(prefix + v.location, v.message);
    }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& v : violations) os << v.location << ": " << v.message << '\n';
        return os.str();
    }
};

namespace detail {

inline std::string loc(const char* what, std::size_t i) {
    return std::string(what) + "[" + std::to_string(i) + "]";
}

inline std::string loc(const char* what, std::size_t i, std::size_t j) {
    return std::string(what) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

/// Checks one probability row; returns an empty string when valid.
inline std::string check_distribution(std::span<const double> row) {
    double sum = 0.0;
    for (double p : row) {
        if (!std::isfinite(p)) return "non-finite probability";
        if (p < 0.0) return "negative probability " + std::to_string(p);
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance) {
        std::ostringstream os;
        os.precision(12);
        os << "row sums to " << sum << ", not 1";
        return os.str();
    }
    return {};
}

inline void normalize(std::span<double> row) {
    double sum = 0.0;
    for (double p : row) sum += p;
    for (double& p : row) p /= sum;
}

} // namespace detail

/// Reports every invariant violation of an MDP; ok() iff all invariants hold.
inline ValidationReport validate_mdp(const FiniteMdp& m) {
    ValidationReport report;
    if (m.n_states == 0) report.add("n_states", "must be positive");
    if (m.n_actions == 0) report.add("n_actions", "must be positive");
    if (!report.ok()) return report;
    if (m.initial_state >= m.n_states) report.add("initial_state", "out of range");
    if (m.transition.size() != m.n_states * m.n_actions * m.n_states) {
        report.add("transition", "expected " + std::to_string(m.n_states * m.n_actions * m.n_states) +
                                     " entries, got " + std::to_string(m.transition.size()));
    } else {
        for (StateIndex s = 0; s < m.n_states; ++s)
            for (ActionIndex a = 0; a < m.n_actions; ++a)
                if (auto msg = detail::check_distribution(m.row(s, a)); !msg.empty())
                    report.add(detail::loc("transition", s, a), msg);
    }
    if (m.reward.size() != m.n_states) {
        report.add("reward", "expected " + std::to_string(m.n_states) + " entries");
    } else {
        for (StateIndex s = 0; s < m.n_states; ++s)
            if (!(m.reward[s] >= 0.0 && m.reward[s] <= 1.0))
                report.add(detail::loc("reward", s), "reward out of [0,1]");
    }
    return report;
}

/// Reports every invariant violation of an advisor (shape, rows, epsilon range).
inline ValidationReport validate_advisor(const AdvisorPolicy& ad) {
    ValidationReport report;
    if (ad.n_states == 0 || ad.n_actions == 0) {
        report.add("advisor", "empty dimensions");
        return report;
    }
    if (ad.probs.size() != ad.n_states * ad.n_actions) {
        report.add("probs", "expected " + std::to_string(ad.n_states * ad.n_actions) + " entries");
    } else {
        for (StateIndex s = 0; s < ad.n_states; ++s)
            if (auto msg = detail::check_distribution(ad.row(s)); !msg.empty())
                report.add(detail::loc("probs", s), msg);
    }
    if (!(ad.epsilon > 0.0 && ad.epsilon < 1.0)) report.add("epsilon", "must lie in (0,1)");
    return report;
}

/// Validates, renormalizes rows that are within tolerance, and throws
/// ModelError listing every violation otherwise.
inline FiniteMdp make_mdp(std::size_t n_states, std::size_t n_actions, StateIndex initial_state,
                          std::vector<double> transition, std::vector<double> reward) {
    FiniteMdp m{n_states, n_actions, initial_state, std::move(transition), std::move(reward)};
    if (auto report = validate_mdp(m); !report.ok())
        throw ModelError("invalid MDP:\n" + report.to_string());
    for (StateIndex s = 0; s < n_states; ++s)
        for (ActionIndex a = 0; a < n_actions; ++a)
            detail::normalize({m.transition.data() + (s * n_actions + a) * n_states, n_states});
    return m;
}

inline AdvisorPolicy make_advisor(std::size_t n_states, std::size_t n_actions, std::vector<double> probs,
                                  double epsilon) {
    AdvisorPolicy ad{n_states, n_actions, std::move(probs), epsilon};
    if (auto report = validate_advisor(ad); !report.ok())
        throw ModelError("invalid advisor:\n" + report.to_string());
    for (StateIndex s = 0; s < n_states; ++s)
        detail::normalize({ad.probs.data() + s * n_actions, n_actions});
    return ad;
}

/**
 * The MDP as perceived by an agent that may delegate to an advisor.
 *
 * Composed states are pairs (s, b) where b is the advisor's action on the
 * previous step, or the delegation marker when the agent acted directly.
 * Index of (s, b) is s * (|A| + 1) + b, with the marker stored as b = |A|.
 * The composed action |A| is the delegation action.
 */
struct DelegativeEnv {
    FiniteMdp base;
    AdvisorPolicy advisor;
    FiniteMdp composed;

    std::size_t n_base_actions() const noexcept { return base.n_actions; }
    ActionIndex delegate_action() const noexcept { return base.n_actions; }
    /// Advisor component value meaning "no delegation on the last step".
    ActionIndex no_advice() const noexcept { return base.n_actions; }

    StateIndex encode(StateIndex s, ActionIndex b) const noexcept { return s * (base.n_actions + 1) + b; }
    StateIndex base_state(StateIndex x) const noexcept { return x / (base.n_actions + 1); }
    ActionIndex advice(StateIndex x) const noexcept { return x % (base.n_actions + 1); }
    bool is_delegated(StateIndex x) const noexcept { return advice(x) != no_advice(); }
};

/// Probability of composed successor (t, c) from base state s under composed
/// action `act`, computed directly from the base kernel and advisor.
inline double delegative_prob(const FiniteMdp& m, const AdvisorPolicy& ad, StateIndex s, ActionIndex act,
                              StateIndex t, ActionIndex c) {
    const ActionIndex bottom = m.n_actions;
    if (act != bottom) return c == bottom ? m.prob(s, act, t) : 0.0;
    return c == bottom ? 0.0 : m.prob(s, c, t) * ad.prob(s, c);
}

inline DelegativeEnv compose_delegative(const FiniteMdp& m, const AdvisorPolicy& ad) {
    if (m.n_states != ad.n_states || m.n_actions != ad.n_actions)
        throw ModelError("advisor dimensions do not match the MDP");
    const std::size_t na = m.n_actions + 1;
    const std::size_t ns = m.n_states * na;

    FiniteMdp c;
    c.n_states = ns;
    c.n_actions = na;
    c.initial_state = m.initial_state * na + m.n_actions;
    c.transition.assign(ns * na * ns, 0.0);
    c.reward.resize(ns);
    for (StateIndex x = 0; x < ns; ++x) {
        const StateIndex s = x / na;
        c.reward[x] = m.reward[s];
        for (ActionIndex act = 0; act < na; ++act) {
            double* row = c.transition.data() + (x * na + act) * ns;
            for (StateIndex t = 0; t < m.n_states; ++t)
                for (ActionIndex b = 0; b < na; ++b) row[t * na + b] = delegative_prob(m, ad, s, act, t, b);
        }
    }
    return DelegativeEnv{m, ad, std::move(c)};
}

/// Draws the successor composed state of x under composed action `act`.
inline StateIndex sample_step(const DelegativeEnv& env, StateIndex x, ActionIndex act, RandomStream& rng) {
    if (x >= env.composed.n_states || act >= env.composed.n_actions)
        throw ModelError("sample_step: index out of range");
    return rng.discrete(env.composed.row(x, act));
}

/**
 * Set of N hypotheses (T^k, Ad^k) sharing states, actions, initial state and
 * reward. N = 1 is accepted so single-hypothesis runs can be expressed; the
 * parameter formulas that involve ln N require N >= 2.
 */
struct HypothesisSet {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    StateIndex initial_state = 0;
    std::vector<double> reward;
    std::vector<std::vector<double>> kernels;
    std::vector<AdvisorPolicy> advisors;

    std::size_t size() const noexcept { return kernels.size(); }

    FiniteMdp mdp(std::size_t k) const { return FiniteMdp{n_states, n_actions, initial_state, kernels[k], reward}; }
};

inline ValidationReport validate_hypotheses(const HypothesisSet& h) {
    ValidationReport report;
    if (h.kernels.empty()) report.add("kernels", "at least one hypothesis required");
    if (h.kernels.size() != h.advisors.size()) report.add("advisors", "one advisor per kernel required");
    for (std::size_t k = 0; k < h.kernels.size(); ++k) {
        const std::string prefix = "hypothesis[" + std::to_string(k) + "].";
        report.append(validate_mdp(h.mdp(k)), prefix);
        if (k < h.advisors.size()) {
            const auto& ad = h.advisors[k];
            if (ad.n_states != h.n_states || ad.n_actions != h.n_actions)
                report.add(prefix + "advisor", "dimension mismatch");
            else
                report.append(validate_advisor(ad), prefix + "advisor.");
        }
    }
    return report;
}

inline HypothesisSet make_hypotheses(std::size_t n_states, std::size_t n_actions, StateIndex initial_state,
                                     std::vector<double> reward, std::vector<std::vector<double>> kernels,
                                     std::vector<AdvisorPolicy> advisors) {
    HypothesisSet h{n_states, n_actions, initial_state, std::move(reward), std::move(kernels), std::move(advisors)};
    if (auto report = validate_hypotheses(h); !report.ok())
        throw ModelError("invalid hypothesis set:\n" + report.to_string());
    for (auto& kernel : h.kernels) kernel = make_mdp(n_states, n_actions, initial_state, kernel, h.reward).transition;
    for (auto& ad : h.advisors) ad = make_advisor(ad.n_states, ad.n_actions, ad.probs, ad.epsilon);
    return h;
}

struct TrajectoryStep {
    StateIndex from;
    ActionIndex action;
    StateIndex to;
};

/// Finite history in the composed MDP. rewards[i] is the reward of the state
/// occupied before step i.
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::vector<double> rewards;
};

/// Number of steps whose successor carries an advisor action.
inline std::size_t count_delegations(const DelegativeEnv& env, const Trajectory& traj) {
    std::size_t n = 0;
    for (const auto& step : traj.steps)
        if (env.is_delegated(step.to)) ++n;
    return n;
}

} // namespace drl
