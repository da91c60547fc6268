#pragma once

#include "drl/agent.hpp"
#include "drl/error.hpp"
#include "drl/infogain.hpp"
#include "drl/mdp.hpp"
#include "drl/planner.hpp"
#include "drl/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace drl {

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

enum class PolicyKind { agent, oracle, always_delegate };

inline const char* to_string(PolicyKind k) {
    switch (k) {
    case PolicyKind::agent: return "agent";
    case PolicyKind::oracle: return "oracle";
    case PolicyKind::always_delegate: return "always_delegate";
    }
    return "?";
}

struct ExperimentConfig {
    std::vector<double> gammas{0.99};
    double epsilon = 0.1;
    std::optional<double> eta;                 ///< nullopt: derived from the discount
    std::optional<std::size_t> episode_len;    ///< nullopt: derived from the discount
    std::size_t rollouts = 1000;
    double truncation_tol = 1e-3;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> tail_thresholds{0, 1, 5, 10};
    PolicyKind policy = PolicyKind::agent;
};

inline void validate_config(const ExperimentConfig& c) {
    if (c.gammas.empty()) throw ModelError("at least one discount required");
    for (double g : c.gammas)
        if (!(g > 0.0 && g < 1.0)) throw ModelError("discounts must lie in (0,1)");
    if (c.rollouts < 1) throw ModelError("rollouts must be at least 1");
    if (!(c.truncation_tol > 0.0 && c.truncation_tol < 1.0)) throw ModelError("truncation tolerance must lie in (0,1)");
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ModelError("epsilon must lie in (0,1)");
    if (c.eta && !(*c.eta >= 0.0 && *c.eta < 1.0)) throw ModelError("eta must lie in [0,1)");
    if (c.episode_len && *c.episode_len < 1) throw ModelError("episode length must be at least 1");
}

/// Balanced (eta, T) and the regret-bound constant for one discount.
struct ParameterDerivation {
    double gamma = 0.0;
    double eta = 0.0;
    double episode_len_raw = 0.0; ///< value before rounding up
    std::size_t episode_len = 1;
    std::vector<double> taus;
    double tau_bar = 0.0;
    double xi = 0.0;
    double gamma_floor = 0.0; ///< discount required by the precondition
    bool precondition_ok = false;
};

/**
 * eta = a^(1/4) N^(-1/2) (ln N)^(1/4) c^(1/4) (tau+1)^(1/4)
 * T   = ceil(a^(-1/4) N^(-1/2) (ln N)^(-1/4) c^(-1/4) (tau+1)^(3/4))
 * with a = 1 - gamma, c = 1/eps + |A|, tau the mean of the per-hypothesis taus.
 */
inline ParameterDerivation derive_parameters(std::size_t n_hypotheses, std::size_t n_actions, double gamma,
                                             double epsilon, std::vector<double> taus) {
    if (n_hypotheses < 2) throw ModelError("parameter derivation needs at least two hypotheses");
    if (taus.size() != n_hypotheses) throw ModelError("one tau per hypothesis required");
    const double N = double(n_hypotheses);
    const double lnN = std::log(N);
    const double c = 1.0 / epsilon + double(n_actions);
    const double a = 1.0 - gamma;

    ParameterDerivation d;
    d.gamma = gamma;
    d.taus = std::move(taus);
    for (double t : d.taus) d.tau_bar += t;
    d.tau_bar /= N;
    const double tp1 = d.tau_bar + 1.0;
    d.eta = std::pow(a, 0.25) * std::pow(N, -0.5) * std::pow(lnN, 0.25) * std::pow(c, 0.25) * std::pow(tp1, 0.25);
    d.episode_len_raw =
        std::pow(a, -0.25) * std::pow(N, -0.5) * std::pow(lnN, -0.25) * std::pow(c, -0.25) * std::pow(tp1, 0.75);
    d.episode_len = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(d.episode_len_raw)));
    d.xi = std::pow(std::pow(N, 6.0) * lnN * c * tp1, 0.25);
    d.gamma_floor = 1.0 - tp1 * tp1 * tp1 / (N * N * lnN) * std::min(epsilon, 1.0 / double(n_actions));
    d.precondition_ok = gamma >= d.gamma_floor;
    return d;
}

inline ParameterDerivation derive_parameters(const HypothesisSet& hyps, double gamma, double epsilon,
                                             const TauOptions& tau_opts = {}) {
    std::vector<double> taus;
    for (std::size_t k = 0; k < hyps.size(); ++k) taus.push_back(tau_bound(hyps.mdp(k), gamma, tau_opts));
    return derive_parameters(hyps.size(), hyps.n_actions, gamma, epsilon, std::move(taus));
}

/// Horizon n with gamma^n <= tol.
inline std::size_t truncation_horizon(double gamma, double tol) {
    return static_cast<std::size_t>(std::ceil(std::log(tol) / std::log(gamma)));
}

struct RolloutStats {
    double utility = 0.0;
    std::uint64_t delegations = 0;
    bool true_discarded = false;
    std::uint64_t unsafe_actions = 0;
    std::uint64_t discard_events = 0;
    std::uint64_t fallback_events = 0;
};

/// Monte Carlo estimate for one (discount, true hypothesis) cell.
struct RegretCell {
    double gamma = 0.0;
    std::size_t true_k = 0;
    PolicyKind policy = PolicyKind::agent;
    double eta = 0.0;
    std::size_t episode_len = 1;
    std::size_t rollouts = 0;
    std::size_t horizon = 0;
    double eu_star = 0.0;
    double eu_hat = 0.0;
    double eu_sd = 0.0;
    double regret = 0.0;
    double regret_ci = 0.0;     ///< 95% half-width
    double truncation_bias = 0.0; ///< gamma^horizon, an upper bound on the bias of eu_hat
    double nd_mean = 0.0;
    double nd_sd = 0.0;
    double nd_p50 = 0.0;
    double nd_p90 = 0.0;
    std::uint64_t discard_events = 0;
    std::uint64_t fallback_events = 0;
    std::uint64_t true_discarded_rollouts = 0;
    /// Direct actions the true advisor would never take, on rollouts that kept the true hypothesis.
    std::uint64_t unsafe_actions = 0;
    std::uint64_t unsafe_actions_after_discard = 0;
    std::vector<std::uint64_t> nd; ///< per-rollout delegation counts
    std::vector<std::string> warnings;

    double discard_frequency() const { return rollouts ? double(true_discarded_rollouts) / double(rollouts) : 0.0; }
};

struct RegretOptions {
    double truncation_tol = 1e-3;
    PolicyKind policy = PolicyKind::agent;
    std::size_t jobs = 1;
    /// Index of the discount within a sweep; part of the per-rollout stream key.
    std::uint64_t cell_index = 0;
};

namespace detail {

inline bool direct_unsafe(const AgentModel& model, std::size_t true_k, StateIndex x, ActionIndex act) {
    const auto& env = model.envs[true_k];
    return act != env.delegate_action() && env.advisor.prob(env.base_state(x), act) == 0.0;
}

inline RolloutStats rollout(const AgentModel& model, std::size_t true_k, const AgentParams& params, double gamma,
                            std::size_t horizon, PolicyKind policy, const std::vector<ActionIndex>& oracle_policy,
                            RandomStream& rng) {
    const auto& env = model.envs[true_k];
    RolloutStats out;
    double discount = 1.0 - gamma;
    double weight = 0.0;
    auto account = [&](StateIndex from, ActionIndex act, StateIndex to) {
        out.utility += discount * env.composed.reward[from];
        weight += discount;
        discount *= gamma;
        if (env.is_delegated(to)) ++out.delegations;
        if (direct_unsafe(model, true_k, from, act)) ++out.unsafe_actions;
    };
    if (policy == PolicyKind::agent) {
        AgentState st = reset(model, params, rng);
        run_policy(env, st, model, params, horizon, rng,
                   [&](StateIndex from, ActionIndex act, StateIndex to, const AgentState& s) {
                       account(from, act, to);
                       if (s.belief[true_k] <= 0.0) out.true_discarded = true;
                   });
        out.discard_events = st.counters.discard_events;
        out.fallback_events = st.counters.fallback_events;
    } else {
        StateIndex x = env.composed.initial_state;
        for (std::size_t n = 0; n < horizon; ++n) {
            const ActionIndex act = policy == PolicyKind::oracle ? oracle_policy[x] : env.delegate_action();
            const StateIndex to = sample_step(env, x, act, rng);
            account(x, act, to);
            x = to;
        }
    }
    // Renormalize by the truncated weight 1 - gamma^horizon so a constant
    // reward stream is estimated without bias.
    if (weight > 0.0) out.utility /= weight;
    return out;
}

inline double quantile(std::vector<std::uint64_t> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(p * double(v.size()))) ;
    return double(v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)]);
}

/// Runs fn(i) for i in [0, n) on `jobs` threads. Each index is processed
/// exactly once; callers write into pre-sized per-index slots.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace detail

/**
 * Estimates the regret of a policy against hypothesis `true_k`.
 *
 * eu_star is the optimal value of the composed environment at its initial
 * state; eu_hat averages the discounted reward over rollouts truncated at
 * the first n with gamma^n <= tol, normalized by the truncated weight
 * (1-gamma) sum_{n<horizon} gamma^n. The bias is at most gamma^horizon either way. Rollout r draws from a stream
 * keyed on (seed, cell_index, true_k, r), so results do not depend on `jobs`.
 */
inline RegretCell estimate_regret(const AgentModel& model, std::size_t true_k, const AgentParams& params, double gamma,
                                  std::size_t rollouts, std::uint64_t seed, const RegretOptions& opts = {}) {
    if (rollouts < 1) throw ModelError("rollouts must be at least 1");
    if (true_k >= model.size()) throw ModelError("true hypothesis index out of range");
    if (opts.policy == PolicyKind::agent) validate_params(params);
    const auto& env = model.envs[true_k];
    const auto plan = solve_discounted(env.composed, gamma);

    RegretCell cell;
    cell.gamma = gamma;
    cell.true_k = true_k;
    cell.policy = opts.policy;
    cell.eta = params.eta;
    cell.episode_len = params.episode_len;
    cell.rollouts = rollouts;
    cell.horizon = truncation_horizon(gamma, opts.truncation_tol);
    cell.truncation_bias = std::pow(gamma, double(cell.horizon));
    cell.eu_star = plan.v[env.composed.initial_state];

    std::vector<RolloutStats> stats(rollouts);
    detail::parallel_for(rollouts, opts.jobs, [&](std::size_t r) {
        RandomStream rng(derive_seed({seed, opts.cell_index, true_k, r}));
        stats[r] = detail::rollout(model, true_k, params, gamma, cell.horizon, opts.policy, plan.policy, rng);
    });

    double sum = 0.0, sum_sq = 0.0, nd_sum = 0.0, nd_sq = 0.0;
    cell.nd.reserve(rollouts);
    for (const auto& s : stats) {
        sum += s.utility;
        sum_sq += s.utility * s.utility;
        nd_sum += double(s.delegations);
        nd_sq += double(s.delegations) * double(s.delegations);
        cell.nd.push_back(s.delegations);
        cell.discard_events += s.discard_events;
        cell.fallback_events += s.fallback_events;
        if (s.true_discarded) {
            ++cell.true_discarded_rollouts;
            cell.unsafe_actions_after_discard += s.unsafe_actions;
        } else {
            cell.unsafe_actions += s.unsafe_actions;
        }
    }
    const double R = double(rollouts);
    cell.eu_hat = std::clamp(sum / R, 0.0, 1.0);
    cell.eu_sd = rollouts > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / R) / (R - 1.0))) : 0.0;
    cell.regret = cell.eu_star - cell.eu_hat;
    cell.regret_ci = kZ95 * cell.eu_sd / std::sqrt(R);
    cell.nd_mean = nd_sum / R;
    cell.nd_sd = rollouts > 1 ? std::sqrt(std::max(0.0, (nd_sq - nd_sum * nd_sum / R) / (R - 1.0))) : 0.0;
    cell.nd_p50 = detail::quantile(cell.nd, 0.5);
    cell.nd_p90 = detail::quantile(cell.nd, 0.9);
    return cell;
}

struct TailStat {
    std::uint64_t threshold = 0;
    double frequency = 0.0;
    double ci = 0.0; ///< 95% half-width
};

/// Empirical P[ND > K] for each threshold K.
inline std::vector<TailStat> delegation_tail(const RegretCell& cell, const std::vector<std::uint64_t>& thresholds) {
    std::vector<TailStat> out;
    const double R = double(std::max<std::size_t>(1, cell.nd.size()));
    for (auto K : thresholds) {
        const auto hits = std::count_if(cell.nd.begin(), cell.nd.end(), [K](std::uint64_t n) { return n > K; });
        const double f = double(hits) / R;
        out.push_back({K, f, kZ95 * std::sqrt(f * (1.0 - f) / R)});
    }
    return out;
}

/// Expected-delegation ceiling ln N / (eta * ln(1 + eps (1-eps)^(1/eps-1))).
inline double delegation_mean_bound(std::size_t n_hypotheses, double eta, double epsilon) {
    return std::log(double(n_hypotheses)) / (eta * delegation_info_floor(epsilon));
}

struct SweepRow {
    double gamma = 0.0;
    std::optional<ParameterDerivation> derived;
    AgentParams params;
    double envelope = 0.0; ///< xi (1 - gamma)^(1/4), 0 when not derived
    std::vector<RegretCell> cells;
    std::vector<std::string> warnings;

    double mean_regret() const {
        double s = 0.0;
        for (const auto& c : cells) s += c.regret;
        return cells.empty() ? 0.0 : s / double(cells.size());
    }

    double mean_nd() const {
        double s = 0.0;
        for (const auto& c : cells) s += c.nd_mean;
        return cells.empty() ? 0.0 : s / double(cells.size());
    }
};

struct SweepResult {
    ExperimentConfig config;
    std::vector<SweepRow> rows;
};

/// Parameters actually used for one discount: overrides win, else the derivation.
inline AgentParams resolve_params(const ExperimentConfig& cfg, double gamma, const ParameterDerivation* d,
                                  std::vector<std::string>& warnings) {
    AgentParams p;
    p.gamma = gamma;
    p.epsilon = cfg.epsilon;
    if (cfg.eta) {
        p.eta = *cfg.eta;
    } else if (d) {
        p.eta = d->eta;
        if (p.eta >= 1.0) {
            warnings.push_back(fmt::format("derived eta {:.6g} >= 1; clamped below 1", p.eta));
            p.eta = std::nextafter(1.0, 0.0);
        }
    } else {
        throw ModelError("eta must be given explicitly when it cannot be derived");
    }
    if (cfg.episode_len)
        p.episode_len = *cfg.episode_len;
    else if (d)
        p.episode_len = d->episode_len;
    else
        throw ModelError("episode length must be given explicitly when it cannot be derived");
    return p;
}

/**
 * Runs every (discount, true hypothesis) cell of the config. Parameters not
 * fixed by the config are derived per discount; the precondition on the
 * discount is reported as a warning, never an error.
 */
inline SweepResult sweep_gamma(const AgentModel& model, const ExperimentConfig& cfg, std::size_t jobs = 1) {
    validate_config(cfg);
    SweepResult out;
    out.config = cfg;
    for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
        SweepRow row;
        row.gamma = cfg.gammas[gi];
        if (model.size() >= 2) {
            row.derived = derive_parameters(model.hyps, row.gamma, cfg.epsilon);
            row.envelope = row.derived->xi * std::pow(1.0 - row.gamma, 0.25);
            if (!row.derived->precondition_ok)
                row.warnings.push_back(fmt::format(
                    "gamma {} is below the precondition floor {:.6g}; bounds not guaranteed", row.gamma,
                    row.derived->gamma_floor));
        }
        row.params = resolve_params(cfg, row.gamma, row.derived ? &*row.derived : nullptr, row.warnings);
        RegretOptions ro{cfg.truncation_tol, cfg.policy, jobs, gi};
        for (std::size_t k = 0; k < model.size(); ++k) {
            row.cells.push_back(estimate_regret(model, k, row.params, row.gamma, cfg.rollouts, cfg.seed, ro));
            row.cells.back().warnings = row.warnings;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

inline constexpr const char* kCsvHeader = "gamma,eta,T,true_k,seed,eu_star,eu_hat,regret,regret_ci,nd_mean,nd_p50,"
                                          "nd_p90,tail_K,tail_freq,discard_events,fallback_events,unsafe_actions";

/// One row per (discount, true hypothesis, tail threshold).
inline std::string to_csv(const SweepResult& sweep) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& row : sweep.rows)
        for (const auto& c : row.cells)
            for (const auto& t : delegation_tail(c, sweep.config.tail_thresholds))
                out += fmt::format("{:.12g},{:.12g},{},{},{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{},"
                                   "{:.12g},{},{},{}\n",
                                   c.gamma, c.eta, c.episode_len, c.true_k, sweep.config.seed, c.eu_star, c.eu_hat,
                                   c.regret, c.regret_ci, c.nd_mean, c.nd_p50, c.nd_p90, t.threshold, t.frequency,
                                   c.discard_events, c.fallback_events, c.unsafe_actions);
    return out;
}

struct RegretIdentity {
    double lhs = 0.0; ///< V(s0) - EU of the policy
    double rhs = 0.0; ///< truncated sum of discounted expected advantages
    double residual = 0.0;
    double bound = 0.0; ///< 2 gamma^horizon
};

/**
 * Regret decomposition for a memoryless policy: V(s0) - EU^pi equals
 * sum_n gamma^n E[V(x_n) - sum_a pi(a|x_n) Q(x_n,a)]. The expectation over
 * paths is summed exactly by propagating the path measure state by state;
 * the series is truncated after `horizon` terms.
 */
inline RegretIdentity check_regret_identity(const FiniteMdp& m, const StochasticPolicy& pi, double gamma,
                                            std::size_t horizon) {
    if (m.n_states > 6) throw ModelError("instance too large for enumeration (at most 6 states)");
    const auto plan = solve_discounted(m, gamma);
    const auto eu = evaluate_policy(m, pi, gamma);

    std::vector<double> advantage(m.n_states, 0.0);
    for (StateIndex s = 0; s < m.n_states; ++s) {
        double qpi = 0.0;
        for (ActionIndex a = 0; a < m.n_actions; ++a) qpi += pi.prob(s, a) * plan.qv(s, a);
        advantage[s] = plan.v[s] - qpi;
    }

    RegretIdentity out;
    out.lhs = plan.v[m.initial_state] - eu[m.initial_state];
    std::vector<double> dist(m.n_states, 0.0), next(m.n_states);
    dist[m.initial_state] = 1.0;
    double discount = 1.0;
    for (std::size_t n = 0; n < horizon; ++n) {
        for (StateIndex s = 0; s < m.n_states; ++s) out.rhs += discount * dist[s] * advantage[s];
        std::fill(next.begin(), next.end(), 0.0);
        for (StateIndex s = 0; s < m.n_states; ++s)
            for (ActionIndex a = 0; a < m.n_actions; ++a) {
                const double w = dist[s] * pi.prob(s, a);
                if (w == 0.0) continue;
                for (StateIndex t = 0; t < m.n_states; ++t) next[t] += w * m.prob(s, a, t);
            }
        dist.swap(next);
        discount *= gamma;
    }
    out.residual = std::abs(out.lhs - out.rhs);
    out.bound = 2.0 * std::pow(gamma, double(horizon));
    return out;
}

} // namespace drl
