#pragma once

// JSON ingestion of models and experiment configs, and JSON rendering of
// planner and harness results.

#include "drl/error.hpp"
#include "drl/harness.hpp"
#include "drl/mdp.hpp"
#include "drl/planner.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace drl {

using json = nlohmann::json;

/// Malformed or structurally inconsistent input document.
class ParseError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& what) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ParseError("field '" + what + "': " + e.what());
    }
}

/// Flattens nested arrays of the given shape; throws on any mismatch.
inline void flatten(const json& j, const std::vector<std::size_t>& shape, std::size_t depth, std::vector<double>& out,
                    const std::string& what) {
    if (depth == shape.size()) {
        if (!j.is_number()) throw ParseError("field '" + what + "': expected a number");
        out.push_back(j.get<double>());
        return;
    }
    if (!j.is_array() || j.size() != shape[depth])
        throw ParseError("field '" + what + "': expected an array of length " + std::to_string(shape[depth]) +
                         " at depth " + std::to_string(depth));
    for (const auto& e : j) flatten(e, shape, depth + 1, out, what);
}

inline std::vector<double> flat(const json& j, const std::vector<std::size_t>& shape, const std::string& what) {
    std::vector<double> out;
    flatten(j, shape, 0, out, what);
    return out;
}

inline json nest(const std::vector<double>& flat_values, std::size_t rows, std::size_t cols) {
    json out = json::array();
    for (std::size_t r = 0; r < rows; ++r)
        out.push_back(std::vector<double>(flat_values.begin() + std::ptrdiff_t(r * cols),
                                          flat_values.begin() + std::ptrdiff_t((r + 1) * cols)));
    return out;
}

inline json nest3(const std::vector<double>& flat_values, std::size_t a, std::size_t b, std::size_t c) {
    json out = json::array();
    for (std::size_t i = 0; i < a; ++i)
        out.push_back(nest(std::vector<double>(flat_values.begin() + std::ptrdiff_t(i * b * c),
                                               flat_values.begin() + std::ptrdiff_t((i + 1) * b * c)),
                           b, c));
    return out;
}

} // namespace detail

/// Parses a FiniteMdp document. Shapes are checked here; probability and
/// range invariants are left to validate_mdp().
inline FiniteMdp mdp_from_json(const json& j) {
    FiniteMdp m;
    m.n_states = detail::get_as<std::size_t>(detail::require(j, "n_states"), "n_states");
    m.n_actions = detail::get_as<std::size_t>(detail::require(j, "n_actions"), "n_actions");
    m.initial_state = detail::get_as<std::size_t>(detail::require(j, "initial_state"), "initial_state");
    m.transition = detail::flat(detail::require(j, "transition"), {m.n_states, m.n_actions, m.n_states}, "transition");
    m.reward = detail::flat(detail::require(j, "reward"), {m.n_states}, "reward");
    return m;
}

inline json to_json(const FiniteMdp& m) {
    return {{"n_states", m.n_states},
            {"n_actions", m.n_actions},
            {"initial_state", m.initial_state},
            {"transition", detail::nest3(m.transition, m.n_states, m.n_actions, m.n_states)},
            {"reward", m.reward}};
}

inline AdvisorPolicy advisor_from_json(const json& j, std::size_t n_states, std::size_t n_actions) {
    AdvisorPolicy ad;
    ad.n_states = n_states;
    ad.n_actions = n_actions;
    ad.probs = detail::flat(detail::require(j, "probs"), {n_states, n_actions}, "probs");
    ad.epsilon = detail::get_as<double>(detail::require(j, "epsilon"), "epsilon");
    return ad;
}

inline json to_json(const AdvisorPolicy& ad) {
    return {{"probs", detail::nest(ad.probs, ad.n_states, ad.n_actions)}, {"epsilon", ad.epsilon}};
}

/// Parses a HypothesisSet document (shape-checked, not validated).
inline HypothesisSet hypotheses_from_json(const json& j) {
    HypothesisSet h;
    h.n_states = detail::get_as<std::size_t>(detail::require(j, "n_states"), "n_states");
    h.n_actions = detail::get_as<std::size_t>(detail::require(j, "n_actions"), "n_actions");
    h.initial_state = detail::get_as<std::size_t>(detail::require(j, "initial_state"), "initial_state");
    h.reward = detail::flat(detail::require(j, "reward"), {h.n_states}, "reward");
    const auto n = detail::get_as<std::size_t>(detail::require(j, "n"), "n");
    const auto& kernels = detail::require(j, "kernels");
    const auto& advisors = detail::require(j, "advisors");
    if (!kernels.is_array() || kernels.size() != n) throw ParseError("field 'kernels': expected n kernels");
    if (!advisors.is_array() || advisors.size() != n) throw ParseError("field 'advisors': expected n advisors");
    for (std::size_t k = 0; k < n; ++k) {
        h.kernels.push_back(detail::flat(kernels[k], {h.n_states, h.n_actions, h.n_states},
                                         "kernels[" + std::to_string(k) + "]"));
        h.advisors.push_back(advisor_from_json(advisors[k], h.n_states, h.n_actions));
    }
    return h;
}

inline json to_json(const HypothesisSet& h) {
    json kernels = json::array(), advisors = json::array();
    for (std::size_t k = 0; k < h.size(); ++k) {
        kernels.push_back(detail::nest3(h.kernels[k], h.n_states, h.n_actions, h.n_states));
        advisors.push_back(to_json(h.advisors[k]));
    }
    return {{"n", h.size()},
            {"n_states", h.n_states},
            {"n_actions", h.n_actions},
            {"initial_state", h.initial_state},
            {"reward", h.reward},
            {"kernels", kernels},
            {"advisors", advisors}};
}

inline PolicyKind policy_from_string(const std::string& s) {
    if (s == "agent") return PolicyKind::agent;
    if (s == "oracle") return PolicyKind::oracle;
    if (s == "always_delegate") return PolicyKind::always_delegate;
    throw ParseError("unknown policy '" + s + "'");
}

/// Parses the optional "experiment" object; absent fields keep their defaults.
inline ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ParseError("field 'experiment': expected an object");
    if (j.contains("gammas")) c.gammas = detail::get_as<std::vector<double>>(j["gammas"], "gammas");
    if (j.contains("epsilon")) c.epsilon = detail::get_as<double>(j["epsilon"], "epsilon");
    if (j.contains("eta") && !(j["eta"].is_string() && j["eta"] == "auto"))
        c.eta = detail::get_as<double>(j["eta"], "eta");
    if (j.contains("T") && !(j["T"].is_string() && j["T"] == "auto"))
        c.episode_len = detail::get_as<std::size_t>(j["T"], "T");
    if (j.contains("rollouts")) c.rollouts = detail::get_as<std::size_t>(j["rollouts"], "rollouts");
    if (j.contains("truncation_tol")) c.truncation_tol = detail::get_as<double>(j["truncation_tol"], "truncation_tol");
    if (j.contains("seed")) c.seed = detail::get_as<std::uint64_t>(j["seed"], "seed");
    if (j.contains("tail_K")) c.tail_thresholds = detail::get_as<std::vector<std::uint64_t>>(j["tail_K"], "tail_K");
    if (j.contains("policy")) c.policy = policy_from_string(detail::get_as<std::string>(j["policy"], "policy"));
    return c;
}

inline json to_json(const ExperimentConfig& c) {
    json j = {{"gammas", c.gammas},
              {"epsilon", c.epsilon},
              {"rollouts", c.rollouts},
              {"truncation_tol", c.truncation_tol},
              {"seed", c.seed},
              {"tail_K", c.tail_thresholds},
              {"policy", to_string(c.policy)}};
    j["eta"] = c.eta ? json(*c.eta) : json("auto");
    j["T"] = c.episode_len ? json(*c.episode_len) : json("auto");
    return j;
}

/// A config document: a HypothesisSet plus an optional "experiment" object.
struct ConfigDocument {
    HypothesisSet hyps;
    ExperimentConfig experiment;
};

inline ConfigDocument config_from_json(const json& j) {
    ConfigDocument doc;
    doc.hyps = hypotheses_from_json(j);
    doc.experiment = experiment_from_json(j.contains("experiment") ? j["experiment"] : json());
    return doc;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

inline ConfigDocument load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

inline json to_json(const PlanningSolution& p, std::size_t n_actions) {
    return {{"gamma", p.gamma},
            {"v", p.v},
            {"q", detail::nest(p.q, p.v.size(), n_actions)},
            {"optimal_actions", p.optimal_actions},
            {"policy", p.policy}};
}

inline json to_json(const LimitSolution& l, std::size_t n_actions) {
    return {{"v0", l.v0},
            {"q0", detail::nest(l.q0, l.v0.size(), n_actions)},
            {"trap_free", l.trap_free},
            {"blackwell", l.blackwell},
            {"gamma_threshold", l.gamma_threshold},
            {"tau", l.tau}};
}

inline json to_json(const ParameterDerivation& d) {
    return {{"gamma", d.gamma},
            {"eta", d.eta},
            {"T", d.episode_len},
            {"T_raw", d.episode_len_raw},
            {"taus", d.taus},
            {"tau_bar", d.tau_bar},
            {"xi", d.xi},
            {"gamma_floor", d.gamma_floor},
            {"precondition_ok", d.precondition_ok}};
}

inline json to_json(const RegretCell& c, const std::vector<std::uint64_t>& thresholds) {
    json tail = json::array();
    for (const auto& t : delegation_tail(c, thresholds))
        tail.push_back({{"K", t.threshold}, {"frequency", t.frequency}, {"ci", t.ci}});
    return {{"gamma", c.gamma},
            {"true_k", c.true_k},
            {"policy", to_string(c.policy)},
            {"eta", c.eta},
            {"T", c.episode_len},
            {"rollouts", c.rollouts},
            {"horizon", c.horizon},
            {"eu_star", c.eu_star},
            {"eu_hat", c.eu_hat},
            {"regret", c.regret},
            {"regret_ci", c.regret_ci},
            {"truncation_bias", c.truncation_bias},
            {"nd_mean", c.nd_mean},
            {"nd_sd", c.nd_sd},
            {"nd_p50", c.nd_p50},
            {"nd_p90", c.nd_p90},
            {"tail", tail},
            {"discard_events", c.discard_events},
            {"fallback_events", c.fallback_events},
            {"true_discarded_rollouts", c.true_discarded_rollouts},
            {"discard_frequency", c.discard_frequency()},
            {"unsafe_actions", c.unsafe_actions},
            {"unsafe_actions_after_discard", c.unsafe_actions_after_discard},
            {"warnings", c.warnings}};
}

inline json to_json(const SweepResult& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        json cells = json::array();
        for (const auto& c : r.cells) cells.push_back(to_json(c, s.config.tail_thresholds));
        json row = {{"gamma", r.gamma},
                    {"eta", r.params.eta},
                    {"T", r.params.episode_len},
                    {"envelope", r.envelope},
                    {"mean_regret", r.mean_regret()},
                    {"mean_nd", r.mean_nd()},
                    {"cells", cells},
                    {"warnings", r.warnings}};
        row["derived"] = r.derived ? to_json(*r.derived) : json();
        rows.push_back(std::move(row));
    }
    return {{"config", to_json(s.config)}, {"rows", rows}};
}

} // namespace drl
