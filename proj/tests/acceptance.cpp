// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances are the ones stated next to each check.

#include "drl/drl.hpp"

#include "support.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

using namespace drl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome planner_exactness() {
    const auto t0 = Clock::now();
    const auto m = bench::trap_mdp();
    double err = 0.0;
    for (double g : {0.9, 0.99}) {
        const auto sol = solve_discounted(m, g);
        err = std::max({err, std::abs(sol.v[0] - 1.0), std::abs(sol.v[1])});
    }
    const auto lim = limit_quantities(m);
    const double secs = seconds_since(t0);
    const bool sets = lim.trap_free[0] == std::vector<ActionIndex>{0} && lim.blackwell[0] == std::vector<ActionIndex>{0};
    return {err <= 1e-9 && sets && secs < 1.0,
            fmt::format("max |V - V_exact| = {:.2e}, A0(s1) = {{a}}: {}, A*(s1) = {{a}}: {}, {:.3f} s", err,
                        lim.trap_free[0] == std::vector<ActionIndex>{0}, lim.blackwell[0] == std::vector<ActionIndex>{0},
                        secs)};
}

Outcome bayes_exactness() {
    const auto model = make_agent_model(testkit::noisy_pair(42, 0.2), 0.2);
    const auto rep = testkit::bayes_exhaustive(model, 6);
    return {rep.max_error <= 1e-12,
            fmt::format("{} histories of length <= 6 on 2 hypotheses x 3 states, max error {:.2e}", rep.histories,
                        rep.max_error)};
}

// Shared by the safety and delegation criteria: N = 3, eta = 0.1, T = 4.
struct SafetyRun {
    std::vector<RegretCell> cells;
    double eta = 0.1;
    double epsilon = 0.2;
    double seconds = 0.0;
};

const SafetyRun& safety_run() {
    static const SafetyRun run = [] {
        SafetyRun r;
        const auto t0 = Clock::now();
        const auto model = make_agent_model(bench::noisy_trap_triple(r.epsilon), r.epsilon);
        AgentParams p;
        p.eta = r.eta;
        p.episode_len = 4;
        p.epsilon = r.epsilon;
        p.gamma = 0.99;
        RegretOptions ro;
        ro.jobs = jobs();
        for (std::size_t k = 0; k < 3; ++k) r.cells.push_back(estimate_regret(model, k, p, 0.99, 3400, 2024, ro));
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

Outcome safety_invariant() {
    const auto& run = safety_run();
    std::uint64_t unsafe = 0, discarded = 0, rollouts = 0;
    for (const auto& c : run.cells) {
        unsafe += c.unsafe_actions;
        discarded += c.true_discarded_rollouts;
        rollouts += c.rollouts;
    }
    const double p = run.eta * 2.0;
    const double limit = p + 3.0 * std::sqrt(p * (1 - p) / double(rollouts));
    const double freq = double(discarded) / double(rollouts);
    return {unsafe == 0 && freq <= limit && run.seconds < 60.0,
            fmt::format("{} rollouts, unsafe direct actions {}, discard frequency {:.4f} <= {:.4f}, {:.1f} s",
                        rollouts, unsafe, freq, limit, run.seconds)};
}

Outcome delegation_bound() {
    const auto& run = safety_run();
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& c : run.cells)
        for (auto d : c.nd) {
            sum += double(d);
            sq += double(d) * double(d);
            n += 1.0;
        }
    const double mean = sum / n;
    const double sigma = std::sqrt(std::max(0.0, sq / n - mean * mean) / n);
    const double bound = delegation_mean_bound(3, run.eta, run.epsilon);

    const auto single = make_agent_model(bench::trap_family({0.3}, 0.7, 0.2), 0.2);
    AgentParams p;
    p.eta = 0.1;
    p.episode_len = 2;
    p.epsilon = 0.2;
    RegretOptions ro;
    ro.jobs = jobs();
    const auto cell = estimate_regret(single, 0, p, 0.99, 1000, 1, ro);
    const auto max_single = *std::max_element(cell.nd.begin(), cell.nd.end());
    return {mean <= bound + 4 * sigma && max_single == 0,
            fmt::format("mean ND {:.3f} <= {:.3f} + 4 sigma ({:.3f}); N=1 max ND {}", mean, bound, 4 * sigma,
                        max_single)};
}

Outcome regret_decomposition() {
    const auto sweep = sweep_regret_identity(25, 2024, 0.9, 200);
    return {sweep.ok() && sweep.instances >= 20,
            fmt::format("{} random 3-state MDPs, max residual {:.2e} <= {:.2e}", sweep.instances, sweep.max_residual,
                        sweep.bound)};
}

Outcome information_oracles() {
    const auto d = sweep_delegation_information(10000, 2024, 1e-12);
    const auto t = sweep_thompson(10000, 2024, 1e-12);
    const double f05 = delegation_info_floor(0.5), f01 = delegation_info_floor(0.1);
    const bool floors = std::abs(f05 - std::log(1.25)) <= 1e-6 && std::abs(f01 - std::log(1.0 + 0.1 * std::pow(0.9, 9))) <= 1e-6;
    return {d.ok() && t.ok() && floors,
            fmt::format("delegation {}/{} ok (min gap {:.2e}), posterior sampling {}/{} ok (min gap {:.2e}), "
                        "floor(0.5) = {:.6f}, floor(0.1) = {:.6f}",
                        d.instances - d.violations - d.hypothesis_failures, d.instances, d.min_gap,
                        t.instances - t.violations - t.hypothesis_failures, t.instances, t.min_gap, f05, f01)};
}

Outcome regret_trend() {
    const auto t0 = Clock::now();
    const double eps = 0.2;
    const auto model = make_agent_model(bench::trap_bench(eps), eps);
    ExperimentConfig cfg;
    cfg.gammas.clear();
    for (int e = 4; e <= 10; ++e) cfg.gammas.push_back(1.0 - std::ldexp(1.0, -e));
    cfg.epsilon = eps;
    cfg.rollouts = 1000;
    const std::size_t seeds = 10, G = cfg.gammas.size();

    std::vector<std::vector<double>> per_seed(G);
    std::vector<SweepRow> rows;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        cfg.seed = 100 + s;
        auto sweep = sweep_gamma(model, cfg, jobs());
        for (std::size_t i = 0; i < G; ++i) per_seed[i].push_back(sweep.rows[i].mean_regret());
        if (s == 0) rows = std::move(sweep.rows);
    }
    std::vector<double> mean(G), ci(G);
    for (std::size_t i = 0; i < G; ++i) {
        double m = 0, q = 0;
        for (double r : per_seed[i]) m += r;
        m /= double(seeds);
        for (double r : per_seed[i]) q += (r - m) * (r - m);
        mean[i] = m;
        ci[i] = kZ95 * std::sqrt(q / double(seeds - 1)) / std::sqrt(double(seeds));
    }
    std::size_t inversions = 0;
    bool inversions_within_ci = true;
    for (std::size_t i = 1; i < G; ++i)
        if (mean[i] > mean[i - 1]) {
            ++inversions;
            if (mean[i] - mean[i - 1] > std::hypot(ci[i], ci[i - 1])) inversions_within_ci = false;
        }
    const bool trend = inversions <= 1 && inversions_within_ci;

    // Always-delegate baseline at the largest discount, same seeds.
    ExperimentConfig base = cfg;
    base.gammas = {cfg.gammas.back()};
    base.policy = PolicyKind::always_delegate;
    double baseline = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        base.seed = 100 + s;
        baseline += sweep_gamma(model, base, jobs()).rows[0].mean_regret() / double(seeds);
    }
    const bool beats = baseline > mean.back();

    // Formula identities on the derived columns.
    const auto& d0 = *rows[0].derived;
    const double eta_c = d0.eta / (std::pow(1 - d0.gamma, 0.25) * std::pow(d0.tau_bar + 1, 0.25));
    const double t_c = d0.episode_len_raw * std::pow(1 - d0.gamma, 0.25) / std::pow(d0.tau_bar + 1, 0.75);
    bool formulas = true;
    for (std::size_t i = 0; i < G; ++i) {
        const auto& d = *rows[i].derived;
        const double e = d.eta / (std::pow(1 - d.gamma, 0.25) * std::pow(d.tau_bar + 1, 0.25));
        const double t = d.episode_len_raw * std::pow(1 - d.gamma, 0.25) / std::pow(d.tau_bar + 1, 0.75);
        formulas = formulas && std::abs(e / eta_c - 1) <= 1e-12 && std::abs(t / t_c - 1) <= 1e-12 &&
                   d.episode_len == std::size_t(std::ceil(d.episode_len_raw)) && rows[i].params.eta == d.eta;
        if (i > 0)
            formulas = formulas && rows[i].params.eta < rows[i - 1].params.eta &&
                       rows[i].params.episode_len >= rows[i - 1].params.episode_len;
    }
    const double secs = seconds_since(t0);

    std::string table;
    for (std::size_t i = 0; i < G; ++i)
        table += fmt::format("\n    gamma {:.10f}  eta {:.5f}  T {:>2}  mean regret {:.5f} +- {:.5f}", cfg.gammas[i],
                             rows[i].params.eta, rows[i].params.episode_len, mean[i], ci[i]);
    return {trend && beats && formulas && secs < 600.0,
            fmt::format("{} inversion(s) (within CI: {}), baseline {:.5f} > agent {:.5f}: {}, formula identities: "
                        "{}, {:.1f} s{}",
                        inversions, inversions_within_ci, baseline, mean.back(), beats, formulas, secs, table)};
}

Outcome determinism() {
    const auto model = make_agent_model(bench::noisy_trap_triple(0.2), 0.2);
    ExperimentConfig cfg;
    cfg.gammas = {0.9, 0.97};
    cfg.epsilon = 0.2;
    cfg.eta = 0.1;
    cfg.episode_len = 3;
    cfg.rollouts = 500;
    cfg.seed = 31337;
    const auto a = to_csv(sweep_gamma(model, cfg, 1));
    const auto b = to_csv(sweep_gamma(model, cfg, 1));
    const auto c = to_csv(sweep_gamma(model, cfg, std::max<std::size_t>(2, jobs())));

    const auto bench_model = make_agent_model(bench::trap_bench(0.2), 0.2);
    ExperimentConfig auto_cfg;
    auto_cfg.gammas = {0.9375, 0.984375};
    auto_cfg.epsilon = 0.2;
    auto_cfg.rollouts = 300;
    auto_cfg.seed = 5;
    const auto d = to_csv(sweep_gamma(bench_model, auto_cfg, 1));
    const auto e = to_csv(sweep_gamma(bench_model, auto_cfg, 3));
    return {a == b && a == c && d == e,
            fmt::format("repeat identical: {}, thread count independent: {}, auto-derived sweep identical: {} "
                        "({} + {} bytes)",
                        a == b, a == c, d == e, a.size(), d.size())};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"planner exactness", planner_exactness},
        {"Bayes exactness", bayes_exactness},
        {"safety invariant", safety_invariant},
        {"delegation bound", delegation_bound},
        {"regret decomposition", regret_decomposition},
        {"information-theory oracles", information_oracles},
        {"regret scaling trend", regret_trend},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        fmt::print("[{}] criterion {} ({}): {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - std::size_t(failures), criteria.size());
    return failures == 0 ? 0 : 1;
}
