// drl: command-line front end for planning, validation and regret experiments.
//
// Exit codes: 0 success, 1 semantic failure (invalid model, non-sane advisor,
// unstable limits, violated invariant or bound), 2 usage or parse error.

#include "drl/drl.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using drl::json;

namespace {

constexpr const char* kVersion = "0.3.0";

enum Exit : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("drl");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("DRL_LOG")) spdlog::cfg::helpers::load_levels(env);
}

void check_gamma_arg(double g) {
    if (!(g > 0.0 && g < 1.0)) throw UsageError(fmt::format("discount {} is outside (0,1)", g));
}

// Writes through a temporary file in the same directory so readers never see
// a partial file.
void write_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw drl::Error("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out.flush()) throw drl::Error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

drl::ConfigDocument load_valid(const std::string& path) {
    auto doc = drl::load_config(path);
    if (auto report = drl::validate_hypotheses(doc.hyps); !report.ok())
        throw drl::ModelError("invalid hypothesis set:\n" + report.to_string());
    doc.hyps = drl::make_hypotheses(doc.hyps.n_states, doc.hyps.n_actions, doc.hyps.initial_state, doc.hyps.reward,
                                    doc.hyps.kernels, doc.hyps.advisors);
    return doc;
}

void print_sanity(const drl::SanityCertificate& cert, std::size_t k, double eps) {
    if (cert.is_sane) {
        fmt::print("hypothesis {}: advisor is {}-sane\n", k, eps);
        return;
    }
    fmt::print("hypothesis {}: advisor is NOT {}-sane\n", k, eps);
    for (const auto& v : cert.violations)
        fmt::print("  state {}: {}: {}\n", v.state, drl::to_string(v.condition), v.detail);
}

int cmd_validate(const std::string& path) {
    const auto doc = drl::load_config(path);
    if (auto report = drl::validate_hypotheses(doc.hyps); !report.ok()) {
        fmt::print("invalid hypothesis set:\n{}", report.to_string());
        return kFailure;
    }
    const auto& h = doc.hyps;
    const auto valid = drl::make_hypotheses(h.n_states, h.n_actions, h.initial_state, h.reward, h.kernels, h.advisors);
    const bool has_experiment = drl::read_json_file(path).contains("experiment");
    bool ok = true;
    for (std::size_t k = 0; k < valid.size(); ++k) {
        const auto m = valid.mdp(k);
        drl::LimitSolution lim;
        try {
            lim = drl::limit_quantities(m);
        } catch (const drl::BlackwellUnstable& e) {
            fmt::print("hypothesis {}: {}\n", k, e.what());
            ok = false;
            continue;
        }
        auto ad = valid.advisors[k];
        const auto cert = drl::check_epsilon_sane(m, ad, lim);
        print_sanity(cert, k, ad.epsilon);
        ok = ok && cert.is_sane;
        if (has_experiment && doc.experiment.epsilon != ad.epsilon) {
            ad.epsilon = doc.experiment.epsilon;
            const auto run_cert = drl::check_epsilon_sane(m, ad, lim);
            print_sanity(run_cert, k, ad.epsilon);
            ok = ok && run_cert.is_sane;
        }
    }
    fmt::print("{}\n", ok ? "valid" : "invalid");
    return ok ? kOk : kFailure;
}

int cmd_plan(const std::string& path, double gamma) {
    check_gamma_arg(gamma);
    const auto doc = load_valid(path);
    json out = {{"gamma", gamma}, {"hypotheses", json::array()}};
    for (std::size_t k = 0; k < doc.hyps.size(); ++k) {
        const auto m = doc.hyps.mdp(k);
        json entry = {{"k", k}};
        entry["plan"] = drl::to_json(drl::solve_discounted(m, gamma), m.n_actions);
        entry["limits"] = drl::to_json(drl::limit_quantities(m), m.n_actions);
        try {
            entry["tau"] = drl::tau_bound(m, gamma);
        } catch (const drl::NumericError& e) {
            spdlog::warn("hypothesis {}: {}", k, e.what());
            entry["tau"] = nullptr;
        }
        out["hypotheses"].push_back(std::move(entry));
    }
    fmt::print("{}\n", out.dump(2));
    return kOk;
}

struct RunFlags {
    std::optional<double> gamma;
    std::vector<double> gammas;
    std::optional<std::size_t> rollouts;
    std::optional<std::uint64_t> seed;
    std::optional<double> eta;
    std::optional<std::size_t> episode_len;
    std::optional<std::string> policy;
    std::string out = "out";
};

int cmd_experiment(const std::string& path, const RunFlags& flags, std::size_t jobs) {
    const auto doc = load_valid(path);
    drl::ExperimentConfig cfg = doc.experiment;
    if (flags.gamma) cfg.gammas = {*flags.gamma};
    if (!flags.gammas.empty()) cfg.gammas = flags.gammas;
    if (flags.rollouts) cfg.rollouts = *flags.rollouts;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.eta) cfg.eta = *flags.eta;
    if (flags.episode_len) cfg.episode_len = *flags.episode_len;
    if (flags.policy) {
        try {
            cfg.policy = drl::policy_from_string(*flags.policy);
        } catch (const drl::ParseError& e) {
            throw UsageError(e.what());
        }
    }
    for (double g : cfg.gammas) check_gamma_arg(g);
    if (cfg.rollouts < 1) throw UsageError("--rollouts must be at least 1");
    if (cfg.eta && !(*cfg.eta >= 0.0 && *cfg.eta < 1.0)) throw UsageError("--eta must lie in [0,1)");
    if (cfg.episode_len && *cfg.episode_len < 1) throw UsageError("--T must be at least 1");
    drl::validate_config(cfg);

    spdlog::info("building agent model for {} hypotheses", doc.hyps.size());
    const auto model = drl::make_agent_model(doc.hyps, cfg.epsilon);
    spdlog::info("running {} discount(s) x {} hypotheses x {} rollouts on {} thread(s)", cfg.gammas.size(),
                 model.size(), cfg.rollouts, jobs);
    const auto sweep = drl::sweep_gamma(model, cfg, jobs);

    int status = kOk;
    std::vector<std::string> failures;
    for (const auto& row : sweep.rows)
        for (const auto& w : row.warnings) fmt::print(stderr, "warning: {}\n", w);

    // Determinism self-check: the first cell recomputed serially must match.
    {
        const auto& row = sweep.rows.front();
        const drl::RegretOptions ro{cfg.truncation_tol, cfg.policy, 1, 0};
        const auto again = drl::estimate_regret(model, 0, row.params, row.gamma, cfg.rollouts, cfg.seed, ro);
        const auto& first = row.cells.front();
        if (again.eu_hat != first.eu_hat || again.nd != first.nd || again.discard_events != first.discard_events)
            failures.push_back("determinism self-check failed: serial recomputation differs");
    }
    if (cfg.policy == drl::PolicyKind::agent)
        for (const auto& row : sweep.rows)
            for (const auto& c : row.cells)
                if (c.unsafe_actions > 0)
                    failures.push_back(fmt::format("safety counter: {} unsafe direct actions at gamma {} (k={})",
                                                   c.unsafe_actions, c.gamma, c.true_k));

    const fs::path dir(flags.out);
    fs::create_directories(dir);
    const fs::path csv_path = dir / "results.csv", summary_path = dir / "summary.json",
                   manifest_path = dir / "manifest.json";

    json summary = drl::to_json(sweep);
    summary["failures"] = failures;

    json manifest = drl::to_json(model.hyps);
    manifest["experiment"] = drl::to_json(cfg);
    json derived = json::array();
    for (const auto& row : sweep.rows) {
        json d = {{"gamma", row.gamma}, {"eta", row.params.eta}, {"T", row.params.episode_len}};
        if (row.derived) d["derivation"] = drl::to_json(*row.derived);
        derived.push_back(std::move(d));
    }
    manifest["derived"] = derived;
    manifest["tool_version"] = kVersion;
    manifest["seed"] = cfg.seed;
    manifest["outputs"] = {{"csv", csv_path.string()},
                           {"summary", summary_path.string()},
                           {"manifest", manifest_path.string()}};

    write_atomic(csv_path, drl::to_csv(sweep));
    write_atomic(summary_path, summary.dump(2) + "\n");
    write_atomic(manifest_path, manifest.dump(2) + "\n");

    for (const auto& row : sweep.rows)
        fmt::print("gamma {:<12.10g} eta {:<10.6g} T {:<4} regret {:<12.6g} nd_mean {:.4g}\n", row.gamma,
                   row.params.eta, row.params.episode_len, row.mean_regret(), row.mean_nd());
    fmt::print("wrote {}, {}, {}\n", csv_path.string(), summary_path.string(), manifest_path.string());
    for (const auto& f : failures) {
        fmt::print(stderr, "error: {}\n", f);
        status = kFailure;
    }
    return status;
}

int cmd_check_bounds(const std::optional<std::string>& path, std::size_t instances, std::uint64_t seed,
                     std::size_t jobs) {
    bool ok = true;
    auto report = [&](bool pass, const std::string& what) {
        fmt::print("{} {}\n", pass ? "PASS" : "FAIL", what);
        ok = ok && pass;
    };

    const auto deleg = drl::sweep_delegation_information(instances, seed);
    report(deleg.ok(), fmt::format("delegation information: {} instances, {} violations, min gap {:.3g}",
                                   deleg.instances, deleg.violations + deleg.hypothesis_failures, deleg.min_gap));
    const auto thompson = drl::sweep_thompson(instances, seed);
    report(thompson.ok(), fmt::format("posterior sampling information: {} instances, {} violations, min gap {:.3g}",
                                      thompson.instances, thompson.violations + thompson.hypothesis_failures,
                                      thompson.min_gap));
    const auto ident = drl::sweep_regret_identity(20, seed);
    report(ident.ok(), fmt::format("regret decomposition: {} MDPs, max residual {:.3g} (bound {:.3g})",
                                   ident.instances, ident.max_residual, ident.bound));

    if (path) {
        const auto doc = load_valid(*path);
        const auto& cfg = doc.experiment;
        const auto model = drl::make_agent_model(doc.hyps, cfg.epsilon);
        std::vector<std::string> warnings;
        std::optional<drl::ParameterDerivation> d;
        if (model.size() >= 2) d = drl::derive_parameters(model.hyps, cfg.gammas.front(), cfg.epsilon);
        const auto params = drl::resolve_params(cfg, cfg.gammas.front(), d ? &*d : nullptr, warnings);
        for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
        const drl::RegretOptions ro{cfg.truncation_tol, drl::PolicyKind::agent, jobs, 0};
        for (std::size_t k = 0; k < model.size(); ++k) {
            const auto cell = drl::estimate_regret(model, k, params, cfg.gammas.front(), cfg.rollouts, cfg.seed, ro);
            const double sigma = cell.nd_sd / std::sqrt(double(cell.rollouts));
            if (model.size() == 1) {
                report(cell.nd_mean == 0.0, fmt::format("k={}: single hypothesis never delegates (nd_mean {})", k,
                                                        cell.nd_mean));
                continue;
            }
            const double bound = drl::delegation_mean_bound(model.size(), params.eta, cfg.epsilon);
            report(cell.nd_mean <= bound + 4.0 * sigma,
                   fmt::format("k={}: mean delegations {:.4g} <= {:.4g} + 4 sigma ({:.3g})", k, cell.nd_mean, bound,
                               4.0 * sigma));
        }
    }
    return ok ? kOk : kFailure;
}

} // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Delegative posterior-sampling agent: planning, validation and regret experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--jobs", jobs, "Worker threads for rollouts (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    std::string config;
    auto* validate = app.add_subcommand("validate", "Check MDPs and advisor sanity");
    validate->add_option("config", config, "Config JSON")->required();

    double plan_gamma = 0.0;
    auto* plan = app.add_subcommand("plan", "Solve each hypothesis and print values, limit sets and tau as JSON");
    plan->add_option("config", config, "Config JSON")->required();
    plan->add_option("--gamma", plan_gamma, "Discount in (0,1)")->required();

    RunFlags flags;
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("config", config, "Config JSON")->required();
        sub->add_option("--rollouts", flags.rollouts, "Rollouts per (discount, hypothesis) cell");
        sub->add_option("--seed", flags.seed, "Master seed");
        sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
        sub->add_option("--eta", flags.eta, "Discard threshold (default: derived)");
        sub->add_option("--T", flags.episode_len, "Episode length (default: derived)");
        sub->add_option("--policy", flags.policy, "agent, oracle or always_delegate");
    };
    auto* run = app.add_subcommand("run", "Regret experiment at one discount");
    add_run_flags(run);
    run->add_option("--gamma", flags.gamma, "Discount (default: first configured)");
    auto* sweep = app.add_subcommand("sweep", "Regret experiment over several discounts");
    add_run_flags(sweep);
    sweep->add_option("--gammas", flags.gammas, "Discounts (default: configured list)");

    std::optional<std::string> bounds_config;
    std::size_t instances = 10000;
    std::uint64_t bounds_seed = 0;
    auto* bounds = app.add_subcommand("check-bounds", "Randomized checks of the information and regret identities");
    bounds->add_option("config", bounds_config, "Optional config for the mean-delegation check");
    bounds->add_option("--instances", instances, "Random instances per information check")
        ->check(CLI::PositiveNumber);
    bounds->add_option("--seed", bounds_seed, "Seed for the random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*validate) return cmd_validate(config);
        if (*plan) return cmd_plan(config, plan_gamma);
        if (*run || *sweep) {
            if (flags.rollouts && *flags.rollouts == 0) throw UsageError("--rollouts must be at least 1");
            return cmd_experiment(config, flags, jobs);
        }
        if (*bounds) return cmd_check_bounds(bounds_config, instances, bounds_seed, jobs);
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    } catch (const drl::ParseError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    } catch (const drl::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kFailure;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kFailure;
    }
    return kUsage;
}
