#include "drl/advisor.hpp"
#include "drl/benchmarks.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace drl;

TEST(Sanity, UniformAdvisorOnTrapFailsConditionOne) {
    const auto m = bench::trap_mdp();
    const auto lim = limit_quantities(m);
    const auto ad = make_advisor(2, 2, {0.5, 0.5, 0.5, 0.5}, 0.4);
    const auto cert = check_epsilon_sane(m, ad, lim);
    EXPECT_FALSE(cert.is_sane);
    ASSERT_EQ(cert.violations.size(), 1u);
    EXPECT_EQ(cert.violations[0].state, 0u);
    EXPECT_EQ(cert.violations[0].condition, SanityCondition::support_in_trap_free);
    EXPECT_NE(std::string(to_string(cert.violations[0].condition)).find("condition i "), std::string::npos);
}

TEST(Sanity, DeterministicSafeAdvisor) {
    const auto m = bench::trap_mdp();
    const auto cert = check_epsilon_sane(m, bench::trap_advisor(false, 0.4), limit_quantities(m));
    EXPECT_TRUE(cert.is_sane);
    EXPECT_EQ(cert.witness_actions[0], ActionIndex{0});
}

TEST(Sanity, BanditUniformDependsOnEpsilon) {
    const auto m = bench::bandit_mdp({0.1, 0.6, 0.3});
    const auto lim = limit_quantities(m);
    std::vector<double> uniform(9, 1.0 / 3.0);
    EXPECT_TRUE(check_epsilon_sane(m, make_advisor(3, 3, uniform, 0.3), lim).is_sane);

    const auto cert = check_epsilon_sane(m, make_advisor(3, 3, uniform, 0.34), lim);
    EXPECT_FALSE(cert.is_sane);
    EXPECT_EQ(cert.violations.size(), 3u);
    for (const auto& v : cert.violations) EXPECT_EQ(v.condition, SanityCondition::bold_blackwell_action);
}

TEST(Sanity, ThresholdIsStrict) {
    const auto m = bench::bandit_mdp({0.1, 0.6});
    const auto lim = limit_quantities(m);
    EXPECT_FALSE(check_epsilon_sane(m, make_advisor(2, 2, {0.5, 0.5, 0.5, 0.5}, 0.5), lim).is_sane);
    EXPECT_TRUE(check_epsilon_sane(m, make_advisor(2, 2, {0.5, 0.5, 0.5, 0.5}, 0.49), lim).is_sane);
}

TEST(Synthesize, FullMixIsDeterministicOptimal) {
    const auto m = bench::trap_mdp();
    const auto lim = limit_quantities(m);
    const auto ad = synthesize_sane_advisor(m, lim, 0.5, 1.0);
    EXPECT_EQ(ad.prob(0, 0), 1.0);
    EXPECT_EQ(ad.prob(0, 1), 0.0);
}

TEST(Synthesize, HalfMix) {
    const auto m = bench::trap_mdp();
    const auto lim = limit_quantities(m);
    const auto ad = synthesize_sane_advisor(m, lim, 0.4, 0.5);
    EXPECT_EQ(ad.prob(0, 0), 1.0); // only one trap-free action at s0
    EXPECT_TRUE(check_epsilon_sane(m, ad, lim).is_sane);
}

TEST(Synthesize, SaneOnRandomMdps) {
    RandomStream rng(31);
    int built = 0;
    for (int trial = 0; trial < 15; ++trial) {
        const auto m = bench::random_mdp(4, 3, rng);
        LimitSolution lim;
        try {
            lim = limit_quantities(m);
        } catch (const BlackwellUnstable&) {
            continue;
        }
        for (double mix : {0.5, 0.8, 1.0}) {
            const auto ad = synthesize_sane_advisor(m, lim, 0.3, mix);
            EXPECT_TRUE(validate_advisor(ad).ok());
            EXPECT_TRUE(check_epsilon_sane(m, ad, lim).is_sane);
        }
        ++built;
    }
    EXPECT_GE(built, 10);
}

TEST(Synthesize, RejectsEpsilonAboveMix) {
    const auto m = bench::trap_mdp();
    const auto lim = limit_quantities(m);
    EXPECT_THROW(synthesize_sane_advisor(m, lim, 0.6, 0.5), ModelError);
    EXPECT_THROW(synthesize_sane_advisor(m, lim, 0.1, 0.0), ModelError);
}

TEST(OptimalTable, Trap) {
    const auto m = bench::trap_mdp();
    const auto lim = limit_quantities(m);
    const auto table = build_optimal_table(m, bench::trap_advisor(false, 0.4), lim, 0.4);
    EXPECT_EQ(table(0), 0u);
    EXPECT_EQ(table(1), 0u); // both actions Blackwell in the trap; lowest index wins
}

TEST(OptimalTable, FollowsAdvisorSupport) {
    const auto m = bench::bandit_mdp({0.6, 0.6, 0.1});
    const auto lim = limit_quantities(m);
    // Actions 0 and 1 are both Blackwell; the advisor only backs action 1.
    const auto ad = make_advisor(3, 3, {0.05, 0.9, 0.05, 0.05, 0.9, 0.05, 0.05, 0.9, 0.05}, 0.2);
    const auto table = build_optimal_table(m, ad, lim, 0.2);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(table(s), 1u);
}

TEST(OptimalTable, NoQualifyingAction) {
    const auto m = bench::trap_mdp();
    const auto lim = limit_quantities(m);
    const auto ad = make_advisor(2, 2, {0.3, 0.7, 0.5, 0.5}, 0.4);
    EXPECT_THROW(build_optimal_table(m, ad, lim, 0.4), ModelError);
}
