#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"
#include "wotc/engine.hpp"

using namespace wotc;
using Catch::Approx;

TEST_CASE("seed derivation is stable and sensitive to all inputs") {
    const std::uint64_t a = derive_seed(42, 0, 0);
    CHECK(a == derive_seed(42, 0, 0));
    CHECK(a != derive_seed(42, 0, 1));
    CHECK(a != derive_seed(42, 1, 0));
    CHECK(a != derive_seed(43, 0, 0));
}

TEST_CASE("sample_signal follows the likelihood column") {
    const SignalModel model = make_binary_model(0.5, 0.7, 0.3);
    SplitMix64 rng{5};
    int high = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        if (sample_signal(model, kWorldHigh, rng) == kSignalHigh) ++high;
    }
    CHECK(static_cast<double>(high) / n == Approx(0.7).margin(0.02));
}

TEST_CASE("run_trial is deterministic under a fixed seed") {
    const Scenario s = testing::symmetric_scenario(1, 3, 1);
    const StrategyProfile profile = truthful_profile(s);
    SplitMix64 rng1{derive_seed(9, 0, 0)};
    SplitMix64 rng2{derive_seed(9, 0, 0)};
    const Decision d1 = run_trial(s, profile, kWorldLow, rng1);
    const Decision d2 = run_trial(s, profile, kWorldLow, rng2);
    CHECK(d1.winner == d2.winner);
    CHECK(d1.audit.fraction_high == d2.audit.fraction_high);
}

TEST_CASE("run_trial with a deterministic column is deterministic") {
    // world H emits only h; contingent-only population
    Scenario s;
    s.model = SignalModel({0.5, 0.5}, {{0.5, 0.0}, {0.5, 1.0}});
    s.population = testing::three_type_population(0, 3, 0);
    s.mechanism = MechanismId::Wotc1;
    const StrategyProfile profile = truthful_profile(s);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SplitMix64 rng{seed};
        const Decision d = run_trial(s, profile, kWorldHigh, rng);
        CHECK(d.audit.fraction_high == 1.0);
        CHECK(d.winner == Alternative::Accept);
    }
}

TEST_CASE("exact_lambda reproduces the single-agent hand enumeration") {
    const Scenario s = testing::symmetric_scenario(0, 1, 0);
    const OutcomeStats stats = exact_lambda(s, truthful_profile(s));
    CHECK(stats.lambda_accept[kWorldLow] == Approx(0.3).margin(1e-12));
    CHECK(stats.lambda_accept[kWorldHigh] == Approx(0.7).margin(1e-12));
    CHECK(stats.error_rate == Approx(0.3).margin(1e-12));
    CHECK(stats.standard_error[0] == 0.0);
}

TEST_CASE("estimate_lambda agrees with the exact oracle within three sigma") {
    const Scenario s = testing::symmetric_scenario(0, 1, 0);
    const StrategyProfile profile = truthful_profile(s);
    const OutcomeStats exact = exact_lambda(s, profile);
    const OutcomeStats mc = estimate_lambda(s, profile, 20000, 17);
    for (World w = 0; w < 2; ++w) {
        const double lam = exact.lambda_accept[static_cast<size_t>(w)];
        const double se = std::sqrt(lam * (1.0 - lam) / 20000.0);
        CHECK(std::abs(mc.lambda_accept[static_cast<size_t>(w)] - lam) <= 3.0 * se);
    }
}

TEST_CASE("an all-friendly report profile always accepts") {
    const Scenario s = testing::symmetric_scenario(1, 3, 1);
    StrategyProfile profile = truthful_profile(s);
    for (Strategy& strat : profile.agents) {
        for (Report& r : strat.by_signal) r = friendly_report();
    }
    profile.truthful = false;
    const OutcomeStats stats = exact_lambda(s, profile);
    CHECK(stats.lambda_accept[kWorldLow] == Approx(1.0).margin(1e-12));
    CHECK(stats.lambda_accept[kWorldHigh] == Approx(1.0).margin(1e-12));
}

TEST_CASE("count-based and full enumeration agree") {
    for (MechanismId mech : {MechanismId::Wotc1, MechanismId::Wotc2, MechanismId::Wotc3}) {
        const Scenario s = testing::symmetric_scenario(1, 3, 1, mech);
        const StrategyProfile profile = truthful_profile(s);
        const OutcomeStats counted = exact_lambda(s, profile);
        const OutcomeStats full = exact_lambda(s, profile, {}, ExactMode::ForceFull);
        for (World w = 0; w < 2; ++w) {
            CHECK(counted.lambda_accept[static_cast<size_t>(w)] ==
                  Approx(full.lambda_accept[static_cast<size_t>(w)]).margin(1e-12));
        }
    }
}

TEST_CASE("exact_lambda enforces the enumeration limits") {
    // 21 agents whose contingent members play two different vote maps under
    // the naive baseline: the type blocks are not uniform, and full
    // enumeration refuses T > 20
    Scenario s;
    s.model = make_binary_model(0.8, 0.9, 0.6);
    const UtilityTable eager({1, 3}, {2, 0}, 3);     // votes its posterior: h -> Accept
    const UtilityTable skeptical({0, 1}, {3, 0}, 3); // still Reject after h
    std::vector<UtilityTable> agents;
    for (int i = 0; i < 11; ++i) agents.push_back(eager);
    for (int i = 0; i < 10; ++i) agents.push_back(skeptical);
    s.population = Population(agents);
    s.mechanism = MechanismId::Majority;
    CHECK_THROWS_AS(exact_lambda(s, truthful_profile(s)), enumeration_limit_error);
}

TEST_CASE("expected_utility matches the direct formula") {
    // friendly table, accept sure in H and never in L
    const UtilityTable friendly({2, 3}, {1, 0}, 3);
    const std::vector<double> lambda{0.0, 1.0};
    const std::vector<double> prior{0.98, 0.02};
    CHECK(expected_utility(lambda, friendly, prior) == Approx(1.04).margin(1e-12));

    // constant accept collapses to the prior-weighted accept utilities
    const std::vector<double> always{1.0, 1.0};
    CHECK(expected_utility(always, friendly, prior) ==
          Approx(0.98 * 2.0 + 0.02 * 3.0).margin(1e-12));

    // a contingent agent whose wish is met exactly attains its maximum
    const UtilityTable contingent({1, 3}, {2, 0}, 3);
    const std::vector<double> wish{0.0, 1.0};
    CHECK(expected_utility(wish, contingent, prior) ==
          Approx(0.98 * 2.0 + 0.02 * 3.0).margin(1e-12));
}

TEST_CASE("the three utility formulas agree") {
    SplitMix64 rng{4242};
    for (int rep = 0; rep < 1000; ++rep) {
        const double prior_low = testing::uniform(rng, 0.05, 0.95);
        const std::vector<double> prior{prior_low, 1.0 - prior_low};
        const std::vector<double> lambda{rng.next_double(), rng.next_double()};
        const UtilityTable table = rep % 3 == 0   ? testing::random_friendly_table(rng, 9)
                                   : rep % 3 == 1 ? testing::random_unfriendly_table(rng, 9)
                                                  : testing::random_contingent_table(rng, 9);
        const double direct = expected_utility(lambda, table, prior);
        // rewrite via the reject-anchored form
        const double anchored =
            prior[0] * table.reject(0) + prior[1] * table.reject(1) +
            prior[0] * lambda[0] * (table.accept(0) - table.reject(0)) +
            prior[1] * lambda[1] * (table.accept(1) - table.reject(1));
        // rewrite via the mixed anchor
        const double mixed = prior[0] * table.accept(0) + prior[1] * table.reject(1) +
                             prior[0] * (1.0 - lambda[0]) * (table.reject(0) - table.accept(0)) +
                             prior[1] * lambda[1] * (table.accept(1) - table.reject(1));
        CHECK(direct == Approx(anchored).margin(1e-12));
        CHECK(direct == Approx(mixed).margin(1e-12));
    }
}

TEST_CASE("theorem2 bound arithmetic at desk scale") {
    const Scenario s = testing::symmetric_scenario(400, 1201, 400);
    const FailureBound fb = theorem2_bound(s);
    CHECK(fb.c == Approx(0.04).margin(1e-12));
    CHECK_FALSE(fb.type_majority_regime);
    CHECK(fb.bound == Approx(2.0 * std::exp(-2.0 * 0.04 * 0.04 * 1201.0)).margin(1e-12));
    CHECK(fb.bound == Approx(0.0429).margin(5e-4));
    CHECK_FALSE(fb.vacuous);
}

TEST_CASE("theorem2 bound flags the type-majority regime and vacuous sizes") {
    const FailureBound majority = theorem2_bound(testing::symmetric_scenario(3, 1, 1));
    CHECK(majority.type_majority_regime);
    CHECK(majority.bound == 0.0);

    const FailureBound tiny = theorem2_bound(testing::symmetric_scenario(1, 1, 1));
    CHECK(tiny.vacuous);
    CHECK(tiny.bound > 1.0);
}

TEST_CASE("lambda is monotone under a one-agent push toward Accept") {
    const Scenario s = testing::symmetric_scenario(1, 3, 1);
    const StrategyProfile truthful = truthful_profile(s);
    const OutcomeStats base = exact_lambda(s, truthful);

    StrategyProfile always_high = truthful;
    always_high.agents[2].by_signal[kSignalLow] = always_high.agents[2].by_signal[kSignalHigh];
    const OutcomeStats pushed = exact_lambda(s, always_high);
    for (World w = 0; w < 2; ++w) {
        CHECK(pushed.lambda_accept[static_cast<size_t>(w)] >=
              base.lambda_accept[static_cast<size_t>(w)] - 1e-12);
    }

    StrategyProfile lower_pred = truthful;
    for (Report& r : lower_pred.agents[2].by_signal) r.value = 0.0;
    const OutcomeStats lowered = exact_lambda(s, lower_pred);
    for (World w = 0; w < 2; ++w) {
        CHECK(lowered.lambda_accept[static_cast<size_t>(w)] >=
              base.lambda_accept[static_cast<size_t>(w)] - 1e-12);
    }
}

TEST_CASE("estimate_lambda is invariant to the thread count") {
    const Scenario s = testing::symmetric_scenario(1, 3, 1);
    const StrategyProfile profile = truthful_profile(s);
    const OutcomeStats serial = estimate_lambda(s, profile, 4000, 77, 1);
    const OutcomeStats parallel = estimate_lambda(s, profile, 4000, 77, 8);
    CHECK(serial.lambda_accept == parallel.lambda_accept);
    CHECK(serial.agent_utilities == parallel.agent_utilities);
}

TEST_CASE("the binary error rate matches the two-term identity") {
    SplitMix64 rng{31};
    for (int rep = 0; rep < 100; ++rep) {
        Scenario s = testing::symmetric_scenario(1, 5, 1);
        s.model = testing::random_binary_model(rng);
        const OutcomeStats stats = exact_lambda(s, truthful_profile(s));
        const double identity = s.model.prior[kWorldLow] * stats.lambda_accept[kWorldLow] +
                                s.model.prior[kWorldHigh] * (1.0 - stats.lambda_accept[kWorldHigh]);
        CHECK(stats.error_rate == Approx(identity).margin(1e-12));
    }
}
