#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wotc/impossibility.hpp"

using namespace wotc;
using Catch::Approx;

TEST_CASE("binomial TVD at T = 3 matches the hand enumeration") {
    // Bin(3, 1/6) = (125, 75, 15, 1)/216 against Bin(1, 1/2) = (108, 108)/216:
    // TVD = (17 + 33 + 15 + 1) / 432 = 11/72
    CHECK(binomial_tvd(3) == Approx(11.0 / 72.0).margin(1e-15));
}

TEST_CASE("binomial TVD stays below the lemma bound at scale") {
    const double tvd = binomial_tvd(3000);
    CHECK(tvd < 0.123);
    CHECK(tvd > 0.12);
}

TEST_CASE("binomial TVD converges to the Gaussian limit") {
    CHECK(binomial_tvd(30000) == Approx(gaussian_tvd_limit()).margin(1e-3));
}

TEST_CASE("binomial TVD rejects invalid sizes") {
    CHECK_THROWS_AS(binomial_tvd(0), std::invalid_argument);
    CHECK_THROWS_AS(binomial_tvd(100), std::invalid_argument);
}

TEST_CASE("the Gaussian limit matches the closed normal-CDF form") {
    const GaussianTvd g = gaussian_tvd_limit_details();
    CHECK(g.value >= 0.1229);
    CHECK(g.value <= 0.12295);
    CHECK(g.value == Approx(0.12295).margin(5e-5));
    CHECK(g.refinement_delta < 1e-8);

    // independent route: 2 (Phi(a/sigma_g) - Phi(a/sigma_f)) via erf
    const double sigma_g = std::sqrt(1.0 / 12.0);
    const double sigma_f = std::sqrt(5.0 / 36.0);
    const auto phi = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
    const double closed = 2.0 * (phi(g.crossing / sigma_g) - phi(g.crossing / sigma_f));
    CHECK(g.value == Approx(closed).margin(1e-9));

    // the densities really cross there
    CHECK(std::abs(normal_pdf(g.crossing, 1.0 / 12.0) - normal_pdf(g.crossing, 5.0 / 36.0)) < 1e-10);
}

TEST_CASE("census distributions reduce to the closed-form binomials") {
    const CounterexampleInstance instance;
    const long long t = 300;
    // setting X, world L, friendly coalition posing as contingent: the
    // h-count is Bin(T/3, 1/2)
    const std::vector<ReportGroup> lx_dev = instance.deviated_groups(0, t);
    const std::vector<double> pmf_lx = h_count_distribution(lx_dev);
    const std::vector<double> bin_lx = binomial_pmf_vector(t / 3, 0.5);
    double worst = 0.0;
    for (size_t k = 0; k < pmf_lx.size(); ++k) {
        const double expected = k < bin_lx.size() ? bin_lx[k] : 0.0;
        worst = std::max(worst, std::abs(pmf_lx[k] - expected));
    }
    CHECK(worst < 1e-12);

    // setting Y, world H, truthful: Bin(T, 1/6)
    const std::vector<double> pmf_hy = h_count_distribution(instance.truthful_groups(3, t));
    const std::vector<double> bin_hy = binomial_pmf_vector(t, 1.0 / 6.0);
    worst = 0.0;
    for (size_t k = 0; k < pmf_hy.size(); ++k) {
        worst = std::max(worst, std::abs(pmf_hy[k] - bin_hy[k]));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("the MAP mechanism fails the audit through the deviation arm") {
    const long long t = 300;
    const AuditReport r = counterexample_audit(map_mechanism(t), t);
    CHECK(r.kind == AuditReport::Kind::DeviationGainViolation);
    for (double acc : r.accuracy) CHECK(acc >= 0.999);
    CHECK(r.deviation_gain > 0.4);
    CHECK(r.deviation_margin > 0.001);
    CHECK(r.accept_lx_deviated > 0.867);
    // the printed bound chain
    CHECK(r.chain_utility_lower == Approx(0.84966).margin(1e-12));
    CHECK(r.chain_utility_upper == Approx(0.0894).margin(1e-12));
    CHECK(r.chain_gain == Approx(0.76026).margin(1e-12));
}

TEST_CASE("constant mechanisms fail the audit through the accuracy arm") {
    const long long t = 300;
    const AuditReport r =
        counterexample_audit([](const AnonymousView&) { return 1.0; }, t);
    CHECK(r.kind == AuditReport::Kind::AccuracyViolation);
    // constant Accept is wrong in the two L environments
    CHECK((r.worst_environment == 0 || r.worst_environment == 1));
    CHECK(r.worst_accuracy == 0.0);
    CHECK(r.accuracy_margin == Approx(0.999).margin(1e-12));

    // a fair-coin mechanism also fails on accuracy
    const AuditReport coin =
        counterexample_audit([](const AnonymousView&) { return 0.5; }, t);
    CHECK(coin.kind == AuditReport::Kind::AccuracyViolation);
}

TEST_CASE("stateful decision functions are rejected as non-anonymous") {
    int calls = 0;
    const AnonymousDecisionFn stateful = [&calls](const AnonymousView&) {
        return (calls++ % 2 == 0) ? 1.0 : 0.0;
    };
    CHECK_THROWS_AS(counterexample_audit(stateful, 300), contract_violation_error);

    const AnonymousDecisionFn out_of_range = [](const AnonymousView&) { return 1.5; };
    CHECK_THROWS_AS(counterexample_audit(out_of_range, 300), contract_violation_error);
}

TEST_CASE("audits validate the agent count") {
    CHECK_THROWS_AS(counterexample_audit([](const AnonymousView&) { return 0.0; }, 100),
                    std::invalid_argument);
    CHECK_THROWS_AS(map_mechanism(7), std::invalid_argument);
}

TEST_CASE("anonymous views are permutation invariant by construction") {
    BallotBox forward = {friendly_report(), contingent_report(kSignalHigh, 0.4),
                         contingent_report(kSignalLow, 0.6)};
    BallotBox backward = {contingent_report(kSignalLow, 0.6), contingent_report(kSignalHigh, 0.4),
                          friendly_report()};
    CHECK(AnonymousView::from_reports(forward) == AnonymousView::from_reports(backward));
    const AnonymousView v = AnonymousView::from_reports(forward);
    CHECK(v.total() == 3);
    CHECK(v.type_total(AgentType::Contingent) == 2);
    CHECK(v.fraction(AgentType::Contingent, kSignalHigh) == Approx(1.0 / 3.0));
}
