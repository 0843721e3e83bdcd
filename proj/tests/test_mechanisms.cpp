#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "test_helpers.hpp"
#include "wotc/mechanisms.hpp"

using namespace wotc;
using Catch::Approx;

namespace {

BallotBox worked_box() {
    // types [F,U,C,C,C], contingent signals [h,h,l], predictions
    // [0.548, 0.548, 0.452]
    return {friendly_report(),
            unfriendly_report(),
            contingent_report(kSignalHigh, 0.548),
            contingent_report(kSignalHigh, 0.548),
            contingent_report(kSignalLow, 0.452)};
}

}  // namespace

TEST_CASE("mechanism 1 decides the worked five-agent box at the median step") {
    const Decision d = mechanism1_decide(worked_box());
    CHECK(d.winner == Alternative::Accept);
    CHECK(d.fired_step == DecisionStep::MedianComparison);
    CHECK(d.audit.fraction_high == Approx(0.6).margin(1e-15));
    CHECK(d.audit.pivot == Approx(0.548).margin(1e-15));
    CHECK(d.audit.count_friendly == 1);
    CHECK(d.audit.count_contingent == 3);
    CHECK(d.audit.count_unfriendly == 1);
}

TEST_CASE("mechanism 1 type-majority step fires first") {
    const BallotBox box = {friendly_report(), friendly_report(), friendly_report(),
                           unfriendly_report(), contingent_report(kSignalLow, 0.5)};
    const Decision d = mechanism1_decide(box);
    CHECK(d.winner == Alternative::Accept);
    CHECK(d.fired_step == DecisionStep::TypeMajority);
}

TEST_CASE("mechanism 1 strict comparison sends ties to Reject") {
    const BallotBox box = {contingent_report(kSignalLow, 0.42), contingent_report(kSignalLow, 0.42),
                           contingent_report(kSignalLow, 0.42)};
    const Decision d = mechanism1_decide(box);
    CHECK(d.winner == Alternative::Reject);
    CHECK(d.audit.fraction_high == 0.0);

    // fraction equal to the median is not "more than"
    const BallotBox tie = {contingent_report(kSignalHigh, 1.0 / 3.0),
                           contingent_report(kSignalLow, 1.0 / 3.0),
                           contingent_report(kSignalLow, 1.0 / 3.0)};
    CHECK(mechanism1_decide(tie).winner == Alternative::Reject);
}

TEST_CASE("mechanism 2 keeps the elicited predictions") {
    // same worked box, but F reports 0.548 and U reports 0.452
    BallotBox box = worked_box();
    box[0].value = 0.548;
    box[1].value = 0.452;
    const Decision d = mechanism2_decide(box);
    CHECK(d.winner == Alternative::Accept);
    CHECK(d.audit.pivot == Approx(0.548).margin(1e-15));

    // all-contingent boxes decide identically under both mechanisms
    const BallotBox all_c = {contingent_report(kSignalHigh, 0.6), contingent_report(kSignalLow, 0.4),
                             contingent_report(kSignalHigh, 0.5)};
    CHECK(mechanism1_decide(all_c).winner == mechanism2_decide(all_c).winner);
}

TEST_CASE("mechanism 2 median is pinned by the truthful majority") {
    // a friendly coalition reporting 0 cannot push the median below the
    // contingent+unfriendly block
    SplitMix64 rng{41};
    const double lo = 0.44, hi = 0.56;  // truthful contingent values
    for (int rep = 0; rep < 200; ++rep) {
        BallotBox box;
        const int f = testing::uniform_int(rng, 0, 4);
        const int u = testing::uniform_int(rng, 0, 4);
        int c = std::max(f + u + 1, testing::uniform_int(rng, 5, 11));
        if ((f + c + u) % 2 == 0) ++c;
        for (int i = 0; i < f; ++i) {
            Report r = friendly_report();
            r.value = 0.0;  // coalition attack value
            box.push_back(r);
        }
        for (int i = 0; i < u; ++i) {
            Report r = unfriendly_report();
            r.value = 1.0;
            box.push_back(r);
        }
        for (int i = 0; i < c; ++i) {
            box.push_back(contingent_report(testing::uniform_int(rng, 0, 1), rng.next_double() < 0.5 ? lo : hi));
        }
        const Decision d = mechanism2_decide(box);
        CHECK(d.audit.pivot >= lo);
        CHECK(d.audit.pivot <= hi);
    }
}

TEST_CASE("mechanism 3 has no type-majority step") {
    const BallotBox box = {friendly_report(), friendly_report(), friendly_report(),
                           unfriendly_report(), contingent_report(kSignalLow, 0.9)};
    // friendly majority, but the decision still goes through the median of
    // thresholds: q = (0,0,0,1,0.9), median 0; fraction h = 3/5 > 0
    const Decision d = mechanism3_decide(box);
    CHECK(d.fired_step == DecisionStep::MedianComparison);
    CHECK(d.winner == Alternative::Accept);
}

TEST_CASE("mechanism 3 single contingent agent follows its threshold") {
    CHECK(mechanism3_decide({contingent_report(kSignalHigh, 0.5)}).winner == Alternative::Accept);
    CHECK(mechanism3_decide({contingent_report(kSignalLow, 0.5)}).winner == Alternative::Reject);
}

TEST_CASE("supermajority at one half reduces to mechanism 1") {
    SplitMix64 rng{99};
    for (int rep = 0; rep < 300; ++rep) {
        const BallotBox box = testing::random_ballot_box(rng);
        const Decision d1 = mechanism1_decide(box);
        const Decision d2 = supermajority_decide(box, 0.5);
        CHECK(d1.winner == d2.winner);
        CHECK(d1.fired_step == d2.fired_step);
    }
}

TEST_CASE("supermajority rank arithmetic") {
    // tau = 2/3, T = 9: pivot is the 6th smallest prediction
    BallotBox box;
    const double preds[9] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    for (double p : preds) box.push_back(contingent_report(kSignalLow, p));
    const Decision d = supermajority_decide(box, 2.0 / 3.0);
    CHECK(d.audit.pivot == Approx(0.6).margin(1e-15));

    // 7 friendly reports out of 9 clear the 2/3 type bar
    BallotBox types;
    for (int i = 0; i < 7; ++i) types.push_back(friendly_report());
    types.push_back(unfriendly_report());
    types.push_back(contingent_report(kSignalLow, 0.5));
    const Decision dt = supermajority_decide(types, 2.0 / 3.0);
    CHECK(dt.winner == Alternative::Accept);
    CHECK(dt.fired_step == DecisionStep::TypeMajority);

    // 6 of 9 is not more than tau*T = 6
    BallotBox six;
    for (int i = 0; i < 6; ++i) six.push_back(friendly_report());
    for (int i = 0; i < 3; ++i) six.push_back(contingent_report(kSignalLow, 1.0));
    const Decision ds = supermajority_decide(six, 2.0 / 3.0);
    CHECK(ds.fired_step == DecisionStep::MedianComparison);
}

TEST_CASE("surprisingly popular picks the over-reported signal") {
    // the skewed instance in world H: fraction of l about 0.6, predictions
    // between 0.75 and 6/7
    const std::vector<Signal> signals = {kSignalLow, kSignalLow, kSignalLow, kSignalHigh, kSignalHigh};
    const std::vector<double> predictions = {6.0 / 7.0, 6.0 / 7.0, 6.0 / 7.0, 0.75, 0.75};
    const SpEstimate e = surprisingly_popular(signals, predictions);
    CHECK(e.fraction_low == Approx(0.6).margin(1e-15));
    CHECK(e.world == kWorldHigh);

    // world L: nearly everyone reports l, fraction exceeds every prediction
    const std::vector<Signal> low_signals = {kSignalLow, kSignalLow, kSignalLow, kSignalLow, kSignalHigh};
    const std::vector<double> low_predictions = {6.0 / 7.0, 6.0 / 7.0, 6.0 / 7.0, 6.0 / 7.0, 0.75};
    CHECK(surprisingly_popular(low_signals, low_predictions).world == kWorldLow);
}

TEST_CASE("surprisingly popular ties resolve to the high world") {
    const std::vector<Signal> signals = {kSignalLow, kSignalHigh};
    const std::vector<double> predictions = {0.5, 0.5};
    CHECK(surprisingly_popular(signals, predictions).world == kWorldHigh);
    CHECK_THROWS_AS(surprisingly_popular({}, {}), std::invalid_argument);
}

TEST_CASE("naive majority counts votes in the signal slot") {
    const BallotBox accept_heavy = {contingent_report(kSignalHigh, 0.0),
                                    contingent_report(kSignalHigh, 0.0),
                                    contingent_report(kSignalLow, 0.0)};
    CHECK(naive_majority_decide(accept_heavy).winner == Alternative::Accept);
    CHECK(naive_majority_decide({contingent_report(kSignalLow, 0.0)}).winner == Alternative::Reject);
}

TEST_CASE("mechanism decisions are anonymous") {
    SplitMix64 rng{7777};
    for (int rep = 0; rep < 200; ++rep) {
        BallotBox box = testing::random_ballot_box(rng);
        BallotBox shuffled = box;
        for (size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[rng.next() % i]);
        }
        CHECK(mechanism1_decide(box).winner == mechanism1_decide(shuffled).winner);
        CHECK(mechanism2_decide(box).winner == mechanism2_decide(shuffled).winner);
        CHECK(mechanism3_decide(box).winner == mechanism3_decide(shuffled).winner);
    }
}

TEST_CASE("mechanism 1 is monotone toward Accept") {
    // switching one effective signal l -> h, or lowering one effective
    // prediction, never flips Accept to Reject
    SplitMix64 rng{1234};
    int flips = 0, cuts = 0;
    for (int rep = 0; rep < 500; ++rep) {
        BallotBox box = testing::random_ballot_box(rng);
        const Decision before = mechanism1_decide(box);
        if (before.winner != Alternative::Accept) continue;

        for (size_t i = 0; i < box.size(); ++i) {
            if (box[i].type != AgentType::Contingent) continue;
            if (box[i].signal == kSignalLow) {
                BallotBox raised = box;
                raised[i].signal = kSignalHigh;
                CHECK(mechanism1_decide(raised).winner == Alternative::Accept);
                ++flips;
            }
            BallotBox lowered = box;
            lowered[i].value = box[i].value * rng.next_double();
            CHECK(mechanism1_decide(lowered).winner == Alternative::Accept);
            ++cuts;
        }
    }
    CHECK(flips > 100);
    CHECK(cuts > 300);
}

TEST_CASE("truthful reports carry the population-adjusted predictions") {
    const Scenario scenario = testing::symmetric_scenario(1, 3, 1);
    // alpha_F = alpha_U = 0.2, alpha_C = 0.6
    const Report high = truthful_report(scenario, 1, kSignalHigh);
    CHECK(high.type == AgentType::Contingent);
    CHECK(high.signal == kSignalHigh);
    CHECK(high.value == Approx(0.2 + 0.6 * 0.58).margin(1e-12));
    const Report low = truthful_report(scenario, 1, kSignalLow);
    CHECK(low.value == Approx(0.2 + 0.6 * 0.42).margin(1e-12));

    // friendly agents report only their type under mechanism 1
    const Report f = truthful_report(scenario, 0, kSignalLow);
    CHECK(f.type == AgentType::Friendly);

    // an all-contingent population predicts the raw peer belief
    const Scenario all_c = testing::symmetric_scenario(0, 5, 0);
    CHECK(truthful_report(all_c, 0, kSignalHigh).value == Approx(0.58).margin(1e-12));
}

TEST_CASE("truthful mechanism-3 thresholds are interval midpoints") {
    Scenario s;
    s.model = SignalModel({0.3, 0.4, 0.3}, {{0.8, 0.5, 0.2}, {0.2, 0.5, 0.8}});
    const UtilityTable friendly({3, 4, 5}, {2, 1, 0}, 5);
    const UtilityTable contingent({1, 4, 5}, {2, 1, 0}, 5);
    const UtilityTable unfriendly({1, 2, 5}, {4, 3, 0}, 5);
    s.population = make_population_from_counts({{friendly, 1}, {contingent, 2}, {unfriendly, 2}});
    s.mechanism = MechanismId::Wotc3;
    // alpha_F = 0.2, alpha_C = 0.4; interval (0.2 + 0.4*0.2, 0.2 + 0.4*0.5)
    const Report q = truthful_report(s, 1, kSignalHigh);
    CHECK(q.value == Approx(0.5 * (0.28 + 0.4)).margin(1e-12));
}

TEST_CASE("questionnaire answers decode to reports") {
    CHECK(encode_questionnaire('a', std::nullopt).type == AgentType::Friendly);
    CHECK(encode_questionnaire('b', std::nullopt).type == AgentType::Unfriendly);
    const Report c = encode_questionnaire('c', 54.8);
    CHECK(c.type == AgentType::Contingent);
    CHECK(c.signal == kSignalHigh);
    CHECK(c.value == Approx(0.548).margin(1e-12));
    const Report d = encode_questionnaire('d', 45.2);
    CHECK(d.signal == kSignalLow);
    CHECK(d.value == Approx(0.452).margin(1e-12));

    CHECK_THROWS_AS(encode_questionnaire('a', 50.0), std::invalid_argument);
    CHECK_THROWS_AS(encode_questionnaire('c', std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(encode_questionnaire('c', 120.0), std::invalid_argument);
    CHECK_THROWS_AS(encode_questionnaire('x', std::nullopt), std::invalid_argument);
}

TEST_CASE("ballot boxes must be odd and binary") {
    CHECK_THROWS_AS(mechanism1_decide(BallotBox{}), std::invalid_argument);
    CHECK_THROWS_AS(mechanism1_decide(BallotBox{friendly_report(), unfriendly_report()}),
                    std::invalid_argument);
    BallotBox wide = {contingent_report(2, 0.5)};
    CHECK_THROWS_AS(mechanism1_decide(wide), std::invalid_argument);
}
