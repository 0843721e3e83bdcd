#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "wotc/bayes.hpp"
#include "wotc/model.hpp"

namespace wotc {

// One agent's submission. Which fields a mechanism reads depends on the
// declared type and the mechanism: wotc1 ignores signal/value for F and U,
// wotc2 reads value for everyone, wotc3 treats value as the threshold q_t.
// For the naive-majority baseline the signal slot carries the vote (high =
// Accept), and for surprisingly-popular the value is the predicted fraction
// of low-signal reports.
struct Report {
    AgentType type = AgentType::Contingent;
    Signal signal = kSignalLow;
    double value = 0.0;

    bool operator==(const Report&) const = default;
};

inline Report friendly_report() { return {AgentType::Friendly, kSignalLow, 0.0}; }
inline Report unfriendly_report() { return {AgentType::Unfriendly, kSignalLow, 0.0}; }
inline Report contingent_report(Signal s, double value) { return {AgentType::Contingent, s, value}; }

using BallotBox = std::vector<Report>;

enum class DecisionStep { TypeMajority, MedianComparison };

struct DecisionAudit {
    double fraction_high = 0.0;  // fraction of effective h reports (or accept votes)
    double pivot = 0.0;          // median / rank statistic the fraction was compared against
    int count_friendly = 0;
    int count_contingent = 0;
    int count_unfriendly = 0;
};

struct Decision {
    Alternative winner = Alternative::Reject;
    DecisionStep fired_step = DecisionStep::MedianComparison;
    DecisionAudit audit;
};

namespace detail {

// Guard against floating roundoff when tau*T is meant to be integral: the
// count comparisons and the rank are resolved at 1e-9 scale.
inline constexpr double kRankGuard = 1e-9;

inline void require_valid_box(std::span<const Report> ballots) {
    if (ballots.empty()) throw std::invalid_argument("empty ballot box");
    if (ballots.size() % 2 == 0) throw std::invalid_argument("ballot box size must be odd");
    for (const Report& r : ballots) {
        if (r.signal != kSignalLow && r.signal != kSignalHigh) {
            throw std::invalid_argument("mechanism requires binary signals");
        }
        if (r.type == AgentType::Contingent && !(r.value >= 0.0 && r.value <= 1.0)) {
            throw std::invalid_argument("prediction outside [0,1]");
        }
    }
}

inline Signal effective_signal(const Report& r) {
    if (r.type == AgentType::Friendly) return kSignalHigh;
    if (r.type == AgentType::Unfriendly) return kSignalLow;
    return r.signal;
}

// The order statistic of rank ceil(q) (1-based) over the ascending sort.
inline double rank_statistic(std::vector<double>& values, double rank_real) {
    const int t = static_cast<int>(values.size());
    int rank = static_cast<int>(std::ceil(rank_real - kRankGuard));
    rank = std::clamp(rank, 1, t);
    std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
    return values[static_cast<size_t>(rank - 1)];
}

struct TypeCounts {
    int friendly = 0, contingent = 0, unfriendly = 0;
};

inline TypeCounts count_types(std::span<const Report> ballots) {
    TypeCounts c;
    for (const Report& r : ballots) {
        switch (r.type) {
            case AgentType::Friendly: ++c.friendly; break;
            case AgentType::Contingent: ++c.contingent; break;
            case AgentType::Unfriendly: ++c.unfriendly; break;
        }
    }
    return c;
}

// Shared skeleton of the wotc mechanisms: type-count step (optional), then
// fraction-of-h versus a rank statistic of the predictions, strict.
inline Decision median_mechanism(std::span<const Report> ballots, bool overwrite_predictions,
                                 bool type_majority_step, double accept_rank_fraction) {
    require_valid_box(ballots);
    const int t = static_cast<int>(ballots.size());
    const TypeCounts counts = count_types(ballots);

    int high = 0;
    std::vector<double> predictions;
    predictions.reserve(ballots.size());
    for (const Report& r : ballots) {
        if (effective_signal(r) == kSignalHigh) ++high;
        if (overwrite_predictions && r.type == AgentType::Friendly) {
            predictions.push_back(0.0);
        } else if (overwrite_predictions && r.type == AgentType::Unfriendly) {
            predictions.push_back(1.0);
        } else {
            if (!(r.value >= 0.0 && r.value <= 1.0)) {
                throw std::invalid_argument("prediction outside [0,1]");
            }
            predictions.push_back(r.value);
        }
    }
    const double fraction_high = static_cast<double>(high) / static_cast<double>(t);
    const double pivot = rank_statistic(predictions, accept_rank_fraction * t);

    Decision d;
    d.audit = {fraction_high, pivot, counts.friendly, counts.contingent, counts.unfriendly};
    if (type_majority_step) {
        if (counts.friendly > accept_rank_fraction * t + kRankGuard) {
            d.winner = Alternative::Accept;
            d.fired_step = DecisionStep::TypeMajority;
            return d;
        }
        if (counts.unfriendly > (1.0 - accept_rank_fraction) * t + kRankGuard) {
            d.winner = Alternative::Reject;
            d.fired_step = DecisionStep::TypeMajority;
            return d;
        }
    }
    d.fired_step = DecisionStep::MedianComparison;
    d.winner = fraction_high > pivot ? Alternative::Accept : Alternative::Reject;
    return d;
}

}  // namespace detail

// Mechanism 1: F/U report only a type; their signals become h/l and their
// predictions 0/1; decision by type majority, else fraction-of-h vs median.
inline Decision mechanism1_decide(std::span<const Report> ballots) {
    return detail::median_mechanism(ballots, /*overwrite_predictions=*/true,
                                    /*type_majority_step=*/true, 0.5);
}

// Mechanism 2: identical except every reported prediction is kept as-is.
inline Decision mechanism2_decide(std::span<const Report> ballots) {
    return detail::median_mechanism(ballots, /*overwrite_predictions=*/false,
                                    /*type_majority_step=*/true, 0.5);
}

// Mechanism 3: thresholds q_t instead of predictions and no type-majority
// step; F/U still get q = 0/1 and converted signals.
inline Decision mechanism3_decide(std::span<const Report> ballots) {
    return detail::median_mechanism(ballots, /*overwrite_predictions=*/true,
                                    /*type_majority_step=*/false, 0.5);
}

// The tau-supermajority variant of Mechanism 1: the pivot is the prediction
// of rank ceil(tau*T) and the type step fires at #F > tau*T resp.
// #U > (1-tau)*T. tau = 1/2 reduces to mechanism1_decide.
inline Decision supermajority_decide(std::span<const Report> ballots, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0,1)");
    return detail::median_mechanism(ballots, /*overwrite_predictions=*/true,
                                    /*type_majority_step=*/true, tau);
}

// Naive majority baseline: the signal slot carries the vote (high = Accept).
inline Decision naive_majority_decide(std::span<const Report> ballots) {
    detail::require_valid_box(ballots);
    const int t = static_cast<int>(ballots.size());
    int accept = 0;
    for (const Report& r : ballots) {
        if (r.signal == kSignalHigh) ++accept;
    }
    Decision d;
    d.winner = (2 * accept > t) ? Alternative::Accept : Alternative::Reject;
    d.fired_step = DecisionStep::MedianComparison;
    d.audit = {static_cast<double>(accept) / t, 0.5, 0, t, 0};
    return d;
}

// The surprisingly-popular estimate: the low world iff the observed fraction
// of low signals strictly exceeds the mean predicted fraction.
struct SpEstimate {
    World world = kWorldHigh;
    double fraction_low = 0.0;
    double mean_prediction = 0.0;
};

inline SpEstimate surprisingly_popular(std::span<const Signal> signals,
                                       std::span<const double> low_predictions) {
    if (signals.empty() || signals.size() != low_predictions.size()) {
        throw std::invalid_argument("surprisingly_popular: empty or mismatched reports");
    }
    int low = 0;
    double sum = 0.0;
    for (size_t i = 0; i < signals.size(); ++i) {
        if (signals[i] != kSignalLow && signals[i] != kSignalHigh) {
            throw std::invalid_argument("surprisingly_popular: binary signals required");
        }
        if (low_predictions[i] < 0.0 || low_predictions[i] > 1.0) {
            throw std::invalid_argument("surprisingly_popular: prediction outside [0,1]");
        }
        if (signals[i] == kSignalLow) ++low;
        sum += low_predictions[i];
    }
    SpEstimate e;
    e.fraction_low = static_cast<double>(low) / static_cast<double>(signals.size());
    e.mean_prediction = sum / static_cast<double>(signals.size());
    e.world = e.fraction_low > e.mean_prediction ? kWorldLow : kWorldHigh;
    return e;
}

// Runs a ballot box through the scenario's mechanism. For the
// surprisingly-popular estimate, world H is mapped to Accept so the result
// fits the common Decision shape.
inline Decision decide_ballots(MechanismId mechanism, std::span<const Report> ballots,
                               std::optional<double> tau = std::nullopt) {
    switch (mechanism) {
        case MechanismId::Wotc1: return mechanism1_decide(ballots);
        case MechanismId::Wotc2: return mechanism2_decide(ballots);
        case MechanismId::Wotc3: return mechanism3_decide(ballots);
        case MechanismId::Supermajority:
            if (!tau) throw std::invalid_argument("supermajority requires tau");
            return supermajority_decide(ballots, *tau);
        case MechanismId::Majority: return naive_majority_decide(ballots);
        case MechanismId::SurprisinglyPopular: {
            std::vector<Signal> signals;
            std::vector<double> predictions;
            signals.reserve(ballots.size());
            predictions.reserve(ballots.size());
            for (const Report& r : ballots) {
                signals.push_back(r.signal);
                predictions.push_back(r.value);
            }
            const SpEstimate e = surprisingly_popular(signals, predictions);
            Decision d;
            d.winner = e.world == kWorldHigh ? Alternative::Accept : Alternative::Reject;
            d.fired_step = DecisionStep::MedianComparison;
            d.audit = {1.0 - e.fraction_low, 1.0 - e.mean_prediction,
                       0, static_cast<int>(ballots.size()), 0};
            return d;
        }
    }
    throw std::logic_error("unknown mechanism");
}

// Everything needed to synthesize truthful reports for one scenario, built
// once: type fractions, peer beliefs about the binary signal for every
// original signal, and posterior columns for the baseline vote.
struct TruthfulContext {
    MechanismId mechanism = MechanismId::Wotc1;
    double alpha_friendly = 0.0;
    double alpha_contingent = 0.0;
    int num_signals = 0;
    std::vector<double> t_high_by_signal;            // T_hm, binary h vs original received m
    std::vector<double> p_high_by_world;             // binary h likelihood row
    std::vector<std::vector<double>> posterior;      // [m][n], original model
    std::optional<double> binarize_cut;

    static TruthfulContext make(const Scenario& s) {
        TruthfulContext ctx;
        ctx.mechanism = s.mechanism;
        ctx.alpha_friendly = s.population.alpha_friendly;
        ctx.alpha_contingent = s.population.alpha_contingent;
        ctx.num_signals = s.model.num_signals;
        ctx.binarize_cut = s.binarize_cut;
        ctx.posterior.resize(static_cast<size_t>(s.model.num_signals));
        for (Signal m = 0; m < s.model.num_signals; ++m) {
            ctx.posterior[static_cast<size_t>(m)] = world_posterior(s.model, m);
        }
        if (s.needs_binary_signals()) {
            if (s.binarize_cut) {
                const BinarizeResult b = binarize(s.model, *s.binarize_cut);
                ctx.t_high_by_signal = b.t_high_given_m;
                ctx.p_high_by_world = {b.p_high_low, b.p_high_high};
            } else {
                if (s.model.num_signals != 2) {
                    throw std::invalid_argument("mechanism requires binary signals");
                }
                ctx.t_high_by_signal.resize(2);
                for (Signal m = 0; m < 2; ++m) {
                    ctx.t_high_by_signal[static_cast<size_t>(m)] =
                        peer_prediction(s.model, m, kSignalHigh);
                }
                ctx.p_high_by_world.assign(s.model.likelihood[kSignalHigh].begin(),
                                           s.model.likelihood[kSignalHigh].end());
            }
        }
        return ctx;
    }

    Signal binary_signal(Signal m) const {
        if (!binarize_cut) return m;
        return (static_cast<double>(m + 1) > *binarize_cut) ? kSignalHigh : kSignalLow;
    }

    // Prediction of the post-conversion fraction of h reports after
    // receiving original signal m.
    double converted_high_prediction(Signal m) const {
        return alpha_friendly + alpha_contingent * t_high_by_signal[static_cast<size_t>(m)];
    }

    // The threshold interval a contingent agent holds for Mechanism 3; the
    // endpoints fall back to alpha_F and alpha_F + alpha_C when the personal
    // threshold sits at the edge of the world range.
    std::pair<double, double> threshold_interval(const Classification& cls) const {
        const int n_worlds = static_cast<int>(p_high_by_world.size());
        const double lo_p =
            cls.personal_threshold == 0 ? 0.0 : p_high_by_world[static_cast<size_t>(cls.personal_threshold - 1)];
        const double hi_p =
            cls.personal_high > n_worlds ? 1.0 : p_high_by_world[static_cast<size_t>(cls.personal_high - 1)];
        return {alpha_friendly + alpha_contingent * lo_p, alpha_friendly + alpha_contingent * hi_p};
    }
};

// The honest report of one agent after receiving original signal m.
inline Report truthful_report(const TruthfulContext& ctx, const Classification& cls,
                              const UtilityTable& table, Signal m) {
    switch (ctx.mechanism) {
        case MechanismId::Wotc1:
        case MechanismId::Supermajority:
            if (cls.type == AgentType::Friendly) return friendly_report();
            if (cls.type == AgentType::Unfriendly) return unfriendly_report();
            return contingent_report(ctx.binary_signal(m), ctx.converted_high_prediction(m));
        case MechanismId::Wotc2:
            return {cls.type, ctx.binary_signal(m), ctx.converted_high_prediction(m)};
        case MechanismId::Wotc3: {
            if (cls.type == AgentType::Friendly) return friendly_report();
            if (cls.type == AgentType::Unfriendly) return unfriendly_report();
            const auto [lo, hi] = ctx.threshold_interval(cls);
            return contingent_report(ctx.binary_signal(m), 0.5 * (lo + hi));
        }
        case MechanismId::Majority: {
            const std::vector<double>& post = ctx.posterior[static_cast<size_t>(m)];
            double gain = 0.0;
            for (World n = 0; n < table.num_worlds(); ++n) {
                gain += post[static_cast<size_t>(n)] * (table.accept(n) - table.reject(n));
            }
            return {cls.type, gain > 0.0 ? kSignalHigh : kSignalLow, 0.0};
        }
        case MechanismId::SurprisinglyPopular:
            return {cls.type, ctx.binary_signal(m),
                    1.0 - ctx.t_high_by_signal[static_cast<size_t>(m)]};
    }
    throw std::logic_error("unknown mechanism");
}

// Spec-shaped convenience overload.
inline Report truthful_report(const Scenario& scenario, int agent_index, Signal m) {
    const TruthfulContext ctx = TruthfulContext::make(scenario);
    const UtilityTable& table = scenario.population.agents[static_cast<size_t>(agent_index)];
    const Classification cls = classify_agent(table, scenario.population.threshold);
    return truthful_report(ctx, cls, table, m);
}

// Decodes one questionnaire answer: (a) committed accept, (b) committed
// reject, (c)/(d) contingent with the stated percentage as the prediction or
// threshold. The percentage is present exactly for (c) and (d).
inline Report encode_questionnaire(char answer1, std::optional<double> answer2_percent) {
    switch (answer1) {
        case 'a':
        case 'b':
            if (answer2_percent) {
                throw std::invalid_argument("questionnaire: percentage given with answer (a)/(b)");
            }
            return answer1 == 'a' ? friendly_report() : unfriendly_report();
        case 'c':
        case 'd': {
            if (!answer2_percent) {
                throw std::invalid_argument("questionnaire: answer (c)/(d) requires a percentage");
            }
            const double pct = *answer2_percent;
            if (!(pct >= 0.0 && pct <= 100.0)) {
                throw std::invalid_argument("questionnaire: percentage outside [0,100]");
            }
            return contingent_report(answer1 == 'c' ? kSignalHigh : kSignalLow, pct / 100.0);
        }
        default:
            throw std::invalid_argument("questionnaire: answer must be one of a/b/c/d");
    }
}

}  // namespace wotc
