#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wotc/engine.hpp"
#include "wotc/mechanisms.hpp"
#include "wotc/model.hpp"

namespace wotc {

struct budget_exceeded_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Finite set of admissible prediction/threshold values. Always contains 0, 1
// and every truthful value of the scenario, so the truthful report of each
// agent lies in the induced report set.
struct ReportGrid {
    std::vector<double> values;  // sorted, unique

    static ReportGrid make(const Scenario& scenario, std::vector<double> extra = {}) {
        std::vector<double> vals = std::move(extra);
        vals.push_back(0.0);
        vals.push_back(1.0);
        const StrategyProfile truthful = truthful_profile(scenario);
        for (const Strategy& strat : truthful.agents) {
            for (const Report& r : strat.by_signal) vals.push_back(r.value);
        }
        for (double v : vals) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("ReportGrid: value outside [0,1]");
            }
        }
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        return {std::move(vals)};
    }
};

// All behaviorally distinct reports for a mechanism over the grid. Fields a
// mechanism overwrites or ignores are kept canonical so duplicates collapse:
// wotc1/wotc3/supermajority read nothing but the type from F/U reports,
// wotc2 additionally reads their prediction, the majority baseline reads
// only the vote in the signal slot.
inline std::vector<Report> enumerate_reports(MechanismId mechanism, const ReportGrid& grid) {
    std::vector<Report> reports;
    switch (mechanism) {
        case MechanismId::Wotc1:
        case MechanismId::Wotc3:
        case MechanismId::Supermajority:
            reports.push_back(friendly_report());
            reports.push_back(unfriendly_report());
            for (Signal s : {kSignalLow, kSignalHigh}) {
                for (double v : grid.values) reports.push_back(contingent_report(s, v));
            }
            break;
        case MechanismId::Wotc2:
            for (double v : grid.values) reports.push_back({AgentType::Friendly, kSignalLow, v});
            for (double v : grid.values) reports.push_back({AgentType::Unfriendly, kSignalLow, v});
            for (Signal s : {kSignalLow, kSignalHigh}) {
                for (double v : grid.values) reports.push_back(contingent_report(s, v));
            }
            break;
        case MechanismId::Majority:
            reports.push_back(contingent_report(kSignalLow, 0.0));
            reports.push_back(contingent_report(kSignalHigh, 0.0));
            break;
        case MechanismId::SurprisinglyPopular:
            for (Signal s : {kSignalLow, kSignalHigh}) {
                for (double v : grid.values) reports.push_back(contingent_report(s, v));
            }
            break;
    }
    return reports;
}

// All pure strategies over the report set: every map from the original
// signal set to a report.
inline std::vector<Strategy> enumerate_strategies(const std::vector<Report>& reports, int num_signals) {
    if (reports.empty()) throw std::invalid_argument("enumerate_strategies: empty report set");
    std::vector<Strategy> out;
    std::vector<size_t> pick(static_cast<size_t>(num_signals), 0);
    while (true) {
        Strategy strat;
        strat.by_signal.reserve(static_cast<size_t>(num_signals));
        for (size_t m = 0; m < pick.size(); ++m) strat.by_signal.push_back(reports[pick[m]]);
        out.push_back(std::move(strat));
        int m = num_signals - 1;
        while (m >= 0 && ++pick[static_cast<size_t>(m)] == reports.size()) {
            pick[static_cast<size_t>(m)] = 0;
            --m;
        }
        if (m < 0) break;
    }
    return out;
}

inline std::vector<Strategy> enumerate_strategies(const Scenario& scenario, const ReportGrid& grid) {
    return enumerate_strategies(enumerate_reports(scenario.mechanism, grid), scenario.model.num_signals);
}

// A coalition deviation in which every member weakly gains and some member
// gains strictly more than epsilon.
struct DeviationWitness {
    std::vector<int> coalition;        // agent indices, ascending
    std::vector<Strategy> strategies;  // one per coalition member
    std::vector<double> deltas;        // ex-ante utility change per member
    double max_gain = 0.0;
    double epsilon = 0.0;
};

struct SbneOptions {
    DecideFn decide;                              // defaults to the scenario mechanism
    long long max_evaluations = 50'000'000;       // exact_lambda budget
    double weak_gain_tolerance = 1e-12;
};

struct SbneResult {
    bool holds = true;
    std::optional<DeviationWitness> witness;  // first witness in scan order
    double max_admissible_gain = 0.0;         // over deviations where all members weakly gain
    double max_admissible_gain_mixed = 0.0;   // same, restricted to coalitions mixing F and U
    long long evaluations = 0;
    double epsilon = 0.0;
    size_t strategy_count = 0;
};

namespace detail {

template <typename Fn>
void for_each_coalition(int t_count, int max_size, Fn&& fn) {
    std::vector<int> coalition;
    const auto recurse = [&](auto&& self, int next) -> void {
        if (!coalition.empty()) fn(coalition);
        if (static_cast<int>(coalition.size()) == max_size) return;
        for (int i = next; i < t_count; ++i) {
            coalition.push_back(i);
            self(self, i + 1);
            coalition.pop_back();
        }
    };
    recurse(recurse, 0);
}

}  // namespace detail

// Exhaustive epsilon-strong-Bayes-Nash audit over the grid-induced pure
// strategies: scans every coalition up to max_coalition_size and every joint
// deviation, with utilities from exact enumeration. The full scan always
// completes (no early exit) so the admissible-gain statistics cover the
// whole space; the returned witness is the first one in scan order.
inline SbneResult check_epsilon_sbne(const Scenario& scenario, const ReportGrid& grid,
                                     int max_coalition_size, double epsilon,
                                     const SbneOptions& options = {}) {
    const DecideFn decide = options.decide ? options.decide : scenario_decide_fn(scenario);
    const StrategyProfile truthful = truthful_profile(scenario);
    const std::vector<Strategy> strategies = enumerate_strategies(scenario, grid);
    const int t_count = scenario.population.size();

    SbneResult result;
    result.epsilon = epsilon;
    result.strategy_count = strategies.size();
    // one enumeration route for the baseline and every deviation, so
    // behaviorally identical profiles produce bitwise identical utilities
    const OutcomeStats base = exact_lambda(scenario, truthful, decide, ExactMode::ForceFull);
    ++result.evaluations;

    StrategyProfile work = truthful;
    detail::for_each_coalition(t_count, max_coalition_size, [&](const std::vector<int>& coalition) {
        const size_t k = coalition.size();
        std::vector<size_t> pick(k, 0);
        while (true) {
            bool all_truthful = true;
            for (size_t i = 0; i < k; ++i) {
                const Strategy& s = strategies[pick[i]];
                work.agents[static_cast<size_t>(coalition[i])] = s;
                if (!(s == truthful.agents[static_cast<size_t>(coalition[i])])) all_truthful = false;
            }
            if (!all_truthful) {
                if (result.evaluations >= options.max_evaluations) {
                    throw budget_exceeded_error(
                        "equilibrium budget exceeded after " + std::to_string(result.evaluations) +
                        " evaluations (coalition size " + std::to_string(k) + ")");
                }
                const OutcomeStats stats =
                    exact_lambda(scenario, work, decide, ExactMode::ForceFull);
                ++result.evaluations;
                bool admissible = true;
                double max_gain = -1.0;
                for (int member : coalition) {
                    const double delta = stats.agent_utilities[static_cast<size_t>(member)] -
                                         base.agent_utilities[static_cast<size_t>(member)];
                    if (delta < -options.weak_gain_tolerance) {
                        admissible = false;
                        break;
                    }
                    max_gain = std::max(max_gain, delta);
                }
                if (admissible) {
                    result.max_admissible_gain = std::max(result.max_admissible_gain, max_gain);
                    bool has_friendly = false, has_unfriendly = false;
                    for (int member : coalition) {
                        const AgentType ty = scenario.population.types[static_cast<size_t>(member)];
                        has_friendly |= ty == AgentType::Friendly;
                        has_unfriendly |= ty == AgentType::Unfriendly;
                    }
                    if (has_friendly && has_unfriendly) {
                        result.max_admissible_gain_mixed =
                            std::max(result.max_admissible_gain_mixed, max_gain);
                    }
                    if (max_gain > epsilon && !result.witness) {
                        DeviationWitness w;
                        w.coalition = coalition;
                        w.epsilon = epsilon;
                        w.max_gain = max_gain;
                        for (size_t i = 0; i < k; ++i) {
                            w.strategies.push_back(strategies[pick[i]]);
                            w.deltas.push_back(stats.agent_utilities[static_cast<size_t>(coalition[i])] -
                                               base.agent_utilities[static_cast<size_t>(coalition[i])]);
                        }
                        result.witness = std::move(w);
                        result.holds = false;
                    }
                }
            }
            size_t digit = k;
            while (digit > 0 && ++pick[digit - 1] == strategies.size()) {
                pick[digit - 1] = 0;
                --digit;
            }
            if (digit == 0) break;
        }
        for (int member : coalition) {
            work.agents[static_cast<size_t>(member)] = truthful.agents[static_cast<size_t>(member)];
        }
    });
    return result;
}

// Re-derives a witness from scratch and checks the Definition-1 conditions.
inline bool verify_witness(const Scenario& scenario, const DeviationWitness& witness,
                           const DecideFn& decide_override = {}) {
    const DecideFn decide = decide_override ? decide_override : scenario_decide_fn(scenario);
    const StrategyProfile truthful = truthful_profile(scenario);
    StrategyProfile deviated = truthful;
    for (size_t i = 0; i < witness.coalition.size(); ++i) {
        deviated.agents[static_cast<size_t>(witness.coalition[i])] = witness.strategies[i];
    }
    deviated.truthful = false;
    const OutcomeStats base = exact_lambda(scenario, truthful, decide, ExactMode::ForceFull);
    const OutcomeStats dev = exact_lambda(scenario, deviated, decide, ExactMode::ForceFull);
    bool some_strict = false;
    for (int member : witness.coalition) {
        const double delta = dev.agent_utilities[static_cast<size_t>(member)] -
                             base.agent_utilities[static_cast<size_t>(member)];
        if (delta < -1e-12) return false;
        if (delta > witness.epsilon) some_strict = true;
    }
    return some_strict;
}

struct DominanceCounterexample {
    std::vector<Strategy> opponent_profile;  // strategies of all other agents, in index order
    Strategy own;
    double shortfall = 0.0;  // deviating utility minus truthful utility
};

struct DominanceResult {
    bool holds = true;
    double worst_margin = std::numeric_limits<double>::infinity();  // min truthful - deviating
    std::optional<DominanceCounterexample> counterexample;
    long long evaluations = 0;
};

// Checks that truth-telling weakly dominates every grid strategy for one
// predetermined (F or U) agent: for every joint opponent profile over the
// grid and every own deviation, truthful utility >= deviating utility within
// tolerance. Contingent agents are rejected; no dominance is claimed for
// them.
inline DominanceResult check_dominance(const Scenario& scenario, int agent_index,
                                       const ReportGrid& grid, const SbneOptions& options = {}) {
    if (scenario.mechanism != MechanismId::Wotc1) {
        throw std::invalid_argument("check_dominance: stated for Mechanism 1 only");
    }
    const AgentType type = scenario.population.types[static_cast<size_t>(agent_index)];
    if (type == AgentType::Contingent) {
        throw std::invalid_argument("check_dominance: agent must be candidate-friendly or -unfriendly");
    }
    const DecideFn decide = options.decide ? options.decide : scenario_decide_fn(scenario);
    const StrategyProfile truthful = truthful_profile(scenario);
    const std::vector<Strategy> strategies = enumerate_strategies(scenario, grid);
    const int t_count = scenario.population.size();
    const double tol = options.weak_gain_tolerance;

    std::vector<int> opponents;
    for (int i = 0; i < t_count; ++i) {
        if (i != agent_index) opponents.push_back(i);
    }

    DominanceResult result;
    StrategyProfile work = truthful;
    std::vector<size_t> pick(opponents.size(), 0);
    while (true) {
        for (size_t i = 0; i < opponents.size(); ++i) {
            work.agents[static_cast<size_t>(opponents[i])] = strategies[pick[i]];
        }
        work.agents[static_cast<size_t>(agent_index)] = truthful.agents[static_cast<size_t>(agent_index)];
        if (result.evaluations + static_cast<long long>(strategies.size()) + 1 > options.max_evaluations) {
            throw budget_exceeded_error("dominance budget exceeded after " +
                                        std::to_string(result.evaluations) + " evaluations");
        }
        const OutcomeStats truth_stats =
            exact_lambda(scenario, work, decide, ExactMode::ForceFull);
        ++result.evaluations;
        const double u_truth = truth_stats.agent_utilities[static_cast<size_t>(agent_index)];
        for (const Strategy& own : strategies) {
            work.agents[static_cast<size_t>(agent_index)] = own;
            const OutcomeStats dev_stats =
                exact_lambda(scenario, work, decide, ExactMode::ForceFull);
            ++result.evaluations;
            const double u_dev = dev_stats.agent_utilities[static_cast<size_t>(agent_index)];
            const double margin = u_truth - u_dev;
            if (margin < result.worst_margin) {
                result.worst_margin = margin;
                if (margin < -tol && !result.counterexample) {
                    DominanceCounterexample ce;
                    for (size_t i = 0; i < opponents.size(); ++i) ce.opponent_profile.push_back(strategies[pick[i]]);
                    ce.own = own;
                    ce.shortfall = -margin;
                    result.counterexample = std::move(ce);
                    result.holds = false;
                }
            }
        }
        size_t digit = opponents.size();
        while (digit > 0 && ++pick[digit - 1] == strategies.size()) {
            pick[digit - 1] = 0;
            --digit;
        }
        if (digit == 0) break;
    }
    return result;
}

// Outcome of the conflict-of-interest implication between one
// candidate-friendly and one candidate-unfriendly agent.
struct NoWinWinVerdict {
    bool holds = true;
    bool friendly_gained = false;    // delta_friendly > delta_threshold
    bool unfriendly_gained = false;  // delta_unfriendly > delta_threshold
    double delta_friendly = 0.0;
    double delta_unfriendly = 0.0;
    double gamma_low = 0.0;   // P_L (lambda'_L^A - lambda*_L^A)
    double gamma_high = 0.0;  // P_H (lambda*_H^A - lambda'_H^A)
};

// Evaluates: a gain above delta_threshold for the friendly agent forces a
// strict loss for the unfriendly one, and symmetrically. Preconditions pin
// the truthful profile to the low-error regime: lambda*_L^A and lambda*_H^R
// at most failure_bound, and delta_threshold >= B * failure_bound.
inline NoWinWinVerdict no_win_win_predicate(std::span<const double> lambda_truthful,
                                            std::span<const double> lambda_deviated,
                                            const UtilityTable& friendly_table,
                                            const UtilityTable& unfriendly_table,
                                            std::span<const double> prior, double delta_threshold,
                                            double failure_bound) {
    if (lambda_truthful.size() != 2 || lambda_deviated.size() != 2 || prior.size() != 2) {
        throw std::invalid_argument("no_win_win_predicate: binary instance required");
    }
    const Classification cf = classify_agent(friendly_table, 1);
    const Classification cu = classify_agent(unfriendly_table, 1);
    if (cf.type != AgentType::Friendly || cu.type != AgentType::Unfriendly) {
        throw std::invalid_argument("no_win_win_predicate: tables must be F and U");
    }
    for (double v : lambda_truthful) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("lambda outside [0,1]");
    }
    for (double v : lambda_deviated) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("lambda outside [0,1]");
    }
    const double lam_low_accept = lambda_truthful[kWorldLow];
    const double lam_high_reject = 1.0 - lambda_truthful[kWorldHigh];
    if (lam_low_accept > failure_bound + 1e-15 || lam_high_reject > failure_bound + 1e-15) {
        throw std::invalid_argument("no_win_win_predicate: truthful lambda outside the low-error regime");
    }
    const int bound = std::max(friendly_table.bound, unfriendly_table.bound);
    if (delta_threshold + 1e-15 < bound * failure_bound) {
        throw std::invalid_argument("no_win_win_predicate: delta below B * failure_bound");
    }

    NoWinWinVerdict v;
    const auto delta_u = [&](const UtilityTable& table) {
        const double d_low = lambda_deviated[kWorldLow] - lambda_truthful[kWorldLow];
        const double d_high = lambda_deviated[kWorldHigh] - lambda_truthful[kWorldHigh];
        return prior[kWorldLow] * d_low * (table.accept(kWorldLow) - table.reject(kWorldLow)) +
               prior[kWorldHigh] * d_high * (table.accept(kWorldHigh) - table.reject(kWorldHigh));
    };
    v.delta_friendly = delta_u(friendly_table);
    v.delta_unfriendly = delta_u(unfriendly_table);
    v.gamma_low = prior[kWorldLow] * (lambda_deviated[kWorldLow] - lambda_truthful[kWorldLow]);
    v.gamma_high = prior[kWorldHigh] * (lambda_truthful[kWorldHigh] - lambda_deviated[kWorldHigh]);
    v.friendly_gained = v.delta_friendly > delta_threshold;
    v.unfriendly_gained = v.delta_unfriendly > delta_threshold;
    if (v.friendly_gained && !(v.delta_unfriendly < 0.0)) v.holds = false;
    if (v.unfriendly_gained && !(v.delta_friendly < 0.0)) v.holds = false;
    return v;
}

// Regression stubs for exercising the search itself: a mechanism that
// ignores the median (fixed 0.5 pivot) is exploitable by a lone contingent
// agent on biased models, and a constant mechanism makes every profile a
// 0-SBNE.
inline DecideFn broken_median_stub() {
    return [](std::span<const Report> ballots) {
        Decision d = mechanism1_decide(ballots);
        if (d.fired_step == DecisionStep::TypeMajority) return d;
        d.audit.pivot = 0.5;
        d.winner = d.audit.fraction_high > 0.5 ? Alternative::Accept : Alternative::Reject;
        return d;
    };
}

inline DecideFn constant_accept_stub() {
    return [](std::span<const Report> ballots) {
        Decision d;
        d.winner = Alternative::Accept;
        d.fired_step = DecisionStep::MedianComparison;
        d.audit.count_contingent = static_cast<int>(ballots.size());
        return d;
    };
}

// The Theorem-3 default epsilon (2B^2 + 4B) exp(-2 c^2 alpha_C T), with B
// the largest utility bound in the population.
inline double theorem3_epsilon(const Scenario& scenario) {
    const FailureBound fb = theorem2_bound(scenario);
    const double b = static_cast<double>(scenario.population.max_bound());
    const double exponential = fb.type_majority_regime
                                   ? std::exp(-2.0 * fb.c * fb.c * fb.alpha_contingent *
                                              static_cast<double>(scenario.population.size()))
                                   : fb.bound / 2.0;
    return (2.0 * b * b + 4.0 * b) * exponential;
}

}  // namespace wotc
