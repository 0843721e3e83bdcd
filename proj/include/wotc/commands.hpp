#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wotc/config.hpp"
#include "wotc/engine.hpp"
#include "wotc/equilibrium.hpp"
#include "wotc/impossibility.hpp"
#include "wotc/model.hpp"

// Command implementations behind the CLI, kept header-level so the test
// suite can drive them directly. Exit codes: 0 ok, 1 invariant violation,
// 2 parse error, 3 enumeration/search budget exceeded, 4 equilibrium
// witness found.

namespace wotc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitBudget = 3;
inline constexpr int kExitWitness = 4;

namespace detail {

inline int classify_config_error(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << "\n";
    if (dynamic_cast<const config_parse_error*>(&e)) return kExitParse;
    return kExitInvariant;
}

inline std::optional<double> theorem2_column(const Scenario& s) {
    const bool applies = (s.mechanism == MechanismId::Wotc1 || s.mechanism == MechanismId::Wotc2) &&
                         s.model.num_worlds == 2 &&
                         (s.model.num_signals == 2 || s.binarize_cut.has_value());
    if (!applies) return std::nullopt;
    return theorem2_bound(s).bound;
}

inline std::vector<ResultsRow> stats_to_rows(const ScenarioConfig& cfg, const OutcomeStats& stats) {
    std::vector<ResultsRow> rows;
    const std::optional<double> bound = theorem2_column(cfg.scenario);
    for (World w = 0; w < cfg.scenario.model.num_worlds; ++w) {
        ResultsRow r;
        r.scenario_id = cfg.id;
        r.mechanism = to_string(cfg.scenario.mechanism);
        r.t = cfg.scenario.population.size();
        r.world = w + 1;
        r.trials = stats.trials;
        r.lambda_accept = stats.lambda_accept[static_cast<size_t>(w)];
        r.standard_error = stats.standard_error[static_cast<size_t>(w)];
        r.error_rate = stats.error_rate;
        r.theorem2_bound = bound;
        r.majority_wish = to_string(cfg.scenario.population.majority_wish(w));
        r.seed = stats.seed;
        rows.push_back(std::move(r));
    }
    return rows;
}

inline int write_rows(const std::vector<ResultsRow>& rows, const std::string& out_path,
                      std::ostream& out, std::ostream& err) {
    if (out_path.empty()) {
        write_results_csv(out, rows);
        return kExitOk;
    }
    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
        err << "error: cannot write " << out_path << "\n";
        return kExitInvariant;
    }
    write_results_csv(file, rows);
    return kExitOk;
}

}  // namespace detail

inline int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_config(config_path);
        out << "ok: " << cfg.id << " (T = " << cfg.scenario.population.size()
            << ", mechanism = " << to_string(cfg.scenario.mechanism) << ")\n";
        return kExitOk;
    } catch (const std::exception& e) {
        return detail::classify_config_error(e, err);
    }
}

struct SimulateOptions {
    std::optional<long long> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mechanism;  // overrides the config's mechanism
    std::string out_path;
    int threads = 1;
};

inline int cmd_simulate(const std::string& config_path, const SimulateOptions& options,
                        std::ostream& out, std::ostream& err) {
    try {
        ScenarioConfig cfg = load_config(config_path);
        if (options.mechanism) {
            const std::optional<MechanismId> id = mechanism_from_string(*options.mechanism);
            if (!id) {
                err << "error: unknown mechanism `" << *options.mechanism << "`\n";
                return kExitInvariant;
            }
            cfg.scenario.mechanism = *id;
            if (*id != MechanismId::Supermajority) cfg.scenario.tau.reset();
            const std::vector<Violation> violations = validate_scenario(cfg.scenario);
            if (!violations.empty()) {
                err << "error: " << violations.front().code << " (" << violations.front().detail << ")\n";
                return kExitInvariant;
            }
        }
        const long long trials = options.trials.value_or(cfg.trials);
        const std::uint64_t seed = options.seed.value_or(cfg.seed);
        const StrategyProfile profile = truthful_profile(cfg.scenario);
        const OutcomeStats stats = estimate_lambda(cfg.scenario, profile, trials, seed, options.threads);
        return detail::write_rows(detail::stats_to_rows(cfg, stats), options.out_path, out, err);
    } catch (const std::exception& e) {
        return detail::classify_config_error(e, err);
    }
}

inline int cmd_exact(const std::string& config_path, const std::string& out_path, std::ostream& out,
                     std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_config(config_path);
        const StrategyProfile profile = truthful_profile(cfg.scenario);
        OutcomeStats stats;
        try {
            stats = exact_lambda(cfg.scenario, profile);
        } catch (const enumeration_limit_error& e) {
            err << "error: " << e.what() << "\n";
            return kExitBudget;
        }
        stats.seed = cfg.seed;
        return detail::write_rows(detail::stats_to_rows(cfg, stats), out_path, out, err);
    } catch (const std::exception& e) {
        return detail::classify_config_error(e, err);
    }
}

struct EquilibriumOptions {
    std::vector<double> grid_values;       // merged with {0, 1, truthful}
    std::optional<double> epsilon;         // absent = Theorem-3 default
    int max_coalition = 3;
    std::string stub;                      // "", "broken-median", "constant-accept"
    long long max_evaluations = 50'000'000;
};

inline int cmd_equilibrium(const std::string& config_path, const EquilibriumOptions& options,
                           std::ostream& out, std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_config(config_path);
        const Scenario& scenario = cfg.scenario;
        SbneOptions sbne_options;
        sbne_options.max_evaluations = options.max_evaluations;
        if (options.stub == "broken-median") {
            sbne_options.decide = broken_median_stub();
        } else if (options.stub == "constant-accept") {
            sbne_options.decide = constant_accept_stub();
        } else if (!options.stub.empty()) {
            err << "error: unknown stub `" << options.stub << "`\n";
            return kExitParse;
        }
        const ReportGrid grid = ReportGrid::make(scenario, options.grid_values);
        const double epsilon = options.epsilon ? *options.epsilon : theorem3_epsilon(scenario);
        const int max_coalition = std::min(options.max_coalition, scenario.population.size());

        SbneResult result;
        try {
            result = check_epsilon_sbne(scenario, grid, max_coalition, epsilon, sbne_options);
        } catch (const budget_exceeded_error& e) {
            err << "error: " << e.what() << "\n";
            return kExitBudget;
        } catch (const enumeration_limit_error& e) {
            err << "error: " << e.what() << "\n";
            return kExitBudget;
        }

        out << "epsilon: " << format_double(epsilon)
            << (options.epsilon ? "" : " (theorem-3 default)") << "\n";
        out << "grid:";
        for (double v : grid.values) out << ' ' << format_double(v);
        out << "\n";
        out << "strategies per agent: " << result.strategy_count << "\n";
        out << "max coalition size: " << max_coalition << "\n";
        out << "evaluations: " << result.evaluations << "\n";
        out << "observed max admissible gain: " << format_double(result.max_admissible_gain) << "\n";
        out << "observed max admissible gain (mixed F+U coalitions): "
            << format_double(result.max_admissible_gain_mixed) << "\n";

        // dominance sub-report for one representative predetermined agent of
        // each type, Mechanism 1 only
        if (scenario.mechanism == MechanismId::Wotc1 && options.stub.empty()) {
            for (const AgentType type : {AgentType::Friendly, AgentType::Unfriendly}) {
                int index = -1;
                for (int i = 0; i < scenario.population.size(); ++i) {
                    if (scenario.population.types[static_cast<size_t>(i)] == type) {
                        index = i;
                        break;
                    }
                }
                if (index < 0) continue;
                try {
                    const DominanceResult dom = check_dominance(scenario, index, grid, sbne_options);
                    out << "dominance (" << to_string(type) << ", agent " << index
                        << "): " << (dom.holds ? "holds" : "violated")
                        << ", worst margin " << format_double(dom.worst_margin) << "\n";
                    if (!dom.holds) {
                        err << "error: dominance violated for agent " << index << "\n";
                        return kExitWitness;
                    }
                } catch (const budget_exceeded_error& e) {
                    err << "error: " << e.what() << "\n";
                    return kExitBudget;
                }
            }
        }

        if (result.holds) {
            out << "verdict: holds\n";
            return kExitOk;
        }
        out << "verdict: violated\n";
        const DeviationWitness& w = *result.witness;
        nlohmann::json jw;
        jw["coalition"] = w.coalition;
        jw["epsilon"] = w.epsilon;
        jw["max_gain"] = w.max_gain;
        jw["deltas"] = w.deltas;
        nlohmann::json strategies = nlohmann::json::array();
        for (const Strategy& strat : w.strategies) {
            nlohmann::json per_signal = nlohmann::json::array();
            for (const Report& r : strat.by_signal) {
                per_signal.push_back({{"type", to_string(r.type)},
                                      {"signal", r.signal == kSignalHigh ? "h" : "l"},
                                      {"value", r.value}});
            }
            strategies.push_back(per_signal);
        }
        jw["strategies"] = strategies;
        jw["reverified"] = verify_witness(scenario, w, sbne_options.decide);
        out << "witness: " << jw.dump() << "\n";
        return kExitWitness;
    } catch (const std::exception& e) {
        return detail::classify_config_error(e, err);
    }
}

inline int cmd_impossibility(long long t, std::ostream& out, std::ostream& err) {
    if (t < 3 || t % 3 != 0) {
        err << "error: --t must be a positive multiple of 3\n";
        return kExitParse;
    }
    const double tvd = binomial_tvd(t);
    const GaussianTvd gaussian = gaussian_tvd_limit_details();
    out << "binomial_tvd(" << t << "): " << format_double(tvd) << " "
        << (tvd < 0.123 ? "[pass: < 0.123]" : "[FAIL: >= 0.123]") << "\n";
    out << "gaussian_tvd_limit: " << format_double(gaussian.value)
        << " (crossing " << format_double(gaussian.crossing) << ", refinement delta "
        << format_double(gaussian.refinement_delta) << ") "
        << (gaussian.value >= 0.1229 && gaussian.value <= 0.12295 ? "[pass: in [0.1229, 0.12295]]"
                                                                  : "[FAIL]")
        << "\n";
    const AuditReport audit = counterexample_audit(map_mechanism(t), t);
    out << "audit (built-in MAP mechanism):\n";
    const char* env_names[4] = {"LX", "LY", "HX", "HY"};
    for (size_t env = 0; env < 4; ++env) {
        out << "  accuracy " << env_names[env] << ": " << format_double(audit.accuracy[env]) << "\n";
    }
    out << "  accept probability in LX: truthful " << format_double(audit.accept_lx_truthful)
        << ", after F-coalition deviation " << format_double(audit.accept_lx_deviated) << "\n";
    out << "  bound chain: " << format_double(audit.chain_utility_lower) << " - "
        << format_double(audit.chain_utility_upper) << " = " << format_double(audit.chain_gain)
        << "\n";
    switch (audit.kind) {
        case AuditReport::Kind::AccuracyViolation:
            out << "  dichotomy: accuracy violation in " << env_names[audit.worst_environment]
                << ", margin " << format_double(audit.accuracy_margin) << " [> tau = "
                << format_double(audit.tau) << "]\n";
            break;
        case AuditReport::Kind::DeviationGainViolation:
            out << "  dichotomy: deviation-gain violation, gain "
                << format_double(audit.deviation_gain) << ", margin "
                << format_double(audit.deviation_margin) << " [> tau = " << format_double(audit.tau)
                << "]\n";
            break;
        case AuditReport::Kind::NoViolation:
            out << "  dichotomy: no violation found\n";
            break;
    }
    return kExitOk;
}

struct SweepOptions {
    std::vector<long long> t_values;
    std::optional<long long> trials;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    int threads = 1;
};

namespace detail {

// Largest-remainder scaling of the aggregated group counts to total `t`,
// preserving the base proportions. Ties go to earlier groups.
inline std::vector<int> scale_counts(const std::vector<std::pair<UtilityTable, int>>& groups,
                                     long long t) {
    long long base_total = 0;
    for (const auto& [table, count] : groups) base_total += count;
    std::vector<int> scaled(groups.size(), 0);
    std::vector<std::pair<double, size_t>> remainders;
    long long assigned = 0;
    for (size_t g = 0; g < groups.size(); ++g) {
        const double share =
            static_cast<double>(groups[g].second) * static_cast<double>(t) / static_cast<double>(base_total);
        scaled[g] = static_cast<int>(share);
        assigned += scaled[g];
        remainders.push_back({share - static_cast<double>(scaled[g]), g});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (size_t i = 0; assigned < t; ++i) {
        ++scaled[remainders[i % remainders.size()].second];
        ++assigned;
    }
    return scaled;
}

}  // namespace detail

inline int cmd_sweep(const std::string& config_path, const SweepOptions& options, std::ostream& out,
                     std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_config(config_path);
        if (!cfg.aggregated) {
            err << "error: population: sweep requires the aggregated `types` form\n";
            return kExitInvariant;
        }
        if (options.t_values.empty()) {
            err << "error: --t-values must not be empty\n";
            return kExitParse;
        }
        const long long trials = options.trials.value_or(cfg.trials);
        const std::uint64_t seed = options.seed.value_or(cfg.seed);
        std::vector<ResultsRow> rows;
        for (long long t_requested : options.t_values) {
            if (t_requested < 1) {
                err << "error: --t-values entries must be >= 1\n";
                return kExitParse;
            }
            const long long t = t_requested % 2 == 1 ? t_requested : t_requested + 1;  // round up to odd
            const std::vector<int> counts = detail::scale_counts(cfg.groups, t);
            std::vector<std::pair<UtilityTable, int>> scaled;
            for (size_t g = 0; g < cfg.groups.size(); ++g) {
                scaled.emplace_back(cfg.groups[g].first, counts[g]);
            }
            ScenarioConfig run = cfg;
            run.scenario.population = make_population_from_counts(scaled);
            const std::vector<Violation> violations = validate_scenario(run.scenario);
            if (!violations.empty()) {
                err << "error: scaled population at T = " << t << ": " << violations.front().code
                    << "\n";
                return kExitInvariant;
            }
            const StrategyProfile profile = truthful_profile(run.scenario);
            const OutcomeStats stats =
                estimate_lambda(run.scenario, profile, trials, seed, options.threads);
            const std::vector<ResultsRow> t_rows = detail::stats_to_rows(run, stats);
            rows.insert(rows.end(), t_rows.begin(), t_rows.end());
        }
        return detail::write_rows(rows, options.out_path, out, err);
    } catch (const std::exception& e) {
        return detail::classify_config_error(e, err);
    }
}

// Decides one election from a questionnaire ballot file: one ballot per
// line, `a`, `b`, `c <percent>` or `d <percent>`. Supported for the
// mechanisms whose reports the questionnaire encodes (wotc1, wotc3,
// supermajority).
inline int cmd_decide(const std::string& config_path, const std::string& ballots_path,
                      std::ostream& out, std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_config(config_path);
        const MechanismId mechanism = cfg.scenario.mechanism;
        if (mechanism != MechanismId::Wotc1 && mechanism != MechanismId::Wotc3 &&
            mechanism != MechanismId::Supermajority) {
            err << "error: ballot files encode only wotc1/wotc3/supermajority reports\n";
            return kExitInvariant;
        }
        std::ifstream in(ballots_path);
        if (!in) {
            err << "error: cannot open " << ballots_path << "\n";
            return kExitParse;
        }
        BallotBox box;
        std::string line;
        int line_number = 0;
        while (std::getline(in, line)) {
            ++line_number;
            std::istringstream ls(line);
            std::string answer;
            if (!(ls >> answer)) continue;  // blank line
            double percent = 0.0;
            std::optional<double> answer2;
            if (ls >> percent) answer2 = percent;
            if (answer.size() != 1) {
                err << "error: ballots line " << line_number << ": answer must be one of a/b/c/d\n";
                return kExitParse;
            }
            try {
                box.push_back(encode_questionnaire(answer[0], answer2));
            } catch (const std::invalid_argument& e) {
                err << "error: ballots line " << line_number << ": " << e.what() << "\n";
                return kExitInvariant;
            }
        }
        Decision decision;
        try {
            decision = decide_ballots(mechanism, box, cfg.scenario.tau);
        } catch (const std::invalid_argument& e) {
            err << "error: " << e.what() << "\n";
            return kExitInvariant;
        }
        out << "winner: " << to_string(decision.winner) << "\n";
        out << "fired_step: "
            << (decision.fired_step == DecisionStep::TypeMajority ? "type-majority"
                                                                  : "median-comparison")
            << "\n";
        out << "fraction_h: " << format_double(decision.audit.fraction_high)
            << ", pivot: " << format_double(decision.audit.pivot)
            << ", counts F/C/U: " << decision.audit.count_friendly << "/"
            << decision.audit.count_contingent << "/" << decision.audit.count_unfriendly << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        return detail::classify_config_error(e, err);
    }
}

}  // namespace wotc
