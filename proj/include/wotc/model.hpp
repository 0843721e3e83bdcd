#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wotc {

// Worlds and signals are 0-based indices. In the binary case world 0 is the
// low-quality world L, world 1 is H; signal 0 is l ("bad"), signal 1 is h.
using World = int;
using Signal = int;

inline constexpr World kWorldLow = 0;
inline constexpr World kWorldHigh = 1;
inline constexpr Signal kSignalLow = 0;
inline constexpr Signal kSignalHigh = 1;

inline constexpr double kProbabilityTolerance = 1e-12;

enum class Alternative { Accept, Reject };

inline const char* to_string(Alternative a) {
    return a == Alternative::Accept ? "A" : "R";
}

enum class AgentType { Friendly, Contingent, Unfriendly };

inline const char* to_string(AgentType t) {
    switch (t) {
        case AgentType::Friendly: return "F";
        case AgentType::Contingent: return "C";
        default: return "U";
    }
}

enum class MechanismId {
    Wotc1,
    Wotc2,
    Wotc3,
    Supermajority,
    Majority,
    SurprisinglyPopular,
};

inline const char* to_string(MechanismId m) {
    switch (m) {
        case MechanismId::Wotc1: return "wotc1";
        case MechanismId::Wotc2: return "wotc2";
        case MechanismId::Wotc3: return "wotc3";
        case MechanismId::Supermajority: return "supermajority";
        case MechanismId::Majority: return "majority";
        default: return "surprisingly-popular";
    }
}

inline std::optional<MechanismId> mechanism_from_string(const std::string& s) {
    if (s == "wotc1") return MechanismId::Wotc1;
    if (s == "wotc2") return MechanismId::Wotc2;
    if (s == "wotc3") return MechanismId::Wotc3;
    if (s == "supermajority") return MechanismId::Supermajority;
    if (s == "majority") return MechanismId::Majority;
    if (s == "surprisingly-popular") return MechanismId::SurprisinglyPopular;
    return std::nullopt;
}

// A structural problem found by a validation pass. Violations are data, not
// exceptions: callers decide whether to reject the object.
struct Violation {
    std::string code;
    std::string detail;
};

// Prior over worlds plus the signal likelihood matrix. likelihood[m][n] is
// the probability of receiving signal m when the actual world is n; each
// column (fixed n) must sum to 1.
struct SignalModel {
    int num_worlds = 0;
    int num_signals = 0;
    std::vector<double> prior;                    // size num_worlds
    std::vector<std::vector<double>> likelihood;  // [signal][world]

    SignalModel() = default;
    SignalModel(std::vector<double> prior_in, std::vector<std::vector<double>> likelihood_in)
        : prior(std::move(prior_in)), likelihood(std::move(likelihood_in)) {
        num_worlds = static_cast<int>(prior.size());
        num_signals = static_cast<int>(likelihood.size());
        if (num_worlds == 0 || num_signals == 0) {
            throw std::invalid_argument("SignalModel: empty prior or likelihood");
        }
        for (const auto& row : likelihood) {
            if (static_cast<int>(row.size()) != num_worlds) {
                throw std::invalid_argument("SignalModel: likelihood row size != num_worlds");
            }
        }
    }

    double p(Signal m, World n) const { return likelihood[static_cast<size_t>(m)][static_cast<size_t>(n)]; }

    // Pr(S >= m | W = n), the upper tail used by the stochastic-dominance check.
    double tail(Signal m, World n) const {
        double s = 0.0;
        for (Signal k = m; k < num_signals; ++k) s += p(k, n);
        return s;
    }

    bool is_binary() const { return num_worlds == 2 && num_signals == 2; }
};

// Convenience constructor for the two-world two-signal case from
// (P_lL, P_lH): rows l = (P_lL, P_lH), h = (1-P_lL, 1-P_lH).
inline SignalModel make_binary_model(double prior_low, double p_low_given_low, double p_low_given_high) {
    return SignalModel({prior_low, 1.0 - prior_low},
                       {{p_low_given_low, p_low_given_high},
                        {1.0 - p_low_given_low, 1.0 - p_low_given_high}});
}

// Checks the model invariants: prior positivity and normalization, column
// stochasticity, and first-order stochastic dominance of higher worlds
// (strictly larger upper tails for every nontrivial tail; the m = 0 tail is
// identically 1 and carries no information). In the binary case this is the
// usual pair P_lL > P_lH, P_hH > P_hL.
inline std::vector<Violation> validate_model(const SignalModel& model) {
    std::vector<Violation> out;
    double prior_sum = 0.0;
    for (World n = 0; n < model.num_worlds; ++n) {
        prior_sum += model.prior[static_cast<size_t>(n)];
        if (!(model.prior[static_cast<size_t>(n)] > 0.0)) {
            out.push_back({"prior positivity",
                           "prior[" + std::to_string(n) + "] = " +
                               std::to_string(model.prior[static_cast<size_t>(n)]) + " must be > 0"});
        }
    }
    if (std::abs(prior_sum - 1.0) > kProbabilityTolerance) {
        out.push_back({"prior sum", "prior sums to " + std::to_string(prior_sum)});
    }
    for (World n = 0; n < model.num_worlds; ++n) {
        double col = 0.0;
        for (Signal m = 0; m < model.num_signals; ++m) {
            double v = model.p(m, n);
            if (v < 0.0 || v > 1.0) {
                out.push_back({"likelihood range", "p(" + std::to_string(m) + "," + std::to_string(n) +
                                                       ") = " + std::to_string(v)});
            }
            col += v;
        }
        if (std::abs(col - 1.0) > kProbabilityTolerance) {
            out.push_back({"column sum",
                           "likelihood column " + std::to_string(n) + " sums to " + std::to_string(col)});
        }
    }
    for (World hi = 0; hi < model.num_worlds; ++hi) {
        for (World lo = 0; lo < hi; ++lo) {
            for (Signal m = 1; m < model.num_signals; ++m) {
                if (!(model.tail(m, hi) > model.tail(m, lo))) {
                    out.push_back({"positive correlation",
                                   "tail(m=" + std::to_string(m) + ") not increasing between worlds " +
                                       std::to_string(lo) + " and " + std::to_string(hi)});
                }
            }
        }
    }
    return out;
}

// Per-world integer utilities for the two alternatives. value_accept must be
// strictly increasing in the world index and value_reject strictly
// decreasing, with a strict preference in every world.
struct UtilityTable {
    std::vector<int> value_accept;
    std::vector<int> value_reject;
    int bound = 0;  // B

    UtilityTable() = default;
    UtilityTable(std::vector<int> accept, std::vector<int> reject, int bound_in)
        : value_accept(std::move(accept)), value_reject(std::move(reject)), bound(bound_in) {
        const size_t n = value_accept.size();
        if (n == 0 || value_reject.size() != n) {
            throw std::invalid_argument("UtilityTable: mismatched world counts");
        }
        if (bound <= 0) throw std::invalid_argument("UtilityTable: bound must be positive");
        for (size_t i = 0; i < n; ++i) {
            if (value_accept[i] < 0 || value_accept[i] > bound || value_reject[i] < 0 ||
                value_reject[i] > bound) {
                throw std::invalid_argument("UtilityTable: value outside {0..B}");
            }
            if (value_accept[i] == value_reject[i]) {
                throw std::invalid_argument("UtilityTable: indifferent in world " + std::to_string(i));
            }
        }
        for (size_t i = 0; i + 1 < n; ++i) {
            if (!(value_accept[i + 1] > value_accept[i])) {
                throw std::invalid_argument("UtilityTable: value_accept not strictly increasing");
            }
            if (!(value_reject[i + 1] < value_reject[i])) {
                throw std::invalid_argument("UtilityTable: value_reject not strictly decreasing");
            }
        }
    }

    int num_worlds() const { return static_cast<int>(value_accept.size()); }
    int accept(World n) const { return value_accept[static_cast<size_t>(n)]; }
    int reject(World n) const { return value_reject[static_cast<size_t>(n)]; }
    bool prefers_accept(World n) const { return accept(n) > reject(n); }

    // L_t: number of worlds where Reject is preferred. The preference gap
    // accept - reject is strictly increasing, so those worlds form a prefix.
    int personal_threshold() const {
        int count = 0;
        for (World n = 0; n < num_worlds(); ++n) {
            if (!prefers_accept(n)) ++count;
        }
        return count;
    }

    bool operator==(const UtilityTable&) const = default;
};

struct Classification {
    AgentType type;
    int personal_threshold;  // L_t, in 0..N
    int personal_high;       // H_t = L_t + 1
};

// Classifies one agent against the population threshold L (both measured as
// counts of reject-preferred worlds): below -> F, equal -> C, above -> U.
inline Classification classify_agent(const UtilityTable& table, int population_threshold) {
    const int lt = table.personal_threshold();
    AgentType t = AgentType::Contingent;
    if (lt < population_threshold) t = AgentType::Friendly;
    if (lt > population_threshold) t = AgentType::Unfriendly;
    return {t, lt, lt + 1};
}

// An ordered list of agents plus everything derived from it: personal
// thresholds, per-world accept fractions, the population threshold, the
// F/C/U partition and the majority-wish map.
struct Population {
    std::vector<UtilityTable> agents;
    std::vector<int> personal_thresholds;  // L_t per agent
    std::vector<AgentType> types;
    std::vector<double> alpha_accept;  // per world, fraction preferring Accept
    int threshold = 0;                 // L; for N = 2 the fixed binary labeling L = 1
    double alpha_friendly = 0.0;
    double alpha_contingent = 0.0;
    double alpha_unfriendly = 0.0;

    Population() = default;
    explicit Population(std::vector<UtilityTable> agents_in) : agents(std::move(agents_in)) {
        const size_t t_count = agents.size();
        if (t_count == 0) throw std::invalid_argument("Population: no agents");
        if (t_count % 2 == 0) throw std::invalid_argument("Population: T must be odd");
        const int n = agents.front().num_worlds();
        for (const auto& a : agents) {
            if (a.num_worlds() != n) throw std::invalid_argument("Population: mixed world counts");
        }
        personal_thresholds.reserve(t_count);
        for (const auto& a : agents) personal_thresholds.push_back(a.personal_threshold());

        alpha_accept.assign(static_cast<size_t>(n), 0.0);
        for (World w = 0; w < n; ++w) {
            int prefer = 0;
            for (int lt : personal_thresholds) {
                if (lt < w + 1) ++prefer;  // agent prefers Accept in world w iff L_t <= w
            }
            alpha_accept[static_cast<size_t>(w)] = static_cast<double>(prefer) / static_cast<double>(t_count);
        }

        if (n == 2) {
            // World 0 is labeled L by convention, so the binary type
            // definitions (F always prefers Accept, U always Reject) come out
            // of the fixed threshold regardless of the type fractions.
            threshold = 1;
        } else {
            threshold = 0;
            for (World w = 0; w < n; ++w) {
                if (alpha_accept[static_cast<size_t>(w)] < 0.5) threshold = w + 1;
            }
        }

        int counts[3] = {0, 0, 0};
        types.reserve(t_count);
        for (const auto& a : agents) {
            const Classification c = classify_agent(a, threshold);
            types.push_back(c.type);
            ++counts[static_cast<int>(c.type)];
        }
        alpha_friendly = static_cast<double>(counts[0]) / static_cast<double>(t_count);
        alpha_contingent = static_cast<double>(counts[1]) / static_cast<double>(t_count);
        alpha_unfriendly = static_cast<double>(counts[2]) / static_cast<double>(t_count);
    }

    int size() const { return static_cast<int>(agents.size()); }
    int num_worlds() const { return agents.front().num_worlds(); }

    int max_bound() const {
        int b = 0;
        for (const auto& a : agents) b = std::max(b, a.bound);
        return b;
    }

    Alternative majority_wish(World n) const {
        return alpha_accept[static_cast<size_t>(n)] > 0.5 ? Alternative::Accept : Alternative::Reject;
    }
};

inline Alternative majority_wish(const Population& population, World n) {
    return population.majority_wish(n);
}

// Expands an aggregated (table, count) description into an explicit agent
// list. Counts must sum to an odd total.
inline Population make_population_from_counts(const std::vector<std::pair<UtilityTable, int>>& groups) {
    std::vector<UtilityTable> agents;
    for (const auto& [table, count] : groups) {
        if (count < 0) throw std::invalid_argument("make_population_from_counts: negative count");
        for (int i = 0; i < count; ++i) agents.push_back(table);
    }
    return Population(std::move(agents));
}

// A full experiment description: environment, agents, decision rule and its
// optional parameters.
struct Scenario {
    SignalModel model;
    Population population;
    MechanismId mechanism = MechanismId::Wotc1;
    std::optional<double> tau;           // supermajority threshold, in (0,1)
    std::optional<double> binarize_cut;  // non-integer cut in (1,M), 1-based signal scale

    bool needs_binary_signals() const {
        return mechanism == MechanismId::Wotc1 || mechanism == MechanismId::Wotc2 ||
               mechanism == MechanismId::Wotc3 || mechanism == MechanismId::Supermajority ||
               mechanism == MechanismId::SurprisinglyPopular;
    }
};

// Mechanism/parameter compatibility plus the component invariants.
inline std::vector<Violation> validate_scenario(const Scenario& s) {
    std::vector<Violation> out = validate_model(s.model);
    if (s.model.num_worlds != s.population.num_worlds()) {
        out.push_back({"world count", "model has " + std::to_string(s.model.num_worlds) +
                                          " worlds, population tables have " +
                                          std::to_string(s.population.num_worlds())});
    }
    if (s.binarize_cut) {
        const double cut = *s.binarize_cut;
        if (cut == std::floor(cut)) {
            out.push_back({"ambiguous cut", "binarize_cut must be non-integer"});
        }
        if (!(cut > 1.0 && cut < static_cast<double>(s.model.num_signals))) {
            out.push_back({"cut range", "binarize_cut must lie in (1, M)"});
        }
        if (s.model.num_worlds != 2) {
            out.push_back({"cut worlds", "signal binarization requires N = 2"});
        }
    }
    const int effective_signals = s.binarize_cut ? 2 : s.model.num_signals;
    if (s.needs_binary_signals() && effective_signals != 2) {
        out.push_back({"mechanism signals",
                       std::string(to_string(s.mechanism)) + " requires M = 2 after optional binarization"});
    }
    if (s.mechanism == MechanismId::Supermajority) {
        if (!s.tau) {
            out.push_back({"tau missing", "supermajority requires tau"});
        } else if (!(*s.tau > 0.0 && *s.tau < 1.0)) {
            out.push_back({"tau range", "tau must lie in (0,1)"});
        }
    } else if (s.tau) {
        out.push_back({"tau unused", "tau is only meaningful for the supermajority mechanism"});
    }
    return out;
}

}  // namespace wotc
