#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wotc/bayes.hpp"
#include "wotc/mechanisms.hpp"
#include "wotc/model.hpp"

namespace wotc {

// splitmix64: the finalizer doubles as the seed-derivation mix so that
// (master seed, world index, trial index) -> stream is stated and portable.
struct SplitMix64 {
    std::uint64_t state = 0;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return mix(state);
    }

    // uniform in [0,1) with 53 random bits
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = SplitMix64::mix(master + 0x9E3779B97F4A7C15ULL);
    h = SplitMix64::mix(h ^ (a + 0x9E3779B97F4A7C15ULL));
    h = SplitMix64::mix(h ^ (b + 0x632BE59BD9B4E019ULL));
    return h;
}

// Inverse-CDF draw of one signal from the likelihood column of world n.
inline Signal sample_signal(const SignalModel& model, World n, SplitMix64& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (Signal m = 0; m + 1 < model.num_signals; ++m) {
        acc += model.p(m, n);
        if (u < acc) return m;
    }
    return model.num_signals - 1;
}

// A pure strategy per agent: received original signal -> report.
struct Strategy {
    std::vector<Report> by_signal;  // size = original M

    bool operator==(const Strategy&) const = default;
};

struct StrategyProfile {
    std::vector<Strategy> agents;
    bool truthful = false;  // marks the distinguished profile Sigma*
};

inline StrategyProfile truthful_profile(const Scenario& s) {
    const TruthfulContext ctx = TruthfulContext::make(s);
    StrategyProfile profile;
    profile.truthful = true;
    profile.agents.resize(s.population.agents.size());
    for (size_t t = 0; t < s.population.agents.size(); ++t) {
        const UtilityTable& table = s.population.agents[t];
        const Classification cls = classify_agent(table, s.population.threshold);
        Strategy& strat = profile.agents[t];
        strat.by_signal.reserve(static_cast<size_t>(s.model.num_signals));
        for (Signal m = 0; m < s.model.num_signals; ++m) {
            strat.by_signal.push_back(truthful_report(ctx, cls, table, m));
        }
    }
    return profile;
}

using DecideFn = std::function<Decision(std::span<const Report>)>;

inline DecideFn scenario_decide_fn(const Scenario& s) {
    const MechanismId mechanism = s.mechanism;
    const std::optional<double> tau = s.tau;
    return [mechanism, tau](std::span<const Report> ballots) {
        return decide_ballots(mechanism, ballots, tau);
    };
}

// Samples every agent's signal i.i.d. from world n's column, applies the
// strategies and runs the scenario's mechanism.
inline Decision run_trial(const Scenario& s, const StrategyProfile& profile, World n, SplitMix64& rng) {
    if (profile.agents.size() != s.population.agents.size()) {
        throw std::invalid_argument("run_trial: profile size != population size");
    }
    BallotBox box;
    box.reserve(profile.agents.size());
    for (const Strategy& strat : profile.agents) {
        const Signal m = sample_signal(s.model, n, rng);
        box.push_back(strat.by_signal[static_cast<size_t>(m)]);
    }
    return decide_ballots(s.mechanism, box, s.tau);
}

// Expected utility of one agent from the per-world accept probabilities.
inline double expected_utility(std::span<const double> lambda_accept, const UtilityTable& table,
                               std::span<const double> prior) {
    if (lambda_accept.size() != prior.size() ||
        static_cast<int>(prior.size()) != table.num_worlds()) {
        throw std::invalid_argument("expected_utility: dimension mismatch");
    }
    double u = 0.0;
    for (World n = 0; n < table.num_worlds(); ++n) {
        const double la = lambda_accept[static_cast<size_t>(n)];
        if (la < 0.0 || la > 1.0) throw std::invalid_argument("expected_utility: lambda outside [0,1]");
        u += prior[static_cast<size_t>(n)] * (la * table.accept(n) + (1.0 - la) * table.reject(n));
    }
    return u;
}

struct OutcomeStats {
    std::vector<double> lambda_accept;    // per world
    std::vector<double> standard_error;   // per world; zero for exact results
    double error_rate = 0.0;              // I(Sigma)
    std::vector<double> agent_utilities;  // per agent
    long long trials = 0;                 // 0 for exact results
    std::uint64_t seed = 0;

    double lambda_reject(World n) const { return 1.0 - lambda_accept[static_cast<size_t>(n)]; }
};

namespace detail {

// I(Sigma): prior-weighted probability of announcing the non-majority-wish
// alternative. In the binary alpha_F, alpha_U < 1/2 regime this is
// P_L * lambda_L^A + P_H * lambda_H^R.
inline double error_rate_from_lambda(const Scenario& s, std::span<const double> lambda_accept) {
    double err = 0.0;
    for (World n = 0; n < s.model.num_worlds; ++n) {
        const double la = lambda_accept[static_cast<size_t>(n)];
        const double wrong =
            s.population.majority_wish(n) == Alternative::Accept ? (1.0 - la) : la;
        err += s.model.prior[static_cast<size_t>(n)] * wrong;
    }
    return err;
}

inline void fill_utilities(const Scenario& s, OutcomeStats& stats) {
    stats.agent_utilities.reserve(s.population.agents.size());
    for (const UtilityTable& table : s.population.agents) {
        stats.agent_utilities.push_back(expected_utility(stats.lambda_accept, table, s.model.prior));
    }
    stats.error_rate = error_rate_from_lambda(s, stats.lambda_accept);
}

}  // namespace detail

// Monte Carlo estimate of the per-world accept probabilities. Each world is
// conditioned on directly. Trial i of world w uses the derived seed
// (seed, w, i), so results are independent of the thread count and identical
// across reruns.
inline OutcomeStats estimate_lambda(const Scenario& s, const StrategyProfile& profile,
                                    long long trials, std::uint64_t seed, int threads = 1) {
    if (trials < 1) throw std::invalid_argument("estimate_lambda: trials must be >= 1");
    if (threads < 1) threads = 1;
    OutcomeStats stats;
    stats.trials = trials;
    stats.seed = seed;
    stats.lambda_accept.resize(static_cast<size_t>(s.model.num_worlds));
    stats.standard_error.resize(static_cast<size_t>(s.model.num_worlds));
    for (World w = 0; w < s.model.num_worlds; ++w) {
        long long accepts = 0;
        if (threads == 1) {
            for (long long i = 0; i < trials; ++i) {
                SplitMix64 rng{derive_seed(seed, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(i))};
                if (run_trial(s, profile, w, rng).winner == Alternative::Accept) ++accepts;
            }
        } else {
            std::vector<long long> partial(static_cast<size_t>(threads), 0);
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(threads));
            for (int k = 0; k < threads; ++k) {
                pool.emplace_back([&, k]() {
                    long long local = 0;
                    for (long long i = k; i < trials; i += threads) {
                        SplitMix64 rng{derive_seed(seed, static_cast<std::uint64_t>(w),
                                                   static_cast<std::uint64_t>(i))};
                        if (run_trial(s, profile, w, rng).winner == Alternative::Accept) ++local;
                    }
                    partial[static_cast<size_t>(k)] = local;
                });
            }
            for (auto& th : pool) th.join();
            for (long long p : partial) accepts += p;
        }
        const double lam = static_cast<double>(accepts) / static_cast<double>(trials);
        stats.lambda_accept[static_cast<size_t>(w)] = lam;
        stats.standard_error[static_cast<size_t>(w)] =
            std::sqrt(lam * (1.0 - lam) / static_cast<double>(trials));
    }
    detail::fill_utilities(s, stats);
    return stats;
}

struct enumeration_limit_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr int kFullEnumerationMaxAgents = 20;
inline constexpr int kCountEnumerationMaxAgents = 200;
inline constexpr long long kCountEnumerationMaxCombos = 1LL << 22;

struct TypeBlock {
    int count = 0;
    const Strategy* strategy = nullptr;
};

// Count enumeration applies when every agent of a type plays one strategy;
// the ballot multiset then depends only on per-type signal counts.
inline bool type_blocks_uniform(const Scenario& s, const StrategyProfile& profile,
                                std::vector<TypeBlock>& blocks) {
    blocks.clear();
    const auto& types = s.population.types;
    std::vector<const Strategy*> rep(3, nullptr);
    std::vector<int> counts(3, 0);
    for (size_t t = 0; t < types.size(); ++t) {
        const int k = static_cast<int>(types[t]);
        if (rep[static_cast<size_t>(k)] == nullptr) {
            rep[static_cast<size_t>(k)] = &profile.agents[t];
        } else if (!(*rep[static_cast<size_t>(k)] == profile.agents[t])) {
            return false;
        }
        ++counts[static_cast<size_t>(k)];
    }
    for (int k = 0; k < 3; ++k) {
        if (counts[static_cast<size_t>(k)] > 0) {
            blocks.push_back({counts[static_cast<size_t>(k)], rep[static_cast<size_t>(k)]});
        }
    }
    return true;
}

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// log of the multinomial pmf of `counts` over `probs`
inline double log_multinomial_pmf(std::span<const int> counts, std::span<const double> probs) {
    int total = 0;
    double lp = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) {
        total += counts[i];
        if (counts[i] > 0) {
            if (probs[i] <= 0.0) return -std::numeric_limits<double>::infinity();
            lp += counts[i] * std::log(probs[i]) - log_factorial(counts[i]);
        }
    }
    return lp + log_factorial(total);
}

// Enumerates compositions of `total` into `parts` buckets in lexicographic
// order, invoking fn(counts).
template <typename Fn>
void for_each_composition(int total, int parts, std::vector<int>& counts, int index, Fn&& fn) {
    if (index == parts - 1) {
        counts[static_cast<size_t>(index)] = total;
        fn(counts);
        return;
    }
    for (int k = 0; k <= total; ++k) {
        counts[static_cast<size_t>(index)] = k;
        for_each_composition(total - k, parts, counts, index + 1, fn);
    }
}

inline long long count_compositions(int total, int parts) {
    // C(total + parts - 1, parts - 1)
    long long result = 1;
    for (int i = 1; i < parts; ++i) {
        result = result * (total + i) / i;
        if (result > kCountEnumerationMaxCombos) return result;
    }
    return result;
}

}  // namespace detail

enum class ExactMode { Auto, ForceFull };

// Exact per-world accept probabilities by enumeration: per-type signal-count
// enumeration when each type plays a single strategy (T <= 200), otherwise
// full signal-vector enumeration (T <= 20, M = 2). The optional decide
// override substitutes the decision rule while keeping the sampling model;
// ForceFull pins the signal-vector route so the two paths can be checked
// against each other.
inline OutcomeStats exact_lambda(const Scenario& s, const StrategyProfile& profile,
                                 const DecideFn& decide_override = {},
                                 ExactMode mode = ExactMode::Auto) {
    if (profile.agents.size() != s.population.agents.size()) {
        throw std::invalid_argument("exact_lambda: profile size != population size");
    }
    const DecideFn decide = decide_override ? decide_override : scenario_decide_fn(s);
    const int t_count = s.population.size();
    const int m_count = s.model.num_signals;
    const int n_worlds = s.model.num_worlds;

    OutcomeStats stats;
    stats.trials = 0;
    stats.lambda_accept.assign(static_cast<size_t>(n_worlds), 0.0);
    stats.standard_error.assign(static_cast<size_t>(n_worlds), 0.0);

    std::vector<detail::TypeBlock> blocks;
    if (mode == ExactMode::Auto && detail::type_blocks_uniform(s, profile, blocks) &&
        t_count <= detail::kCountEnumerationMaxAgents) {
        long long combos = 1;
        for (const auto& b : blocks) {
            combos *= detail::count_compositions(b.count, m_count);
            if (combos > detail::kCountEnumerationMaxCombos) {
                throw enumeration_limit_error("enumeration limit: " + std::to_string(combos) +
                                              " signal-count combinations");
            }
        }
        // Enumerate the cross product of per-block signal-count vectors.
        std::vector<std::vector<std::vector<int>>> all_counts(blocks.size());
        for (size_t b = 0; b < blocks.size(); ++b) {
            std::vector<int> scratch(static_cast<size_t>(m_count), 0);
            detail::for_each_composition(blocks[b].count, m_count, scratch, 0,
                                         [&](const std::vector<int>& c) { all_counts[b].push_back(c); });
        }
        std::vector<std::vector<double>> column(static_cast<size_t>(n_worlds),
                                                std::vector<double>(static_cast<size_t>(m_count)));
        for (World w = 0; w < n_worlds; ++w) {
            for (Signal m = 0; m < m_count; ++m) {
                column[static_cast<size_t>(w)][static_cast<size_t>(m)] = s.model.p(m, w);
            }
        }
        std::vector<size_t> pick(blocks.size(), 0);
        BallotBox box;
        box.reserve(static_cast<size_t>(t_count));
        while (true) {
            box.clear();
            for (size_t b = 0; b < blocks.size(); ++b) {
                const std::vector<int>& counts = all_counts[b][pick[b]];
                for (Signal m = 0; m < m_count; ++m) {
                    for (int rep = 0; rep < counts[static_cast<size_t>(m)]; ++rep) {
                        box.push_back(blocks[b].strategy->by_signal[static_cast<size_t>(m)]);
                    }
                }
            }
            if (decide(box).winner == Alternative::Accept) {
                for (World w = 0; w < n_worlds; ++w) {
                    double logp = 0.0;
                    for (size_t b = 0; b < blocks.size(); ++b) {
                        logp += detail::log_multinomial_pmf(all_counts[b][pick[b]],
                                                            column[static_cast<size_t>(w)]);
                    }
                    stats.lambda_accept[static_cast<size_t>(w)] += std::exp(logp);
                }
            }
            size_t b = 0;
            while (b < blocks.size() && ++pick[b] == all_counts[b].size()) {
                pick[b] = 0;
                ++b;
            }
            if (b == blocks.size()) break;
        }
    } else {
        if (t_count > detail::kFullEnumerationMaxAgents || m_count != 2) {
            throw enumeration_limit_error(
                "enumeration limit: full enumeration needs T <= " +
                std::to_string(detail::kFullEnumerationMaxAgents) + " and M = 2 (T = " +
                std::to_string(t_count) + ", M = " + std::to_string(m_count) + ")");
        }
        BallotBox box(static_cast<size_t>(t_count));
        for (std::uint64_t mask = 0; mask < (1ULL << t_count); ++mask) {
            for (int t = 0; t < t_count; ++t) {
                const Signal m = (mask >> t) & 1 ? kSignalHigh : kSignalLow;
                box[static_cast<size_t>(t)] = profile.agents[static_cast<size_t>(t)].by_signal[static_cast<size_t>(m)];
            }
            if (decide(box).winner != Alternative::Accept) continue;
            for (World w = 0; w < n_worlds; ++w) {
                double p = 1.0;
                for (int t = 0; t < t_count; ++t) {
                    const Signal m = (mask >> t) & 1 ? kSignalHigh : kSignalLow;
                    p *= s.model.p(m, w);
                }
                stats.lambda_accept[static_cast<size_t>(w)] += p;
            }
        }
    }
    detail::fill_utilities(s, stats);
    return stats;
}

// The Theorem-2 style failure bound 2*exp(-2 c^2 alpha_C T). When a
// predetermined type already holds a majority, the type step decides with
// probability one and the bound is reported as zero with the regime flagged.
struct FailureBound {
    double bound = 0.0;
    double c = 0.0;
    double alpha_contingent = 0.0;
    bool type_majority_regime = false;
    bool vacuous = false;  // bound >= 1 tells nothing
};

inline FailureBound theorem2_bound(const Scenario& s) {
    const SignalModel binary = effective_binary_model(s);
    if (binary.num_worlds != 2) {
        throw std::invalid_argument("theorem2_bound: requires a binary scenario");
    }
    FailureBound fb;
    fb.alpha_contingent = s.population.alpha_contingent;
    fb.c = concentration_constant(binary);
    if (s.population.alpha_friendly > 0.5 || s.population.alpha_unfriendly > 0.5) {
        fb.type_majority_regime = true;
        fb.bound = 0.0;
        return fb;
    }
    fb.bound = 2.0 * std::exp(-2.0 * fb.c * fb.c * fb.alpha_contingent *
                              static_cast<double>(s.population.size()));
    fb.vacuous = fb.bound >= 1.0;
    return fb;
}

}  // namespace wotc
