#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wotc/mechanisms.hpp"
#include "wotc/model.hpp"

namespace wotc {

struct contract_violation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double log_binomial_pmf(long long n, long long k, double p) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    if (p <= 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return k == n ? 0.0 : -std::numeric_limits<double>::infinity();
    const double lf_n = std::lgamma(static_cast<double>(n) + 1.0);
    const double lf_k = std::lgamma(static_cast<double>(k) + 1.0);
    const double lf_nk = std::lgamma(static_cast<double>(n - k) + 1.0);
    return lf_n - lf_k - lf_nk + static_cast<double>(k) * std::log(p) +
           static_cast<double>(n - k) * std::log1p(-p);
}

}  // namespace detail

inline double binomial_pmf(long long n, long long k, double p) {
    return std::exp(detail::log_binomial_pmf(n, k, p));
}

inline std::vector<double> binomial_pmf_vector(long long n, double p) {
    std::vector<double> pmf(static_cast<size_t>(n) + 1);
    for (long long k = 0; k <= n; ++k) pmf[static_cast<size_t>(k)] = binomial_pmf(n, k, p);
    return pmf;
}

// Exact total variation distance between Bin(T, 1/6) and Bin(T/3, 1/2),
// summed over the padded common support in log-space pmfs.
inline double binomial_tvd(long long t) {
    if (t < 3 || t % 3 != 0) throw std::invalid_argument("binomial_tvd: T must be a positive multiple of 3");
    double sum = 0.0;
    for (long long k = 0; k <= t; ++k) {
        const double p1 = binomial_pmf(t, k, 1.0 / 6.0);
        const double p2 = k <= t / 3 ? binomial_pmf(t / 3, k, 0.5) : 0.0;
        sum += std::abs(p1 - p2);
    }
    return 0.5 * sum;
}

inline double normal_pdf(double x, double variance) {
    return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

// The densities of N(0, 5/36) and N(0, 1/12) cross at +-this point.
inline double gaussian_tvd_crossing() { return std::sqrt(5.0 / 24.0 * std::log(5.0 / 3.0)); }

struct GaussianTvd {
    double value = 0.0;
    double crossing = 0.0;
    double refinement_delta = 0.0;  // change in the last resolution doubling
};

// Limit of the TVD under the CLT scaling: the integral of the density
// difference of N(0, 1/12) and N(0, 5/36) between the crossing points,
// evaluated by Simpson refinement until two successive doublings agree.
inline GaussianTvd gaussian_tvd_limit_details() {
    const double a = gaussian_tvd_crossing();
    const auto integrand = [](double y) {
        return normal_pdf(y, 1.0 / 12.0) - normal_pdf(y, 5.0 / 36.0);
    };
    const auto simpson = [&](long long intervals) {
        const double h = 2.0 * a / static_cast<double>(intervals);
        double sum = integrand(-a) + integrand(a);
        for (long long i = 1; i < intervals; ++i) {
            sum += integrand(-a + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
        }
        return sum * h / 3.0;
    };
    GaussianTvd result;
    result.crossing = a;
    long long intervals = 64;
    double previous = simpson(intervals);
    for (int round = 0; round < 24; ++round) {
        intervals *= 2;
        const double current = simpson(intervals);
        result.refinement_delta = std::abs(current - previous);
        result.value = current;
        if (result.refinement_delta < 1e-12) break;
        previous = current;
    }
    return result;
}

inline double gaussian_tvd_limit() { return gaussian_tvd_limit_details().value; }

// The census an anonymous mechanism sees: counts per (declared type,
// declared binary signal). The report multiset determines it completely.
struct AnonymousView {
    std::array<long long, 6> counts{};  // (F,l) (F,h) (U,l) (U,h) (C,l) (C,h)

    static size_t slot(AgentType type, Signal signal) {
        return static_cast<size_t>(type == AgentType::Friendly   ? 0
                                   : type == AgentType::Unfriendly ? 2
                                                                   : 4) +
               (signal == kSignalHigh ? 1 : 0);
    }

    static AnonymousView from_reports(std::span<const Report> reports) {
        AnonymousView v;
        for (const Report& r : reports) ++v.counts[slot(r.type, r.signal)];
        return v;
    }

    long long total() const {
        long long t = 0;
        for (long long c : counts) t += c;
        return t;
    }
    long long type_total(AgentType type) const {
        const size_t base = slot(type, kSignalLow);
        return counts[base] + counts[base + 1];
    }
    double fraction(AgentType type, Signal signal) const {
        return static_cast<double>(counts[slot(type, signal)]) / static_cast<double>(total());
    }

    bool operator==(const AnonymousView&) const = default;
};

// probability of announcing Accept; randomized mechanisms return interior values
using AnonymousDecisionFn = std::function<double(const AnonymousView&)>;

// A block of exchangeable agents: each reports (declared_type, h) with
// probability p_high, independently.
struct ReportGroup {
    AgentType declared = AgentType::Contingent;
    long long count = 0;
    double p_high = 0.0;
};

// pmf of the total number of h reports across the groups (convolution of
// the per-group binomials).
inline std::vector<double> h_count_distribution(std::span<const ReportGroup> groups) {
    std::vector<double> pmf{1.0};
    for (const ReportGroup& g : groups) {
        const std::vector<double> add = binomial_pmf_vector(g.count, g.p_high);
        std::vector<double> next(pmf.size() + static_cast<size_t>(g.count), 0.0);
        for (size_t i = 0; i < pmf.size(); ++i) {
            if (pmf[i] == 0.0) continue;
            for (size_t j = 0; j < add.size(); ++j) next[i + j] += pmf[i] * add[j];
        }
        pmf = std::move(next);
    }
    return pmf;
}

// E[p_accept(view)] with the census distributed as the product of the
// per-group binomials.
inline double expected_accept_probability(std::span<const ReportGroup> groups,
                                          const AnonymousDecisionFn& fn) {
    AnonymousView view;
    double total = 0.0;
    const auto recurse = [&](auto&& self, size_t g, double weight) -> void {
        if (weight == 0.0) return;
        if (g == groups.size()) {
            const double p = fn(view);
            if (p < 0.0 || p > 1.0) {
                throw contract_violation_error("decision_fn returned a probability outside [0,1]");
            }
            total += weight * p;
            return;
        }
        const ReportGroup& group = groups[g];
        const size_t low_slot = AnonymousView::slot(group.declared, kSignalLow);
        const size_t high_slot = AnonymousView::slot(group.declared, kSignalHigh);
        for (long long k = 0; k <= group.count; ++k) {
            const double pk = binomial_pmf(group.count, k, group.p_high);
            if (pk == 0.0) continue;
            view.counts[high_slot] += k;
            view.counts[low_slot] += group.count - k;
            self(self, g + 1, weight * pk);
            view.counts[high_slot] -= k;
            view.counts[low_slot] -= group.count - k;
        }
    };
    recurse(recurse, 0, 1.0);
    return total;
}

// The unknown-type-distribution instance: prior (0.98, 0.02), likelihood
// P_lL = 1, P_hL = 0, P_lH = 5/6, P_hH = 1/6, the F/C/U tables with B = 3,
// and the two equally likely settings X = (1/3, 2/3, 0) and Y = (0, 1, 0).
struct CounterexampleInstance {
    double prior_low = 0.98;
    double prior_high = 0.02;
    double p_high_low = 0.0;        // P_hL
    double p_high_high = 1.0 / 6.0; // P_hH
    UtilityTable friendly{{2, 3}, {1, 0}, 3};
    UtilityTable contingent{{1, 3}, {2, 0}, 3};
    UtilityTable unfriendly{{0, 1}, {3, 2}, 3};
    double tau = 0.001;

    // environment order: LX, LY, HX, HY
    std::array<double, 4> environment_probability() const {
        return {prior_low * 0.5, prior_low * 0.5, prior_high * 0.5, prior_high * 0.5};
    }

    // Report groups visible to the mechanism in each environment.
    std::vector<ReportGroup> truthful_groups(size_t env, long long t) const {
        const double p = env >= 2 ? p_high_high : p_high_low;
        if (env == 0 || env == 2) {  // setting X: one third friendly
            return {{AgentType::Friendly, t / 3, p}, {AgentType::Contingent, 2 * t / 3, p}};
        }
        return {{AgentType::Contingent, t, p}};
    }

    // After the friendly coalition poses as contingent with fair-coin
    // signals. Y environments have no friendly agents, so they are unchanged.
    std::vector<ReportGroup> deviated_groups(size_t env, long long t) const {
        const double p = env >= 2 ? p_high_high : p_high_low;
        if (env == 0 || env == 2) {
            return {{AgentType::Contingent, t / 3, 0.5}, {AgentType::Contingent, 2 * t / 3, p}};
        }
        return {{AgentType::Contingent, t, p}};
    }
};

// The Bayes-optimal anonymous rule for the instance under truthful play:
// posterior over the four environments given the census, announce Accept
// iff the high-world environments carry more posterior mass.
inline AnonymousDecisionFn map_mechanism(long long t, CounterexampleInstance instance = {}) {
    if (t < 3 || t % 3 != 0) throw std::invalid_argument("map_mechanism: T must be a multiple of 3");
    return [t, instance](const AnonymousView& view) -> double {
        if (view.total() != t || view.type_total(AgentType::Unfriendly) != 0) return 0.0;
        const long long f_total = view.type_total(AgentType::Friendly);
        const long long f_high = view.counts[AnonymousView::slot(AgentType::Friendly, kSignalHigh)];
        const long long c_total = view.type_total(AgentType::Contingent);
        const long long c_high = view.counts[AnonymousView::slot(AgentType::Contingent, kSignalHigh)];
        const std::array<double, 4> env_prob = instance.environment_probability();
        double mass_low = 0.0, mass_high = 0.0;
        // LX and HX need exactly T/3 friendly reports, LY and HY none.
        if (f_total == t / 3 && c_total == 2 * t / 3) {
            if (f_high == 0 && c_high == 0) mass_low += env_prob[0];
            mass_high += env_prob[2] * binomial_pmf(t / 3, f_high, instance.p_high_high) *
                         binomial_pmf(2 * t / 3, c_high, instance.p_high_high);
        } else if (f_total == 0 && c_total == t) {
            if (c_high == 0) mass_low += env_prob[1];
            mass_high += env_prob[3] * binomial_pmf(t, c_high, instance.p_high_high);
        }
        if (mass_low == 0.0 && mass_high == 0.0) return 0.0;
        return mass_high > mass_low ? 1.0 : 0.0;
    };
}

struct AuditReport {
    enum class Kind { AccuracyViolation, DeviationGainViolation, NoViolation };
    Kind kind = Kind::NoViolation;
    std::array<double, 4> accuracy{};  // LX, LY, HX, HY under truthful play
    size_t worst_environment = 0;
    double worst_accuracy = 1.0;
    double accuracy_margin = 0.0;   // (1 - tau) - worst accuracy, when violated
    double deviation_gain = 0.0;    // exact ex-ante gain of each friendly agent
    double deviation_margin = 0.0;  // gain - tau, when violated
    double accept_lx_truthful = 0.0;
    double accept_lx_deviated = 0.0;
    double accept_hy_truthful = 0.0;
    double tvd = 0.0;  // binomial_tvd(T)
    // the instance's printed bound chain: 0.49 * (0.99 - 0.123) * v_F(L,A),
    // (0.98 * 0.01 + 0.02) * v_F(H,A), and their difference
    double chain_utility_lower = 0.0;
    double chain_utility_upper = 0.0;
    double chain_gain = 0.0;
    double tau = 0.0;
};

// Audits one anonymous mechanism against the instance: either it misses the
// majority wish somewhere (accuracy below 1 - tau), or the friendly
// coalition's pose-as-contingent deviation strictly gains more than tau.
// The probe rejects decision functions that are not a function of the
// census alone.
inline AuditReport counterexample_audit(const AnonymousDecisionFn& fn, long long t,
                                        CounterexampleInstance instance = {}) {
    if (t < 3 || t % 3 != 0) {
        throw std::invalid_argument("counterexample_audit: T must be a positive multiple of 3");
    }

    // Determinism probe: equal censuses assembled in different report orders
    // must produce equal outputs.
    {
        BallotBox forward, backward;
        for (long long i = 0; i < t; ++i) {
            const Report r = i < t / 3 ? friendly_report()
                                       : contingent_report(i % 2 == 0 ? kSignalLow : kSignalHigh, 0.0);
            forward.push_back(r);
            backward.insert(backward.begin(), r);
        }
        const AnonymousView a = AnonymousView::from_reports(forward);
        const AnonymousView b = AnonymousView::from_reports(backward);
        const double pa1 = fn(a), pa2 = fn(a), pb = fn(b);
        if (pa1 != pa2 || pa1 != pb) {
            throw contract_violation_error(
                "decision_fn is not a function of the report census (identity-dependent or stateful)");
        }
    }

    AuditReport report;
    report.tau = instance.tau;
    report.tvd = binomial_tvd(t);
    const std::array<double, 4> env_prob = instance.environment_probability();

    std::array<double, 4> accept_truthful{};
    for (size_t env = 0; env < 4; ++env) {
        const std::vector<ReportGroup> groups = instance.truthful_groups(env, t);
        accept_truthful[env] = expected_accept_probability(groups, fn);
        const bool wish_accept = env >= 2;  // high-world environments
        report.accuracy[env] = wish_accept ? accept_truthful[env] : 1.0 - accept_truthful[env];
    }
    report.accept_lx_truthful = accept_truthful[0];
    report.accept_hy_truthful = accept_truthful[3];
    report.worst_environment = 0;
    report.worst_accuracy = report.accuracy[0];
    for (size_t env = 1; env < 4; ++env) {
        if (report.accuracy[env] < report.worst_accuracy) {
            report.worst_accuracy = report.accuracy[env];
            report.worst_environment = env;
        }
    }

    // The printed bound chain for the instance constants.
    report.chain_utility_lower = 0.49 * (0.99 - 0.123) * instance.friendly.accept(kWorldLow);
    report.chain_utility_upper = (instance.prior_low * 0.01 + instance.prior_high) *
                                 instance.friendly.accept(kWorldHigh);
    report.chain_gain = report.chain_utility_lower - report.chain_utility_upper;

    if (report.worst_accuracy < 1.0 - instance.tau) {
        report.kind = AuditReport::Kind::AccuracyViolation;
        report.accuracy_margin = (1.0 - instance.tau) - report.worst_accuracy;
        return report;
    }

    // Exact coalition gain: only the X environments change under the
    // deviation, and utility is affine in the accept probability.
    double gain = 0.0;
    std::array<double, 2> accept_deviated{};
    for (size_t env : {size_t{0}, size_t{2}}) {
        const std::vector<ReportGroup> groups = instance.deviated_groups(env, t);
        const double p_dev = expected_accept_probability(groups, fn);
        accept_deviated[env == 0 ? 0 : 1] = p_dev;
        const World w = env >= 2 ? kWorldHigh : kWorldLow;
        const double stake = instance.friendly.accept(w) - instance.friendly.reject(w);
        gain += env_prob[env] * stake * (p_dev - accept_truthful[env]);
    }
    report.accept_lx_deviated = accept_deviated[0];
    report.deviation_gain = gain;
    if (gain > instance.tau) {
        report.kind = AuditReport::Kind::DeviationGainViolation;
        report.deviation_margin = gain - instance.tau;
    }
    return report;
}

}  // namespace wotc
