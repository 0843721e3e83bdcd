#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wotc/model.hpp"

namespace wotc {

// Pr(W = n | S = m) for every world n: prior-weighted likelihood, normalized.
// Throws if the signal has probability zero under every world.
inline std::vector<double> world_posterior(const SignalModel& model, Signal m) {
    if (m < 0 || m >= model.num_signals) throw std::invalid_argument("world_posterior: bad signal");
    std::vector<double> post(static_cast<size_t>(model.num_worlds), 0.0);
    double denom = 0.0;
    for (World n = 0; n < model.num_worlds; ++n) {
        post[static_cast<size_t>(n)] = model.prior[static_cast<size_t>(n)] * model.p(m, n);
        denom += post[static_cast<size_t>(n)];
    }
    if (denom <= 0.0) throw std::domain_error("unreachable signal " + std::to_string(m));
    for (double& v : post) v /= denom;
    return post;
}

// T_{m'm}: the probability that another agent receives signal m_pred, as
// believed by an agent who received m_recv.
inline double peer_prediction(const SignalModel& model, Signal m_recv, Signal m_pred) {
    const std::vector<double> post = world_posterior(model, m_recv);
    double t = 0.0;
    for (World n = 0; n < model.num_worlds; ++n) {
        t += post[static_cast<size_t>(n)] * model.p(m_pred, n);
    }
    return t;
}

// Posterior columns and the full peer matrix for one model.
struct PosteriorBundle {
    std::vector<std::vector<double>> world_posterior;  // [received m][world n]
    std::vector<std::vector<double>> peer;             // [predicted m'][received m]
};

inline PosteriorBundle posterior_bundle(const SignalModel& model) {
    PosteriorBundle b;
    b.world_posterior.resize(static_cast<size_t>(model.num_signals));
    b.peer.assign(static_cast<size_t>(model.num_signals),
                  std::vector<double>(static_cast<size_t>(model.num_signals), 0.0));
    for (Signal m = 0; m < model.num_signals; ++m) {
        b.world_posterior[static_cast<size_t>(m)] = wotc::world_posterior(model, m);
        for (Signal mp = 0; mp < model.num_signals; ++mp) {
            double t = 0.0;
            for (World n = 0; n < model.num_worlds; ++n) {
                t += b.world_posterior[static_cast<size_t>(m)][static_cast<size_t>(n)] * model.p(mp, n);
            }
            b.peer[static_cast<size_t>(mp)][static_cast<size_t>(m)] = t;
        }
    }
    return b;
}

// The six strict gaps behind the two inequality chains
//   P_lH < T_lh < T_ll < P_lL   and   P_hH > T_hh > T_hl > P_hL
// in the order (T_lh-P_lH, T_ll-T_lh, P_lL-T_ll, P_hH-T_hh, T_hh-T_hl, T_hl-P_hL).
struct GapReport {
    std::array<double, 6> gaps{};
    double t_ll = 0.0, t_lh = 0.0, t_hl = 0.0, t_hh = 0.0;

    double min_gap() const {
        double m = gaps[0];
        for (double g : gaps) m = std::min(m, g);
        return m;
    }
    bool all_positive(double tol = 0.0) const { return min_gap() > tol; }
};

inline GapReport key_inequality_certificate(const SignalModel& model) {
    if (!model.is_binary()) {
        throw std::invalid_argument("key_inequality_certificate: model must have N = M = 2");
    }
    const PosteriorBundle b = posterior_bundle(model);
    GapReport r;
    r.t_ll = b.peer[kSignalLow][kSignalLow];
    r.t_lh = b.peer[kSignalLow][kSignalHigh];
    r.t_hl = b.peer[kSignalHigh][kSignalLow];
    r.t_hh = b.peer[kSignalHigh][kSignalHigh];
    const double p_lL = model.p(kSignalLow, kWorldLow);
    const double p_lH = model.p(kSignalLow, kWorldHigh);
    const double p_hL = model.p(kSignalHigh, kWorldLow);
    const double p_hH = model.p(kSignalHigh, kWorldHigh);
    r.gaps = {r.t_lh - p_lH, r.t_ll - r.t_lh, p_lL - r.t_ll,
              p_hH - r.t_hh, r.t_hh - r.t_hl, r.t_hl - p_hL};
    if (!r.all_positive()) {
        throw std::logic_error("key inequality violated; model failed positive-correlation validation");
    }
    return r;
}

// The concentration constant c: one third of the smallest of the six gaps.
inline double concentration_constant(const SignalModel& model) {
    return key_inequality_certificate(model).min_gap() / 3.0;
}

// Result of collapsing an M-signal model at a non-integer cut: signals above
// the cut become h, the rest l. The certificate records, for every original
// signal m, the belief T_hm that another agent lands above the cut, which
// must lie strictly between P_hL and P_hH.
struct BinarizeResult {
    SignalModel binary;
    double cut = 0.0;
    double p_high_low = 0.0;             // P_hL of the binarized model
    double p_high_high = 0.0;            // P_hH
    std::vector<double> t_high_given_m;  // T_hm against the original received signal
    bool certificate_holds = false;

    double min_certificate_margin() const {
        double m = 1.0;
        for (double t : t_high_given_m) {
            m = std::min(m, std::min(p_high_high - t, t - p_high_low));
        }
        return m;
    }
};

inline BinarizeResult binarize(const SignalModel& model, double cut) {
    if (model.num_worlds != 2) throw std::invalid_argument("binarize: requires N = 2");
    if (cut == std::floor(cut)) throw std::invalid_argument("ambiguous cut: must be non-integer");
    if (!(cut > 1.0 && cut < static_cast<double>(model.num_signals))) {
        throw std::invalid_argument("binarize: cut must lie in (1, M)");
    }
    // cut is on the paper's 1-based signal scale; signal index m (0-based) is
    // "high" iff m + 1 > cut.
    const int first_high = static_cast<int>(std::floor(cut));  // 0-based index of first high signal
    BinarizeResult r;
    r.cut = cut;
    double high_low = 0.0, high_high = 0.0;
    for (Signal m = first_high; m < model.num_signals; ++m) {
        high_low += model.p(m, kWorldLow);
        high_high += model.p(m, kWorldHigh);
    }
    r.p_high_low = high_low;
    r.p_high_high = high_high;
    r.binary = SignalModel(model.prior, {{1.0 - high_low, 1.0 - high_high}, {high_low, high_high}});
    r.t_high_given_m.resize(static_cast<size_t>(model.num_signals));
    r.certificate_holds = true;
    for (Signal m = 0; m < model.num_signals; ++m) {
        const std::vector<double> post = world_posterior(model, m);
        const double t = post[kWorldLow] * high_low + post[kWorldHigh] * high_high;
        r.t_high_given_m[static_cast<size_t>(m)] = t;
        if (!(t > high_low && t < high_high)) r.certificate_holds = false;
    }
    return r;
}

// The binary model a scenario's mechanism actually runs on: the model itself
// when M = 2, the binarized one when a cut is set.
inline SignalModel effective_binary_model(const Scenario& s) {
    if (s.binarize_cut) return binarize(s.model, *s.binarize_cut).binary;
    if (s.model.num_signals != 2) {
        throw std::invalid_argument("scenario has M > 2 signals and no binarize_cut");
    }
    return s.model;
}

// Maps an original signal to the binary signal the mechanism sees.
inline Signal effective_binary_signal(const Scenario& s, Signal m) {
    if (!s.binarize_cut) return m;
    return (static_cast<double>(m + 1) > *s.binarize_cut) ? kSignalHigh : kSignalLow;
}

}  // namespace wotc
