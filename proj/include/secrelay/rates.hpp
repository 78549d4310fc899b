#ifndef SECRELAY_RATES_HPP
#define SECRELAY_RATES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "secrelay/channel.hpp"
#include "secrelay/common.hpp"

// Closed-form rate expressions for the parallel Gaussian relay-eavesdropper
// channel. All rates are bits per channel use; logs are base 2 throughout.

namespace secrelay {

/// Gaussian channel rate at SNR x: 0.5 * log2(1 + x).
inline double cap(double x) {
    if (!std::isfinite(x) || x < 0.0)
        throw validation_error("cap: SNR must be finite and >= 0");
    return 0.5 * std::log2(1.0 + x);
}

inline double pos(double x) { return x > 0.0 ? x : 0.0; }

/// The two positive-part summands of one subchannel's contribution.
struct RateTerms {
    double term_dest = 0.0;         ///< destination-limited bracket
    double term_relay_or_alt = 0.0; ///< relay-decoding (DF) or confusion (NF) bracket
};

struct SolverDiagnostics {
    int iterations = 0;
    int starts_tried = 0;
    int best_start = 0;
    bool converged = false;
    bool condition_binding = false;
};

/// Value of a bound together with the allocation that achieves it.
struct BoundResult {
    double value = 0.0;
    Allocation allocation;
    std::optional<ModeAssignment> modes;
    SolverDiagnostics diagnostics;
};

namespace detail {

// sqrt(product of nonnegative factors); exactly 0 when any factor is 0, so
// boundary allocations never produce NaN.
inline double coherent_sqrt(double a, double b, double c) {
    if (a <= 0.0 || b <= 0.0 || c <= 0.0) return 0.0;
    return std::sqrt(a * b * c);
}

inline double coherent_sqrt(double a, double b, double c, double d) {
    if (a <= 0.0 || b <= 0.0 || c <= 0.0 || d <= 0.0) return 0.0;
    return std::sqrt(a * b * c * d);
}

// Eavesdropper SNR common to both DF brackets.
inline double df_eve_snr(const GaussianSubchannel& s, double p1, double p2, double abar) {
    return (p1 + s.rho2 * p2 + 2.0 * coherent_sqrt(abar, s.rho2, p1 * p2)) / s.sigma2_eve;
}

inline double df_dest_raw(const GaussianSubchannel& s, double p1, double p2, double alpha) {
    const double abar = 1.0 - alpha;
    const double dest = (p1 + s.rho1 * p2 + 2.0 * coherent_sqrt(abar, s.rho1, p1 * p2)) / s.sigma2_dest;
    return cap(dest) - cap(df_eve_snr(s, p1, p2, abar));
}

inline double df_relay_raw(const GaussianSubchannel& s, double p1, double p2, double alpha) {
    const double abar = 1.0 - alpha;
    return cap(alpha * p1 / s.sigma2_relay) - cap(df_eve_snr(s, p1, p2, abar));
}

inline double nf_a_raw(const GaussianSubchannel& s, double p1, double p2) {
    return cap((p1 + s.rho1 * p2) / s.sigma2_dest) - cap((p1 + s.rho2 * p2) / s.sigma2_eve);
}

inline double nf_b_raw(const GaussianSubchannel& s, double p1, double p2) {
    return cap(p1 / s.sigma2_dest) + cap(s.rho2 * p2 / s.sigma2_eve) -
           cap((p1 + s.rho2 * p2) / s.sigma2_eve);
}

// Single-subchannel summand of the Gaussian upper bound (unclamped).
inline double upper_term(const GaussianSubchannel& s, double p1, double p2, double psi) {
    const double dest =
        (p1 + s.rho1 * p2 + 2.0 * psi * coherent_sqrt(s.rho1, p1, p2)) / s.sigma2_dest;
    const double eve =
        (p1 + s.rho2 * p2 + 2.0 * psi * coherent_sqrt(s.rho2, p1, p2)) / s.sigma2_eve;
    return cap(dest) - cap(eve);
}

// Relay-deaf summand: relay power acts purely as jamming noise at the
// eavesdropper.
inline double deaf_term(const GaussianSubchannel& s, double p1, double p2) {
    return cap(p1 / s.sigma2_dest) - cap(p1 / (s.sigma2_eve + s.rho2 * p2));
}

inline void check_power_pair(double p1, double p2) {
    if (!std::isfinite(p1) || p1 < 0.0) throw validation_error("p1 must be finite and >= 0");
    if (!std::isfinite(p2) || p2 < 0.0) throw validation_error("p2 must be finite and >= 0");
}

} // namespace detail

/// DF subchannel brackets: destination-combining term and relay-decoding
/// term, both clamped at zero. alpha in [0,1] splits the source power
/// between fresh information (alpha) and coherent alignment (1-alpha).
inline RateTerms df_terms(const GaussianSubchannel& sub, double p1, double p2, double alpha) {
    validate_subchannel(sub, 0);
    detail::check_power_pair(p1, p2);
    if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0)
        throw validation_error("alpha must lie in [0,1]");
    return RateTerms{pos(detail::df_dest_raw(sub, p1, p2, alpha)),
                     pos(detail::df_relay_raw(sub, p1, p2, alpha))};
}

/// NF subchannel brackets: combined-reception term and the confusion term,
/// both clamped at zero.
inline RateTerms nf_terms(const GaussianSubchannel& sub, double p1, double p2) {
    validate_subchannel(sub, 0);
    detail::check_power_pair(p1, p2);
    return RateTerms{pos(detail::nf_a_raw(sub, p1, p2)),
                     pos(detail::nf_b_raw(sub, p1, p2))};
}

/// Achievable secrecy rate at a fixed allocation and mode assignment:
/// min of the two DF bracket sums plus min of the two NF bracket sums.
/// Positive parts are applied per subchannel before summing.
inline double lower_bound_value(const ParallelChannel& channel, const ModeAssignment& modes,
                                const Allocation& alloc) {
    const std::size_t L = channel.size();
    validate_modes(modes, L);
    validate_allocation_shape(alloc, L);
    double df_dest = 0.0, df_relay = 0.0, nf_a = 0.0, nf_b = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& s = channel.subchannels[l];
        if (modes.modes[l] == RelayMode::DF) {
            df_dest += pos(detail::df_dest_raw(s, alloc.p1[l], alloc.p2[l], alloc.alpha[l]));
            df_relay += pos(detail::df_relay_raw(s, alloc.p1[l], alloc.p2[l], alloc.alpha[l]));
        } else {
            nf_a += pos(detail::nf_a_raw(s, alloc.p1[l], alloc.p2[l]));
            nf_b += pos(detail::nf_b_raw(s, alloc.p1[l], alloc.p2[l]));
        }
    }
    return std::min(df_dest, df_relay) + std::min(nf_a, nf_b);
}

/// Gaussian upper bound at a fixed allocation (correlations alloc.psi).
/// May be negative at a poor psi; clamping to zero happens at the optimizer
/// level since zero secrecy rate is always achievable.
inline double upper_bound_value(const ParallelChannel& channel, const Allocation& alloc) {
    const std::size_t L = channel.size();
    validate_allocation_shape(alloc, L);
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l)
        total += detail::upper_term(channel.subchannels[l], alloc.p1[l], alloc.p2[l], alloc.psi[l]);
    return total;
}

/// Convention for the cross-subchannel interference power seen by the
/// eavesdropper. `as_printed` uses sqrt(rho2)*P2 for the relay part of the
/// interference sum; `power_consistent` uses rho2*P2, which matches the
/// received-power scaling of the channel model. Default is as_printed.
enum class InterferenceConvention { as_printed, power_consistent };

/// Upper bound for the variant where the eavesdropper additionally suffers
/// cross-subchannel interference that it must treat as noise.
inline double interference_upper_value(const ParallelChannel& channel, const Allocation& alloc,
                                       InterferenceConvention convention = InterferenceConvention::as_printed) {
    const std::size_t L = channel.size();
    validate_allocation_shape(alloc, L);
    std::vector<double> contrib(L);
    double contrib_total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& s = channel.subchannels[l];
        const double relay_part = (convention == InterferenceConvention::as_printed)
                                      ? std::sqrt(s.rho2) * alloc.p2[l]
                                      : s.rho2 * alloc.p2[l];
        contrib[l] = alloc.p1[l] + relay_part +
                     2.0 * alloc.psi[l] * detail::coherent_sqrt(s.rho2, alloc.p1[l], alloc.p2[l]);
        contrib_total += contrib[l];
    }
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& s = channel.subchannels[l];
        const double dest =
            (alloc.p1[l] + s.rho1 * alloc.p2[l] +
             2.0 * alloc.psi[l] * detail::coherent_sqrt(s.rho1, alloc.p1[l], alloc.p2[l])) /
            s.sigma2_dest;
        const double eve_num = alloc.p1[l] + s.rho2 * alloc.p2[l] +
                               2.0 * alloc.psi[l] * detail::coherent_sqrt(s.rho2, alloc.p1[l], alloc.p2[l]);
        const double eve_den = (contrib_total - contrib[l]) + s.sigma2_eve;
        // The as_printed convention can drive the interference sum negative
        // for strongly anti-correlated inputs with rho2 > 1; reject rather
        // than evaluate a negative noise power.
        if (eve_den <= 0.0)
            throw validation_error("interference_upper_value: nonpositive interference-plus-noise "
                                   "power at subchannel " + std::to_string(l) +
                                   " under the as_printed convention");
        total += cap(dest) - cap(eve_num / eve_den);
    }
    return total;
}

/// Bound value when the relay cannot hear the source and only jams.
/// The same expression serves as upper and lower bound; they differ in the
/// feasible set (see deaf_condition_holds).
inline double deaf_bound_value(const ParallelChannel& channel, const Allocation& alloc) {
    const std::size_t L = channel.size();
    validate_allocation_shape(alloc, L);
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l)
        total += detail::deaf_term(channel.subchannels[l], alloc.p1[l], alloc.p2[l]);
    return total;
}

/// Feasibility condition for the relay-deaf lower bound: the destination
/// must learn at least as much about the jamming as the eavesdropper does.
/// Equality counts as feasible.
inline bool deaf_condition_holds(const ParallelChannel& channel, const Allocation& alloc) {
    const std::size_t L = channel.size();
    validate_allocation_shape(alloc, L);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& s = channel.subchannels[l];
        lhs += cap(s.rho1 * alloc.p2[l] / (alloc.p1[l] + s.sigma2_dest));
        rhs += cap(s.rho2 * alloc.p2[l] / s.sigma2_eve);
    }
    return lhs >= rhs;
}

/// Deterministic pipes, coding across subchannels:
/// min{ sum (Cra - Ce)+, sum (Crb - Ce)+ }.
inline double deterministic_across(const std::vector<DeterministicSubchannel>& subs) {
    if (subs.empty()) throw validation_error("deterministic_across: empty input");
    double sum_in = 0.0, sum_out = 0.0;
    for (const auto& s : subs) {
        sum_in += pos(s.cap_relay_in - s.cap_eve);
        sum_out += pos(s.cap_relay_out - s.cap_eve);
    }
    return std::min(sum_in, sum_out);
}

/// Deterministic pipes, coding separately per subchannel:
/// sum min{ (Cra - Ce)+, (Crb - Ce)+ }.
inline double deterministic_separate(const std::vector<DeterministicSubchannel>& subs) {
    if (subs.empty()) throw validation_error("deterministic_separate: empty input");
    double total = 0.0;
    for (const auto& s : subs)
        total += std::min(pos(s.cap_relay_in - s.cap_eve), pos(s.cap_relay_out - s.cap_eve));
    return total;
}

} // namespace secrelay

#endif
