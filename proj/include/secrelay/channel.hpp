#ifndef SECRELAY_CHANNEL_HPP
#define SECRELAY_CHANNEL_HPP

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "secrelay/common.hpp"

namespace secrelay {

/// One subchannel of a parallel Gaussian relay-eavesdropper channel.
/// Direct source->destination and source->eavesdropper gains are normalized
/// to one; rho1/rho2 carry the relay-link SNR ratios and the sigma2 fields
/// the receiver noise variances.
struct GaussianSubchannel {
    double sigma2_relay = 1.0; ///< noise variance at the relay
    double sigma2_dest  = 1.0; ///< noise variance at the destination
    double sigma2_eve   = 1.0; ///< noise variance at the eavesdropper
    double rho1         = 0.0; ///< R-D link SNR over S-D link SNR
    double rho2         = 0.0; ///< R-E link SNR over S-E link SNR
};

struct ParallelChannel {
    std::vector<GaussianSubchannel> subchannels;

    std::size_t size() const { return subchannels.size(); }
};

/// Total transmit power available to the source (p1_total) and relay (p2_total).
struct PowerBudget {
    double p1_total = 0.0;
    double p2_total = 0.0;
};

/// Per-subchannel transmit powers plus the auxiliary shaping variables:
/// alpha is the decode-and-forward power split (1 = all power on fresh
/// information, 0 = all power coherently aligned with the relay) and psi
/// the source-relay correlation used by the upper bounds. All four vectors
/// always have length L; alpha is ignored on NF subchannels and psi by the
/// lower bound.
struct Allocation {
    std::vector<double> p1;
    std::vector<double> p2;
    std::vector<double> alpha;
    std::vector<double> psi;

    std::size_t size() const { return p1.size(); }
};

enum class RelayMode { DF, NF };

/// Partition of the subchannels into DF and NF operation.
struct ModeAssignment {
    std::vector<RelayMode> modes;

    std::size_t size() const { return modes.size(); }
};

/// Noiseless pipe model: per-subchannel link capacities in bits toward the
/// relay, the destination, and the eavesdropper.
struct DeterministicSubchannel {
    double cap_relay_in  = 0.0;
    double cap_relay_out = 0.0;
    double cap_eve       = 0.0;
};

/// Node positions on the plane plus the path-loss exponent.
struct Geometry {
    std::array<double, 2> source_pos{0.0, 0.0};
    std::array<double, 2> relay_pos{0.5, 0.0};
    std::array<double, 2> dest_pos{1.0, 0.0};
    std::array<double, 2> eve_pos{0.0, 1.0};
    double gamma = 2.0;
};

/// One fading realization: the five complex link gains.
struct FadingDraw {
    std::complex<double> h_sr;
    std::complex<double> h_sd;
    std::complex<double> h_rd;
    std::complex<double> h_se;
    std::complex<double> h_re;
};

// --- validation ----------------------------------------------------------

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw validation_error(what);
}

inline std::string sub_field(std::size_t index, const char* field) {
    return "subchannels[" + std::to_string(index) + "]." + field;
}

} // namespace detail

inline void validate_subchannel(const GaussianSubchannel& s, std::size_t index) {
    using detail::require;
    using detail::sub_field;
    require(std::isfinite(s.sigma2_relay) && s.sigma2_relay > 0.0,
            sub_field(index, "sigma2_relay") + " must be finite and > 0");
    require(std::isfinite(s.sigma2_dest) && s.sigma2_dest > 0.0,
            sub_field(index, "sigma2_dest") + " must be finite and > 0");
    require(std::isfinite(s.sigma2_eve) && s.sigma2_eve > 0.0,
            sub_field(index, "sigma2_eve") + " must be finite and > 0");
    require(std::isfinite(s.rho1) && s.rho1 >= 0.0,
            sub_field(index, "rho1") + " must be finite and >= 0");
    require(std::isfinite(s.rho2) && s.rho2 >= 0.0,
            sub_field(index, "rho2") + " must be finite and >= 0");
}

/// Returns the channel unchanged iff every invariant holds; otherwise throws
/// a validation_error naming the first offending subchannel and field.
inline const ParallelChannel& validate_channel(const ParallelChannel& c) {
    detail::require(!c.subchannels.empty(), "subchannels must not be empty");
    for (std::size_t l = 0; l < c.subchannels.size(); ++l)
        validate_subchannel(c.subchannels[l], l);
    return c;
}

inline const PowerBudget& validate_budget(const PowerBudget& b) {
    detail::require(std::isfinite(b.p1_total) && b.p1_total >= 0.0,
                    "budget.p1 must be finite and >= 0");
    detail::require(std::isfinite(b.p2_total) && b.p2_total >= 0.0,
                    "budget.p2 must be finite and >= 0");
    return b;
}

/// Relative tolerance on the power sums, with a unit floor so that zero
/// budgets accept exact zeros only. Optimizer projections round at the
/// 1e-16 level; 1e-9 gives them headroom.
inline constexpr double power_sum_tolerance = 1e-9;

/// Shape and range checks against a channel of length L (no budget involved).
inline void validate_allocation_shape(const Allocation& a, std::size_t L) {
    using detail::require;
    require(a.p1.size() == L && a.p2.size() == L && a.alpha.size() == L && a.psi.size() == L,
            "allocation vectors must all have length " + std::to_string(L));
    for (std::size_t l = 0; l < L; ++l) {
        require(std::isfinite(a.p1[l]) && a.p1[l] >= 0.0, detail::sub_field(l, "p1") + " must be >= 0");
        require(std::isfinite(a.p2[l]) && a.p2[l] >= 0.0, detail::sub_field(l, "p2") + " must be >= 0");
        require(std::isfinite(a.alpha[l]) && a.alpha[l] >= 0.0 && a.alpha[l] <= 1.0,
                detail::sub_field(l, "alpha") + " must lie in [0,1]");
        require(std::isfinite(a.psi[l]) && a.psi[l] >= -1.0 && a.psi[l] <= 1.0,
                detail::sub_field(l, "psi") + " must lie in [-1,1]");
    }
}

/// Full validation including the budget sums.
inline void validate_allocation(const Allocation& a, std::size_t L, const PowerBudget& b) {
    validate_allocation_shape(a, L);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t l = 0; l < L; ++l) { s1 += a.p1[l]; s2 += a.p2[l]; }
    detail::require(s1 <= b.p1_total + power_sum_tolerance * std::max(1.0, b.p1_total),
                    "sum of p1 exceeds budget.p1");
    detail::require(s2 <= b.p2_total + power_sum_tolerance * std::max(1.0, b.p2_total),
                    "sum of p2 exceeds budget.p2");
}

inline void validate_modes(const ModeAssignment& m, std::size_t L) {
    detail::require(m.modes.size() == L,
                    "modes must have length " + std::to_string(L));
}

// --- constructors --------------------------------------------------------

/// Equal power split across subchannels; alpha = 1, psi = 0.
inline Allocation uniform_allocation(const ParallelChannel& channel, const PowerBudget& budget) {
    validate_channel(channel);
    validate_budget(budget);
    const std::size_t L = channel.size();
    Allocation a;
    a.p1.assign(L, budget.p1_total / static_cast<double>(L));
    a.p2.assign(L, budget.p2_total / static_cast<double>(L));
    a.alpha.assign(L, 1.0);
    a.psi.assign(L, 0.0);
    return a;
}

inline Allocation zero_allocation(std::size_t L) {
    Allocation a;
    a.p1.assign(L, 0.0);
    a.p2.assign(L, 0.0);
    a.alpha.assign(L, 1.0);
    a.psi.assign(L, 0.0);
    return a;
}

inline void validate_geometry(const Geometry& g) {
    detail::require(std::isfinite(g.gamma) && g.gamma > 0.0, "geometry.gamma must be > 0");
    auto finite_pos = [](const std::array<double, 2>& p) {
        return std::isfinite(p[0]) && std::isfinite(p[1]);
    };
    detail::require(finite_pos(g.source_pos) && finite_pos(g.relay_pos) &&
                        finite_pos(g.dest_pos) && finite_pos(g.eve_pos),
                    "geometry positions must be finite");
}

inline double node_distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

} // namespace secrelay

#endif
