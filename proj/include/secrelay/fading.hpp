#ifndef SECRELAY_FADING_HPP
#define SECRELAY_FADING_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "secrelay/channel.hpp"
#include "secrelay/common.hpp"
#include "secrelay/detail/rng.hpp"
#include "secrelay/optim.hpp"
#include "secrelay/rates.hpp"

// Fading experiments: geometry-driven Rayleigh link gains, per-state relay
// mode selection, and ergodic bounds under average power constraints. Each
// fading state is one subchannel of an equivalent parallel Gaussian channel;
// rates on the complex fading channel count twice the real-channel rate.

namespace secrelay {

struct NoiseVariances {
    double sigma2_relay = 1.0;
    double sigma2_dest = 1.0;
    double sigma2_eve = 1.0;
};

struct FadingScenario {
    Geometry geometry;
    PowerBudget budget;       ///< average power per state, Watt
    int n_states = 64;        ///< fading realizations per batch
    NoiseVariances noise;
    std::uint64_t seed = 0;
};

struct FadingBatch {
    std::vector<FadingDraw> draws;

    std::size_t size() const { return draws.size(); }
};

inline void validate_scenario(const FadingScenario& sc) {
    validate_geometry(sc.geometry);
    validate_budget(sc.budget);
    detail::require(sc.n_states >= 1, "scenario.n_states must be >= 1");
    detail::require(std::isfinite(sc.noise.sigma2_relay) && sc.noise.sigma2_relay > 0.0,
                    "scenario.noise.sigma2_relay must be > 0");
    detail::require(std::isfinite(sc.noise.sigma2_dest) && sc.noise.sigma2_dest > 0.0,
                    "scenario.noise.sigma2_dest must be > 0");
    detail::require(std::isfinite(sc.noise.sigma2_eve) && sc.noise.sigma2_eve > 0.0,
                    "scenario.noise.sigma2_eve must be > 0");
}

/// Draws n_states fading realizations. Each link gain is a standard complex
/// Gaussian scaled by d^(-gamma/2); the draw order per state is fixed as
/// (sr, sd, rd, se, re) so batches are reproducible from the seed alone.
inline FadingBatch sample_fading(const FadingScenario& sc) {
    validate_scenario(sc);
    const auto& g = sc.geometry;
    const double d_sr = node_distance(g.source_pos, g.relay_pos);
    const double d_sd = node_distance(g.source_pos, g.dest_pos);
    const double d_rd = node_distance(g.relay_pos, g.dest_pos);
    const double d_se = node_distance(g.source_pos, g.eve_pos);
    const double d_re = node_distance(g.relay_pos, g.eve_pos);
    for (double d : {d_sr, d_sd, d_rd, d_se, d_re})
        detail::require(d > 0.0, "geometry: coincident nodes give an infinite link gain");
    const double e = -g.gamma / 2.0;
    const double a_sr = std::pow(d_sr, e), a_sd = std::pow(d_sd, e), a_rd = std::pow(d_rd, e),
                 a_se = std::pow(d_se, e), a_re = std::pow(d_re, e);
    std::mt19937_64 rng(sc.seed);
    FadingBatch batch;
    batch.draws.resize(static_cast<std::size_t>(sc.n_states));
    for (auto& d : batch.draws) {
        d.h_sr = a_sr * detail::complex_gaussian(rng);
        d.h_sd = a_sd * detail::complex_gaussian(rng);
        d.h_rd = a_rd * detail::complex_gaussian(rng);
        d.h_se = a_se * detail::complex_gaussian(rng);
        d.h_re = a_re * detail::complex_gaussian(rng);
    }
    return batch;
}

namespace detail {

// Floor on squared gains when normalizing by the direct links, so exactly
// zero gains (possible in synthetic tests, measure-zero otherwise) stay
// finite. The floor only enters products that vanish with it, so its effect
// on any rate is below 1e-20.
inline constexpr double gain_floor = 1e-30;

// One fading state as a subchannel of the equivalent parallel Gaussian
// channel: both direct links normalized to unit gain.
inline GaussianSubchannel equivalent_subchannel(const FadingDraw& h, const NoiseVariances& noise) {
    const double g_sr = std::max(std::norm(h.h_sr), gain_floor);
    const double g_sd = std::max(std::norm(h.h_sd), gain_floor);
    const double g_se = std::max(std::norm(h.h_se), gain_floor);
    GaussianSubchannel s;
    s.sigma2_relay = noise.sigma2_relay / g_sr;
    s.sigma2_dest = noise.sigma2_dest / g_sd;
    s.sigma2_eve = noise.sigma2_eve / g_se;
    s.rho1 = std::norm(h.h_rd) / g_sd;
    s.rho2 = std::norm(h.h_re) / g_se;
    return s;
}

inline ParallelChannel equivalent_channel(const FadingBatch& batch, const NoiseVariances& noise) {
    ParallelChannel c;
    c.subchannels.reserve(batch.size());
    for (const auto& d : batch.draws) c.subchannels.push_back(equivalent_subchannel(d, noise));
    return c;
}

inline double state_df_min(const GaussianSubchannel& s, double p1, double p2, double alpha) {
    return std::min(pos(df_dest_raw(s, p1, p2, alpha)), pos(df_relay_raw(s, p1, p2, alpha)));
}

inline double state_nf_min(const GaussianSubchannel& s, double p1, double p2) {
    return std::min(pos(nf_a_raw(s, p1, p2)), pos(nf_b_raw(s, p1, p2)));
}

} // namespace detail

/// Relay mode from link strength alone: NF when the direct link is at least
/// as strong as the source-relay link, DF otherwise (ties go to NF).
inline ModeAssignment select_modes_heuristic(const FadingBatch& batch) {
    ModeAssignment m;
    m.modes.reserve(batch.size());
    for (const auto& d : batch.draws)
        m.modes.push_back(std::norm(d.h_sd) >= std::norm(d.h_sr) ? RelayMode::NF : RelayMode::DF);
    return m;
}

/// Relay mode maximizing the per-state bracket min, evaluated at the
/// supplied allocation or, by default, at uniform power with alpha = 1.
/// Ties go to DF.
inline ModeAssignment select_modes_best(const FadingBatch& batch, const FadingScenario& scenario,
                                        const std::optional<Allocation>& allocation = {}) {
    validate_scenario(scenario);
    detail::require(batch.size() == static_cast<std::size_t>(scenario.n_states),
                    "batch length must match scenario.n_states");
    if (allocation) validate_allocation_shape(*allocation, batch.size());
    ModeAssignment m;
    m.modes.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto s = detail::equivalent_subchannel(batch.draws[i], scenario.noise);
        const double p1 = allocation ? allocation->p1[i] : scenario.budget.p1_total;
        const double p2 = allocation ? allocation->p2[i] : scenario.budget.p2_total;
        const double alpha = allocation ? allocation->alpha[i] : 1.0;
        const double df = detail::state_df_min(s, p1, p2, alpha);
        const double nf = detail::state_nf_min(s, p1, p2);
        m.modes.push_back(df >= nf ? RelayMode::DF : RelayMode::NF);
    }
    return m;
}

/// Ergodic achievable secrecy rate: per-state powers and alpha optimized
/// under the empirical average-power constraints (1/L) sum P(i) <= P. The
/// returned allocation holds the per-state powers; the value is the batch
/// average in bits per (complex) channel use.
inline BoundResult ergodic_lower(const FadingScenario& scenario, const ModeAssignment& modes,
                                 const SolverOptions& options = {}) {
    const FadingBatch batch = sample_fading(scenario);
    validate_modes(modes, batch.size());
    const ParallelChannel eq = detail::equivalent_channel(batch, scenario.noise);
    const double n = static_cast<double>(scenario.n_states);
    const PowerBudget total{scenario.budget.p1_total * n, scenario.budget.p2_total * n};
    BoundResult r = maximize_lower(eq, total, modes, options);
    r.value *= 2.0 / n;
    return r;
}

/// Ergodic upper bound with per-state correlation psi, same constraints.
inline BoundResult ergodic_upper(const FadingScenario& scenario, const SolverOptions& options = {}) {
    const FadingBatch batch = sample_fading(scenario);
    const ParallelChannel eq = detail::equivalent_channel(batch, scenario.noise);
    const double n = static_cast<double>(scenario.n_states);
    const PowerBudget total{scenario.budget.p1_total * n, scenario.budget.p2_total * n};
    BoundResult r = maximize_upper(eq, total, options);
    r.value *= 2.0 / n;
    return r;
}

enum class SweepScheme { DF_all, NF_all, hybrid_best, no_relay, upper };

inline std::string to_string(SweepScheme s) {
    switch (s) {
    case SweepScheme::DF_all: return "DF_all";
    case SweepScheme::NF_all: return "NF_all";
    case SweepScheme::hybrid_best: return "hybrid_best";
    case SweepScheme::no_relay: return "no_relay";
    case SweepScheme::upper: return "upper";
    }
    return "?";
}

inline SweepScheme sweep_scheme_from_string(const std::string& s) {
    if (s == "DF_all") return SweepScheme::DF_all;
    if (s == "NF_all") return SweepScheme::NF_all;
    if (s == "hybrid_best") return SweepScheme::hybrid_best;
    if (s == "no_relay") return SweepScheme::no_relay;
    if (s == "upper") return SweepScheme::upper;
    throw validation_error("unknown scheme '" + s + "'");
}

struct SweepRow {
    double d = 0.0;
    SweepScheme scheme = SweepScheme::hybrid_best;
    double rate = 0.0;
};

/// Moves the relay to (d, 0) for each requested distance and evaluates the
/// requested schemes. The fading seed is shared across distances (common
/// random numbers), so curves differ only through the geometry. Rows come
/// out with d ascending and schemes in request order.
///
/// A sweep point that lands the relay exactly on another node is offset by
/// one ulp so the path-loss model stays finite; the direct sampling API
/// keeps its strict coincidence error.
///
/// With joint_mode_search the hybrid scheme re-selects modes once at the
/// optimized allocation and keeps the better of the two runs; off by
/// default.
inline std::vector<SweepRow> sweep_relay_position(const FadingScenario& scenario_template,
                                                  std::vector<double> d_values,
                                                  const std::vector<SweepScheme>& schemes,
                                                  const SolverOptions& options = {},
                                                  bool joint_mode_search = false) {
    validate_scenario(scenario_template);
    detail::require(!d_values.empty(), "sweep: d_values must not be empty");
    std::sort(d_values.begin(), d_values.end());
    std::vector<SweepRow> rows;
    rows.reserve(d_values.size() * schemes.size());
    const std::size_t L = static_cast<std::size_t>(scenario_template.n_states);
    const ModeAssignment all_df{std::vector<RelayMode>(L, RelayMode::DF)};
    const ModeAssignment all_nf{std::vector<RelayMode>(L, RelayMode::NF)};
    for (double d : d_values) {
        FadingScenario sc = scenario_template;
        sc.geometry.relay_pos = {d, 0.0};
        for (const auto& other :
             {sc.geometry.source_pos, sc.geometry.dest_pos, sc.geometry.eve_pos}) {
            while (node_distance(sc.geometry.relay_pos, other) == 0.0)
                sc.geometry.relay_pos[0] =
                    std::nextafter(sc.geometry.relay_pos[0], sc.geometry.relay_pos[0] + 1.0);
        }
        std::optional<double> df_rate, nf_rate;
        auto pure_rate = [&](const ModeAssignment& m, std::optional<double>& memo) {
            if (!memo) memo = ergodic_lower(sc, m, options).value;
            return *memo;
        };
        for (SweepScheme scheme : schemes) {
            double rate = 0.0;
            switch (scheme) {
            case SweepScheme::DF_all:
                rate = pure_rate(all_df, df_rate);
                break;
            case SweepScheme::NF_all:
                rate = pure_rate(all_nf, nf_rate);
                break;
            case SweepScheme::hybrid_best: {
                // Per-state selection, falling back to a uniform assignment
                // when that carries a higher total rate (small batches can
                // lose more to broken sum coordination than the per-state
                // choice gains).
                const FadingBatch batch = sample_fading(sc);
                const ModeAssignment modes = select_modes_best(batch, sc);
                BoundResult r = ergodic_lower(sc, modes, options);
                if (joint_mode_search) {
                    const ModeAssignment again = select_modes_best(batch, sc, r.allocation);
                    const BoundResult r2 = ergodic_lower(sc, again, options);
                    if (r2.value > r.value) r = r2;
                }
                rate = std::max({r.value, pure_rate(all_df, df_rate), pure_rate(all_nf, nf_rate)});
                break;
            }
            case SweepScheme::no_relay: {
                FadingScenario quiet = sc;
                quiet.budget.p2_total = 0.0;
                rate = ergodic_lower(quiet, all_nf, options).value;
                break;
            }
            case SweepScheme::upper:
                rate = ergodic_upper(sc, options).value;
                break;
            }
            rows.push_back({d, scheme, rate});
        }
    }
    return rows;
}

} // namespace secrelay

#endif
