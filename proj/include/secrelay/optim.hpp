#ifndef SECRELAY_OPTIM_HPP
#define SECRELAY_OPTIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "secrelay/channel.hpp"
#include "secrelay/common.hpp"
#include "secrelay/detail/parallel.hpp"
#include "secrelay/detail/rng.hpp"
#include "secrelay/rates.hpp"

// Constrained maximization of the secrecy-rate bounds over power
// allocations and the shaping variables alpha / psi.
//
// The objectives are nonconvex (mins of sums with positive-part kinks), so
// the solver is a multi-start projected supergradient ascent with
// backtracking: at a min tie the branch gradients are averaged, inactive
// positive parts contribute nothing, and every candidate iterate is pulled
// back onto the feasible set. An exhaustive lattice search over the same
// feasible set serves as the independent reference on small instances.

namespace secrelay {

struct SolverOptions {
    int n_starts = 16;         ///< multi-start points (start 0 is the uniform allocation)
    int max_iters = 600;       ///< ascent iterations per start
    double step_init = 0.25;   ///< initial step length
    double tol = 1e-10;        ///< movement threshold treated as stationary
    std::uint64_t seed = 0;    ///< RNG seed for the random starts
    int grid_resolution = 21;  ///< lattice points per axis for the grid oracle
};

inline void validate_options(const SolverOptions& o) {
    detail::require(o.n_starts >= 1, "solver.n_starts must be >= 1");
    detail::require(o.max_iters >= 1, "solver.max_iters must be >= 1");
    detail::require(std::isfinite(o.step_init) && o.step_init > 0.0, "solver.step_init must be > 0");
    detail::require(std::isfinite(o.tol) && o.tol > 0.0, "solver.tol must be > 0");
    detail::require(o.grid_resolution >= 2, "solver.grid_resolution must be >= 2");
}

/// Euclidean projection onto { x : x_l >= 0, sum_l x_l <= total }.
/// Already-feasible inputs are returned unchanged.
inline std::vector<double> project_budget(std::vector<double> raw, double total) {
    if (!std::isfinite(total) || total < 0.0)
        throw validation_error("project_budget: total must be finite and >= 0");
    double clipped_sum = 0.0;
    bool any_negative = false;
    for (double v : raw) {
        if (v < 0.0) any_negative = true;
        clipped_sum += std::max(v, 0.0);
    }
    if (clipped_sum <= total) {
        if (any_negative)
            for (double& v : raw) v = std::max(v, 0.0);
        return raw;
    }
    if (total == 0.0) {
        std::fill(raw.begin(), raw.end(), 0.0);
        return raw;
    }
    // Sum constraint active: water-level search over the sorted entries.
    std::vector<double> sorted = raw;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double prefix = 0.0, tau = sorted[0];
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        prefix += sorted[j];
        const double cand = (prefix - total) / static_cast<double>(j + 1);
        if (sorted[j] - cand > 0.0) tau = cand;
    }
    for (double& v : raw) v = std::max(v - tau, 0.0);
    return raw;
}

// ---------------------------------------------------------------------------
// Objective evaluators over packed variable vectors.
// Layout: x = [p1(0..L) | p2(L..2L) | alpha or psi (2L..3L, when present)].
// ---------------------------------------------------------------------------

namespace detail {

// Budget-feasible index tuples (sum <= r-1), lexicographic order, flattened.
struct IndexTuples {
    std::size_t L = 0;
    std::vector<std::uint16_t> flat;

    std::size_t count() const { return L == 0 ? 0 : flat.size() / L; }
    const std::uint16_t* tuple(std::size_t i) const { return flat.data() + i * L; }
};

// C(L + r - 1, L), computed in doubles; used to reject oversized lattices
// before materializing them.
inline double tuple_count_estimate(std::size_t L, int resolution) {
    double c = 1.0;
    for (std::size_t i = 1; i <= L; ++i)
        c *= static_cast<double>(resolution - 1 + i) / static_cast<double>(i);
    return c;
}

inline IndexTuples enumerate_tuples(std::size_t L, int resolution) {
    const double est = tuple_count_estimate(L, resolution);
    if (est * est > 1e8)
        throw size_error("grid oracle: " + std::to_string(est * est) +
                         " power-lattice points exceed the 1e8 budget");
    IndexTuples t;
    t.L = L;
    std::vector<std::uint16_t> cur(L, 0);
    const int budget = resolution - 1;
    // Odometer over indices with running budget.
    auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
        if (pos == L) {
            t.flat.insert(t.flat.end(), cur.begin(), cur.end());
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            cur[pos] = static_cast<std::uint16_t>(k);
            self(self, pos + 1, remaining - k);
        }
    };
    rec(rec, 0, budget);
    return t;
}

inline std::vector<double> power_grid(double total, int r) {
    std::vector<double> g(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i)
        g[static_cast<std::size_t>(i)] = total * static_cast<double>(i) / static_cast<double>(r - 1);
    return g;
}

inline double cap_slope(double x) { return 1.0 / (2.0 * std::numbers::ln2 * (1.0 + x)); }

// Partial derivative of sqrt(prod) given the value s of the root and the
// derivative of prod; zero on the boundary where any factor vanishes.
inline double sqrt_partial(double dprod, double s) { return s > 0.0 ? dprod / (2.0 * s) : 0.0; }

inline void project_power_block(std::vector<double>& x, std::size_t off, std::size_t L,
                                double total) {
    std::vector<double> block(x.begin() + off, x.begin() + off + L);
    block = project_budget(std::move(block), total);
    std::copy(block.begin(), block.end(), x.begin() + off);
}

inline void dirichlet_fill(std::mt19937_64& rng, std::vector<double>& x, std::size_t off,
                           std::size_t L, double total) {
    double sum = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        x[off + l] = exponential(rng);
        sum += x[off + l];
    }
    for (std::size_t l = 0; l < L; ++l) x[off + l] *= total / sum;
}

// Start schedule shared by all objectives. Interior random starts miss
// optima that sit on faces of the feasible set (all power on one subchannel,
// relay silent), so a deterministic prefix of corner starts comes first:
//   0: uniform               1: uniform p1, relay off
//   2..: per-subchannel concentrations (source only, source and relay,
//        concentrated source with spread relay, and vice versa)
// and Dirichlet-random feasible points beyond that. The schedule depends
// only on the start index, so enlarging n_starts keeps earlier starts.
inline constexpr std::size_t max_corner_starts_L = 8;

inline bool structured_start(int k, std::size_t L, const PowerBudget& budget,
                             std::vector<double>& x) {
    const double u1 = budget.p1_total / static_cast<double>(L);
    const double u2 = budget.p2_total / static_cast<double>(L);
    if (k == 0) {
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = u1;
            x[L + l] = u2;
        }
        return true;
    }
    if (k == 1) {
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = u1;
            x[L + l] = 0.0;
        }
        return true;
    }
    if (L > max_corner_starts_L) return false;
    const int j = (k - 2) / 4;
    if (j >= static_cast<int>(L)) return false;
    const std::size_t sj = static_cast<std::size_t>(j);
    switch ((k - 2) % 4) {
    case 0: // source on one subchannel, relay off
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = 0.0;
            x[L + l] = 0.0;
        }
        x[sj] = budget.p1_total;
        break;
    case 1: // both powers on the same subchannel
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = 0.0;
            x[L + l] = 0.0;
        }
        x[sj] = budget.p1_total;
        x[L + sj] = budget.p2_total;
        break;
    case 2: // concentrated source, spread relay
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = 0.0;
            x[L + l] = u2;
        }
        x[sj] = budget.p1_total;
        break;
    default: // spread source, concentrated relay
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = u1;
            x[L + l] = 0.0;
        }
        x[L + sj] = budget.p2_total;
        break;
    }
    return true;
}

// Stall rescue: the objectives have square-root kinks on the p = 0 faces
// (infinite one-sided derivatives), so a gradient step can neither enter nor
// price them. When the line search fails, probe a ladder of small values for
// every zeroed power, jointly with candidate settings of the same
// subchannel's alpha/psi, and jump to the best improving candidate.
template <typename Obj>
bool probe_kink_faces(const Obj& obj, std::vector<double>& x, double& f, bool has_extra,
                      const std::vector<double>& extra_options) {
    const std::size_t L = obj.L;
    static constexpr double ladder[] = {0.0, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2};
    double best_f = f;
    std::vector<double> best_x;
    std::vector<double> trial;
    auto consider = [&](std::vector<double> cand) {
        obj.project(cand);
        if (!obj.feasible(cand)) return;
        const double v = obj.value(cand);
        if (v > best_f) {
            best_f = v;
            best_x = std::move(cand);
        }
    };
    // Overwrite each power coordinate with a ladder level (zero included:
    // freeing a wasted subchannel is itself a jump the gradient cannot
    // price), jointly with candidate settings of that subchannel's extra.
    for (std::size_t i = 0; i < 2 * L; ++i) {
        const double total = i < L ? obj.budget.p1_total : obj.budget.p2_total;
        if (total <= 0.0) continue;
        const std::size_t l = i < L ? i : i - L;
        for (double t : ladder) {
            if (x[i] == t * total) continue;
            trial = x;
            trial[i] = t * total;
            consider(trial);
            if (has_extra) {
                for (double e : extra_options) {
                    std::vector<double> with_extra = trial;
                    with_extra[2 * L + l] = e;
                    consider(std::move(with_extra));
                }
            }
        }
    }
    if (has_extra) {
        // The alpha = 1 face hides the coherent-combining term behind the
        // same kind of kink; plain extra probes cover it.
        for (std::size_t l = 0; l < L; ++l) {
            for (double e : extra_options) {
                if (x[2 * L + l] == e) continue;
                trial = x;
                trial[2 * L + l] = e;
                consider(trial);
            }
        }
    }
    if (best_x.empty()) return false;
    x = std::move(best_x);
    f = best_f;
    return true;
}

struct LowerObjective {
    const ParallelChannel& channel;
    PowerBudget budget;
    ModeAssignment modes;
    std::size_t L;

    LowerObjective(const ParallelChannel& c, const PowerBudget& b, const ModeAssignment& m)
        : channel(c), budget(b), modes(m), L(c.size()) {}

    std::size_t dim() const { return 3 * L; }

    static std::vector<double> extra_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

    bool stall_probe(std::vector<double>& x, double& f) const {
        if (ridge_probe(x, f)) return true;
        return probe_kink_faces(*this, x, f, true, extra_grid());
    }

    // At a tie of a min the averaged supergradient need not be an ascent
    // direction (the ridge curves), and plain steps crawl. For each fixed
    // convex combination of the branch gradients run a short inner ascent on
    // the true objective; gated to small instances where the walk pays off.
    bool ridge_probe(std::vector<double>& x, double& f) const {
        if (L > 4) return false;
        bool has_df = false, has_nf = false;
        for (RelayMode m : modes.modes) (m == RelayMode::DF ? has_df : has_nf) = true;
        static constexpr double weight_grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
        static constexpr double mid[] = {0.5};
        std::vector<double> g(dim()), trial(dim());
        bool improved_any = false;
        for (double wd : has_df ? std::span<const double>(weight_grid) : std::span<const double>(mid)) {
            for (double wa : has_nf ? std::span<const double>(weight_grid) : std::span<const double>(mid)) {
                double step = 0.25;
                for (int iter = 0; iter < 80; ++iter) {
                    gradient_weighted(x, g, wd, wa);
                    double gmax = 0.0;
                    for (double v : g) gmax = std::max(gmax, std::abs(v));
                    if (gmax == 0.0) break;
                    bool improved = false;
                    while (step > 1e-14) {
                        for (std::size_t i = 0; i < x.size(); ++i)
                            trial[i] = x[i] + step * coord_scale(i) * g[i];
                        project(trial);
                        const double ft = value(trial);
                        if (ft > f) {
                            x.swap(trial);
                            f = ft;
                            improved = true;
                            improved_any = true;
                            step = std::min(step * 2.0, 64.0);
                            break;
                        }
                        step *= 0.5;
                    }
                    if (!improved) break;
                }
            }
        }
        return improved_any;
    }

    double coord_scale(std::size_t i) const {
        if (i < L) return std::max(1.0, budget.p1_total / static_cast<double>(L));
        if (i < 2 * L) return std::max(1.0, budget.p2_total / static_cast<double>(L));
        return 1.0;
    }

    void project(std::vector<double>& x) const {
        project_power_block(x, 0, L, budget.p1_total);
        project_power_block(x, L, L, budget.p2_total);
        for (std::size_t l = 0; l < L; ++l) x[2 * L + l] = std::clamp(x[2 * L + l], 0.0, 1.0);
    }

    bool feasible(const std::vector<double>&) const { return true; }
    void make_feasible(std::vector<double>&) const {}

    void bracket_sums(const std::vector<double>& x, double& sd, double& sr, double& sa,
                      double& sb) const {
        sd = sr = sa = sb = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            const double p1 = x[l], p2 = x[L + l];
            if (modes.modes[l] == RelayMode::DF) {
                sd += pos(df_dest_raw(s, p1, p2, x[2 * L + l]));
                sr += pos(df_relay_raw(s, p1, p2, x[2 * L + l]));
            } else {
                sa += pos(nf_a_raw(s, p1, p2));
                sb += pos(nf_b_raw(s, p1, p2));
            }
        }
    }

    double value(const std::vector<double>& x) const {
        double sd, sr, sa, sb;
        bracket_sums(x, sd, sr, sa, sb);
        return std::min(sd, sr) + std::min(sa, sb);
    }

    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
        double sd, sr, sa, sb;
        bracket_sums(x, sd, sr, sa, sb);
        const double wd = sd < sr ? 1.0 : (sd > sr ? 0.0 : 0.5);
        const double wa = sa < sb ? 1.0 : (sa > sb ? 0.0 : 0.5);
        gradient_weighted(x, g, wd, wa);
    }

    // Supergradient with explicit branch weights wd (DF destination vs relay
    // sum) and wa (NF combined vs confusion sum).
    void gradient_weighted(const std::vector<double>& x, std::vector<double>& g, double wd,
                           double wa) const {
        g.assign(dim(), 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            const double p1 = x[l], p2 = x[L + l];
            if (modes.modes[l] == RelayMode::DF) {
                const double alpha = x[2 * L + l];
                const double abar = 1.0 - alpha;
                const double s1 = coherent_sqrt(abar, s.rho1, p1 * p2);
                const double s2 = coherent_sqrt(abar, s.rho2, p1 * p2);
                const double u = (p1 + s.rho1 * p2 + 2.0 * s1) / s.sigma2_dest;
                const double v = (p1 + s.rho2 * p2 + 2.0 * s2) / s.sigma2_eve;
                const double w = alpha * p1 / s.sigma2_relay;
                const double cu = cap_slope(u), cv = cap_slope(v), cw = cap_slope(w);
                const double dv_p1 = (1.0 + 2.0 * sqrt_partial(abar * s.rho2 * p2, s2)) / s.sigma2_eve;
                const double dv_p2 = (s.rho2 + 2.0 * sqrt_partial(abar * s.rho2 * p1, s2)) / s.sigma2_eve;
                const double dv_al = -2.0 * sqrt_partial(s.rho2 * p1 * p2, s2) / s.sigma2_eve;
                if (cap(u) - cap(v) >= 0.0 && wd > 0.0) {
                    const double du_p1 =
                        (1.0 + 2.0 * sqrt_partial(abar * s.rho1 * p2, s1)) / s.sigma2_dest;
                    const double du_p2 =
                        (s.rho1 + 2.0 * sqrt_partial(abar * s.rho1 * p1, s1)) / s.sigma2_dest;
                    const double du_al = -2.0 * sqrt_partial(s.rho1 * p1 * p2, s1) / s.sigma2_dest;
                    g[l] += wd * (cu * du_p1 - cv * dv_p1);
                    g[L + l] += wd * (cu * du_p2 - cv * dv_p2);
                    g[2 * L + l] += wd * (cu * du_al - cv * dv_al);
                }
                if (cap(w) - cap(v) >= 0.0 && wd < 1.0) {
                    const double wr = 1.0 - wd;
                    g[l] += wr * (cw * alpha / s.sigma2_relay - cv * dv_p1);
                    g[L + l] += wr * (-cv * dv_p2);
                    g[2 * L + l] += wr * (cw * p1 / s.sigma2_relay - cv * dv_al);
                }
            } else {
                const double a1 = (p1 + s.rho1 * p2) / s.sigma2_dest;
                const double a2 = (p1 + s.rho2 * p2) / s.sigma2_eve;
                const double b1 = p1 / s.sigma2_dest;
                const double b2 = s.rho2 * p2 / s.sigma2_eve;
                const double ca2 = cap_slope(a2);
                if (cap(a1) - cap(a2) >= 0.0 && wa > 0.0) {
                    const double ca1 = cap_slope(a1);
                    g[l] += wa * (ca1 / s.sigma2_dest - ca2 / s.sigma2_eve);
                    g[L + l] += wa * (ca1 * s.rho1 / s.sigma2_dest - ca2 * s.rho2 / s.sigma2_eve);
                }
                if (cap(b1) + cap(b2) - cap(a2) >= 0.0 && wa < 1.0) {
                    const double wb = 1.0 - wa;
                    g[l] += wb * (cap_slope(b1) / s.sigma2_dest - ca2 / s.sigma2_eve);
                    g[L + l] += wb * ((cap_slope(b2) - ca2) * s.rho2 / s.sigma2_eve);
                }
            }
        }
    }

    std::vector<double> start(int k, std::uint64_t seed) const {
        std::vector<double> x(dim(), 0.0);
        for (std::size_t l = 0; l < L; ++l) x[2 * L + l] = 1.0;
        if (structured_start(k, L, budget, x)) return x;
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        dirichlet_fill(rng, x, 0, L, budget.p1_total);
        dirichlet_fill(rng, x, L, L, budget.p2_total);
        for (std::size_t l = 0; l < L; ++l) x[2 * L + l] = uniform_open(rng);
        return x;
    }

    Allocation unpack(const std::vector<double>& x) const {
        Allocation a;
        a.p1.assign(x.begin(), x.begin() + L);
        a.p2.assign(x.begin() + L, x.begin() + 2 * L);
        a.alpha.assign(x.begin() + 2 * L, x.begin() + 3 * L);
        a.psi.assign(L, 0.0);
        return a;
    }
};

struct UpperObjective {
    const ParallelChannel& channel;
    PowerBudget budget;
    std::size_t L;

    UpperObjective(const ParallelChannel& c, const PowerBudget& b)
        : channel(c), budget(b), L(c.size()) {}

    std::size_t dim() const { return 3 * L; }

    static std::vector<double> extra_grid() { return {-1.0, -0.5, 0.0, 0.5, 1.0}; }

    // For fixed powers the psi-derivative of each summand has constant sign,
    // so only the endpoints matter.
    bool stall_probe(std::vector<double>& x, double& f) const {
        return probe_kink_faces(*this, x, f, true, {-1.0, 1.0});
    }

    double coord_scale(std::size_t i) const {
        if (i < L) return std::max(1.0, budget.p1_total / static_cast<double>(L));
        if (i < 2 * L) return std::max(1.0, budget.p2_total / static_cast<double>(L));
        return 1.0;
    }

    void project(std::vector<double>& x) const {
        project_power_block(x, 0, L, budget.p1_total);
        project_power_block(x, L, L, budget.p2_total);
        for (std::size_t l = 0; l < L; ++l) x[2 * L + l] = std::clamp(x[2 * L + l], -1.0, 1.0);
    }

    bool feasible(const std::vector<double>&) const { return true; }
    void make_feasible(std::vector<double>&) const {}

    double value(const std::vector<double>& x) const {
        double total = 0.0;
        for (std::size_t l = 0; l < L; ++l)
            total += upper_term(channel.subchannels[l], x[l], x[L + l], x[2 * L + l]);
        return total;
    }

    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
        g.assign(dim(), 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            const double p1 = x[l], p2 = x[L + l], psi = x[2 * L + l];
            const double s1 = coherent_sqrt(s.rho1, p1, p2);
            const double s2 = coherent_sqrt(s.rho2, p1, p2);
            const double u = (p1 + s.rho1 * p2 + 2.0 * psi * s1) / s.sigma2_dest;
            const double w = (p1 + s.rho2 * p2 + 2.0 * psi * s2) / s.sigma2_eve;
            const double cu = cap_slope(u), cw = cap_slope(w);
            g[l] = cu * (1.0 + 2.0 * psi * sqrt_partial(s.rho1 * p2, s1)) / s.sigma2_dest -
                   cw * (1.0 + 2.0 * psi * sqrt_partial(s.rho2 * p2, s2)) / s.sigma2_eve;
            g[L + l] = cu * (s.rho1 + 2.0 * psi * sqrt_partial(s.rho1 * p1, s1)) / s.sigma2_dest -
                       cw * (s.rho2 + 2.0 * psi * sqrt_partial(s.rho2 * p1, s2)) / s.sigma2_eve;
            g[2 * L + l] = cu * 2.0 * s1 / s.sigma2_dest - cw * 2.0 * s2 / s.sigma2_eve;
        }
    }

    std::vector<double> start(int k, std::uint64_t seed) const {
        std::vector<double> x(dim(), 0.0);
        if (structured_start(k, L, budget, x)) return x;
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        dirichlet_fill(rng, x, 0, L, budget.p1_total);
        dirichlet_fill(rng, x, L, L, budget.p2_total);
        for (std::size_t l = 0; l < L; ++l) x[2 * L + l] = uniform_in(rng, -1.0, 1.0);
        return x;
    }

    Allocation unpack(const std::vector<double>& x) const {
        Allocation a;
        a.p1.assign(x.begin(), x.begin() + L);
        a.p2.assign(x.begin() + L, x.begin() + 2 * L);
        a.alpha.assign(L, 1.0);
        a.psi.assign(x.begin() + 2 * L, x.begin() + 3 * L);
        return a;
    }
};

// For fixed powers each upper summand is monotone in psi (the stationarity
// condition is psi-free), so the optimum sits at an endpoint. This objective
// searches powers only and evaluates the endpoint envelope exactly, which
// removes the joint power/correlation basins from the search space.
struct UpperEnvelopeObjective {
    const ParallelChannel& channel;
    PowerBudget budget;
    std::size_t L;

    UpperEnvelopeObjective(const ParallelChannel& c, const PowerBudget& b)
        : channel(c), budget(b), L(c.size()) {}

    std::size_t dim() const { return 2 * L; }

    static std::vector<double> extra_grid() { return {}; }

    bool stall_probe(std::vector<double>& x, double& f) const {
        return probe_kink_faces(*this, x, f, false, {});
    }

    double coord_scale(std::size_t i) const {
        if (i < L) return std::max(1.0, budget.p1_total / static_cast<double>(L));
        return std::max(1.0, budget.p2_total / static_cast<double>(L));
    }

    void project(std::vector<double>& x) const {
        project_power_block(x, 0, L, budget.p1_total);
        project_power_block(x, L, L, budget.p2_total);
    }

    bool feasible(const std::vector<double>&) const { return true; }
    void make_feasible(std::vector<double>&) const {}

    double best_psi(std::size_t l, double p1, double p2) const {
        const auto& s = channel.subchannels[l];
        return upper_term(s, p1, p2, 1.0) >= upper_term(s, p1, p2, -1.0) ? 1.0 : -1.0;
    }

    double value(const std::vector<double>& x) const {
        double total = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            total += std::max(upper_term(s, x[l], x[L + l], 1.0),
                              upper_term(s, x[l], x[L + l], -1.0));
        }
        return total;
    }

    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
        g.assign(dim(), 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            const double p1 = x[l], p2 = x[L + l];
            const double psi = best_psi(l, p1, p2);
            const double s1 = coherent_sqrt(s.rho1, p1, p2);
            const double s2 = coherent_sqrt(s.rho2, p1, p2);
            const double u = (p1 + s.rho1 * p2 + 2.0 * psi * s1) / s.sigma2_dest;
            const double w = (p1 + s.rho2 * p2 + 2.0 * psi * s2) / s.sigma2_eve;
            const double cu = cap_slope(u), cw = cap_slope(w);
            g[l] = cu * (1.0 + 2.0 * psi * sqrt_partial(s.rho1 * p2, s1)) / s.sigma2_dest -
                   cw * (1.0 + 2.0 * psi * sqrt_partial(s.rho2 * p2, s2)) / s.sigma2_eve;
            g[L + l] = cu * (s.rho1 + 2.0 * psi * sqrt_partial(s.rho1 * p1, s1)) / s.sigma2_dest -
                       cw * (s.rho2 + 2.0 * psi * sqrt_partial(s.rho2 * p1, s2)) / s.sigma2_eve;
        }
    }

    std::vector<double> start(int k, std::uint64_t seed) const {
        std::vector<double> x(dim(), 0.0);
        if (structured_start(k, L, budget, x)) return x;
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        dirichlet_fill(rng, x, 0, L, budget.p1_total);
        dirichlet_fill(rng, x, L, L, budget.p2_total);
        return x;
    }

    Allocation unpack(const std::vector<double>& x) const {
        Allocation a;
        a.p1.assign(x.begin(), x.begin() + L);
        a.p2.assign(x.begin() + L, x.begin() + 2 * L);
        a.alpha.assign(L, 1.0);
        a.psi.resize(L);
        for (std::size_t l = 0; l < L; ++l) a.psi[l] = best_psi(l, x[l], x[L + l]);
        return a;
    }
};

struct DeafObjective {
    const ParallelChannel& channel;
    PowerBudget budget;
    bool require_condition;
    std::size_t L;

    DeafObjective(const ParallelChannel& c, const PowerBudget& b, bool require_cond)
        : channel(c), budget(b), require_condition(require_cond), L(c.size()) {}

    std::size_t dim() const { return 2 * L; }

    static std::vector<double> extra_grid() { return {}; }

    bool stall_probe(std::vector<double>& x, double& f) const {
        return probe_kink_faces(*this, x, f, false, {});
    }

    double coord_scale(std::size_t i) const {
        if (i < L) return std::max(1.0, budget.p1_total / static_cast<double>(L));
        return std::max(1.0, budget.p2_total / static_cast<double>(L));
    }

    void project(std::vector<double>& x) const {
        project_power_block(x, 0, L, budget.p1_total);
        project_power_block(x, L, L, budget.p2_total);
    }

    bool feasible(const std::vector<double>& x) const {
        if (!require_condition) return true;
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            lhs += cap(s.rho1 * x[L + l] / (x[l] + s.sigma2_dest));
            rhs += cap(s.rho2 * x[L + l] / s.sigma2_eve);
        }
        return lhs >= rhs;
    }

    // Shrinks the relay powers toward zero until the jamming-visibility
    // condition holds; p2 = 0 always satisfies it with equality.
    void make_feasible(std::vector<double>& x) const {
        if (!require_condition || feasible(x)) return;
        for (int halvings = 0; halvings < 80; ++halvings) {
            for (std::size_t l = 0; l < L; ++l) x[L + l] *= 0.5;
            if (feasible(x)) return;
        }
        for (std::size_t l = 0; l < L; ++l) x[L + l] = 0.0;
    }

    double value(const std::vector<double>& x) const {
        double total = 0.0;
        for (std::size_t l = 0; l < L; ++l)
            total += deaf_term(channel.subchannels[l], x[l], x[L + l]);
        return total;
    }

    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
        g.assign(dim(), 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            const double p1 = x[l], p2 = x[L + l];
            const double den = s.sigma2_eve + s.rho2 * p2;
            const double a = p1 / s.sigma2_dest;
            const double b = p1 / den;
            g[l] = cap_slope(a) / s.sigma2_dest - cap_slope(b) / den;
            g[L + l] = cap_slope(b) * p1 * s.rho2 / (den * den);
        }
    }

    std::vector<double> start(int k, std::uint64_t seed) const {
        std::vector<double> x(dim(), 0.0);
        if (structured_start(k, L, budget, x)) return x;
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        dirichlet_fill(rng, x, 0, L, budget.p1_total);
        dirichlet_fill(rng, x, L, L, budget.p2_total);
        return x;
    }

    Allocation unpack(const std::vector<double>& x) const {
        Allocation a;
        a.p1.assign(x.begin(), x.begin() + L);
        a.p2.assign(x.begin() + L, x.begin() + 2 * L);
        a.alpha.assign(L, 1.0);
        a.psi.assign(L, 0.0);
        return a;
    }
};


struct AscentOutcome {
    std::vector<double> x;
    double value = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

template <typename Obj>
AscentOutcome projected_ascent(const Obj& obj, std::vector<double> x, const SolverOptions& opt) {
    obj.project(x);
    obj.make_feasible(x);
    double f = obj.value(x);
    double step = opt.step_init;
    const double step_min = 1e-16;
    const double step_max = opt.step_init * 4096.0;
    std::vector<double> g(obj.dim()), trial(obj.dim());
    AscentOutcome out;
    int probes_left = static_cast<int>(4 + 2 * obj.dim());
    int it = 0;
    for (; it < opt.max_iters; ++it) {
        obj.gradient(x, g);
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax == 0.0) {
            // Flat plateau (every bracket clamped): only a probe can move.
            if (probes_left == 0 || !obj.stall_probe(x, f)) {
                out.converged = true;
                break;
            }
            --probes_left;
            continue;
        }
        bool improved = false;
        double move = 0.0;
        while (step > step_min) {
            for (std::size_t i = 0; i < x.size(); ++i)
                trial[i] = x[i] + step * obj.coord_scale(i) * g[i];
            obj.project(trial);
            if (obj.feasible(trial)) {
                const double ft = obj.value(trial);
                if (ft > f) {
                    for (std::size_t i = 0; i < x.size(); ++i)
                        move = std::max(move, std::abs(trial[i] - x[i]));
                    x.swap(trial);
                    f = ft;
                    improved = true;
                    step = std::min(step * 2.0, step_max);
                    break;
                }
            }
            step *= 0.5;
        }
        if (!improved) {
            if (probes_left == 0 || !obj.stall_probe(x, f)) {
                out.converged = true;
                break;
            }
            --probes_left;
            step = opt.step_init;
            continue;
        }
        double xmax = 0.0;
        for (double v : x) xmax = std::max(xmax, std::abs(v));
        if (move <= opt.tol * (1.0 + xmax)) {
            if (probes_left == 0 || !obj.stall_probe(x, f)) {
                out.converged = true;
                ++it;
                break;
            }
            --probes_left;
            step = opt.step_init;
        }
    }
    out.x = std::move(x);
    out.value = f;
    out.iterations = it;
    return out;
}

// A coarse lattice scan over the full variable block. The best few cells
// that are well separated on the power lattice seed additional ascents:
// gradient steps cannot cross the square-root kinks on the p = 0 faces and
// stall on curved min-ties, so interior-seeded starts alone miss basins.
template <typename Obj>
std::vector<std::vector<double>> lattice_seeds(const Obj& obj) {
    const std::size_t L = obj.L;
    if (L > 2) return {};
    const int r = 17;
    const auto tuples = enumerate_tuples(L, r);
    const auto g1 = power_grid(obj.budget.p1_total, r);
    const auto g2 = power_grid(obj.budget.p2_total, r);
    const std::vector<double> extras = Obj::extra_grid();
    const std::size_t n = tuples.count();
    const std::size_t ecombos =
        extras.empty() ? 1 : static_cast<std::size_t>(std::pow(extras.size(), L));

    std::vector<double> values(n * n * ecombos, -std::numeric_limits<double>::infinity());
    std::vector<double> x(obj.dim(), 0.0);
    std::vector<std::size_t> eidx(L, 0);
    for (std::size_t c1 = 0; c1 < n; ++c1) {
        for (std::size_t c2 = 0; c2 < n; ++c2) {
            for (std::size_t l = 0; l < L; ++l) {
                x[l] = g1[tuples.tuple(c1)[l]];
                x[L + l] = g2[tuples.tuple(c2)[l]];
            }
            std::fill(eidx.begin(), eidx.end(), 0);
            for (std::size_t e = 0; e < ecombos; ++e) {
                if (!extras.empty())
                    for (std::size_t l = 0; l < L; ++l) x[2 * L + l] = extras[eidx[l]];
                if (obj.feasible(x)) values[(c1 * n + c2) * ecombos + e] = obj.value(x);
                std::size_t pos = 0;
                while (pos < L && ++eidx[pos] == extras.size()) eidx[pos++] = 0;
            }
        }
    }

    // Greedy selection of up to six cells, each at Chebyshev distance >= 2
    // from the earlier picks on the power index lattice.
    auto tuple_distance = [&](std::size_t a1, std::size_t a2, std::size_t b1, std::size_t b2) {
        int dist = 0;
        for (std::size_t l = 0; l < L; ++l) {
            dist = std::max(dist, std::abs(int(tuples.tuple(a1)[l]) - int(tuples.tuple(b1)[l])));
            dist = std::max(dist, std::abs(int(tuples.tuple(a2)[l]) - int(tuples.tuple(b2)[l])));
        }
        return dist;
    };
    std::vector<std::vector<double>> seeds;
    std::vector<std::pair<std::size_t, std::size_t>> picked;
    for (int pick = 0; pick < 6; ++pick) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t bc1 = 0, bc2 = 0, be = 0;
        bool found = false;
        for (std::size_t c1 = 0; c1 < n; ++c1) {
            for (std::size_t c2 = 0; c2 < n; ++c2) {
                bool spaced = true;
                for (const auto& pk : picked)
                    if (tuple_distance(c1, c2, pk.first, pk.second) < 2) {
                        spaced = false;
                        break;
                    }
                if (!spaced) continue;
                for (std::size_t e = 0; e < ecombos; ++e) {
                    const double v = values[(c1 * n + c2) * ecombos + e];
                    if (v > best) {
                        best = v;
                        bc1 = c1;
                        bc2 = c2;
                        be = e;
                        found = true;
                    }
                }
            }
        }
        if (!found || best == -std::numeric_limits<double>::infinity()) break;
        picked.emplace_back(bc1, bc2);
        std::vector<double> seed(obj.dim(), 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            seed[l] = g1[tuples.tuple(bc1)[l]];
            seed[L + l] = g2[tuples.tuple(bc2)[l]];
        }
        if (!extras.empty()) {
            std::size_t e = be;
            for (std::size_t l = 0; l < L; ++l) {
                seed[2 * L + l] = extras[e % extras.size()];
                e /= extras.size();
            }
        }
        seeds.push_back(std::move(seed));
    }
    return seeds;
}

template <typename Obj>
BoundResult run_multistart(const Obj& obj, const SolverOptions& opt) {
    validate_options(opt);
    const int n = opt.n_starts;
    std::vector<AscentOutcome> outs(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
        outs[k] = projected_ascent(obj, obj.start(static_cast<int>(k), opt.seed), opt);
    });
    for (auto& seed_x : lattice_seeds(obj))
        outs.push_back(projected_ascent(obj, std::move(seed_x), opt));
    std::size_t best = 0;
    int total_iters = 0;
    for (std::size_t k = 0; k < outs.size(); ++k) {
        total_iters += outs[k].iterations;
        if (outs[k].value > outs[best].value) best = k;
    }
    BoundResult r;
    r.value = outs[best].value;
    r.allocation = obj.unpack(outs[best].x);
    r.diagnostics.iterations = total_iters;
    r.diagnostics.starts_tried = n;
    r.diagnostics.best_start = static_cast<int>(best);
    r.diagnostics.converged = outs[best].converged;
    return r;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Public solvers
// ---------------------------------------------------------------------------

/// Maximizes the DF/NF achievable rate over {p1, p2, alpha on DF channels}.
/// The uniform allocation is always start 0, so the result never falls below
/// the uniform-allocation rate.
inline BoundResult maximize_lower(const ParallelChannel& channel, const PowerBudget& budget,
                                  const ModeAssignment& modes, const SolverOptions& options = {}) {
    validate_channel(channel);
    validate_budget(budget);
    validate_modes(modes, channel.size());
    detail::LowerObjective obj(channel, budget, modes);
    BoundResult r = detail::run_multistart(obj, options);
    r.modes = modes;
    return r;
}

/// Maximizes the Gaussian upper bound over {p1, p2, psi}. The reported value
/// is clamped at zero (zero secrecy rate is always achievable), in which case
/// the zero allocation is returned as the maximizer.
inline BoundResult maximize_upper(const ParallelChannel& channel, const PowerBudget& budget,
                                  const SolverOptions& options = {}) {
    validate_channel(channel);
    validate_budget(budget);
    detail::UpperEnvelopeObjective obj(channel, budget);
    BoundResult r = detail::run_multistart(obj, options);
    if (r.value < 0.0) {
        r.value = 0.0;
        r.allocation = zero_allocation(channel.size());
    }
    return r;
}

/// Maximizes the relay-deaf bound over {p1, p2}. With require_condition the
/// search is restricted to allocations whose jamming is at least as visible
/// to the destination as to the eavesdropper; if nothing positive is
/// feasible there, the result is 0 with the uniform allocation and the
/// condition_binding diagnostic set.
inline BoundResult maximize_deaf(const ParallelChannel& channel, const PowerBudget& budget,
                                 const SolverOptions& options = {}, bool require_condition = false) {
    validate_channel(channel);
    validate_budget(budget);
    detail::DeafObjective obj(channel, budget, require_condition);
    BoundResult r = detail::run_multistart(obj, options);
    if (require_condition && r.value <= 0.0) {
        r.value = 0.0;
        r.allocation = uniform_allocation(channel, budget);
        r.diagnostics.condition_binding = true;
    } else if (r.value < 0.0) {
        r.value = 0.0;
        r.allocation = zero_allocation(channel.size());
    }
    return r;
}

struct CapacityDetection {
    std::optional<double> capacity;
    Allocation certificate;
};

/// Runs the unconstrained relay-deaf maximization; when its maximizer also
/// satisfies the jamming-visibility condition (within a small relative
/// slack), upper and lower bound coincide and the value is the secrecy
/// capacity of the relay-deaf channel.
inline CapacityDetection detect_deaf_capacity(const ParallelChannel& channel,
                                              const PowerBudget& budget,
                                              const SolverOptions& options = {}) {
    BoundResult r = maximize_deaf(channel, budget, options, false);
    CapacityDetection d;
    d.certificate = r.allocation;
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t l = 0; l < channel.size(); ++l) {
        const auto& s = channel.subchannels[l];
        lhs += cap(s.rho1 * r.allocation.p2[l] / (r.allocation.p1[l] + s.sigma2_dest));
        rhs += cap(s.rho2 * r.allocation.p2[l] / s.sigma2_eve);
    }
    if (lhs >= rhs - 1e-9 * std::max(1.0, rhs)) d.capacity = r.value;
    return d;
}

// ---------------------------------------------------------------------------
// Grid oracle: exhaustive search over the power lattice
//   p_l = k_l * P / (r-1),  sum_l k_l <= r-1   (exact in index arithmetic),
// with the inner alpha / psi variables handled exactly per subchannel.
// For the lower bound the coupled DF min-of-sums is maximized over the alpha
// lattice through Pareto fronts of per-subchannel (dest, relay) pairs, which
// is equivalent to scanning every alpha tuple.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double oracle_point_budget = 1e8;

// Pareto-maximal subset of (d, r) pairs, sorted by d ascending / r
// descending. Dominated points can never improve a max-min of sums.
struct ParetoFront {
    std::vector<std::pair<double, double>> pts;
};

inline ParetoFront pareto_prune(std::vector<std::pair<double, double>> pts) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
    });
    ParetoFront f;
    double best_r = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        if (p.second > best_r) {
            f.pts.push_back(p);
            best_r = p.second;
        }
    }
    std::reverse(f.pts.begin(), f.pts.end());
    return f;
}

inline ParetoFront merge_fronts(const ParetoFront& a, const ParetoFront& b) {
    std::vector<std::pair<double, double>> sums;
    sums.reserve(a.pts.size() * b.pts.size());
    for (const auto& x : a.pts)
        for (const auto& y : b.pts) sums.emplace_back(x.first + y.first, x.second + y.second);
    return pareto_prune(std::move(sums));
}

// max over (x in F, y in G) of min(x.d + y.d, x.r + y.r). Both fronts are
// monotone, so for each x the min is unimodal over G and the crossing index
// moves monotonically with x.
inline double front_maxmin(const ParetoFront& F, const ParetoFront& G) {
    double best = -std::numeric_limits<double>::infinity();
    const std::size_t n = G.pts.size();
    std::size_t jstar = n; // first index where the d-sum overtakes the r-sum
    for (const auto& x : F.pts) {
        auto diff = [&](std::size_t j) {
            return (x.first + G.pts[j].first) - (x.second + G.pts[j].second);
        };
        while (jstar > 0 && diff(jstar - 1) >= 0.0) --jstar;
        const std::size_t candidates[2] = {jstar > 0 ? jstar - 1 : 0, jstar < n ? jstar : n - 1};
        for (std::size_t c : candidates) {
            const double v = std::min(x.first + G.pts[c].first, x.second + G.pts[c].second);
            best = std::max(best, v);
        }
    }
    return best;
}

// psi lattice for the upper-bound oracle: the uniform grid plus +-sqrt of
// the alpha grid, so every coherent DF allocation of the lower bound has an
// exactly matching correlation on the upper side.
inline std::vector<double> psi_grid(int r) {
    std::vector<double> g;
    g.reserve(3 * static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i)
        g.push_back(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(r - 1));
    for (int i = 0; i < r; ++i)
        g.push_back(std::sqrt(static_cast<double>(i) / static_cast<double>(r - 1)));
    for (int i = 0; i < r; ++i)
        g.push_back(-std::sqrt(static_cast<double>(i) / static_cast<double>(r - 1)));
    return g;
}

inline void check_oracle_size(std::size_t n1, std::size_t n2) {
    const double points = static_cast<double>(n1) * static_cast<double>(n2);
    if (points > oracle_point_budget)
        throw size_error("grid oracle: " + std::to_string(points) +
                         " power-lattice points exceed the 1e8 budget");
}

struct OracleBest {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t c1 = 0, c2 = 0;
};

// Scans all (p1-tuple, p2-tuple) combinations with a per-combination value
// functor; deterministic tie-break on the lowest combination index.
template <typename Eval>
OracleBest oracle_scan(std::size_t n1, std::size_t n2, Eval&& eval, bool parallel_ok = true) {
    const unsigned workers =
        parallel_ok ? static_cast<unsigned>(std::min<std::size_t>(thread_count(), n1)) : 1u;
    std::vector<OracleBest> partial(std::max(1u, workers));
    auto body = [&](std::size_t w, std::size_t stride) {
        OracleBest local;
        // Each worker scans its rows in increasing order, so keeping the
        // first maximum preserves the lowest-index tie-break.
        for (std::size_t i1 = w; i1 < n1; i1 += stride) {
            for (std::size_t i2 = 0; i2 < n2; ++i2) {
                const double v = eval(i1, i2);
                if (v > local.value) local = {v, i1, i2};
            }
        }
        partial[w] = local;
    };
    if (workers <= 1) {
        body(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w, workers);
        for (auto& t : pool) t.join();
    }
    OracleBest best = partial[0];
    for (std::size_t w = 1; w < partial.size(); ++w) {
        const auto& p = partial[w];
        if (p.value > best.value ||
            (p.value == best.value && (p.c1 < best.c1 || (p.c1 == best.c1 && p.c2 < best.c2))))
            best = p;
    }
    return best;
}

} // namespace detail

/// Exhaustive lattice maximization of the DF/NF lower bound.
inline BoundResult grid_oracle_lower(const ParallelChannel& channel, const PowerBudget& budget,
                                     const ModeAssignment& modes, int resolution) {
    validate_channel(channel);
    validate_budget(budget);
    validate_modes(modes, channel.size());
    detail::require(resolution >= 2, "grid_resolution must be >= 2");
    const std::size_t L = channel.size();
    const int r = resolution;
    const auto g1 = detail::power_grid(budget.p1_total, r);
    const auto g2 = detail::power_grid(budget.p2_total, r);
    const auto tuples = detail::enumerate_tuples(L, r);
    const std::size_t n = tuples.count();
    detail::check_oracle_size(n, n);

    std::vector<std::size_t> df, nf;
    for (std::size_t l = 0; l < L; ++l)
        (modes.modes[l] == RelayMode::DF ? df : nf).push_back(l);
    if (df.size() > 3 && n * n > 100000)
        throw size_error("grid oracle: more than 3 DF subchannels at this lattice size");

    const std::size_t cells = static_cast<std::size_t>(r) * static_cast<std::size_t>(r);
    // Per-subchannel tables over (i1, i2) lattice cells.
    std::vector<std::vector<double>> nfA(L), nfB(L);
    std::vector<std::vector<detail::ParetoFront>> fronts(L);
    std::vector<std::vector<double>> df_single(L); // max-min over alpha, |DF| = 1 shortcut
    for (std::size_t l = 0; l < L; ++l) {
        const auto& s = channel.subchannels[l];
        if (modes.modes[l] == RelayMode::NF) {
            nfA[l].resize(cells);
            nfB[l].resize(cells);
            for (int i1 = 0; i1 < r; ++i1)
                for (int i2 = 0; i2 < r; ++i2) {
                    const std::size_t key = static_cast<std::size_t>(i1) * r + i2;
                    nfA[l][key] = pos(detail::nf_a_raw(s, g1[i1], g2[i2]));
                    nfB[l][key] = pos(detail::nf_b_raw(s, g1[i1], g2[i2]));
                }
        } else {
            fronts[l].resize(cells);
            df_single[l].resize(cells);
            std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(r));
            for (int i1 = 0; i1 < r; ++i1)
                for (int i2 = 0; i2 < r; ++i2) {
                    const std::size_t key = static_cast<std::size_t>(i1) * r + i2;
                    double best_mm = 0.0;
                    for (int j = 0; j < r; ++j) {
                        const double alpha = static_cast<double>(j) / static_cast<double>(r - 1);
                        const double d = pos(detail::df_dest_raw(s, g1[i1], g2[i2], alpha));
                        const double rr = pos(detail::df_relay_raw(s, g1[i1], g2[i2], alpha));
                        pts[static_cast<std::size_t>(j)] = {d, rr};
                        best_mm = std::max(best_mm, std::min(d, rr));
                    }
                    fronts[l][key] = detail::pareto_prune(pts);
                    df_single[l][key] = best_mm;
                }
        }
    }

    // Memoized merge of the fronts of all DF channels but the last, keyed by
    // their power indices (only needed when |DF| >= 3).
    std::unordered_map<std::uint64_t, detail::ParetoFront> prefix_memo;
    const bool need_prefix = df.size() >= 3;
    auto prefix_key = [&](const std::uint16_t* t1, const std::uint16_t* t2) {
        std::uint64_t key = 0;
        for (std::size_t m = 0; m + 1 < df.size(); ++m) {
            key = key * static_cast<std::uint64_t>(r) + t1[df[m]];
            key = key * static_cast<std::uint64_t>(r) + t2[df[m]];
        }
        return key;
    };
    if (need_prefix) {
        // Precompute serially so the combo scan can stay read-only.
        auto rec = [&](auto&& self, std::size_t m, int rem1, int rem2, std::uint64_t key,
                       detail::ParetoFront acc) -> void {
            if (m + 1 == df.size()) {
                prefix_memo.emplace(key, std::move(acc));
                return;
            }
            const std::size_t l = df[m];
            for (int i1 = 0; i1 <= rem1; ++i1)
                for (int i2 = 0; i2 <= rem2; ++i2) {
                    const std::uint64_t k2 =
                        (key * static_cast<std::uint64_t>(r) + static_cast<std::uint64_t>(i1)) *
                            static_cast<std::uint64_t>(r) +
                        static_cast<std::uint64_t>(i2);
                    const auto& f = fronts[l][static_cast<std::size_t>(i1) * r + i2];
                    self(self, m + 1, rem1 - i1, rem2 - i2, k2,
                         m == 0 ? f : detail::merge_fronts(acc, f));
                }
        };
        rec(rec, 0, r - 1, r - 1, 0, detail::ParetoFront{});
    }

    auto eval = [&](std::size_t c1, std::size_t c2) {
        const std::uint16_t* t1 = tuples.tuple(c1);
        const std::uint16_t* t2 = tuples.tuple(c2);
        double sa = 0.0, sb = 0.0;
        for (std::size_t l : nf) {
            const std::size_t key = static_cast<std::size_t>(t1[l]) * r + t2[l];
            sa += nfA[l][key];
            sb += nfB[l][key];
        }
        double value = std::min(sa, sb);
        if (!df.empty()) {
            if (df.size() == 1) {
                const std::size_t l = df[0];
                value += df_single[l][static_cast<std::size_t>(t1[l]) * r + t2[l]];
            } else if (df.size() == 2) {
                const std::size_t la = df[0], lb = df[1];
                value += detail::front_maxmin(
                    fronts[la][static_cast<std::size_t>(t1[la]) * r + t2[la]],
                    fronts[lb][static_cast<std::size_t>(t1[lb]) * r + t2[lb]]);
            } else {
                const std::size_t lz = df.back();
                const auto it = prefix_memo.find(prefix_key(t1, t2));
                value += detail::front_maxmin(
                    it->second, fronts[lz][static_cast<std::size_t>(t1[lz]) * r + t2[lz]]);
            }
        }
        return value;
    };
    const detail::OracleBest best = detail::oracle_scan(n, n, eval);

    // Reconstruct the winning allocation; alpha on the DF channels is
    // recovered by re-scanning the alpha lattice at the winning powers.
    BoundResult res;
    res.modes = modes;
    res.allocation = zero_allocation(L);
    const std::uint16_t* t1 = tuples.tuple(best.c1);
    const std::uint16_t* t2 = tuples.tuple(best.c2);
    for (std::size_t l = 0; l < L; ++l) {
        res.allocation.p1[l] = g1[t1[l]];
        res.allocation.p2[l] = g2[t2[l]];
    }
    if (!df.empty()) {
        std::vector<std::vector<std::pair<double, double>>> dr(df.size());
        for (std::size_t m = 0; m < df.size(); ++m) {
            const std::size_t l = df[m];
            const auto& s = channel.subchannels[l];
            dr[m].resize(static_cast<std::size_t>(r));
            for (int j = 0; j < r; ++j) {
                const double alpha = static_cast<double>(j) / static_cast<double>(r - 1);
                dr[m][static_cast<std::size_t>(j)] = {
                    pos(detail::df_dest_raw(s, res.allocation.p1[l], res.allocation.p2[l], alpha)),
                    pos(detail::df_relay_raw(s, res.allocation.p1[l], res.allocation.p2[l], alpha))};
            }
        }
        std::vector<int> idx(df.size(), 0), best_idx(df.size(), 0);
        double best_df = -std::numeric_limits<double>::infinity();
        while (true) {
            double sd = 0.0, sr = 0.0;
            for (std::size_t m = 0; m < df.size(); ++m) {
                sd += dr[m][static_cast<std::size_t>(idx[m])].first;
                sr += dr[m][static_cast<std::size_t>(idx[m])].second;
            }
            if (std::min(sd, sr) > best_df) {
                best_df = std::min(sd, sr);
                best_idx = idx;
            }
            std::size_t m = 0;
            while (m < df.size() && ++idx[m] == r) idx[m++] = 0;
            if (m == df.size()) break;
        }
        for (std::size_t m = 0; m < df.size(); ++m)
            res.allocation.alpha[df[m]] =
                static_cast<double>(best_idx[m]) / static_cast<double>(r - 1);
    }
    for (std::size_t l : nf) res.allocation.alpha[l] = 1.0;
    res.value = lower_bound_value(channel, modes, res.allocation);
    res.diagnostics.iterations = static_cast<int>(std::min<std::size_t>(n * n, 1u << 30));
    return res;
}

/// Exhaustive lattice maximization of the Gaussian upper bound.
inline BoundResult grid_oracle_upper(const ParallelChannel& channel, const PowerBudget& budget,
                                     int resolution) {
    validate_channel(channel);
    validate_budget(budget);
    detail::require(resolution >= 2, "grid_resolution must be >= 2");
    const std::size_t L = channel.size();
    const int r = resolution;
    const auto g1 = detail::power_grid(budget.p1_total, r);
    const auto g2 = detail::power_grid(budget.p2_total, r);
    const auto psis = detail::psi_grid(r);
    const auto tuples = detail::enumerate_tuples(L, r);
    const std::size_t n = tuples.count();
    detail::check_oracle_size(n, n);

    const std::size_t cells = static_cast<std::size_t>(r) * static_cast<std::size_t>(r);
    std::vector<std::vector<double>> U(L);
    for (std::size_t l = 0; l < L; ++l) {
        U[l].resize(cells);
        const auto& s = channel.subchannels[l];
        for (int i1 = 0; i1 < r; ++i1)
            for (int i2 = 0; i2 < r; ++i2) {
                double best = -std::numeric_limits<double>::infinity();
                for (double psi : psis)
                    best = std::max(best, detail::upper_term(s, g1[i1], g2[i2], psi));
                U[l][static_cast<std::size_t>(i1) * r + i2] = best;
            }
    }
    auto eval = [&](std::size_t c1, std::size_t c2) {
        const std::uint16_t* t1 = tuples.tuple(c1);
        const std::uint16_t* t2 = tuples.tuple(c2);
        double v = 0.0;
        for (std::size_t l = 0; l < L; ++l)
            v += U[l][static_cast<std::size_t>(t1[l]) * r + t2[l]];
        return v;
    };
    const detail::OracleBest best = detail::oracle_scan(n, n, eval);

    BoundResult res;
    res.allocation = zero_allocation(L);
    const std::uint16_t* t1 = tuples.tuple(best.c1);
    const std::uint16_t* t2 = tuples.tuple(best.c2);
    for (std::size_t l = 0; l < L; ++l) {
        res.allocation.p1[l] = g1[t1[l]];
        res.allocation.p2[l] = g2[t2[l]];
        const auto& s = channel.subchannels[l];
        double bv = -std::numeric_limits<double>::infinity();
        for (double psi : psis) {
            const double v = detail::upper_term(s, res.allocation.p1[l], res.allocation.p2[l], psi);
            if (v > bv) {
                bv = v;
                res.allocation.psi[l] = psi;
            }
        }
    }
    res.value = std::max(0.0, upper_bound_value(channel, res.allocation));
    res.diagnostics.iterations = static_cast<int>(std::min<std::size_t>(n * n, 1u << 30));
    return res;
}

/// Exhaustive lattice maximization of the relay-deaf bound, optionally
/// restricted to lattice points satisfying the jamming-visibility condition.
inline BoundResult grid_oracle_deaf(const ParallelChannel& channel, const PowerBudget& budget,
                                    int resolution, bool require_condition = false) {
    validate_channel(channel);
    validate_budget(budget);
    detail::require(resolution >= 2, "grid_resolution must be >= 2");
    const std::size_t L = channel.size();
    const int r = resolution;
    const auto g1 = detail::power_grid(budget.p1_total, r);
    const auto g2 = detail::power_grid(budget.p2_total, r);
    const auto tuples = detail::enumerate_tuples(L, r);
    const std::size_t n = tuples.count();
    detail::check_oracle_size(n, n);

    const std::size_t cells = static_cast<std::size_t>(r) * static_cast<std::size_t>(r);
    std::vector<std::vector<double>> V(L), cond(L);
    for (std::size_t l = 0; l < L; ++l) {
        V[l].resize(cells);
        cond[l].resize(cells);
        const auto& s = channel.subchannels[l];
        for (int i1 = 0; i1 < r; ++i1)
            for (int i2 = 0; i2 < r; ++i2) {
                const std::size_t key = static_cast<std::size_t>(i1) * r + i2;
                V[l][key] = detail::deaf_term(s, g1[i1], g2[i2]);
                cond[l][key] = cap(s.rho1 * g2[i2] / (g1[i1] + s.sigma2_dest)) -
                               cap(s.rho2 * g2[i2] / s.sigma2_eve);
            }
    }
    auto eval = [&](std::size_t c1, std::size_t c2) {
        const std::uint16_t* t1 = tuples.tuple(c1);
        const std::uint16_t* t2 = tuples.tuple(c2);
        double v = 0.0, c = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t key = static_cast<std::size_t>(t1[l]) * r + t2[l];
            v += V[l][key];
            c += cond[l][key];
        }
        if (require_condition && c < 0.0) return -std::numeric_limits<double>::infinity();
        return v;
    };
    const detail::OracleBest best = detail::oracle_scan(n, n, eval);

    BoundResult res;
    res.allocation = zero_allocation(L);
    const std::uint16_t* t1 = tuples.tuple(best.c1);
    const std::uint16_t* t2 = tuples.tuple(best.c2);
    for (std::size_t l = 0; l < L; ++l) {
        res.allocation.p1[l] = g1[t1[l]];
        res.allocation.p2[l] = g2[t2[l]];
    }
    res.value = deaf_bound_value(channel, res.allocation);
    res.diagnostics.iterations = static_cast<int>(std::min<std::size_t>(n * n, 1u << 30));
    return res;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

enum class ObjectiveKind { lower, upper, deaf };

/// Compares the analytic gradient against Richardson-extrapolated central
/// differences at a smooth interior point. Returns the maximum scaled
/// relative error over all coordinates. Throws kink_proximity_error when the
/// point is within `margin` of a positive-part kink, a min switch, or a box
/// edge (where the objective is not differentiable).
inline double finite_diff_check(ObjectiveKind objective, const ParallelChannel& channel,
                                const PowerBudget& budget, const ModeAssignment& modes,
                                const Allocation& point, double margin = 1e-3) {
    validate_channel(channel);
    validate_budget(budget);
    const std::size_t L = channel.size();
    validate_allocation_shape(point, L);
    if (objective == ObjectiveKind::lower) validate_modes(modes, L);

    auto need_interior = [&](double v, double lo, double hi, const char* what) {
        if (v < lo + margin || v > hi - margin)
            throw kink_proximity_error(std::string("finite_diff_check: ") + what +
                                       " within margin of its box edge");
    };
    const double big = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < L; ++l) {
        need_interior(point.p1[l], 0.0, big, "p1");
        need_interior(point.p2[l], 0.0, big, "p2");
    }

    std::vector<double> x;
    std::function<double(const std::vector<double>&)> value;
    std::function<void(const std::vector<double>&, std::vector<double>&)> grad;

    detail::LowerObjective lo(channel, budget, objective == ObjectiveKind::lower
                                                   ? modes
                                                   : ModeAssignment{std::vector<RelayMode>(
                                                         L, RelayMode::NF)});
    detail::UpperObjective up(channel, budget);
    detail::DeafObjective de(channel, budget, false);

    switch (objective) {
    case ObjectiveKind::lower: {
        for (std::size_t l = 0; l < L; ++l)
            if (modes.modes[l] == RelayMode::DF) need_interior(point.alpha[l], 0.0, 1.0, "alpha");
        // Reject points near a positive-part kink or a min switch.
        double sd = 0.0, sr = 0.0, sa = 0.0, sb = 0.0;
        bool have_df = false, have_nf = false;
        for (std::size_t l = 0; l < L; ++l) {
            const auto& s = channel.subchannels[l];
            if (modes.modes[l] == RelayMode::DF) {
                have_df = true;
                const double d = detail::df_dest_raw(s, point.p1[l], point.p2[l], point.alpha[l]);
                const double rr = detail::df_relay_raw(s, point.p1[l], point.p2[l], point.alpha[l]);
                if (std::abs(d) < margin || std::abs(rr) < margin)
                    throw kink_proximity_error("finite_diff_check: DF bracket within margin of 0");
                sd += pos(d);
                sr += pos(rr);
            } else {
                have_nf = true;
                const double a = detail::nf_a_raw(s, point.p1[l], point.p2[l]);
                const double b = detail::nf_b_raw(s, point.p1[l], point.p2[l]);
                if (std::abs(a) < margin || std::abs(b) < margin)
                    throw kink_proximity_error("finite_diff_check: NF bracket within margin of 0");
                sa += pos(a);
                sb += pos(b);
            }
        }
        if (have_df && std::abs(sd - sr) < margin)
            throw kink_proximity_error("finite_diff_check: DF min within margin of a tie");
        if (have_nf && std::abs(sa - sb) < margin)
            throw kink_proximity_error("finite_diff_check: NF min within margin of a tie");
        x.assign(3 * L, 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = point.p1[l];
            x[L + l] = point.p2[l];
            x[2 * L + l] = point.alpha[l];
        }
        value = [&lo](const std::vector<double>& v) { return lo.value(v); };
        grad = [&lo](const std::vector<double>& v, std::vector<double>& g) { lo.gradient(v, g); };
        break;
    }
    case ObjectiveKind::upper: {
        for (std::size_t l = 0; l < L; ++l) need_interior(point.psi[l], -1.0, 1.0, "psi");
        x.assign(3 * L, 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = point.p1[l];
            x[L + l] = point.p2[l];
            x[2 * L + l] = point.psi[l];
        }
        value = [&up](const std::vector<double>& v) { return up.value(v); };
        grad = [&up](const std::vector<double>& v, std::vector<double>& g) { up.gradient(v, g); };
        break;
    }
    case ObjectiveKind::deaf: {
        x.assign(2 * L, 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            x[l] = point.p1[l];
            x[L + l] = point.p2[l];
        }
        value = [&de](const std::vector<double>& v) { return de.value(v); };
        grad = [&de](const std::vector<double>& v, std::vector<double>& g) { de.gradient(v, g); };
        break;
    }
    }

    std::vector<double> analytic;
    grad(x, analytic);
    // For the lower bound, alpha entries of NF subchannels are inert; skip them.
    std::vector<bool> active(x.size(), true);
    if (objective == ObjectiveKind::lower)
        for (std::size_t l = 0; l < L; ++l)
            if (modes.modes[l] == RelayMode::NF) active[2 * L + l] = false;

    double worst = 0.0;
    std::vector<double> xp = x;
    auto central = [&](std::size_t i, double h) {
        xp[i] = x[i] + h;
        const double fp = value(xp);
        xp[i] = x[i] - h;
        const double fm = value(xp);
        xp[i] = x[i];
        return (fp - fm) / (2.0 * h);
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!active[i]) continue;
        const double h1 = 1e-4 * std::max(1.0, std::abs(x[i]));
        const double d1 = central(i, h1);
        const double d2 = central(i, h1 / 10.0);
        const double richardson = (100.0 * d2 - d1) / 99.0;
        const double err = std::abs(richardson - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace secrelay

#endif
