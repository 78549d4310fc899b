#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "secrelay/optim.hpp"

#include "reference_rates.hpp"
#include "test_util.hpp"

using namespace secrelay;
using Catch::Matchers::WithinAbs;

namespace {

// Naive full-lattice enumeration used to validate the structured oracle.
// Loops every budget-feasible power index tuple and every alpha tuple.
double naive_oracle_lower(const ParallelChannel& c, const PowerBudget& b, const ModeAssignment& m,
                          int r) {
    const std::size_t L = c.size();
    const auto tuples = detail::enumerate_tuples(L, r);
    auto grid = [&](double total, int i) { return total * i / double(r - 1); };
    double best = 0.0;
    std::vector<int> aidx(L, 0);
    for (std::size_t c1 = 0; c1 < tuples.count(); ++c1) {
        for (std::size_t c2 = 0; c2 < tuples.count(); ++c2) {
            Allocation a = zero_allocation(L);
            for (std::size_t l = 0; l < L; ++l) {
                a.p1[l] = grid(b.p1_total, tuples.tuple(c1)[l]);
                a.p2[l] = grid(b.p2_total, tuples.tuple(c2)[l]);
            }
            std::fill(aidx.begin(), aidx.end(), 0);
            while (true) {
                for (std::size_t l = 0; l < L; ++l) a.alpha[l] = aidx[l] / double(r - 1);
                best = std::max(best, refr::lower_value(c, m, a));
                std::size_t pos = 0;
                while (pos < L && ++aidx[pos] == r) aidx[pos++] = 0;
                if (pos == L) break;
            }
        }
    }
    return best;
}

double naive_oracle_upper(const ParallelChannel& c, const PowerBudget& b, int r) {
    const std::size_t L = c.size();
    const auto tuples = detail::enumerate_tuples(L, r);
    const auto psis = detail::psi_grid(r);
    auto grid = [&](double total, int i) { return total * i / double(r - 1); };
    double best = 0.0;
    std::vector<std::size_t> pidx(L, 0);
    for (std::size_t c1 = 0; c1 < tuples.count(); ++c1) {
        for (std::size_t c2 = 0; c2 < tuples.count(); ++c2) {
            Allocation a = zero_allocation(L);
            for (std::size_t l = 0; l < L; ++l) {
                a.p1[l] = grid(b.p1_total, tuples.tuple(c1)[l]);
                a.p2[l] = grid(b.p2_total, tuples.tuple(c2)[l]);
            }
            std::fill(pidx.begin(), pidx.end(), 0);
            while (true) {
                for (std::size_t l = 0; l < L; ++l) a.psi[l] = psis[pidx[l]];
                best = std::max(best, refr::upper_value(c, a));
                std::size_t pos = 0;
                while (pos < L && ++pidx[pos] == psis.size()) pidx[pos++] = 0;
                if (pos == L) break;
            }
        }
    }
    return best;
}

} // namespace

TEST_CASE("project_budget worked examples") {
    CHECK(project_budget({0.2, 0.3}, 1.0) == std::vector<double>{0.2, 0.3});
    {
        const auto p = project_budget({2.0, 2.0}, 2.0);
        CHECK_THAT(p[0], WithinAbs(1.0, 1e-12));
        CHECK_THAT(p[1], WithinAbs(1.0, 1e-12));
    }
    {
        const auto p = project_budget({-1.0, 3.0}, 2.0);
        CHECK_THAT(p[0], WithinAbs(0.0, 1e-12));
        CHECK_THAT(p[1], WithinAbs(2.0, 1e-12));
    }
}

TEST_CASE("project_budget is the closest feasible point") {
    testutil::Gen gen(31);
    for (int i = 0; i < 100; ++i) {
        const int L = gen.uni_int(1, 6);
        const double total = gen.uni(0.0, 5.0);
        std::vector<double> raw(L);
        for (auto& v : raw) v = gen.uni(-3.0, 3.0);
        const auto proj = project_budget(raw, total);
        double sum = 0.0;
        for (double v : proj) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum <= total + 1e-9 * std::max(1.0, total));
        auto dist2 = [&](const std::vector<double>& y) {
            double d = 0.0;
            for (int l = 0; l < L; ++l) d += (y[l] - raw[l]) * (y[l] - raw[l]);
            return d;
        };
        const double dp = dist2(proj);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> y(L);
            double s = 0.0;
            for (auto& v : y) {
                v = gen.uni(0.0, 1.0);
                s += v;
            }
            const double scale = s > 0.0 ? gen.uni(0.0, 1.0) * total / s : 0.0;
            for (auto& v : y) v *= scale;
            CHECK(dp <= dist2(y) + 1e-9);
        }
    }
}

TEST_CASE("maximize_lower is zero on symmetric channels") {
    testutil::Gen gen(32);
    SolverOptions opt;
    opt.n_starts = 4;
    opt.max_iters = 100;
    for (int i = 0; i < 5; ++i) {
        const int L = gen.uni_int(1, 3);
        const ParallelChannel c = gen.symmetric_channel(L);
        const auto r = maximize_lower(c, gen.budget(), gen.modes(L), opt);
        CHECK(r.value == 0.0);
    }
}

TEST_CASE("maximize_lower matches the grid oracle on the deaf-eavesdropper NF instance") {
    const ParallelChannel c{{{1, 1, 1, 4, 0}}};
    const PowerBudget b{1.0, 1.0};
    const ModeAssignment m{{RelayMode::NF}};
    SolverOptions opt;
    opt.seed = 5;
    const auto r = maximize_lower(c, b, m, opt);
    const auto oracle = grid_oracle_lower(c, b, m, 201);
    CHECK_THAT(r.value, WithinAbs(oracle.value, 1e-4));
}

TEST_CASE("maximize_lower matches the grid oracle on a mixed-mode instance") {
    testutil::Gen gen(7);
    const ParallelChannel c = gen.channel(2);
    const PowerBudget b = gen.budget();
    const ModeAssignment m{{RelayMode::DF, RelayMode::NF}};
    SolverOptions opt;
    opt.n_starts = 24;
    opt.seed = 7;
    const auto r = maximize_lower(c, b, m, opt);
    const auto oracle = grid_oracle_lower(c, b, m, 101);
    CHECK_THAT(r.value, WithinAbs(oracle.value, 2e-3));
}

TEST_CASE("maximize_upper worked examples") {
    testutil::Gen gen(33);
    {
        const ParallelChannel c = gen.symmetric_channel(2);
        const auto r = maximize_upper(c, gen.budget(), SolverOptions{});
        CHECK(r.value == 0.0);
    }
    {
        // rho2 = 0 makes the eavesdropper term psi-free; the optimum sits at
        // an interior p1 (the grid oracle is the authority for its value).
        const ParallelChannel c{{{1, 1, 1, 4, 0}}};
        const PowerBudget b{1.0, 1.0};
        SolverOptions opt;
        opt.n_starts = 16;
        const auto r = maximize_upper(c, b, opt);
        const auto oracle = grid_oracle_upper(c, b, 201);
        CHECK_THAT(r.value, WithinAbs(oracle.value, 1e-3));
        CHECK(r.value > 1.27); // strictly better than the full-power point C(9)-C(1)
    }
}

TEST_CASE("optimized upper bound dominates optimized lower bound") {
    testutil::Gen gen(34);
    SolverOptions opt;
    opt.n_starts = 12;
    opt.max_iters = 300;
    for (int i = 0; i < 10; ++i) {
        const int L = gen.uni_int(1, 2);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b = gen.budget();
        const ModeAssignment m = gen.modes(L);
        const auto lo = maximize_lower(c, b, m, opt);
        const auto up = maximize_upper(c, b, opt);
        CHECK(up.value >= lo.value - 2e-3);
        const auto olo = grid_oracle_lower(c, b, m, 21);
        const auto oup = grid_oracle_upper(c, b, 21);
        CHECK(oup.value >= olo.value - 1e-9);
    }
}

TEST_CASE("maximize_deaf condition handling") {
    SolverOptions opt;
    opt.n_starts = 8;
    // Condition vacuous when rho2 = 0: both variants coincide exactly.
    {
        const ParallelChannel c{{{1, 1, 2, 1, 0}, {1, 0.5, 2, 2, 0}}};
        const PowerBudget b{2.0, 2.0};
        const auto free_run = maximize_deaf(c, b, opt, false);
        const auto cond_run = maximize_deaf(c, b, opt, true);
        CHECK(free_run.value == cond_run.value);
        CHECK_FALSE(cond_run.diagnostics.condition_binding);
    }
    // Capacity case: unconstrained maximizer already satisfies the condition.
    {
        const ParallelChannel c{{{1, 1, 1, 4, 1}}};
        const PowerBudget b{2.0, 2.0};
        const auto free_run = maximize_deaf(c, b, opt, false);
        const auto cond_run = maximize_deaf(c, b, opt, true);
        CHECK_THAT(free_run.value, WithinAbs(cond_run.value, 1e-6));
        const auto det = detect_deaf_capacity(c, b, opt);
        REQUIRE(det.capacity.has_value());
        CHECK_THAT(*det.capacity, WithinAbs(free_run.value, 1e-12));
        const auto oracle = grid_oracle_deaf(c, b, 101, false);
        CHECK_THAT(free_run.value, WithinAbs(oracle.value, 2e-3));
        CHECK(deaf_condition_holds(c, oracle.allocation));
    }
    // Relay inaudible at the destination: only p2 = 0 is feasible and the
    // value needs a noisier eavesdropper, so the condition binds.
    {
        const ParallelChannel c{{{1, 1, 1, 0, 1}}};
        const PowerBudget b{2.0, 2.0};
        const auto cond_run = maximize_deaf(c, b, opt, true);
        CHECK(cond_run.value == 0.0);
        CHECK(cond_run.diagnostics.condition_binding);
        CHECK(cond_run.allocation.p1 == std::vector<double>{2.0});
        const auto det = detect_deaf_capacity(c, b, opt);
        CHECK_FALSE(det.capacity.has_value());
    }
}

TEST_CASE("detect_deaf_capacity finds capacity when the eavesdropper misses the relay") {
    testutil::Gen gen(35);
    SolverOptions opt;
    opt.n_starts = 8;
    for (int i = 0; i < 5; ++i) {
        const int L = gen.uni_int(1, 3);
        ParallelChannel c = gen.channel(L);
        for (auto& s : c.subchannels) {
            s.rho2 = 0.0;
            s.sigma2_eve = s.sigma2_dest * gen.uni(1.5, 4.0);
        }
        const auto det = detect_deaf_capacity(c, gen.budget(), opt);
        REQUIRE(det.capacity.has_value());
        CHECK(*det.capacity > 0.0);
    }
}

TEST_CASE("grid oracle at resolution 2 scans the corner allocations") {
    const ParallelChannel c{{{1, 1, 2, 2, 0.5}}};
    const PowerBudget b{3.0, 1.0};
    const ModeAssignment m{{RelayMode::NF}};
    double best = 0.0;
    for (double p1 : {0.0, 3.0})
        for (double p2 : {0.0, 1.0}) {
            Allocation a = zero_allocation(1);
            a.p1[0] = p1;
            a.p2[0] = p2;
            best = std::max(best, lower_bound_value(c, m, a));
        }
    CHECK_THAT(grid_oracle_lower(c, b, m, 2).value, WithinAbs(best, 1e-15));
}

TEST_CASE("grid oracle equals naive full-lattice enumeration") {
    testutil::Gen gen(36);
    for (int i = 0; i < 8; ++i) {
        const int L = gen.uni_int(1, 2);
        const int r = gen.uni_int(4, 7);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b = gen.budget();
        const ModeAssignment m = gen.modes(L);
        CHECK_THAT(grid_oracle_lower(c, b, m, r).value,
                   WithinAbs(naive_oracle_lower(c, b, m, r), 1e-12));
        CHECK_THAT(grid_oracle_upper(c, b, r).value,
                   WithinAbs(std::max(0.0, naive_oracle_upper(c, b, r)), 1e-12));
    }
    // Three DF subchannels exercise the front-merge path.
    for (int i = 0; i < 3; ++i) {
        const ParallelChannel c = gen.channel(3);
        const PowerBudget b = gen.budget();
        const ModeAssignment m{{RelayMode::DF, RelayMode::DF, RelayMode::DF}};
        const int r = 4;
        CHECK_THAT(grid_oracle_lower(c, b, m, r).value,
                   WithinAbs(naive_oracle_lower(c, b, m, r), 1e-12));
    }
}

TEST_CASE("grid oracle value never decreases when the lattice is refined") {
    testutil::Gen gen(37);
    for (int i = 0; i < 5; ++i) {
        const int L = gen.uni_int(1, 2);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b = gen.budget();
        const ModeAssignment m = gen.modes(L);
        CHECK(grid_oracle_lower(c, b, m, 101).value >= grid_oracle_lower(c, b, m, 11).value - 1e-12);
        CHECK(grid_oracle_upper(c, b, 101).value >= grid_oracle_upper(c, b, 11).value - 1e-12);
        CHECK(grid_oracle_deaf(c, b, 101).value >= grid_oracle_deaf(c, b, 11).value - 1e-12);
    }
}

TEST_CASE("grid oracle rejects oversized lattices") {
    testutil::Gen gen(38);
    const ParallelChannel c = gen.channel(3);
    const PowerBudget b = gen.budget();
    CHECK_THROWS_AS(grid_oracle_upper(c, b, 101), size_error);
}

TEST_CASE("oracle allocations reproduce the reported value") {
    testutil::Gen gen(39);
    for (int i = 0; i < 5; ++i) {
        const int L = gen.uni_int(1, 2);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b = gen.budget();
        const ModeAssignment m = gen.modes(L);
        const auto lo = grid_oracle_lower(c, b, m, 31);
        CHECK_THAT(lower_bound_value(c, m, lo.allocation), WithinAbs(lo.value, 1e-12));
        const auto up = grid_oracle_upper(c, b, 31);
        CHECK_THAT(std::max(0.0, upper_bound_value(c, up.allocation)), WithinAbs(up.value, 1e-12));
        const auto de = grid_oracle_deaf(c, b, 31);
        CHECK_THAT(deaf_bound_value(c, de.allocation), WithinAbs(de.value, 1e-12));
    }
}

TEST_CASE("finite_diff_check validates the analytic gradients") {
    testutil::Gen gen(40);
    int checked = 0;
    while (checked < 10) {
        const int L = gen.uni_int(1, 3);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b{4.0, 4.0};
        ModeAssignment m = gen.modes(L);
        Allocation a = zero_allocation(L);
        for (int l = 0; l < L; ++l) {
            a.p1[l] = gen.uni(0.2, 1.0);
            a.p2[l] = gen.uni(0.2, 1.0);
            a.alpha[l] = gen.uni(0.15, 0.85);
            a.psi[l] = gen.uni(-0.85, 0.85);
        }
        try {
            const double e_lower = finite_diff_check(ObjectiveKind::lower, c, b, m, a);
            const double e_upper = finite_diff_check(ObjectiveKind::upper, c, b, m, a);
            const double e_deaf = finite_diff_check(ObjectiveKind::deaf, c, b, m, a);
            CHECK(e_lower <= 1e-4);
            CHECK(e_upper <= 1e-4);
            CHECK(e_deaf <= 1e-4);
            ++checked;
        } catch (const kink_proximity_error&) {
            continue; // resample away from kinks
        }
    }
}

TEST_CASE("finite_diff_check rejects boundary points") {
    const ParallelChannel c{{{1, 1, 2, 2, 0.5}}};
    const PowerBudget b{2.0, 2.0};
    const ModeAssignment m{{RelayMode::DF}};
    Allocation a = zero_allocation(1);
    a.p1[0] = 0.5;
    a.p2[0] = 0.5;
    a.alpha[0] = 1.0; // box edge
    CHECK_THROWS_AS(finite_diff_check(ObjectiveKind::lower, c, b, m, a), kink_proximity_error);
}

TEST_CASE("multi-start results are deterministic and nested in n_starts") {
    testutil::Gen gen(41);
    const ParallelChannel c = gen.channel(2);
    const PowerBudget b = gen.budget();
    const ModeAssignment m = gen.modes(2);
    SolverOptions opt;
    opt.seed = 99;

    const auto r1 = maximize_lower(c, b, m, opt);
    const auto r2 = maximize_lower(c, b, m, opt);
    CHECK(r1.value == r2.value);
    CHECK(r1.allocation.p1 == r2.allocation.p1);
    CHECK(r1.allocation.p2 == r2.allocation.p2);
    CHECK(r1.allocation.alpha == r2.allocation.alpha);
    CHECK(r1.diagnostics.best_start == r2.diagnostics.best_start);

    double prev = -1.0;
    for (int n : {1, 4, 16}) {
        SolverOptions o = opt;
        o.n_starts = n;
        const double v = maximize_lower(c, b, m, o).value;
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("maximize_lower never falls below the uniform allocation") {
    testutil::Gen gen(42);
    SolverOptions opt;
    opt.n_starts = 4;
    opt.max_iters = 60;
    for (int i = 0; i < 20; ++i) {
        const int L = gen.uni_int(1, 3);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b = gen.budget();
        const ModeAssignment m = gen.modes(L);
        const double uniform = lower_bound_value(c, m, uniform_allocation(c, b));
        CHECK(maximize_lower(c, b, m, opt).value >= uniform);
    }
}

TEST_CASE("returned allocations respect the budget exactly") {
    testutil::Gen gen(43);
    SolverOptions opt;
    opt.n_starts = 6;
    for (int i = 0; i < 10; ++i) {
        const int L = gen.uni_int(1, 3);
        const ParallelChannel c = gen.channel(L);
        const PowerBudget b = gen.budget();
        for (const auto& r :
             {maximize_lower(c, b, gen.modes(L), opt), maximize_upper(c, b, opt),
              maximize_deaf(c, b, opt, false)}) {
            CHECK_NOTHROW(validate_allocation(r.allocation, L, b));
        }
    }
}

TEST_CASE("results do not depend on the worker count") {
    testutil::Gen gen(44);
    const ParallelChannel c = gen.channel(3);
    const PowerBudget b = gen.budget();
    const ModeAssignment m = gen.modes(3);
    SolverOptions opt;
    opt.seed = 5;

    const char* saved = std::getenv("SECRELAY_THREADS");
    const std::string saved_value = saved ? saved : "";
    setenv("SECRELAY_THREADS", "1", 1);
    const auto serial_lower = maximize_lower(c, b, m, opt);
    const auto serial_upper = maximize_upper(c, b, opt);
    const auto serial_oracle = grid_oracle_lower(c, b, m, 21);
    setenv("SECRELAY_THREADS", "8", 1);
    const auto wide_lower = maximize_lower(c, b, m, opt);
    const auto wide_upper = maximize_upper(c, b, opt);
    const auto wide_oracle = grid_oracle_lower(c, b, m, 21);
    if (saved) setenv("SECRELAY_THREADS", saved_value.c_str(), 1);
    else unsetenv("SECRELAY_THREADS");

    CHECK(serial_lower.value == wide_lower.value);
    CHECK(serial_lower.allocation.p1 == wide_lower.allocation.p1);
    CHECK(serial_upper.value == wide_upper.value);
    CHECK(serial_oracle.value == wide_oracle.value);
    CHECK(serial_oracle.allocation.p1 == wide_oracle.allocation.p1);
    CHECK(serial_oracle.allocation.alpha == wide_oracle.allocation.alpha);
}

TEST_CASE("upper and deaf solvers are deterministic too") {
    testutil::Gen gen(45);
    const ParallelChannel c = gen.channel(2);
    const PowerBudget b = gen.budget();
    SolverOptions opt;
    opt.seed = 77;
    const auto u1 = maximize_upper(c, b, opt);
    const auto u2 = maximize_upper(c, b, opt);
    CHECK(u1.value == u2.value);
    CHECK(u1.allocation.psi == u2.allocation.psi);
    const auto d1 = maximize_deaf(c, b, opt, true);
    const auto d2 = maximize_deaf(c, b, opt, true);
    CHECK(d1.value == d2.value);
    CHECK(d1.allocation.p2 == d2.allocation.p2);
}

TEST_CASE("solver options are validated") {
    SolverOptions bad;
    bad.n_starts = 0;
    CHECK_THROWS_AS(validate_options(bad), validation_error);
    bad = {};
    bad.grid_resolution = 1;
    CHECK_THROWS_AS(validate_options(bad), validation_error);
    bad = {};
    bad.step_init = 0.0;
    CHECK_THROWS_AS(validate_options(bad), validation_error);
}
