// The incompressible no-slip solver: discrete Leray projection, energy
// bookkeeping, unforced decay, time-step self-convergence, runtime guards,
// and the dissipativity experiment built on top of it.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "ergo/ns2d/solver.hpp"
#include "ergo/ns2d/system.hpp"
#include "ergo/rng.hpp"

using namespace ergo;
using namespace ergo::ns2d;

namespace {

constexpr double kPi = std::numbers::pi;

// Smooth divergence-free field with no-slip trace: curl of
// psi = amp * sin^2(pi x) sin^2(pi y).
VelocityField smooth_field(int n, double amp) {
    SquareDomain dom(n);
    StreamData psi(dom);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const double x = double(i) / n, y = double(j) / n;
            const double sx = std::sin(kPi * x), sy = std::sin(kPi * y);
            psi.at(i, j) = amp * sx * sx * sy * sy;
        }
    return psi.to_velocity();
}

// Divergence-free field with a rough, non-symmetric stream function.
VelocityField rough_field(int n, std::uint64_t stream, double amp) {
    CounterRng rng(515, stream);
    SquareDomain dom(n);
    StreamData psi(dom);
    for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) psi.at(i, j) = amp * rng.uniform_pm1();
    return psi.to_velocity();
}

double max_abs_diff(const VelocityField& a, const VelocityField& b) {
    VelocityField d = a;
    d -= b;
    return d.max_abs();
}

} // namespace

TEST_CASE("solver parameter validation", "[ns][solver]") {
    REQUIRE_THROWS_AS(NsSolver({6, 0.05, 2e-3}), ConfigError);
    REQUIRE_THROWS_AS(NsSolver({31, 0.05, 2e-3}), ConfigError);
    REQUIRE_THROWS_AS(NsSolver({32, 0.0, 2e-3}), ConfigError);
    REQUIRE_THROWS_AS(NsSolver({32, -1.0, 2e-3}), ConfigError);
    REQUIRE_THROWS_AS(NsSolver({32, 0.05, 0.0}), ConfigError);
    REQUIRE_THROWS_AS(NsSolver({32, 0.05, 0.6}), ConfigError);
    REQUIRE_NOTHROW(NsSolver({32, 0.05, 2e-3}));
}

TEST_CASE("discrete Leray projection", "[ns][solver]") {
    const int n = 32;
    NsSolver solver({n, 0.05, 2e-3});

    SECTION("divergence-free fields are fixed points") {
        const VelocityField f = rough_field(n, 1, 0.5);
        VelocityField g = f;
        solver.leray_project(g);
        REQUIRE(max_abs_diff(f, g) < 1e-11);
        REQUIRE(g.max_div() < 1e-10);
    }

    SECTION("no-flux cell-center gradients are annihilated") {
        // phi = cos(pi x) cos(2 pi y) has zero normal derivative on all four
        // walls; its discrete face gradient is divergence-dual to the Poisson
        // stencil the projection solves, so the removal is exact.
        const double h = 1.0 / n;
        std::vector<double> phi(std::size_t(n) * std::size_t(n));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                phi[std::size_t(j) * n + std::size_t(i)] =
                    std::cos(kPi * (i + 0.5) * h) * std::cos(2.0 * kPi * (j + 0.5) * h);
        VelocityField g{SquareDomain(n)};
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i)
                g.at_u(i, j) =
                    (phi[std::size_t(j) * n + std::size_t(i)] - phi[std::size_t(j) * n + i - 1]) / h;
        for (int j = 1; j < n; ++j)
            for (int i = 0; i < n; ++i)
                g.at_v(i, j) =
                    (phi[std::size_t(j) * n + std::size_t(i)] - phi[std::size_t(j - 1) * n + i]) / h;
        REQUIRE(g.max_abs() > 1.0);   // non-trivial input
        solver.leray_project(g);
        REQUIRE(g.max_abs() < 1e-9);
    }

    SECTION("projection output is divergence-free and idempotent") {
        // Start from a field with large divergence: a rough divergence-free
        // field plus an interior bump on the u faces.
        VelocityField g = rough_field(n, 2, 0.5);
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i)
                g.at_u(i, j) += std::sin(3.0 * i + 2.0 * j);
        solver.leray_project(g);
        REQUIRE(g.max_div() < 1e-10);
        VelocityField twice = g;
        solver.leray_project(twice);
        REQUIRE(max_abs_diff(g, twice) < 1e-10);
    }
}

TEST_CASE("energy audit balances the discrete budget", "[ns][solver]") {
    const int n = 32;

    SECTION("wall-aware Dirichlet form dominates the interior one") {
        NsSolver solver({n, 0.05, 1e-3});
        const VelocityField f = smooth_field(n, 0.08);
        const double istencil = f.h1_semi() * f.h1_semi();
        REQUIRE(solver.dirichlet_form(f) > istencil);
        REQUIRE(solver.dirichlet_form(f) < 1.3 * istencil);
    }

    SECTION("unforced step: residual far below the dissipation scale") {
        for (double dt : {2e-3, 1e-3}) {
            NsSolver solver({n, 0.05, dt});
            VelocityField w = smooth_field(n, 0.08);
            const VelocityField before = w;
            solver.step(w);
            const auto au = solver.energy_audit(before, w);
            REQUIRE(au.e_after < au.e_before);
            REQUIRE(au.injection == 0.0);
            REQUIRE(au.dissipation > 0.0);
            REQUIRE(std::abs(au.residual) / au.dissipation < 5e-3);
        }
    }

    SECTION("forced step: injection enters with the right sign") {
        NsSolver solver({n, 0.05, 1e-3});
        VelocityField w = smooth_field(n, 0.08);
        VelocityField force = w;   // aligned force: positive injection
        force *= 2.0;
        const VelocityField before = w;
        solver.step(w, nullptr, nullptr, &force);
        const auto au = solver.energy_audit(before, w, &force);
        REQUIRE(au.injection > 0.0);
        const double scale = au.dissipation + au.injection;
        REQUIRE(std::abs(au.residual) / scale < 5e-3);
    }
}

TEST_CASE("unforced energy decays monotonically", "[ns][solver]") {
    const int n = 32;
    NsSolver solver({n, 0.05, 2e-3});
    const auto probe = solver.dissipativity_probe(smooth_field(n, 0.08), 50);
    REQUIRE(probe.monotone);
    REQUIRE(probe.worst_ratio < 0.999);
    REQUIRE(probe.energy.size() == 51);
    REQUIRE(probe.energy.back() < probe.energy.front());
}

TEST_CASE("time-step self-convergence at first order", "[ns][solver]") {
    const int n = 32;
    const double horizon = 0.1;
    VelocityField end[3] = {VelocityField{SquareDomain(n)}, VelocityField{SquareDomain(n)},
                            VelocityField{SquareDomain(n)}};
    const double dts[3] = {4e-3, 2e-3, 1e-3};
    for (int k = 0; k < 3; ++k) {
        NsSolver solver({n, 0.05, dts[k]});
        VelocityField w = smooth_field(n, 0.08);
        const int steps = int(std::lround(horizon / dts[k]));
        for (int s = 0; s < steps; ++s) solver.step(w);
        end[k] = w;
    }
    VelocityField c1 = end[0];
    c1 -= end[1];
    VelocityField c2 = end[1];
    c2 -= end[2];
    REQUIRE(c2.l2() > 0.0);
    const double ratio = c1.l2() / c2.l2();
    REQUIRE(ratio > 1.5);
    REQUIRE(ratio < 3.0);
}

TEST_CASE("runtime guards reject unreasonable states", "[ns][solver]") {
    const int n = 32;
    NsSolver solver({n, 0.05, 2e-3});
    VelocityField w{SquareDomain(n)};
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i) w.at_u(i, j) = 200.0;   // CFL = 12.8
    REQUIRE_THROWS_AS(solver.step(w), NumericalError);
}

TEST_CASE("dissipativity experiment fits decay and bounds noisy orbits", "[ns][system]") {
    NsSystemConfig cfg;
    cfg.ns = {32, 0.05, 5e-3};
    const NsSystem sys(cfg);

    DissipativityConfig dc;
    dc.k_max_decay = 8;
    dc.k_max_noise = 3;
    dc.n_traj = 2;
    dc.seed = 7;
    const auto rep = dissipativity_experiment(sys, smooth_field(32, 0.3), dc);
    REQUIRE(rep.alpha > 0.0);
    REQUIRE(rep.r2 > 0.9);
    REQUIRE(rep.decay_h1.size() == 9);
    REQUIRE(rep.decay_h1.back() < rep.decay_h1.front());
    REQUIRE(rep.sup_h1 > 0.0);
    REQUIRE(rep.c1 >= rep.sup_h1);
    REQUIRE(rep.radius == 2.0 * rep.c1);
    REQUIRE(rep.envelope_ok);

    DissipativityConfig bad = dc;
    bad.n_traj = 0;
    REQUIRE_THROWS_AS(dissipativity_experiment(sys, smooth_field(32, 0.3), bad), ConfigError);
}
