#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <ergo/measure.hpp>
#include <ergo/rng.hpp>
#include <ergo/stats.hpp>
#include <ergo/toybench.hpp>
#include <ergo/transport.hpp>

using namespace ergo;

namespace {

DiscreteMeasure random_measure(CounterRng& rng, int dim, int n, double span) {
    std::vector<double> pts(std::size_t(n) * std::size_t(dim));
    std::vector<double> w(std::size_t(n), 0.0);
    double total = 0.0;
    for (double& p : pts) p = span * rng.uniform_pm1();
    for (double& x : w) {
        x = rng.uniform01();
        total += x;
    }
    for (double& x : w) x /= total;
    return DiscreteMeasure(dim, std::move(pts), std::move(w));
}

} // namespace

TEST_CASE("threshold cost indicator includes the boundary") {
    REQUIRE(d_eps(0.5, 0.5) == 0.0);
    REQUIRE(d_eps(0.5000001, 0.5) == 1.0);
    REQUIRE(d_eps(0.0, 0.0) == 0.0);
}

TEST_CASE("transport cost vanishes for identical measures and saturates for disjoint ones") {
    const DiscreteMeasure m(1, {0.0, 1.0}, {0.5, 0.5});
    REQUIRE(transport_cost(m, m, 0.0) == Catch::Approx(0.0).margin(1e-12));

    const DiscreteMeasure a = DiscreteMeasure::dirac({0.0});
    const DiscreteMeasure b = DiscreteMeasure::dirac({5.0});
    REQUIRE(transport_cost(a, b, 1.0) == Catch::Approx(1.0));
    REQUIRE(transport_cost(a, b, 5.0) == Catch::Approx(0.0));
    REQUIRE_THROWS_AS(transport_cost(a, b, -0.1), ConfigError);
}

TEST_CASE("hand-checked partial matching") {
    const DiscreteMeasure m1(1, {0.0, 1.0}, {0.5, 0.5});
    const DiscreteMeasure m2(1, {0.05, 2.0}, {0.5, 0.5});
    // Only the 0 <-> 0.05 pair is within 0.1: half the mass matches.
    REQUIRE(transport_cost(m1, m2, 0.1) == Catch::Approx(0.5));
    REQUIRE(brute_force_transport_cost(m1, m2, 0.1) == Catch::Approx(0.5));
}

TEST_CASE("1-D sweep agrees with the exhaustive covering oracle") {
    CounterRng rng(42, 0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n1 = 1 + int(rng.uniform_index(8));
        const int n2 = 1 + int(rng.uniform_index(8));
        const DiscreteMeasure a = random_measure(rng, 1, n1, 1.0);
        const DiscreteMeasure b = random_measure(rng, 1, n2, 1.0);
        const double eps = rng.uniform01() * 1.5;
        REQUIRE(transport_cost(a, b, eps) ==
                Catch::Approx(brute_force_transport_cost(a, b, eps)).margin(1e-9));
    }
}

TEST_CASE("flow path agrees with the exhaustive covering oracle in 2-D") {
    CounterRng rng(43, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n1 = 1 + int(rng.uniform_index(7));
        const int n2 = 1 + int(rng.uniform_index(7));
        const DiscreteMeasure a = random_measure(rng, 2, n1, 1.0);
        const DiscreteMeasure b = random_measure(rng, 2, n2, 1.0);
        const double eps = rng.uniform01() * 1.5;
        REQUIRE(transport_cost(a, b, eps) ==
                Catch::Approx(brute_force_transport_cost(a, b, eps)).margin(1e-9));
    }
}

TEST_CASE("1-D sweep equals the flow path on embedded instances") {
    CounterRng rng(44, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const DiscreteMeasure a = random_measure(rng, 1, 12, 1.0);
        const DiscreteMeasure b = random_measure(rng, 1, 9, 1.0);
        // Embed into 2-D with a zero second coordinate to force the flow path.
        auto embed = [](const DiscreteMeasure& m) {
            std::vector<double> pts;
            for (std::size_t i = 0; i < m.n_atoms(); ++i) {
                pts.push_back(m.pts[i]);
                pts.push_back(0.0);
            }
            return DiscreteMeasure(2, pts, m.w);
        };
        const double eps = rng.uniform01();
        REQUIRE(transport_cost(a, b, eps) ==
                Catch::Approx(transport_cost(embed(a), embed(b), eps)).margin(1e-12));
    }
}

TEST_CASE("optimal plan has exact marginals and matches the reported cost") {
    CounterRng rng(45, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = trial % 2 ? 2 : 1;
        const DiscreteMeasure a = random_measure(rng, dim, 20, 1.0);
        const DiscreteMeasure b = random_measure(rng, dim, 15, 1.0);
        const double eps = 0.2 + rng.uniform01();
        const CouplingPlan plan = optimal_plan(a, b, eps);
        REQUIRE(plan.cost == Catch::Approx(transport_cost(a, b, eps)).margin(1e-9));
        std::vector<double> m1(a.n_atoms(), 0.0), m2(b.n_atoms(), 0.0);
        double cst = 0.0;
        for (std::size_t k = 0; k < plan.size(); ++k) {
            REQUIRE(plan.mass[k] >= 0.0);
            m1[plan.from[k]] += plan.mass[k];
            m2[plan.to[k]] += plan.mass[k];
            cst += plan.mass[k] * d_eps(atom_dist(a, plan.from[k], b, plan.to[k]), eps);
        }
        for (std::size_t i = 0; i < m1.size(); ++i)
            REQUIRE(m1[i] == Catch::Approx(a.w[i]).margin(1e-9));
        for (std::size_t i = 0; i < m2.size(); ++i)
            REQUIRE(m2[i] == Catch::Approx(b.w[i]).margin(1e-9));
        REQUIRE(cst == Catch::Approx(plan.cost).margin(1e-9));
    }
}

TEST_CASE("dual-Lipschitz distance between unit point masses has a closed form") {
    // Two unit atoms at distance d: the optimum is 2d/(2+d).
    auto two_atoms = [](double d) {
        return dual_lipschitz(DiscreteMeasure::dirac({0.0}), DiscreteMeasure::dirac({d}))
            .value;
    };
    REQUIRE(two_atoms(0.5) == Catch::Approx(0.4).margin(1e-7));
    REQUIRE(two_atoms(2.0) == Catch::Approx(1.0).margin(1e-7));
    REQUIRE(two_atoms(3.0) == Catch::Approx(1.2).margin(1e-7));
    REQUIRE(two_atoms(100.0) == Catch::Approx(200.0 / 102.0).margin(1e-7));

    // 2-D: same closed form with the Euclidean separation.
    const double v = dual_lipschitz(DiscreteMeasure::dirac({0.0, 0.0}),
                                    DiscreteMeasure::dirac({3.0, 4.0}))
                         .value;
    REQUIRE(v == Catch::Approx(2.0 * 5.0 / 7.0).margin(1e-7));
}

TEST_CASE("dual-Lipschitz distance is a metric on point clouds") {
    CounterRng rng(46, 0);
    const DiscreteMeasure a = random_measure(rng, 2, 6, 1.0);
    const DiscreteMeasure b = random_measure(rng, 2, 5, 1.0);
    const DiscreteMeasure c = random_measure(rng, 2, 4, 1.0);
    const double ab = dual_lipschitz(a, b).value;
    const double ba = dual_lipschitz(b, a).value;
    const double ac = dual_lipschitz(a, c).value;
    const double cb = dual_lipschitz(c, b).value;
    REQUIRE(ab == Catch::Approx(ba).margin(1e-7));
    REQUIRE(ab <= ac + cb + 1e-7);
    REQUIRE(dual_lipschitz(a, a).value == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 2.0);
}

TEST_CASE("dual-Lipschitz optimum is feasible for every pair constraint") {
    CounterRng rng(47, 0);
    const DiscreteMeasure a = random_measure(rng, 2, 40, 1.0);
    const DiscreteMeasure b = random_measure(rng, 2, 40, 1.0);
    const DualLipschitzResult res = dual_lipschitz(a, b);
    REQUIRE(res.generation_rounds >= 1);
    REQUIRE(res.m_opt + res.l_opt <= 1.0 + 1e-7);
    const int n = res.support_size;
    for (int i = 0; i < n; ++i) {
        REQUIRE(std::abs(res.f[std::size_t(i)]) <= res.m_opt + 1e-7);
        for (int j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (int k = 0; k < 2; ++k) {
                const double diff = res.support[std::size_t(2 * i + k)] -
                                    res.support[std::size_t(2 * j + k)];
                d2 += diff * diff;
            }
            REQUIRE(std::abs(res.f[std::size_t(i)] - res.f[std::size_t(j)]) <=
                    res.l_opt * std::sqrt(d2) + 1e-6);
        }
    }
}

TEST_CASE("dual-Lipschitz agrees with the 1-D dynamic-programming oracle") {
    CounterRng rng(48, 0);
    for (int trial = 0; trial < 8; ++trial) {
        const DiscreteMeasure a = random_measure(rng, 1, 3 + int(rng.uniform_index(20)), 1.0);
        const DiscreteMeasure b = random_measure(rng, 1, 3 + int(rng.uniform_index(20)), 1.0);
        const double lp = dual_lipschitz(a, b).value;
        const double dp = brute_force_bl_distance_1d(a, b).value;
        REQUIRE(lp == Catch::Approx(dp).margin(5e-3));
        REQUIRE(lp >= dp - 1e-9);   // the DP restricts to a grid, so it lower-bounds
    }
}

TEST_CASE("dual-Lipschitz merges duplicate atoms and rejects huge supports") {
    const DiscreteMeasure a(1, {0.0, 0.0, 1.0}, {0.25, 0.25, 0.5});
    const DiscreteMeasure b(1, {0.0, 1.0}, {0.5, 0.5});
    REQUIRE(dual_lipschitz(a, b).value == Catch::Approx(0.0).margin(1e-9));

    std::vector<double> pts(1001), w(1001, 1.0 / 1001.0);
    for (int i = 0; i < 1001; ++i) pts[std::size_t(i)] = i;
    std::vector<double> pts2 = pts;
    for (double& x : pts2) x += 0.25;   // all atoms distinct: merged support 2002
    const DiscreteMeasure big(1, pts, w);
    const DiscreteMeasure big2(1, pts2, w);
    REQUIRE_THROWS_AS(dual_lipschitz(big, big2), SizeError);
}

TEST_CASE("grid total variation") {
    DensityGrid a({100}, {-1.0}, {1.0}), b({100}, {-1.0}, {1.0});
    a.fill([](const std::vector<double>&) { return 0.5; });
    b.fill([](const std::vector<double>& x) { return x[0] < 0.0 ? 1.0 : 0.0; });
    // Half the mass sits in different places.
    REQUIRE(tv_distance_grid(a, b) == Catch::Approx(0.5).margin(1e-12));
    DensityGrid c({50}, {-1.0}, {1.0});
    REQUIRE_THROWS_AS(tv_distance_grid(a, c), SizeError);
}

TEST_CASE("shift maps invert and push densities forward correctly") {
    const ShiftMap tr = ShiftMap::translation_map(2, 1, {0.3, 0.0});
    const std::vector<double> y = tr.apply({0.1, -0.2});
    REQUIRE(y[0] == Catch::Approx(0.4));
    REQUIRE(y[1] == Catch::Approx(-0.2));
    const std::vector<double> z = invert_shift_map(tr, y);
    REQUIRE(z[0] == Catch::Approx(0.1).margin(1e-12));

    // Nonlinear: Psi(z) = z + 0.2 z^2 on the line, invertible near [-1,1].
    ShiftMap nl;
    nl.dim = 1;
    nl.block = 1;
    nl.translation = false;
    nl.phi = [](const std::vector<double>& v) {
        return std::vector<double>{0.2 * v[0] * v[0]};
    };
    for (double z0 : {-0.9, -0.3, 0.0, 0.5, 0.8}) {
        const std::vector<double> img = nl.apply({z0});
        const std::vector<double> back = invert_shift_map(nl, img);
        REQUIRE(back[0] == Catch::Approx(z0).margin(1e-9));
    }
}

TEST_CASE("pushforward of a uniform density under a linear stretch") {
    // Psi(z) = 1.25 z maps U[-1,1] to U[-1.25,1.25] with height 0.4.
    ShiftMap st;
    st.dim = 1;
    st.block = 1;
    st.translation = false;
    st.phi = [](const std::vector<double>& v) { return std::vector<double>{0.25 * v[0]}; };
    const ModeDensity uni = ModeDensity::uniform();
    PushforwardDensity push([&](const std::vector<double>& x) { return uni.pdf(x[0]); }, st);
    REQUIRE(push.pdf({0.0}) == Catch::Approx(0.4).margin(1e-6));
    REQUIRE(push.pdf({1.2}) == Catch::Approx(0.4).margin(1e-6));
    REQUIRE(push.pdf({1.3}) == Catch::Approx(0.0).margin(1e-9));

    const DensityGrid g = push.on_grid({2000}, {-1.5}, {1.5});
    REQUIRE(g.integral() == Catch::Approx(1.0).margin(5e-3));
}

TEST_CASE("translated uniform density has total variation |s|/2") {
    const ModeDensity uni = ModeDensity::uniform();
    const ProductDensity ell({&uni}, {1.0});
    auto family = [](double kappa) { return ShiftMap::translation_map(1, 1, {kappa}); };
    const ShiftTvReport rep =
        verify_shift_tv_bound(ell, family, {0.1, 0.2, 0.3, 0.4}, 2048);
    for (const ShiftTvRow& row : rep.rows)
        REQUIRE(row.tv == Catch::Approx(row.kappa / 2.0).margin(0.01));
    REQUIRE(rep.bounded(1.2));
    REQUIRE(rep.ratio_max == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("smooth densities keep the shift/TV ratio in a narrow band") {
    const ModeDensity q = ModeDensity::quartic();
    const ProductDensity ell({&q}, {1.0});
    auto family = [](double kappa) { return ShiftMap::translation_map(1, 1, {kappa}); };
    const ShiftTvReport rep =
        verify_shift_tv_bound(ell, family, {0.05, 0.1, 0.2, 0.4}, 2048);
    REQUIRE(rep.bounded(3.0));
    REQUIRE(rep.rows.front().ratio > 0.0);
}

TEST_CASE("maximal coupling of shifted uniforms attains the TV coalescence rate") {
    const ModeDensity uni = ModeDensity::uniform();
    const double s = 0.4;   // TV between U[-1,1] and U[-1+s,1+s] is s/2 = 0.2
    DensityWithSampler p{
        [&](const std::vector<double>& x) { return uni.pdf(x[0] - s); },
        [&](CounterRng& r) { return std::vector<double>{uni.sample(r) + s}; }};
    DensityWithSampler q{
        [&](const std::vector<double>& x) { return uni.pdf(x[0]); },
        [&](CounterRng& r) { return std::vector<double>{uni.sample(r)}; }};
    CounterRng rng(7, 7);
    int coalesced = 0;
    const int n = 20000;
    std::vector<double> xs, ys;
    for (int i = 0; i < n; ++i) {
        const MaximalCouplingDraw d = maximal_coupling_densities(p, q, rng);
        if (d.coalesced) {
            ++coalesced;
            REQUIRE(d.x == d.y);
        }
        xs.push_back(d.x[0]);
        ys.push_back(d.y[0]);
    }
    REQUIRE(double(coalesced) / n == Catch::Approx(0.8).margin(0.015));
    // Both marginals must stay exact.
    REQUIRE(ks_statistic(xs, [&](double x) { return uni.cdf(x - s); }) < 0.015);
    REQUIRE(ks_statistic(ys, [&](double x) { return uni.cdf(x); }) < 0.015);
}

TEST_CASE("coalescence probability is one for identical densities") {
    const ModeDensity uni = ModeDensity::uniform();
    DensityWithSampler p{[&](const std::vector<double>& x) { return uni.pdf(x[0]); },
                         [&](CounterRng& r) { return std::vector<double>{uni.sample(r)}; }};
    CounterRng rng(8, 8);
    for (int i = 0; i < 500; ++i) {
        const MaximalCouplingDraw d = maximal_coupling_densities(p, p, rng);
        REQUIRE(d.coalesced);
    }
}

TEST_CASE("transport cost at the displacement threshold is bounded by twice the TV") {
    const ModeDensity uni = ModeDensity::uniform();
    const ProductDensity ell({&uni}, {1.0});
    const ShiftMap psi = ShiftMap::translation_map(1, 1, {0.2});
    CounterRng rng(9, 9);
    const CostTvCheck chk = cost_tv_inequality_check(
        ell, psi, [](const std::vector<double>& w) { return w[0]; },
        [](const std::vector<double>& x) { return 0.05 * std::sin(3.0 * x[0]); }, 0.05,
        10000, rng);
    REQUIRE(chk.ok);
    REQUIRE(chk.tv == Catch::Approx(0.1).margin(0.01));
    REQUIRE(chk.cost <= 2.0 * chk.tv + chk.margin);
}
