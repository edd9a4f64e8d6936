#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "maxflow.hpp"
#include "measure.hpp"
#include "rng.hpp"
#include "simplex.hpp"

namespace ergo {

/// Threshold cost: 0 when the two states are within eps (boundary included),
/// 1 otherwise.
inline double d_eps(double dist, double eps) { return dist <= eps ? 0.0 : 1.0; }

// ---------------------------------------------------------------------------
// Transport cost at threshold eps: minimum mass a coupling must place on
// pairs farther than eps apart. Equals 1 - (max mass matchable within eps).
// ---------------------------------------------------------------------------

namespace detail {

struct SortedAtoms {
    std::vector<std::size_t> order;
    std::vector<double> x, w;
};

inline SortedAtoms sort_atoms_1d(const DiscreteMeasure& m) {
    SortedAtoms s;
    s.order.resize(m.n_atoms());
    std::iota(s.order.begin(), s.order.end(), std::size_t(0));
    std::stable_sort(s.order.begin(), s.order.end(),
                     [&](std::size_t a, std::size_t b) { return m.pts[a] < m.pts[b]; });
    for (std::size_t k : s.order) {
        s.x.push_back(m.pts[k]);
        s.w.push_back(m.w[k]);
    }
    return s;
}

struct PlanEntry {
    std::size_t i, j;
    double mass;
};

/// Earliest-deadline greedy sweep: exact max matching within eps for sorted
/// 1-D atoms (adjacency sets are intervals, so the exchange argument applies).
inline double match_within_eps_1d(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                                  double eps, std::vector<PlanEntry>* plan) {
    const SortedAtoms a = sort_atoms_1d(mu1);
    const SortedAtoms b = sort_atoms_1d(mu2);
    std::vector<double> rem = b.w;
    std::vector<std::size_t> skip(b.x.size() + 1);
    std::iota(skip.begin(), skip.end(), std::size_t(0));
    auto next_alive = [&](std::size_t j) {
        while (j < b.x.size() && (skip[j] != j || rem[j] <= 0)) {
            if (skip[j] != j) j = skip[j];
            else skip[j] = ++j;
        }
        return j;
    };
    double matched = 0.0;
    std::size_t lo = 0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        double need = a.w[i];
        while (lo < b.x.size() && (b.x[lo] < a.x[i] - eps || rem[lo] <= 0)) ++lo;
        std::size_t j = next_alive(lo);
        while (need > 0 && j < b.x.size() && b.x[j] <= a.x[i] + eps) {
            const double take = std::min(need, rem[j]);
            if (take > 0) {
                rem[j] -= take;
                need -= take;
                matched += take;
                if (plan) plan->push_back({a.order[i], b.order[j], take});
            }
            j = next_alive(j + 1);
        }
    }
    return matched;
}

/// General-dimension exact max matching within eps via max-flow.
inline double match_within_eps_flow(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                                    double eps, std::vector<PlanEntry>* plan) {
    const std::size_t n1 = mu1.n_atoms(), n2 = mu2.n_atoms();
    if (n1 * n2 > 8'000'000)
        throw SizeError("transport_cost: instance too large for the flow path");
    const int src = 0, snk = int(n1 + n2) + 1;
    MaxFlow flow(int(n1 + n2) + 2);
    for (std::size_t i = 0; i < n1; ++i) flow.add_edge(src, int(i) + 1, mu1.w[i]);
    for (std::size_t j = 0; j < n2; ++j)
        flow.add_edge(int(n1 + j) + 1, snk, mu2.w[j]);
    std::vector<std::array<std::size_t, 3>> pair_edges;   // (edge id, i, j)
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            if (atom_dist(mu1, i, mu2, j) <= eps)
                pair_edges.push_back({std::size_t(flow.add_edge(int(i) + 1, int(n1 + j) + 1, 2.0)), i, j});
    const double matched = flow.run(src, snk);
    if (plan)
        for (const auto& [e, i, j] : pair_edges) {
            const double f = flow.flow_on(int(e));
            if (f > 1e-15) plan->push_back({i, j, f});
        }
    return matched;
}

inline double match_within_eps(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                               double eps, std::vector<PlanEntry>* plan) {
    if (mu1.dim != mu2.dim) throw SizeError("transport_cost: dimension mismatch");
    mu1.validate();
    mu2.validate();
    if (mu1.dim == 1) return match_within_eps_1d(mu1, mu2, eps, plan);
    return match_within_eps_flow(mu1, mu2, eps, plan);
}

} // namespace detail

inline double transport_cost(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                             double eps) {
    if (eps < 0) throw ConfigError("transport_cost: eps must be nonnegative");
    const double matched = detail::match_within_eps(mu1, mu2, eps, nullptr);
    return std::clamp(1.0 - matched, 0.0, 1.0);
}

/// Explicit coupling attaining the transport cost. Mass not matchable within
/// eps is completed deterministically (index order) over far pairs.
struct CouplingPlan {
    std::vector<std::size_t> from, to;
    std::vector<double> mass;
    double cost = 0.0;

    std::size_t size() const { return mass.size(); }
};

inline CouplingPlan optimal_plan(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                                 double eps) {
    std::vector<detail::PlanEntry> entries;
    const double matched = detail::match_within_eps(mu1, mu2, eps, &entries);

    std::vector<double> rem1 = mu1.w, rem2 = mu2.w;
    for (const auto& e : entries) {
        rem1[e.i] -= e.mass;
        rem2[e.j] -= e.mass;
    }
    // Northwest-corner completion of the leftover marginals.
    std::size_t j = 0;
    for (std::size_t i = 0; i < rem1.size(); ++i) {
        while (rem1[i] > 1e-15) {
            while (j < rem2.size() && rem2[j] <= 1e-15) ++j;
            if (j >= rem2.size()) break;
            const double take = std::min(rem1[i], rem2[j]);
            entries.push_back({i, j, take});
            rem1[i] -= take;
            rem2[j] -= take;
        }
    }

    CouplingPlan plan;
    plan.cost = std::clamp(1.0 - matched, 0.0, 1.0);
    std::vector<double> m1(mu1.n_atoms(), 0.0), m2(mu2.n_atoms(), 0.0);
    double cost_check = 0.0;
    for (const auto& e : entries) {
        plan.from.push_back(e.i);
        plan.to.push_back(e.j);
        plan.mass.push_back(e.mass);
        m1[e.i] += e.mass;
        m2[e.j] += e.mass;
        cost_check += e.mass * d_eps(atom_dist(mu1, e.i, mu2, e.j), eps);
    }
    for (std::size_t i = 0; i < m1.size(); ++i)
        if (std::abs(m1[i] - mu1.w[i]) > 1e-9)
            throw NumericalError("optimal_plan: first marginal violated");
    for (std::size_t i = 0; i < m2.size(); ++i)
        if (std::abs(m2[i] - mu2.w[i]) > 1e-9)
            throw NumericalError("optimal_plan: second marginal violated");
    if (std::abs(cost_check - plan.cost) > 1e-9)
        throw NumericalError("optimal_plan: plan cost disagrees with transport_cost");
    return plan;
}

// ---------------------------------------------------------------------------
// Dual-Lipschitz (bounded-Lipschitz) distance between finitely supported
// measures: sup of integral differences over f with ||f||_inf + Lip(f) <= 1.
// Solved exactly as a linear program. Test functions live on the ambient
// space, so the slope bound chains across any pair of atoms.
// ---------------------------------------------------------------------------

struct DualLipschitzResult {
    double value = 0.0;
    double m_opt = 0.0;         // optimal sup-norm budget
    double l_opt = 0.0;         // optimal Lipschitz budget
    std::vector<double> f;      // optimal test function on the merged support
    std::vector<double> support;
    int support_size = 0;
    int generation_rounds = 0;
};

namespace detail {

struct MergedSupport {
    int dim = 1;
    std::vector<double> pts;
    std::vector<double> c;      // weight difference mu1 - mu2 per point
    std::size_t size() const { return c.size(); }
};

inline MergedSupport merge_supports(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2) {
    if (mu1.dim != mu2.dim) throw SizeError("dual_lipschitz: dimension mismatch");
    const int dim = mu1.dim;
    struct Entry {
        const double* p;
        double c;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < mu1.n_atoms(); ++i) entries.push_back({mu1.atom(i), mu1.w[i]});
    for (std::size_t i = 0; i < mu2.n_atoms(); ++i) entries.push_back({mu2.atom(i), -mu2.w[i]});
    std::stable_sort(entries.begin(), entries.end(), [dim](const Entry& a, const Entry& b) {
        return std::lexicographical_compare(a.p, a.p + dim, b.p, b.p + dim);
    });
    MergedSupport out;
    out.dim = dim;
    for (std::size_t i = 0; i < entries.size();) {
        double c = entries[i].c;
        std::size_t j = i + 1;
        while (j < entries.size() && std::equal(entries[i].p, entries[i].p + dim, entries[j].p)) {
            c += entries[j].c;
            ++j;
        }
        if (std::abs(c) > 1e-15) {
            out.pts.insert(out.pts.end(), entries[i].p, entries[i].p + dim);
            out.c.push_back(c);
        }
        i = j;
    }
    return out;
}

inline double pt_dist(const MergedSupport& s, std::size_t i, std::size_t j) {
    double acc = 0;
    const double* a = s.pts.data() + i * std::size_t(s.dim);
    const double* b = s.pts.data() + j * std::size_t(s.dim);
    for (int d = 0; d < s.dim; ++d) {
        const double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Exact 1-D evaluation. On a sorted line support only consecutive slope
// constraints bind, so for a fixed budget split the best test function is
// found by a forward pass propagating a concave piecewise-linear value
// function; the value is concave in the split, which a golden-section scan
// then maximizes. This avoids the LP entirely for scalar observables.
// ---------------------------------------------------------------------------

struct Bl1dPeak {
    double lo = 0.0, hi = 0.0;   // argmax interval of the forward value function
};

/// Best objective for sup-norm budget M = 1 - L and Lipschitz budget L.
/// When `peaks` is given, records per-atom argmax intervals for backtracking.
inline double bl_1d_for_budget(const MergedSupport& sup, double L,
                               std::vector<Bl1dPeak>* peaks) {
    const std::size_t n = sup.size();
    const double M = 1.0 - L;
    if (peaks) peaks->assign(n, Bl1dPeak{});
    if (n == 0 || M <= 0.0) return 0.0;

    // Concave piecewise-linear V on [-M, M]: breakpoints xs with values ys.
    std::vector<double> xs{-M, M}, ys{sup.c[0] * -M, sup.c[0] * M};
    std::vector<double> nx, ny;
    double peak_value = 0.0;

    auto record_peak = [&](std::size_t atom) {
        double best = ys[0];
        for (double y : ys) best = std::max(best, y);
        peak_value = best;
        if (!peaks) return;
        std::size_t j1 = 0;
        while (ys[j1] != best) ++j1;
        std::size_t j2 = ys.size() - 1;
        while (ys[j2] != best) --j2;
        (*peaks)[atom] = {xs[j1], xs[j2]};
    };
    record_peak(0);

    for (std::size_t i = 1; i < n; ++i) {
        const double r = L * (sup.pts[i] - sup.pts[i - 1]);

        // Dilation: sliding max over radius r around the plateau of the max.
        std::size_t j1 = 0;
        double ymax = ys[0];
        for (std::size_t j = 1; j < ys.size(); ++j)
            if (ys[j] > ymax) { ymax = ys[j]; j1 = j; }
        std::size_t j2 = j1;
        while (j2 + 1 < ys.size() && ys[j2 + 1] == ymax) ++j2;
        nx.clear();
        ny.clear();
        for (std::size_t j = 0; j <= j1; ++j) {
            const double q = xs[j] - r;
            if (nx.empty() || q > nx.back()) { nx.push_back(q); ny.push_back(ys[j]); }
        }
        for (std::size_t j = j2; j < ys.size(); ++j) {
            const double q = xs[j] + r;
            if (nx.empty() || q > nx.back()) { nx.push_back(q); ny.push_back(ys[j]); }
        }

        // Trim the domain back to [-M, M] (the dilation widened it by r).
        auto interp = [&](std::size_t seg, double q) {
            const double span = nx[seg + 1] - nx[seg];
            if (span <= 0.0) return ny[seg];
            const double t = (q - nx[seg]) / span;
            return ny[seg] + t * (ny[seg + 1] - ny[seg]);
        };
        std::size_t a = 0;
        while (a + 1 < nx.size() && nx[a + 1] <= -M) ++a;
        std::size_t b = nx.size() - 1;
        while (b > 0 && nx[b - 1] >= M) --b;
        xs.clear();
        ys.clear();
        xs.push_back(-M);
        ys.push_back(nx[a] >= -M ? ny[a] : interp(a, -M));
        for (std::size_t j = a; j <= b; ++j)
            if (nx[j] > -M && nx[j] < M) { xs.push_back(nx[j]); ys.push_back(ny[j]); }
        xs.push_back(M);
        ys.push_back(nx[b] <= M ? ny[b] : interp(b - 1, M));

        // New atom's contribution.
        for (std::size_t j = 0; j < xs.size(); ++j) ys[j] += sup.c[i] * xs[j];
        record_peak(i);
    }
    return peak_value;
}

/// Full 1-D solve: golden-section over the budget split plus backtracking.
inline void dual_lipschitz_1d(const MergedSupport& sup, DualLipschitzResult& res) {
    const std::size_t n = sup.size();
    double best_l = 0.0, best_v = bl_1d_for_budget(sup, 0.0, nullptr);
    auto consider = [&](double l) {
        const double v = bl_1d_for_budget(sup, l, nullptr);
        if (v > best_v) { best_v = v; best_l = l; }
        return v;
    };
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 1.0;
    double m1 = hi - invphi * (hi - lo), m2 = lo + invphi * (hi - lo);
    double v1 = consider(m1), v2 = consider(m2);
    for (int it = 0; it < 80; ++it) {
        if (v1 < v2) {
            lo = m1;
            m1 = m2;
            v1 = v2;
            m2 = lo + invphi * (hi - lo);
            v2 = consider(m2);
        } else {
            hi = m2;
            m2 = m1;
            v2 = v1;
            m1 = hi - invphi * (hi - lo);
            v1 = consider(m1);
        }
    }

    std::vector<Bl1dPeak> peaks;
    bl_1d_for_budget(sup, best_l, &peaks);
    res.value = std::clamp(best_v, 0.0, 2.0);
    res.l_opt = best_l;
    res.m_opt = 1.0 - best_l;
    res.generation_rounds = 1;
    res.f.assign(n, 0.0);
    if (n == 0) return;
    res.f[n - 1] = std::clamp(0.0, peaks[n - 1].lo, peaks[n - 1].hi);
    for (std::size_t i = n - 1; i-- > 0;) {
        const double r = best_l * (sup.pts[i + 1] - sup.pts[i]);
        const double wlo = res.f[i + 1] - r, whi = res.f[i + 1] + r;
        if (peaks[i].hi < wlo) res.f[i] = wlo;
        else if (peaks[i].lo > whi) res.f[i] = whi;
        else res.f[i] = std::clamp(res.f[i + 1], std::max(peaks[i].lo, wlo),
                                   std::min(peaks[i].hi, whi));
    }
}

} // namespace detail

/// Exact evaluation of the dual-Lipschitz distance. Scalar supports use the
/// closed forward-pass solve; in higher dimension an LP over the split
/// test-function values f = fp - fn plus the budgets (M, L) is solved, with
/// slope constraints added by violation rounds so only the active geometry
/// ever enters the tableau. Supports up to 2000 merged atoms.
inline DualLipschitzResult dual_lipschitz(const DiscreteMeasure& mu1,
                                          const DiscreteMeasure& mu2) {
    mu1.validate();
    mu2.validate();
    detail::MergedSupport sup = detail::merge_supports(mu1, mu2);
    const std::size_t n = sup.size();
    DualLipschitzResult res;
    res.support = sup.pts;
    res.support_size = int(n);
    if (n == 0) return res;
    if (n > 2000)
        throw SizeError("dual_lipschitz: merged support exceeds 2000 atoms; subsample first");
    if (sup.dim == 1) {
        detail::dual_lipschitz_1d(sup, res);
        return res;
    }

    // Variable layout: fp_i = 2i, fn_i = 2i+1, M = 2n, L = 2n+1.
    const int vM = int(2 * n), vL = int(2 * n + 1);
    std::vector<double> obj(2 * n + 2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        obj[2 * i] = sup.c[i];
        obj[2 * i + 1] = -sup.c[i];
    }

    std::vector<LpRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        LpRow box;   // |f_i| <= M  via  fp_i + fn_i <= M
        box.terms = {{int(2 * i), 1.0}, {int(2 * i + 1), 1.0}, {vM, -1.0}};
        rows.push_back(box);
    }
    LpRow budget;    // M + L <= 1
    budget.terms = {{vM, 1.0}, {vL, 1.0}};
    budget.rhs = 1.0;
    rows.push_back(budget);

    std::vector<std::vector<bool>> present(n, std::vector<bool>(n, false));
    auto add_pair = [&](std::size_t i, std::size_t j) {
        const double d = detail::pt_dist(sup, i, j);
        LpRow a;     // f_i - f_j <= L d
        a.terms = {{int(2 * i), 1.0}, {int(2 * i + 1), -1.0},
                   {int(2 * j), -1.0}, {int(2 * j + 1), 1.0}, {vL, -d}};
        rows.push_back(a);
        LpRow b;
        b.terms = {{int(2 * j), 1.0}, {int(2 * j + 1), -1.0},
                   {int(2 * i), -1.0}, {int(2 * i + 1), 1.0}, {vL, -d}};
        rows.push_back(b);
        present[i][j] = present[j][i] = true;
    };

    // Seed: nearest neighbour per atom (in 1-D this is already sufficient).
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = n;
        double bd = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = detail::pt_dist(sup, i, j);
            if (best == n || d < bd) { best = j; bd = d; }
        }
        if (best < n && !present[i][best]) add_pair(i, best);
    }

    DenseSimplex lp;
    LpResult sol;
    for (int round = 0; round < 24; ++round) {
        sol = lp.maximize(obj, rows);
        if (sol.status != LpStatus::optimal)
            throw NumericalError("dual_lipschitz: LP did not reach an optimum");
        res.generation_rounds = round + 1;
        const double L = sol.x[vL];
        struct Viol { double amount; std::size_t i, j; };
        std::vector<Viol> viols;
        for (std::size_t i = 0; i < n; ++i) {
            const double fi = sol.x[2 * i] - sol.x[2 * i + 1];
            for (std::size_t j = i + 1; j < n; ++j) {
                if (present[i][j]) continue;
                const double fj = sol.x[2 * j] - sol.x[2 * j + 1];
                const double v = std::abs(fi - fj) - L * detail::pt_dist(sup, i, j);
                if (v > 1e-9) viols.push_back({v, i, j});
            }
        }
        if (viols.empty()) break;
        std::stable_sort(viols.begin(), viols.end(), [](const Viol& a, const Viol& b) {
            return a.amount > b.amount;
        });
        const std::size_t add = std::min(viols.size(), std::max<std::size_t>(2 * n, 64));
        for (std::size_t k = 0; k < add; ++k) add_pair(viols[k].i, viols[k].j);
        if (round == 23)
            throw NumericalError("dual_lipschitz: constraint generation did not converge");
    }

    res.value = std::clamp(sol.value, 0.0, 2.0);
    res.m_opt = sol.x[vM];
    res.l_opt = sol.x[vL];
    res.f.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.f[i] = sol.x[2 * i] - sol.x[2 * i + 1];
    return res;
}

// ---------------------------------------------------------------------------
// Total variation between densities on a common grid.
// ---------------------------------------------------------------------------

inline double tv_distance_grid(const DensityGrid& a, const DensityGrid& b) {
    if (!a.same_layout(b))
        throw SizeError("tv_distance_grid: grids must share box and shape");
    double s = 0;
    for (std::size_t i = 0; i < a.val.size(); ++i) s += std::abs(a.val[i] - b.val[i]);
    return 0.5 * s * a.cell_volume();
}

// ---------------------------------------------------------------------------
// Block shift maps Psi(z) = z + Phi(z) and pushforward densities.
// ---------------------------------------------------------------------------

/// Perturbation of the identity whose correction lives in the leading
/// `block` coordinates. `translation` marks Phi constant in z.
struct ShiftMap {
    int dim = 1;
    int block = 1;
    bool translation = false;
    std::function<std::vector<double>(const std::vector<double>&)> phi;

    std::vector<double> apply(const std::vector<double>& z) const {
        std::vector<double> out = z;
        const std::vector<double> p = phi(z);
        if (int(p.size()) != dim) throw SizeError("ShiftMap: phi must return dim values");
        for (int d = block; d < dim; ++d)
            if (p[d] != 0.0)
                throw NumericalError("ShiftMap: correction leaks outside the block");
        for (int d = 0; d < dim; ++d) out[d] += p[d];
        return out;
    }

    static ShiftMap translation_map(int dim, int block, std::vector<double> shift) {
        ShiftMap m;
        m.dim = dim;
        m.block = block;
        m.translation = true;
        m.phi = [shift = std::move(shift), dim](const std::vector<double>&) {
            std::vector<double> p(shift);
            p.resize(dim, 0.0);
            return p;
        };
        return m;
    }
};

/// Preimage of y under Psi(z) = z + Phi(z): exact subtraction for
/// translations, Newton iteration with a finite-difference Jacobian otherwise.
inline std::vector<double> invert_shift_map(const ShiftMap& psi, const std::vector<double>& y) {
    if (int(y.size()) != psi.dim) throw SizeError("invert_shift_map: dim mismatch");
    if (psi.translation) {
        const std::vector<double> shift = psi.phi(y);
        std::vector<double> z = y;
        for (int d = 0; d < psi.dim; ++d) z[d] -= shift[d];
        return z;
    }
    const int dim = psi.dim;
    std::vector<double> z = y;
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<double> r = psi.apply(z);
        double rn = 0;
        for (int d = 0; d < dim; ++d) {
            r[d] -= y[d];
            rn = std::max(rn, std::abs(r[d]));
        }
        if (rn <= 1e-12) return z;
        // Forward-difference Jacobian of Psi, then one Newton step.
        std::vector<double> jac(std::size_t(dim) * dim);
        const double step = 1e-6;
        std::vector<double> zp = z;
        const std::vector<double> f0 = psi.apply(z);
        for (int col = 0; col < dim; ++col) {
            zp[col] = z[col] + step;
            const std::vector<double> f1 = psi.apply(zp);
            for (int row = 0; row < dim; ++row)
                jac[std::size_t(row) * dim + col] = (f1[row] - f0[row]) / step;
            zp[col] = z[col];
        }
        // Solve jac * dz = r by Gaussian elimination with partial pivoting.
        std::vector<double> a = jac, b = r;
        for (int k = 0; k < dim; ++k) {
            int piv = k;
            for (int i = k + 1; i < dim; ++i)
                if (std::abs(a[std::size_t(i) * dim + k]) > std::abs(a[std::size_t(piv) * dim + k]))
                    piv = i;
            if (std::abs(a[std::size_t(piv) * dim + k]) < 1e-14)
                throw NumericalError("invert_shift_map: singular Jacobian");
            if (piv != k) {
                for (int j = 0; j < dim; ++j)
                    std::swap(a[std::size_t(k) * dim + j], a[std::size_t(piv) * dim + j]);
                std::swap(b[k], b[piv]);
            }
            for (int i = k + 1; i < dim; ++i) {
                const double f = a[std::size_t(i) * dim + k] / a[std::size_t(k) * dim + k];
                b[i] -= f * b[k];
                for (int j = k; j < dim; ++j)
                    a[std::size_t(i) * dim + j] -= f * a[std::size_t(k) * dim + j];
            }
        }
        for (int i = dim - 1; i >= 0; --i) {
            double s = b[i];
            for (int j = i + 1; j < dim; ++j) s -= a[std::size_t(i) * dim + j] * b[j];
            b[i] = s / a[std::size_t(i) * dim + i];
        }
        for (int d = 0; d < dim; ++d) z[d] -= b[d];
    }
    throw NumericalError("invert_shift_map: Newton did not converge");
}

/// Density of Psi_* ell evaluated pointwise: invert Psi by damped Newton with
/// a finite-difference Jacobian, then apply the change-of-variables factor.
class PushforwardDensity {
  public:
    PushforwardDensity(std::function<double(const std::vector<double>&)> base_pdf,
                       ShiftMap psi)
        : base_(std::move(base_pdf)), psi_(std::move(psi)) {}

    double pdf(const std::vector<double>& y) const {
        if (int(y.size()) != psi_.dim) throw SizeError("PushforwardDensity: dim mismatch");
        if (psi_.translation) {
            const std::vector<double> shift = psi_.phi(y);
            std::vector<double> z = y;
            for (int d = 0; d < psi_.dim; ++d) z[d] -= shift[d];
            return base_(z);
        }
        std::vector<double> z = y;   // initial guess: the identity part
        const int dim = psi_.dim;
        std::vector<double> jac(std::size_t(dim) * dim, 0.0);
        for (int iter = 0; iter < 50; ++iter) {
            std::vector<double> r = psi_.apply(z);
            double rn = 0;
            for (int d = 0; d < dim; ++d) {
                r[d] -= y[d];
                rn = std::max(rn, std::abs(r[d]));
            }
            if (rn <= 1e-12) {
                const double det = jacobian_det(z, &jac);
                if (std::abs(det) < 1e-12)
                    throw NumericalError("pushforward_density: map is not invertible here");
                return base_(z) / std::abs(det);
            }
            jacobian(z, jac);
            solve_dense(jac, r, dim);
            for (int d = 0; d < dim; ++d) z[d] -= r[d];
        }
        throw NumericalError("pushforward_density: Newton inversion failed to converge");
    }

    /// Fill a grid with the pushforward density at cell centers.
    DensityGrid on_grid(const std::vector<int>& shape, const std::vector<double>& lo,
                        const std::vector<double>& hi) const {
        DensityGrid g(shape, lo, hi);
        g.fill([this](const std::vector<double>& x) { return pdf(x); });
        return g;
    }

  private:
    void jacobian(const std::vector<double>& z, std::vector<double>& jac) const {
        const int dim = psi_.dim;
        const double step = 1e-6;
        std::vector<double> zp = z, zm = z;
        for (int col = 0; col < dim; ++col) {
            zp[col] = z[col] + step;
            zm[col] = z[col] - step;
            const std::vector<double> fp = psi_.apply(zp);
            const std::vector<double> fm = psi_.apply(zm);
            for (int row = 0; row < dim; ++row)
                jac[std::size_t(row) * dim + col] = (fp[row] - fm[row]) / (2 * step);
            zp[col] = z[col];
            zm[col] = z[col];
        }
    }

    double jacobian_det(const std::vector<double>& z, std::vector<double>* jac) const {
        const int dim = psi_.dim;
        jacobian(z, *jac);
        std::vector<double> a = *jac;
        double det = 1.0;
        for (int k = 0; k < dim; ++k) {
            int piv = k;
            for (int i = k + 1; i < dim; ++i)
                if (std::abs(a[std::size_t(i) * dim + k]) > std::abs(a[std::size_t(piv) * dim + k]))
                    piv = i;
            if (piv != k) {
                for (int j = 0; j < dim; ++j)
                    std::swap(a[std::size_t(k) * dim + j], a[std::size_t(piv) * dim + j]);
                det = -det;
            }
            const double p = a[std::size_t(k) * dim + k];
            if (std::abs(p) < 1e-14) return 0.0;
            det *= p;
            for (int i = k + 1; i < dim; ++i) {
                const double f = a[std::size_t(i) * dim + k] / p;
                for (int j = k; j < dim; ++j)
                    a[std::size_t(i) * dim + j] -= f * a[std::size_t(k) * dim + j];
            }
        }
        return det;
    }

    static void solve_dense(std::vector<double> a, std::vector<double>& b, int dim) {
        for (int k = 0; k < dim; ++k) {
            int piv = k;
            for (int i = k + 1; i < dim; ++i)
                if (std::abs(a[std::size_t(i) * dim + k]) > std::abs(a[std::size_t(piv) * dim + k]))
                    piv = i;
            if (std::abs(a[std::size_t(piv) * dim + k]) < 1e-14)
                throw NumericalError("pushforward_density: singular Newton system");
            if (piv != k) {
                for (int j = 0; j < dim; ++j)
                    std::swap(a[std::size_t(k) * dim + j], a[std::size_t(piv) * dim + j]);
                std::swap(b[k], b[piv]);
            }
            for (int i = k + 1; i < dim; ++i) {
                const double f = a[std::size_t(i) * dim + k] / a[std::size_t(k) * dim + k];
                b[i] -= f * b[k];
                for (int j = k; j < dim; ++j)
                    a[std::size_t(i) * dim + j] -= f * a[std::size_t(k) * dim + j];
            }
        }
        for (int i = dim - 1; i >= 0; --i) {
            double s = b[i];
            for (int j = i + 1; j < dim; ++j) s -= a[std::size_t(i) * dim + j] * b[j];
            b[i] = s / a[std::size_t(i) * dim + i];
        }
    }

    std::function<double(const std::vector<double>&)> base_;
    ShiftMap psi_;
};

// ---------------------------------------------------------------------------
// Maximal coupling of two densities.
// ---------------------------------------------------------------------------

struct DensityWithSampler {
    std::function<double(const std::vector<double>&)> pdf;
    std::function<std::vector<double>(CounterRng&)> sample;
};

struct MaximalCouplingDraw {
    std::vector<double> x, y;
    bool coalesced = false;
    std::size_t proposals = 0;
};

/// Draws (x, y) with x ~ p, y ~ q and P{x == y} = 1 - TV(p, q): accept the
/// common part with probability min(1, q/p), otherwise sample the residual
/// (q - min(p,q))+ by rejection from q.
inline MaximalCouplingDraw maximal_coupling_densities(const DensityWithSampler& p,
                                                      const DensityWithSampler& q,
                                                      CounterRng& rng,
                                                      std::size_t proposal_cap = 1'000'000) {
    MaximalCouplingDraw draw;
    draw.x = p.sample(rng);
    const double px = p.pdf(draw.x);
    const double qx = q.pdf(draw.x);
    if (px <= 0.0 || rng.uniform01() * px <= qx) {
        draw.y = draw.x;
        draw.coalesced = true;
        return draw;
    }
    for (std::size_t k = 0; k < proposal_cap; ++k) {
        ++draw.proposals;
        std::vector<double> y = q.sample(rng);
        const double qy = q.pdf(y);
        if (qy <= 0.0) continue;
        const double py = p.pdf(y);
        if (rng.uniform01() * qy >= std::min(py, qy)) {
            draw.y = std::move(y);
            return draw;
        }
    }
    throw NumericalError("maximal_coupling_densities: residual rejection cap exhausted");
}

// ---------------------------------------------------------------------------
// Shift-TV verification: TV(ell, Psi_* ell) stays proportional to the size
// kappa of the perturbation, with a bounded ratio across a kappa sweep.
// ---------------------------------------------------------------------------

struct ShiftTvRow {
    double kappa = 0.0;
    double tv = 0.0;
    double ratio = 0.0;
};

struct ShiftTvReport {
    std::vector<ShiftTvRow> rows;
    double ratio_min = 0.0;
    double ratio_max = 0.0;
    bool bounded(double band_factor = 3.0) const {
        return ratio_min > 0.0 && ratio_max <= band_factor * ratio_min;
    }
};

inline ShiftTvReport verify_shift_tv_bound(
    const ProductDensity& ell,
    const std::function<ShiftMap(double)>& family,
    const std::vector<double>& kappas,
    int cells_per_axis = 192) {
    const int dim = ell.dim();
    double kappa_max = 0.0;
    for (double k : kappas) {
        if (k < 0) throw ConfigError("verify_shift_tv_bound: kappa must be nonnegative");
        kappa_max = std::max(kappa_max, k);
    }
    std::vector<int> shape(dim, cells_per_axis);
    std::vector<double> lo(dim), hi(dim);
    for (int d = 0; d < dim; ++d) {
        lo[d] = -ell.scale(d) - kappa_max - 0.05;
        hi[d] = ell.scale(d) + kappa_max + 0.05;
    }
    DensityGrid base(shape, lo, hi);
    base.fill([&](const std::vector<double>& x) { return ell.pdf(x); });

    ShiftTvReport rep;
    for (double kappa : kappas) {
        PushforwardDensity push([&](const std::vector<double>& x) { return ell.pdf(x); },
                                family(kappa));
        const DensityGrid shifted = push.on_grid(shape, lo, hi);
        ShiftTvRow row;
        row.kappa = kappa;
        row.tv = tv_distance_grid(base, shifted);
        row.ratio = kappa > 0 ? row.tv / kappa : 0.0;
        rep.rows.push_back(row);
    }
    bool first = true;
    for (const auto& row : rep.rows) {
        if (row.kappa <= 0) continue;
        if (first) {
            rep.ratio_min = rep.ratio_max = row.ratio;
            first = false;
        } else {
            rep.ratio_min = std::min(rep.ratio_min, row.ratio);
            rep.ratio_max = std::max(rep.ratio_max, row.ratio);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Cost/TV comparison: realize two laws as images of a common base measure,
// one through the shifted map, and check the transport cost at the almost-
// sure displacement threshold against twice the base TV distance.
// ---------------------------------------------------------------------------

struct CostTvCheck {
    double eps = 0.0;
    double cost = 0.0;
    double tv = 0.0;
    double margin = 0.0;
    std::size_t samples = 0;
    bool ok = false;
};

/// U1 maps base points to observations; the second law uses U1 after undoing
/// the shift, plus a bounded discrepancy g with |g| <= g_bound. Then
/// |U1(w) - U2(Psi w)| <= g_bound almost surely, and with eps = g_bound
/// the transport cost is bounded by 2 TV(ell, Psi_* ell) up to sampling error.
inline CostTvCheck cost_tv_inequality_check(
    const ProductDensity& ell, const ShiftMap& psi,
    const std::function<double(const std::vector<double>&)>& u1,
    const std::function<double(const std::vector<double>&)>& g,
    double g_bound, std::size_t n_samples, CounterRng& rng,
    int tv_cells = 4096) {
    if (ell.dim() != psi.dim)
        throw SizeError("cost_tv_inequality_check: base/map dimension mismatch");

    // Empirical laws of U1 under ell and of U2 = U1 o Psi^{-1} + g under ell.
    std::vector<double> a, b;
    a.reserve(n_samples);
    b.reserve(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const std::vector<double> w = ell.sample(rng);
        a.push_back(u1(w));
        const std::vector<double> w2 = ell.sample(rng);
        const std::vector<double> img = psi.apply(w2);   // img ~ Psi_* ell
        b.push_back(u1(w2) + g(img));                    // = U2(img)
    }
    CostTvCheck chk;
    chk.samples = n_samples;
    chk.eps = g_bound;
    chk.cost = transport_cost(DiscreteMeasure::empirical(1, a),
                              DiscreteMeasure::empirical(1, b), chk.eps);

    std::vector<int> shape(ell.dim(), ell.dim() == 1 ? tv_cells : 128);
    std::vector<double> lo(ell.dim()), hi(ell.dim());
    double kappa_pad = 0.3;
    for (int d = 0; d < ell.dim(); ++d) {
        lo[d] = -ell.scale(d) - kappa_pad;
        hi[d] = ell.scale(d) + kappa_pad;
    }
    DensityGrid base(shape, lo, hi);
    base.fill([&](const std::vector<double>& x) { return ell.pdf(x); });
    PushforwardDensity push([&](const std::vector<double>& x) { return ell.pdf(x); }, psi);
    chk.tv = tv_distance_grid(base, push.on_grid(shape, lo, hi));
    chk.margin = 5.0 / std::sqrt(double(n_samples));
    chk.ok = chk.cost <= 2.0 * chk.tv + chk.margin;
    return chk;
}

} // namespace ergo
