#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "noise.hpp"
#include "system.hpp"

namespace ergo {

// ---------------------------------------------------------------------------
// Small explicit systems used to exercise the whole pipeline against
// independently computable answers.
// ---------------------------------------------------------------------------

/// Diagonal-linear map with additive noise in the leading coordinate(s),
/// optionally clamped to the box [-box, box]^dim so unstable directions stay
/// inside a compact set. The clamp is 1-Lipschitz componentwise, so it never
/// degrades a contraction estimate.
class ToySystem : public SystemMap {
  public:
    static ToySystem affine_1d(double a = 0.5, double b = 0.5,
                               const char* density = "uniform") {
        return ToySystem({a}, make_noise({b}, density), /*box=*/0.0);
    }

    static ToySystem affine_2d(double a1 = 0.5, double a2 = 0.25,
                               double b1 = 0.5, double b2 = 0.35,
                               const char* density = "uniform") {
        return ToySystem({a1, a2}, make_noise({b1, b2}, density), 0.0);
    }

    /// Unstable first coordinate, noise only in that coordinate, box clamp.
    static ToySystem controlled(double a1 = 1.2, double a2 = 0.3, double b1 = 0.5,
                                double box = 1.0, const char* density = "uniform") {
        return ToySystem({a1, a2}, make_noise({b1, 0.0}, density), box);
    }

    int dim() const override { return int(a_.size()); }
    const NoiseModel& noise() const override { return noise_; }
    double radius() const override { return radius_; }

    StateVector step(const StateVector& u, const NoiseVector& xi) const override {
        StateVector v = u;
        for (int d = 0; d < dim(); ++d) {
            double y = a_[d] * u.x[d];
            if (d < noise_.n_modes()) y += noise_.coeff(xi, d);
            if (box_ > 0.0) y = std::clamp(y, -box_, box_);
            v.x[d] = y;
        }
        return v;
    }

    const std::vector<double>& a_diag() const { return a_; }
    double box() const { return box_; }
    bool clamped() const { return box_ > 0.0; }

  private:
    static NoiseModel make_noise(const std::vector<double>& amps, const char* density) {
        std::vector<ModeDensity> dens;
        for (std::size_t j = 0; j < amps.size(); ++j)
            dens.push_back(ModeDensity::by_name(density));
        return NoiseModel(amps, std::move(dens));
    }

    ToySystem(std::vector<double> a, NoiseModel nm, double box)
        : a_(std::move(a)), noise_(std::move(nm)), box_(box) {
        if (box_ > 0.0) {
            radius_ = box_ * std::sqrt(double(dim()));
        } else {
            double r2 = 0.0;
            for (int d = 0; d < dim(); ++d) {
                if (std::abs(a_[d]) >= 1.0)
                    throw ConfigError("ToySystem: unclamped map must be contracting");
                const double amp = d < noise_.n_modes() ? noise_.amplitude(d) : 0.0;
                const double rd = amp / (1.0 - std::abs(a_[d]));
                r2 += rd * rd;
            }
            radius_ = std::sqrt(r2);
        }
    }

    std::vector<double> a_;
    NoiseModel noise_;
    double box_ = 0.0;
    double radius_ = 0.0;
};

// ---------------------------------------------------------------------------
// Stationary density of u -> a u + b xi in one dimension, by iterating the
// transfer operator on a grid until total variation stalls. This is an
// independent fixed-point computation, not a sampling estimate.
// ---------------------------------------------------------------------------

inline DensityGrid exact_stationary_density_1d(double a, double b, const ModeDensity& p,
                                               int cells = 2048, double tol = 1e-10,
                                               int max_iter = 200) {
    if (std::abs(a) >= 1.0)
        throw ConfigError("exact_stationary_density_1d: |a| must be < 1");
    if (b <= 0.0) throw ConfigError("exact_stationary_density_1d: b must be positive");
    const double radius = b / (1.0 - std::abs(a));
    DensityGrid g({cells}, {-radius}, {radius});
    const double h = g.step(0);
    // Noise density at a point.
    auto noise_pdf = [&](double y) { return p.pdf(y / b) / b; };
    // Start from the noise law itself (the k = 0 term of the series).
    for (int i = 0; i < cells; ++i) g.val[i] = noise_pdf(g.center(i, 0));
    g.normalize();
    std::vector<double> next(cells);
    for (int it = 0; it < max_iter; ++it) {
        for (int i = 0; i < cells; ++i) {
            const double y = g.center(i, 0);
            double acc = 0;
            for (int j = 0; j < cells; ++j)
                acc += g.val[j] * noise_pdf(y - a * g.center(j, 0));
            next[i] = acc * h;
        }
        double mass = 0;
        for (double v : next) mass += v * h;
        for (double& v : next) v /= mass;
        double diff = 0;
        for (int i = 0; i < cells; ++i) diff += std::abs(next[i] - g.val[i]);
        diff *= 0.5 * h;
        g.val = next;
        if (diff < tol) return g;
    }
    throw NumericalError("exact_stationary_density_1d: transfer iteration did not settle");
}

/// Distance bound along the synchronous coupling of u -> a u + noise from two
/// starts d0 apart: the laws at step k differ by at most min(2, |a|^k d0) in
/// the dual-Lipschitz metric.
inline std::vector<double> synchronous_coupling_bound(double a, double d0, int k_max) {
    std::vector<double> bound;
    double d = d0;
    for (int k = 0; k <= k_max; ++k) {
        bound.push_back(std::min(2.0, d));
        d *= std::abs(a);
    }
    return bound;
}

// ---------------------------------------------------------------------------
// Brute-force oracles. These recompute transport quantities by exhaustive
// methods so the optimization code can be validated against them.
// ---------------------------------------------------------------------------

struct BruteForceBl {
    double value = 0.0;
    double best_lip = 0.0;
};

/// Dual-Lipschitz distance in one dimension by direct search: scan the
/// Lipschitz budget, and for each budget maximize the objective over test
/// functions on a value grid with a sliding-window dynamic program. Only
/// consecutive-gap slope constraints are needed on a sorted 1-D support.
inline BruteForceBl brute_force_bl_distance_1d(const DiscreteMeasure& mu1,
                                               const DiscreteMeasure& mu2,
                                               int lip_grid = 501, double f_step = 1e-3) {
    if (mu1.dim != 1 || mu2.dim != 1)
        throw SizeError("brute_force_bl_distance_1d: one-dimensional measures only");
    mu1.validate();
    mu2.validate();
    struct Atom {
        double x, c;
    };
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < mu1.n_atoms(); ++i) atoms.push_back({mu1.pts[i], mu1.w[i]});
    for (std::size_t i = 0; i < mu2.n_atoms(); ++i) atoms.push_back({mu2.pts[i], -mu2.w[i]});
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.x < b.x; });
    std::vector<Atom> merged;
    for (const Atom& a : atoms) {
        if (!merged.empty() && merged.back().x == a.x) merged.back().c += a.c;
        else merged.push_back(a);
    }
    const std::size_t n = merged.size();
    if (n == 0) return {};
    if (n > 400) throw SizeError("brute_force_bl_distance_1d: support too large");

    BruteForceBl best;
    for (int ls = 0; ls < lip_grid; ++ls) {
        const double L = double(ls) / double(lip_grid - 1);
        const double M = 1.0 - L;
        // With no sup-norm budget the test function is identically zero and the
        // value grid collapses to the single point 0.
        const int half = M > 0.0 ? std::max(1, int(std::ceil(M / f_step))) : 0;
        const int G = 2 * half + 1;   // f values M * (g - half) / half
        auto fval = [&](int g) {
            return half == 0 ? 0.0 : M * double(g - half) / double(half);
        };
        std::vector<double> dp(G), ndp(G);
        for (int g = 0; g < G; ++g) dp[g] = merged[0].c * fval(g);
        for (std::size_t i = 1; i < n; ++i) {
            const double reach = L * (merged[i].x - merged[i - 1].x);
            int win = 0;
            if (half > 0) {
                // Grid steps reachable under the slope budget; clamp before the
                // double -> int cast so huge ratios cannot overflow.
                const double steps = reach * double(half) / M + 1e-12;
                win = steps >= double(G) ? G - 1 : int(std::floor(steps));
            }
            // Sliding-window maximum of dp over [g - win, g + win].
            std::deque<int> dq;
            int added = -1;
            for (int g = 0; g < G; ++g) {
                const int hi_idx = std::min(G - 1, g + win);
                while (added < hi_idx) {
                    ++added;
                    while (!dq.empty() && dp[dq.back()] <= dp[added]) dq.pop_back();
                    dq.push_back(added);
                }
                while (dq.front() < g - win) dq.pop_front();
                ndp[g] = merged[i].c * fval(g) + dp[dq.front()];
            }
            dp.swap(ndp);
        }
        const double v = *std::max_element(dp.begin(), dp.end());
        if (v > best.value) {
            best.value = v;
            best.best_lip = L;
        }
    }
    return best;
}

/// Exact transport cost at threshold eps for small instances, from the
/// covering form of the duality: the mass matchable within eps equals
/// min over subsets A of left atoms of (1 - mass(A)) + mass(neighbors(A)).
inline double brute_force_transport_cost(const DiscreteMeasure& mu1,
                                         const DiscreteMeasure& mu2, double eps) {
    mu1.validate();
    mu2.validate();
    const std::size_t n1 = mu1.n_atoms(), n2 = mu2.n_atoms();
    if (n1 > 20 || n2 > 32)
        throw SizeError("brute_force_transport_cost: too many atoms");
    std::vector<std::uint32_t> nbr(n1, 0);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            if (atom_dist(mu1, i, mu2, j) <= eps) nbr[i] |= (std::uint32_t(1) << j);
    double matched = 1.0;   // subset A = empty
    for (std::uint32_t mask = 1; mask < (std::uint32_t(1) << n1); ++mask) {
        double wa = 0;
        std::uint32_t reach = 0;
        for (std::size_t i = 0; i < n1; ++i)
            if (mask & (std::uint32_t(1) << i)) {
                wa += mu1.w[i];
                reach |= nbr[i];
            }
        double wr = 0;
        for (std::size_t j = 0; j < n2; ++j)
            if (reach & (std::uint32_t(1) << j)) wr += mu2.w[j];
        matched = std::min(matched, (1.0 - wa) + wr);
    }
    return std::clamp(1.0 - matched, 0.0, 1.0);
}

} // namespace ergo
