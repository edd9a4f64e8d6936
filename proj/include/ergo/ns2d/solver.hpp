#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "../errors.hpp"
#include "elliptic.hpp"
#include "grid.hpp"

namespace ergo::ns2d {

struct NSParams {
    int n = 64;
    double nu = 0.05;
    double dt = 2e-3;

    void validate() const {
        if (n < 8 || n % 2 != 0) throw ConfigError("NSParams: n must be even and >= 8");
        if (nu <= 0.0) throw ConfigError("NSParams: viscosity must be positive");
        if (dt <= 0.0 || dt > 0.5) throw ConfigError("NSParams: dt out of range");
    }
};

namespace detail {

/// Tridiagonal solve (Thomas), overwrites d with the solution.
inline void thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c,
                   std::vector<double>& d, int m) {
    for (int i = 1; i < m; ++i) {
        const double w = a[std::size_t(i)] / b[std::size_t(i - 1)];
        b[std::size_t(i)] -= w * c[std::size_t(i - 1)];
        d[std::size_t(i)] -= w * d[std::size_t(i - 1)];
    }
    d[std::size_t(m - 1)] /= b[std::size_t(m - 1)];
    for (int i = m - 2; i >= 0; --i)
        d[std::size_t(i)] = (d[std::size_t(i)] - c[std::size_t(i)] * d[std::size_t(i + 1)]) /
                            b[std::size_t(i)];
}

} // namespace detail

/// Incompressible solver on the unit square with no-slip walls, for the
/// deviation field (homogeneous boundary data). Semi-implicit time step:
/// second-order upwind advection treated explicitly, Crank-Nicolson
/// diffusion via a Douglas alternating-direction splitting, then an exact
/// discrete Leray projection through the cell-centered Neumann Poisson
/// solve. Inhomogeneous boundary data enters through a lifted field
/// supplied by the caller (advected with the state, diffused explicitly).
class NsSolver {
  public:
    explicit NsSolver(const NSParams& par)
        : par_(par), dom_(par.n), poisson_(par.n) {
        par_.validate();
    }

    const NSParams& params() const { return par_; }
    const SquareDomain& domain() const { return dom_; }

    /// Removes the discrete-divergence part of f in place; the normal
    /// boundary faces are left untouched. After the call max_div is at
    /// roundoff level.
    void leray_project(VelocityField& f) const {
        const int n = par_.n;
        const double h = dom_.h();
        std::vector<double> div(dom_.n_c());
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                div[std::size_t(j) * std::size_t(n) + std::size_t(i)] = f.div_at(i, j);
        const std::vector<double> p = poisson_.solve(div);
        auto pc = [&](int i, int j) { return p[std::size_t(j) * std::size_t(n) + std::size_t(i)]; };
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i) f.at_u(i, j) -= (pc(i, j) - pc(i - 1, j)) / h;
        for (int j = 1; j < n; ++j)
            for (int i = 0; i < n; ++i) f.at_v(i, j) -= (pc(i, j) - pc(i, j - 1)) / h;
    }

    /// One time step of the deviation field `w`. `lift` and `dlift_dt` carry
    /// the boundary data (pass nullptr for the homogeneous problem): the
    /// advected field is w + lift and the lift's viscous and temporal terms
    /// join the explicit forcing. `force` is an optional body force.
    void step(VelocityField& w, const VelocityField* lift = nullptr,
              const VelocityField* dlift_dt = nullptr,
              const VelocityField* force = nullptr) const {
        const int n = par_.n;
        if (w.n != n) throw SizeError("NsSolver: field resolution mismatch");
        const double h = dom_.h();
        const double dt = par_.dt;
        const double c2 = par_.nu * dt / (2.0 * h * h);   // beta / h^2

        // Advected field: full = w + lift.
        VelocityField full = w;
        if (lift) full += *lift;

        // Guard the explicit advection: the material CFL number must stay
        // within the design cap, else the step cannot be trusted.
        if (full.max_abs() * dt / h > 0.5 + 1e-12)
            throw NumericalError("NsSolver: advective CFL above 0.5; reduce dt");
        const double e_guard = w.l2();

        // Explicit right-hand side G on the interior unknowns.
        VelocityField G(dom_);
        advect(full, G);   // G = -(full . grad) full
        if (force) G += *force;
        if (lift) {
            add_laplacian(*lift, par_.nu, G);   // + nu * laplace(lift)
            if (dlift_dt) G -= *dlift_dt;
        }

        // Douglas pass, u component. Unknowns: i in [1,n-1], j in [0,n-1].
        {
            std::vector<double> a(std::size_t(n) + 1), b(std::size_t(n) + 1),
                c(std::size_t(n) + 1), d(std::size_t(n) + 1);
            // Stage 1: (I - beta Dxx) utld = (I + beta Dxx + 2 beta Dyy) w + dt G.
            VelocityField utld = w;
            for (int j = 0; j < n; ++j) {
                for (int i = 1; i < n; ++i) {
                    const double dxx = w.at_u(i + 1, j) - 2.0 * w.at_u(i, j) + w.at_u(i - 1, j);
                    const double dyy = dyy_u(w, i, j);
                    d[std::size_t(i - 1)] =
                        w.at_u(i, j) + c2 * dxx + 2.0 * c2 * dyy + dt * G.at_u(i, j);
                    a[std::size_t(i - 1)] = -c2;
                    b[std::size_t(i - 1)] = 1.0 + 2.0 * c2;
                    c[std::size_t(i - 1)] = -c2;
                }
                detail::thomas(a, b, c, d, n - 1);
                for (int i = 1; i < n; ++i) utld.at_u(i, j) = d[std::size_t(i - 1)];
            }
            // Stage 2: (I - beta Dyy) w_new = utld - beta Dyy w.
            for (int i = 1; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    d[std::size_t(j)] = utld.at_u(i, j) - c2 * dyy_u(w, i, j);
                    a[std::size_t(j)] = -c2;
                    b[std::size_t(j)] = 1.0 + ((j == 0 || j == n - 1) ? 3.0 : 2.0) * c2;
                    c[std::size_t(j)] = -c2;
                }
                detail::thomas(a, b, c, d, n);
                for (int j = 0; j < n; ++j) w.at_u(i, j) = d[std::size_t(j)];
            }
        }

        // Douglas pass, v component. Unknowns: i in [0,n-1], j in [1,n-1].
        {
            std::vector<double> a(std::size_t(n) + 1), b(std::size_t(n) + 1),
                c(std::size_t(n) + 1), d(std::size_t(n) + 1);
            VelocityField vtld = w;
            for (int j = 1; j < n; ++j) {
                for (int i = 0; i < n; ++i) {
                    const double dxx = dxx_v(w, i, j);
                    const double dyy = w.at_v(i, j + 1) - 2.0 * w.at_v(i, j) + w.at_v(i, j - 1);
                    d[std::size_t(i)] =
                        w.at_v(i, j) + c2 * dxx + 2.0 * c2 * dyy + dt * G.at_v(i, j);
                    a[std::size_t(i)] = -c2;
                    b[std::size_t(i)] = 1.0 + ((i == 0 || i == n - 1) ? 3.0 : 2.0) * c2;
                    c[std::size_t(i)] = -c2;
                }
                detail::thomas(a, b, c, d, n);
                for (int i = 0; i < n; ++i) vtld.at_v(i, j) = d[std::size_t(i)];
            }
            // Stage 2: (I - beta Dyy) w_new = vtld - beta Dyy w.
            for (int i = 0; i < n; ++i) {
                for (int j = 1; j < n; ++j) {
                    const double dyy = w.at_v(i, j + 1) - 2.0 * w.at_v(i, j) + w.at_v(i, j - 1);
                    d[std::size_t(j - 1)] = vtld.at_v(i, j) - c2 * dyy;
                    a[std::size_t(j - 1)] = -c2;
                    b[std::size_t(j - 1)] = 1.0 + 2.0 * c2;
                    c[std::size_t(j - 1)] = -c2;
                }
                detail::thomas(a, b, c, d, n - 1);
                for (int j = 1; j < n; ++j) w.at_v(i, j) = d[std::size_t(j - 1)];
            }
        }

        leray_project(w);

        // A norm doubling within one step (beyond what any bounded forcing
        // could inject) signals a numerical instability, not dynamics.
        if (!(w.l2() <= 2.0 * e_guard + 1.0))
            throw NumericalError("NsSolver: velocity norm doubled within one step; reduce dt");
    }

    /// Dirichlet energy <-L f, f> of the scheme's diffusion operator, in the
    /// units of h1_semi squared. Tangential components reflect across the
    /// no-slip walls with a sign flip (the wall sits midway between the ghost
    /// and the first face), which adds a 2*f^2 wall-layer term per
    /// wall-adjacent sample that plain one-sided interior differences miss.
    double dirichlet_form(const VelocityField& f) const {
        const int n = par_.n;
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double d = f.at_u(i + 1, j) - f.at_u(i, j);
                s += d * d;
            }
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i <= n; ++i) {
                const double d = f.at_u(i, j + 1) - f.at_u(i, j);
                s += d * d;
            }
        for (int i = 0; i <= n; ++i)
            s += 2.0 * (f.at_u(i, 0) * f.at_u(i, 0) + f.at_u(i, n - 1) * f.at_u(i, n - 1));
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i + 1 < n; ++i) {
                const double d = f.at_v(i + 1, j) - f.at_v(i, j);
                s += d * d;
            }
        for (int j = 0; j <= n; ++j)
            s += 2.0 * (f.at_v(0, j) * f.at_v(0, j) + f.at_v(n - 1, j) * f.at_v(n - 1, j));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double d = f.at_v(i, j + 1) - f.at_v(i, j);
                s += d * d;
            }
        return s;
    }

    /// Energy bookkeeping of one homogeneous step: change, viscous
    /// dissipation, forcing injection and the unexplained remainder.
    struct EnergyAudit {
        double e_before = 0.0;
        double e_after = 0.0;
        double dissipation = 0.0;   // nu * <-L u, u> * dt, midpoint field
        double injection = 0.0;     // <force, u> * dt, midpoint field
        double residual = 0.0;      // e_after - e_before + dissipation - injection
    };

    EnergyAudit energy_audit(const VelocityField& before, const VelocityField& after,
                             const VelocityField* force = nullptr) const {
        EnergyAudit au;
        au.e_before = before.energy();
        au.e_after = after.energy();
        VelocityField mid = before;
        mid += after;
        mid *= 0.5;
        au.dissipation = par_.nu * dirichlet_form(mid) * par_.dt;
        if (force) {
            const double h2 = 1.0 / double(par_.n) / double(par_.n);
            double s = 0.0;
            for (std::size_t k = 0; k < mid.u.size(); ++k) s += mid.u[k] * force->u[k];
            for (std::size_t k = 0; k < mid.v.size(); ++k) s += mid.v[k] * force->v[k];
            au.injection = s * h2 * par_.dt;
        }
        au.residual = au.e_after - au.e_before + au.dissipation - au.injection;
        return au;
    }

    /// Unforced decay from w0 over n_steps; returns the energy history and
    /// whether it decayed monotonically at the Poincare-type rate or better.
    struct DecayProbe {
        std::vector<double> energy;
        double worst_ratio = 0.0;   // max one-step energy ratio
        bool monotone = true;
    };

    DecayProbe dissipativity_probe(VelocityField w, int n_steps) const {
        DecayProbe pr;
        pr.energy.push_back(w.energy());
        for (int k = 0; k < n_steps; ++k) {
            step(w);
            pr.energy.push_back(w.energy());
            const double prev = pr.energy[pr.energy.size() - 2];
            const double ratio = prev > 0.0 ? pr.energy.back() / prev : 0.0;
            pr.worst_ratio = std::max(pr.worst_ratio, ratio);
            if (pr.energy.back() > prev + 1e-15) pr.monotone = false;
        }
        return pr;
    }

  private:
    // Ghost-reflected tangential values across the no-slip walls.
    double dyy_u(const VelocityField& w, int i, int j) const {
        const int n = par_.n;
        const double lo = j > 0 ? w.at_u(i, j - 1) : -w.at_u(i, 0);
        const double hi = j < n - 1 ? w.at_u(i, j + 1) : -w.at_u(i, n - 1);
        return hi - 2.0 * w.at_u(i, j) + lo;
    }
    double dxx_v(const VelocityField& w, int i, int j) const {
        const int n = par_.n;
        const double lo = i > 0 ? w.at_v(i - 1, j) : -w.at_v(0, j);
        const double hi = i < n - 1 ? w.at_v(i + 1, j) : -w.at_v(n - 1, j);
        return hi - 2.0 * w.at_v(i, j) + lo;
    }

    // Value helpers with ghost reflection for the advection stencils. For u:
    // normal walls (x) carry Dirichlet face values, tangential walls (y)
    // reflect with sign flip about the no-slip wall.
    double uval(const VelocityField& f, int i, int j) const {
        const int n = par_.n;
        if (j < 0) return -uval(f, i, -1 - j);
        if (j > n - 1) return -uval(f, i, 2 * n - 1 - j);
        if (i < 0) return 2.0 * f.at_u(0, j) - uval(f, -i, j);
        if (i > n) return 2.0 * f.at_u(n, j) - uval(f, 2 * n - i, j);
        return f.at_u(i, j);
    }
    double vval(const VelocityField& f, int i, int j) const {
        const int n = par_.n;
        if (i < 0) return -vval(f, -1 - i, j);
        if (i > n - 1) return -vval(f, 2 * n - 1 - i, j);
        if (j < 0) return 2.0 * f.at_v(i, 0) - vval(f, i, -j);
        if (j > n) return 2.0 * f.at_v(i, n) - vval(f, i, 2 * n - j);
        return f.at_v(i, j);
    }

    /// G -= (full . grad) full on the interior unknowns, second-order upwind
    /// with first-order fallback against the walls.
    void advect(const VelocityField& f, VelocityField& G) const {
        const int n = par_.n;
        const double h = dom_.h();
        auto upwind = [h](double vel, double fm2, double fm1, double f0, double fp1, double fp2) {
            if (vel >= 0.0) return vel * (3.0 * f0 - 4.0 * fm1 + fm2) / (2.0 * h);
            return vel * (-3.0 * f0 + 4.0 * fp1 - fp2) / (2.0 * h);
        };
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i) {
                const double uc = f.at_u(i, j);
                const double vc = 0.25 * (vval(f, i - 1, j) + vval(f, i, j) +
                                          vval(f, i - 1, j + 1) + vval(f, i, j + 1));
                const double ax = upwind(uc, uval(f, i - 2, j), uval(f, i - 1, j), uc,
                                         uval(f, i + 1, j), uval(f, i + 2, j));
                const double ay = upwind(vc, uval(f, i, j - 2), uval(f, i, j - 1), uc,
                                         uval(f, i, j + 1), uval(f, i, j + 2));
                G.at_u(i, j) -= ax + ay;
            }
        for (int j = 1; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double vc = f.at_v(i, j);
                const double uc = 0.25 * (uval(f, i, j - 1) + uval(f, i + 1, j - 1) +
                                          uval(f, i, j) + uval(f, i + 1, j));
                const double ax = upwind(uc, vval(f, i - 2, j), vval(f, i - 1, j), vc,
                                         vval(f, i + 1, j), vval(f, i + 2, j));
                const double ay = upwind(vc, vval(f, i, j - 2), vval(f, i, j - 1), vc,
                                         vval(f, i, j + 1), vval(f, i, j + 2));
                G.at_v(i, j) -= ax + ay;
            }
    }

    /// G += scale * laplace(f) on the interior unknowns (ghost-reflected).
    void add_laplacian(const VelocityField& f, double scale, VelocityField& G) const {
        const int n = par_.n;
        const double h2 = dom_.h() * dom_.h();
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i) {
                const double dxx = f.at_u(i + 1, j) - 2.0 * f.at_u(i, j) + f.at_u(i - 1, j);
                const double dyy = dyy_u(f, i, j);
                G.at_u(i, j) += scale * (dxx + dyy) / h2;
            }
        for (int j = 1; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double dxx = dxx_v(f, i, j);
                const double dyy = f.at_v(i, j + 1) - 2.0 * f.at_v(i, j) + f.at_v(i, j - 1);
                G.at_v(i, j) += scale * (dxx + dyy) / h2;
            }
    }

    NSParams par_;
    SquareDomain dom_;
    CellNeumannPoisson poisson_;
};

} // namespace ergo::ns2d
