#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "../errors.hpp"
#include "elliptic.hpp"
#include "grid.hpp"

namespace ergo::ns2d {

/// Integrates the outward normal trace along the perimeter into stream
/// function values at the boundary nodes (d psi / ds = normal velocity,
/// s anticlockwise). The walk must close: a net volume flux above the
/// tolerance is rejected. The constant is fixed by zero mean over the
/// boundary nodes.
inline StreamData tangential_antiderivative(const BoundaryTrace& trace, double tol = 1e-10) {
    const int n = trace.n;
    const double h = 1.0 / double(n);
    std::vector<double> w(std::size_t(4 * n) + 1, 0.0);
    for (std::size_t k = 0; k < trace.size(); ++k) w[k + 1] = w[k] + h * trace.normal[k];
    double scale = 1.0;
    for (double a : trace.normal) scale = std::max(scale, std::abs(a));
    if (std::abs(w.back()) > tol * scale)
        throw NumericalError("tangential_antiderivative: net boundary flux does not close");
    double mean = 0.0;
    for (std::size_t k = 0; k < std::size_t(4 * n); ++k) mean += w[k];
    mean /= double(4 * n);
    for (double& a : w) a -= mean;

    SquareDomain dom(n);
    StreamData g(dom);
    for (int i = 0; i <= n; ++i) g.at(i, 0) = w[std::size_t(i)];
    for (int j = 0; j <= n; ++j) g.at(n, j) = w[std::size_t(n + j)];
    for (int i = n; i >= 0; --i) g.at(i, n) = w[std::size_t(2 * n + (n - i))];
    for (int j = n; j >= 1; --j) g.at(0, j) = w[std::size_t(3 * n + (n - j))];
    return g;
}

/// Divergence-free extension of boundary data into the square: the stream
/// function is the harmonic extension of the integrated normal trace plus a
/// clamped biharmonic correction whose boundary slope reproduces the
/// prescribed tangential velocity. The normal trace of the result matches
/// the data exactly on the staggered faces; the tangential trace matches to
/// discretisation accuracy.
struct ExtensionResult {
    StreamData psi;            // total stream function
    StreamData harmonic;       // normal-trace part
    StreamData correction;     // tangential correction part
    VelocityField velocity;
};

inline ExtensionResult extend_boundary_field(const BoundaryTrace& trace) {
    const int n = trace.n;
    SquareDomain dom(n);
    const StreamData w = tangential_antiderivative(trace);
    const NodalDirichletPoisson poisson(n);
    const StreamData zero(dom);
    const StreamData p = poisson.solve(zero, w);

    // Outward normal slope of the harmonic part at the non-corner boundary
    // nodes, one-sided second order.
    const double h = dom.h();
    StreamData dp(dom);
    for (int i = 1; i < n; ++i) {
        dp.at(i, 0) = -(-1.5 * p.at(i, 0) + 2.0 * p.at(i, 1) - 0.5 * p.at(i, 2)) / h;
        dp.at(i, n) = (1.5 * p.at(i, n) - 2.0 * p.at(i, n - 1) + 0.5 * p.at(i, n - 2)) / h;
    }
    for (int j = 1; j < n; ++j) {
        dp.at(0, j) = -(-1.5 * p.at(0, j) + 2.0 * p.at(1, j) - 0.5 * p.at(2, j)) / h;
        dp.at(n, j) = (1.5 * p.at(n, j) - 2.0 * p.at(n - 1, j) + 0.5 * p.at(n - 2, j)) / h;
    }

    // The anticlockwise tangential velocity equals minus the outward normal
    // slope of the stream function on every wall, so the correction must
    // carry slope -g_t - dp/dn. Face-midpoint data is averaged to the nodes.
    StreamData target(dom);
    auto tangential_at = [&](int wall, int node) {
        // node in [1, n-1] along the wall; samples wall*n + node - 1, + node.
        const std::size_t base = std::size_t(wall) * std::size_t(n);
        return 0.5 * (trace.tangential[base + std::size_t(node - 1)] +
                      trace.tangential[base + std::size_t(node)]);
    };
    for (int i = 1; i < n; ++i) {
        target.at(i, 0) = -tangential_at(0, i) - dp.at(i, 0);
        target.at(i, n) = -tangential_at(2, n - i) - dp.at(i, n);
    }
    for (int j = 1; j < n; ++j) {
        target.at(n, j) = -tangential_at(1, j) - dp.at(n, j);
        target.at(0, j) = -tangential_at(3, n - j) - dp.at(0, j);
    }

    const ClampedBiharmonic biharm(n);
    const StreamData q = biharm.solve(zero, &target);

    ExtensionResult out;
    out.harmonic = p;
    out.correction = q;
    out.psi = p;
    for (std::size_t k = 0; k < out.psi.psi.size(); ++k) out.psi.psi[k] += q.psi[k];
    out.velocity = out.psi.to_velocity();
    return out;
}

/// Logarithmic boundary-layer cutoff profile for the sharpened extension:
/// 1 on the walls, 0 at distance d_outer, with slope delta / d in between,
/// so multiplying a stream function by it costs only O(delta) in H1. The
/// radii are clamped to what the mesh resolves; `strict` records whether
/// the requested profile survived unclamped.
struct HopfCutoff {
    double delta = 0.1;
    double d_inner = 0.0;
    double d_outer = 0.0;
    bool strict = true;

    HopfCutoff(double delta_, int n) : delta(delta_) {
        if (delta_ <= 0.0 || delta_ >= 0.5)
            throw ConfigError("HopfCutoff: delta must lie in (0,0.5)");
        const double h = 1.0 / double(n);
        const double requested = 2.0 * std::exp(-1.0 / delta_);
        d_outer = std::max(requested, 4.0 * h);
        strict = requested >= 4.0 * h;
        d_inner = d_outer * std::exp(-1.0 / delta_);
    }

    double value(double d) const {
        if (d <= d_inner) return 1.0;
        if (d >= d_outer) return 0.0;
        return std::log(d_outer / d) / std::log(d_outer / d_inner);
    }
};

/// Distance from a point of the closed unit square to its boundary.
inline double wall_distance(double x, double y) {
    return std::min(std::min(x, 1.0 - x), std::min(y, 1.0 - y));
}

/// Boundary-concentrated divergence-free extension: the plain extension's
/// stream function multiplied by the logarithmic cutoff. The normal trace is
/// preserved exactly (the cutoff is 1 on the walls); the field vanishes at
/// wall distance d_outer and its energy shrinks with delta.
struct HopfExtensionResult {
    StreamData psi;
    VelocityField velocity;
    HopfCutoff cutoff;
};

inline HopfExtensionResult hopf_extension(const BoundaryTrace& trace, double delta) {
    const int n = trace.n;
    const ExtensionResult base = extend_boundary_field(trace);
    HopfExtensionResult out{StreamData(SquareDomain(n)), VelocityField(), HopfCutoff(delta, n)};
    const double h = 1.0 / double(n);
    out.psi = base.psi;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            out.psi.at(i, j) *= out.cutoff.value(wall_distance(double(i) * h, double(j) * h));
    out.velocity = out.psi.to_velocity();
    return out;
}

/// Discrete advection pairing (<a, grad> b, c): both vector fields are
/// collocated at cell centers and the gradient of b uses centered
/// differences (one-sided at boundary cells), integrated with the cell
/// quadrature h^2. Used to measure how strongly a boundary-layer field is
/// stretched by interior flows.
inline double advection_pairing(const VelocityField& a, const VelocityField& b,
                                const VelocityField& c) {
    if (a.n != b.n || a.n != c.n) throw SizeError("advection_pairing: resolution mismatch");
    const int n = a.n;
    const double h = 1.0 / double(n);
    const std::size_t nn = std::size_t(n) * std::size_t(n);
    auto centers = [&](const VelocityField& f, std::vector<double>& fx, std::vector<double>& fy) {
        fx.resize(nn);
        fy.resize(nn);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                fx[std::size_t(j) * std::size_t(n) + std::size_t(i)] =
                    0.5 * (f.at_u(i, j) + f.at_u(i + 1, j));
                fy[std::size_t(j) * std::size_t(n) + std::size_t(i)] =
                    0.5 * (f.at_v(i, j) + f.at_v(i, j + 1));
            }
    };
    std::vector<double> ax, ay, bx, by, cx, cy;
    centers(a, ax, ay);
    centers(b, bx, by);
    centers(c, cx, cy);
    auto at = [&](const std::vector<double>& g, int i, int j) {
        return g[std::size_t(j) * std::size_t(n) + std::size_t(i)];
    };
    auto ddx = [&](const std::vector<double>& g, int i, int j) {
        if (i == 0) return (at(g, 1, j) - at(g, 0, j)) / h;
        if (i == n - 1) return (at(g, n - 1, j) - at(g, n - 2, j)) / h;
        return (at(g, i + 1, j) - at(g, i - 1, j)) / (2.0 * h);
    };
    auto ddy = [&](const std::vector<double>& g, int i, int j) {
        if (j == 0) return (at(g, i, 1) - at(g, i, 0)) / h;
        if (j == n - 1) return (at(g, i, n - 1) - at(g, i, n - 2)) / h;
        return (at(g, i, j + 1) - at(g, i, j - 1)) / (2.0 * h);
    };
    double s = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double gx = at(ax, i, j) * ddx(bx, i, j) + at(ay, i, j) * ddy(bx, i, j);
            const double gy = at(ax, i, j) * ddx(by, i, j) + at(ay, i, j) * ddy(by, i, j);
            s += gx * at(cx, i, j) + gy * at(cy, i, j);
        }
    return s * h * h;
}

} // namespace ergo::ns2d
