#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "state.hpp"
#include "system.hpp"

namespace ergo {

/// Local feedback law: given a close pair (u, u') and the noise about to be
/// applied to u, produce a correction on the leading noise modes (in the
/// unit xi coordinates) so that driving u' with the corrected noise contracts
/// the pair by the certified factor q whenever dist(u, u') <= delta.
struct Stabiliser {
    int block = 1;                 // corrected modes are 0 .. block-1
    double q = 0.5;                // certified contraction factor
    double delta = 0.1;            // validity radius for the pair distance
    double c_bound = 1.0;          // ||phi|| <= c_bound * dist(u, u')^alpha
    double alpha = 1.0;
    bool eta_independent = true;   // phi ignores the noise argument

    std::function<std::vector<double>(const StateVector&, const StateVector&,
                                      const NoiseVector&)>
        phi;

    std::vector<double> correction(const StateVector& u, const StateVector& up,
                                   const NoiseVector& eta) const {
        std::vector<double> c = phi(u, up, eta);
        if (int(c.size()) != block)
            throw SizeError("Stabiliser: correction must have block length");
        return c;
    }

    /// Max absolute entry of the finite-difference Jacobian of phi with
    /// respect to the xi coordinates of the noise.
    double d_eta_max(const StateVector& u, const StateVector& up, const NoiseVector& eta,
                     double step = 1e-5) const {
        if (eta_independent) return 0.0;
        double worst = 0.0;
        NoiseVector ep = eta, em = eta;
        for (std::size_t j = 0; j < eta.xi.size(); ++j) {
            ep.xi[j] = eta.xi[j] + step;
            em.xi[j] = eta.xi[j] - step;
            const std::vector<double> fp = correction(u, up, ep);
            const std::vector<double> fm = correction(u, up, em);
            for (int i = 0; i < block; ++i)
                worst = std::max(worst, std::abs(fp[i] - fm[i]) / (2 * step));
            ep.xi[j] = eta.xi[j];
            em.xi[j] = eta.xi[j];
        }
        return worst;
    }
};

/// Applies a stabiliser correction to a noise draw (xi coordinates).
inline NoiseVector apply_correction(const NoiseVector& eta, const std::vector<double>& c) {
    NoiseVector out = eta;
    for (std::size_t j = 0; j < c.size() && j < out.xi.size(); ++j) out.xi[j] += c[j];
    return out;
}

/// Exact gain for diagonal-linear systems u -> A u + noise: the correction
/// phi_j = k_j (u_j - u'_j) / b_j cancels a fraction t of the drift on each
/// active mode. The smallest sufficient t is located by bisection, so an
/// already-contracting system gets the zero gain.
inline Stabiliser toy_affine_stabiliser(const std::vector<double>& a_diag,
                                        const NoiseModel& noise, double q_target,
                                        double delta) {
    const int dim = int(a_diag.size());
    const int block = noise.active_prefix();
    if (block == 0) throw ConfigError("toy_affine_stabiliser: no active noise modes");
    if (q_target <= 0.0 || q_target >= 1.0)
        throw ConfigError("toy_affine_stabiliser: q must lie in (0,1)");
    double uncontrolled = 0.0;
    for (int d = block; d < dim; ++d) uncontrolled = std::max(uncontrolled, std::abs(a_diag[d]));
    if (uncontrolled > q_target)
        throw ConfigError("toy_affine_stabiliser: uncontrolled modes exceed target q");

    auto factor = [&](double t) {
        double f = uncontrolled;
        for (int d = 0; d < block && d < dim; ++d)
            f = std::max(f, std::abs(a_diag[d]) * (1.0 - t));
        return f;
    };
    double t = 0.0;
    if (factor(0.0) > q_target) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (factor(mid) > q_target) lo = mid;
            else hi = mid;
        }
        t = hi;
    }

    std::vector<double> gain(block, 0.0);   // in xi units
    double c_bound = 0.0;
    for (int d = 0; d < block && d < dim; ++d) {
        gain[d] = t * a_diag[d] / noise.amplitude(d);
        c_bound = std::max(c_bound, std::abs(gain[d]));
    }

    Stabiliser st;
    st.block = block;
    st.q = q_target;
    st.delta = delta;
    st.c_bound = c_bound;
    st.alpha = 1.0;
    st.eta_independent = true;
    st.phi = [gain, block](const StateVector& u, const StateVector& up,
                           const NoiseVector&) {
        std::vector<double> c(block, 0.0);
        for (int d = 0; d < block && d < int(u.x.size()); ++d)
            c[d] = gain[d] * (u.x[d] - up.x[d]);
        return c;
    };
    return st;
}

struct StabiliserReport {
    double contraction_max = 0.0;   // sup dist(S(u,eta), S(u',eta+phi)) / dist(u,u')
    double gain_ratio_max = 0.0;    // sup ||phi|| / dist(u,u')^alpha
    double d_eta_max = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_degenerate = 0;   // pairs with dist == 0 (ratio counted as 0)
    bool pass = false;
};

/// Samples pairs within the stabiliser's validity radius along system
/// trajectories and measures the realized contraction and gain bounds.
inline StabiliserReport verify_stabilisability(const SystemMap& sys, const Stabiliser& st,
                                               std::size_t n_pairs, std::uint64_t seed,
                                               std::uint64_t stream0) {
    StabiliserReport rep;
    rep.n_pairs = n_pairs;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        CounterRng rng(seed, stream0 + k);
        // A reachable base point: short burn-in from the origin.
        StateVector u{std::vector<double>(sys.dim(), 0.0)};
        for (int s = 0; s < 12; ++s) u = sys.step(u, sys.noise().sample(rng));
        // A companion within the validity radius.
        StateVector up = u;
        double nrm = 0.0;
        std::vector<double> dir(sys.dim());
        for (int d = 0; d < sys.dim(); ++d) {
            dir[d] = rng.uniform_pm1();
            nrm += dir[d] * dir[d];
        }
        nrm = std::sqrt(std::max(nrm, 1e-300));
        const double rho = st.delta * rng.uniform01();
        for (int d = 0; d < sys.dim(); ++d) up.x[d] += rho * dir[d] / nrm;

        const NoiseVector eta = sys.noise().sample(rng);
        const std::vector<double> c = st.correction(u, up, eta);
        const NoiseVector eta_c = apply_correction(eta, c);
        const double d0 = sys.dist(u, up);
        const StateVector v = sys.step(u, eta);
        const StateVector vp = sys.step(up, eta_c);
        const double d1 = sys.dist(v, vp);
        double cn = 0.0;
        for (double x : c) cn += x * x;
        cn = std::sqrt(cn);
        if (d0 <= 0.0) {
            ++rep.n_degenerate;
            if (cn > 1e-12)
                throw NumericalError("verify_stabilisability: nonzero correction at zero distance");
            continue;
        }
        rep.contraction_max = std::max(rep.contraction_max, d1 / d0);
        rep.gain_ratio_max = std::max(rep.gain_ratio_max, cn / std::pow(d0, st.alpha));
        rep.d_eta_max = std::max(rep.d_eta_max, st.d_eta_max(u, up, eta));
    }
    rep.pass = rep.contraction_max < 1.0;
    return rep;
}

/// Temporal control window 0 < a < b < c < tau with a smooth cutoff that is
/// 1 up to b and 0 from c on.
struct ControlWindow {
    double a = 0.1, b = 0.5, c = 0.7, tau = 0.8;

    void validate() const {
        if (!(0.0 < a && a < b && b < c && c < tau && tau <= 1.0))
            throw ConfigError("ControlWindow: need 0 < a < b < c < tau <= 1");
    }

    /// Smooth transition: 1 for t <= b, 0 for t >= c, C^1 cosine ramp between.
    double cutoff(double t) const {
        if (t <= b) return 1.0;
        if (t >= c) return 0.0;
        const double s = (t - b) / (c - b);
        return 0.5 * (1.0 + std::cos(std::numbers::pi * s));
    }

    bool active(double t) const { return t > a && t < c; }
};

} // namespace ergo
