#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "stabiliser.hpp"
#include "stats.hpp"
#include "system.hpp"
#include "transport.hpp"

namespace ergo {

struct CouplingConfig {
    double delta = 0.15;   // diagonal threshold: the pair set B is dist <= delta
    double r = 0.75;       // per-level contraction target, q < r < 1
    double q = 0.55;       // stabiliser contraction within B
    double alpha = 1.0;    // Hoelder exponent of the stabiliser gain
    std::size_t proposal_cap = 1'000'000;
    int horizon = 50;      // squeezing observation horizon

    void validate() const {
        if (!(0.0 < q && q < r && r < 1.0))
            throw ConfigError("CouplingConfig: need 0 < q < r < 1");
        if (delta <= 0.0) throw ConfigError("CouplingConfig: delta must be positive");
        if (alpha <= 0.0 || alpha > 1.0)
            throw ConfigError("CouplingConfig: alpha must lie in (0,1]");
        if (horizon < 1) throw ConfigError("CouplingConfig: horizon must be >= 1");
    }

    /// Distance threshold used when comparing a coupled step against the
    /// contraction target.
    double eps_rule(double dist) const { return r * dist; }

    /// Exponent weight for the squeezing-time moment.
    double delta2() const { return 0.5 * alpha * std::log(1.0 / r); }
};

enum class PairRegime { independent, coalesced, residual };

struct PairDraw {
    StateVector r1, r2;
    PairRegime regime = PairRegime::independent;
    double dist_before = 0.0;
    double dist_after = 0.0;
    std::size_t proposals = 0;
};

enum class PairRequest { automatic, coupled };

/// One transition of the paired chain. Far pairs step with independent noise
/// draws. Close pairs couple the leading noise modes maximally between the
/// plain block law and its image under the stabiliser shift, sharing the
/// remaining modes; a coalesced draw reproduces exactly the corrected noise
/// on the second component, which contracts the pair by the certified factor.
/// Both marginals are exact one-step transitions in every regime.
inline PairDraw build_pair(const SystemMap& sys, const Stabiliser& st,
                           const CouplingConfig& cfg, const StateVector& u,
                           const StateVector& up, CounterRng& rng,
                           PairRequest request = PairRequest::automatic) {
    cfg.validate();
    const NoiseModel& nm = sys.noise();
    PairDraw out;
    out.dist_before = sys.dist(u, up);

    const bool on_diagonal = out.dist_before <= cfg.delta;
    if (!on_diagonal && request == PairRequest::coupled)
        throw ConfigError("build_pair: coupled step requested outside the diagonal set");

    if (!on_diagonal) {
        const NoiseVector eta = nm.sample(rng);
        const NoiseVector etap = nm.sample(rng);
        out.r1 = sys.step(u, eta);
        out.r2 = sys.step(up, etap);
        out.regime = PairRegime::independent;
        out.dist_after = sys.dist(out.r1, out.r2);
        return out;
    }

    const int block = st.block;
    if (block < 1 || block > nm.active_prefix())
        throw ConfigError("build_pair: stabiliser block exceeds active noise modes");

    // Shared draw for the uncorrected modes.
    std::vector<double> shared(std::size_t(nm.n_modes() - block));
    for (int j = block; j < nm.n_modes(); ++j)
        shared[std::size_t(j - block)] = nm.density(j).sample(rng);

    auto assemble = [&](const std::vector<double>& xi_block) {
        NoiseVector eta;
        eta.xi.resize(std::size_t(nm.n_modes()));
        for (int j = 0; j < block; ++j) eta.xi[j] = xi_block[std::size_t(j)];
        for (int j = block; j < nm.n_modes(); ++j)
            eta.xi[j] = shared[std::size_t(j - block)];
        return eta;
    };

    // Shift on the block in xi coordinates: Psi(z) = z + phi(u, u', eta(z)).
    ShiftMap psi;
    psi.dim = block;
    psi.block = block;
    psi.translation = st.eta_independent;
    psi.phi = [&](const std::vector<double>& z) {
        return st.correction(u, up, assemble(z));
    };

    auto block_pdf = [&](const std::vector<double>& z) {
        double p = 1.0;
        for (int j = 0; j < block; ++j) p *= nm.density(j).pdf(z[std::size_t(j)]);
        return p;
    };
    auto block_sample = [&](CounterRng& r) {
        std::vector<double> z(std::size_t(block), 0.0);
        for (int j = 0; j < block; ++j) z[std::size_t(j)] = nm.density(j).sample(r);
        return z;
    };

    PushforwardDensity shifted_pdf(block_pdf, psi);
    DensityWithSampler side_shifted{
        [&](const std::vector<double>& x) { return shifted_pdf.pdf(x); },
        [&](CounterRng& r) { return psi.apply(block_sample(r)); }};
    DensityWithSampler side_plain{
        [&](const std::vector<double>& x) { return block_pdf(x); },
        [&](CounterRng& r) { return block_sample(r); }};

    const MaximalCouplingDraw mc =
        maximal_coupling_densities(side_shifted, side_plain, rng, cfg.proposal_cap);
    out.proposals = mc.proposals;

    // The first component consumes the base draw behind the shifted sample.
    const std::vector<double> xi = invert_shift_map(psi, mc.x);
    const std::vector<double>& xip = mc.y;

    out.r1 = sys.step(u, assemble(xi));
    out.r2 = sys.step(up, assemble(xip));
    out.regime = mc.coalesced ? PairRegime::coalesced : PairRegime::residual;
    out.dist_after = sys.dist(out.r1, out.r2);
    return out;
}

/// Paired trajectory driven by build_pair with fresh randomness per step.
struct PairChain {
    std::vector<StateVector> u, up;       // length n_steps + 1
    std::vector<PairRegime> regime;       // length n_steps
    std::vector<double> dist;             // length n_steps + 1

    std::size_t n_steps() const { return regime.size(); }

    /// First index k with dist[k] <= delta, or -1 if none.
    int hit_time(double delta) const {
        for (std::size_t k = 0; k < dist.size(); ++k)
            if (dist[k] <= delta) return int(k);
        return -1;
    }
};

inline PairChain extension_chain(const SystemMap& sys, const Stabiliser& st,
                                 const CouplingConfig& cfg, const StateVector& u0,
                                 const StateVector& up0, int n_steps, CounterRng& rng) {
    if (n_steps < 0) throw ConfigError("extension_chain: negative step count");
    PairChain ch;
    ch.u.push_back(u0);
    ch.up.push_back(up0);
    ch.dist.push_back(sys.dist(u0, up0));
    for (int k = 0; k < n_steps; ++k) {
        const PairDraw d = build_pair(sys, st, cfg, ch.u.back(), ch.up.back(), rng);
        ch.u.push_back(d.r1);
        ch.up.push_back(d.r2);
        ch.regime.push_back(d.regime);
        ch.dist.push_back(d.dist_after);
    }
    return ch;
}

// ---------------------------------------------------------------------------
// Recurrence: time for the paired chain to enter the diagonal set.
// ---------------------------------------------------------------------------

struct HittingStats {
    std::vector<int> tau;            // hitting times of the chains that hit
    std::size_t n_chains = 0;
    std::size_t n_censored = 0;      // never hit within the horizon
    double beta = 0.0;               // survival decay rate fit
    double beta_stderr = 0.0;
    double moment = 0.0;             // mean of exp(beta * tau / 2) over hits
    double fit_r2 = 0.0;
    bool inconclusive = false;       // > 5% of chains censored

    double censored_fraction() const {
        return n_chains ? double(n_censored) / double(n_chains) : 0.0;
    }
};

/// Survival analysis of the diagonal hitting time over a chain ensemble.
inline HittingStats hitting_time_stats(const std::vector<PairChain>& chains, double delta) {
    HittingStats hs;
    hs.n_chains = chains.size();
    if (chains.empty()) throw SizeError("hitting_time_stats: no chains");
    int k_max = 0;
    for (const PairChain& ch : chains) {
        const int t = ch.hit_time(delta);
        if (t < 0) ++hs.n_censored;
        else {
            hs.tau.push_back(t);
            k_max = std::max(k_max, t);
        }
    }
    hs.inconclusive = hs.censored_fraction() > 0.05;
    if (hs.tau.empty()) {
        hs.inconclusive = true;
        return hs;
    }

    // Empirical survival P{tau > k}; fit log-survival where it is resolved.
    const double n = double(hs.n_chains);
    std::vector<double> ks, logs;
    for (int k = 0; k <= k_max; ++k) {
        double surv = double(hs.n_censored);
        for (int t : hs.tau)
            if (t > k) surv += 1.0;
        surv /= n;
        if (surv * n >= 5.0 && surv < 1.0) {
            ks.push_back(double(k));
            logs.push_back(std::log(surv));
        }
    }
    if (ks.size() >= 2) {
        const LinearFit fit = fit_line(ks, logs);
        hs.beta = -fit.slope;
        hs.beta_stderr = fit.slope_stderr;
        hs.fit_r2 = fit.r2;
    } else if (k_max == 0) {
        // Everything hits immediately; decay is effectively infinite, report 0.
        hs.beta = 0.0;
    }
    double acc = 0.0;
    for (int t : hs.tau) acc += std::exp(0.5 * hs.beta * double(t));
    hs.moment = acc / double(hs.tau.size());
    return hs;
}

// ---------------------------------------------------------------------------
// Squeezing: how long a coupled pair keeps beating the geometric envelope
// r^k * delta.
// ---------------------------------------------------------------------------

struct SqueezeStats {
    std::size_t n_chains = 0;
    std::size_t n_finite = 0;         // squeezed out within the horizon
    std::size_t n_late = 0;           // squeezed in the last quarter of the horizon
    std::vector<int> sigma;           // finite squeezing times
    double p_infinite = 0.0;          // survived the whole horizon
    double delta2 = 0.0;
    double moment = 0.0;              // mean of exp(delta2 * sigma) over finite sigma
    int horizon = 0;
    bool inconclusive = false;        // late squeezings make the tail unresolved

    double late_fraction() const {
        return n_chains ? double(n_late) / double(n_chains) : 0.0;
    }
};

/// Runs coupled chains from starts inside the diagonal set and records the
/// first level k whose distance exceeds r^k * delta. Chains that never do so
/// within the horizon count as sigma = infinity; the horizon is adequate when
/// essentially no chain squeezes out near its end (the per-level failure rate
/// decays geometrically, so late events signal an unresolved tail).
inline SqueezeStats squeezing_stats(const SystemMap& sys, const Stabiliser& st,
                                    const CouplingConfig& cfg,
                                    const std::vector<std::pair<StateVector, StateVector>>& starts,
                                    std::uint64_t seed, std::uint64_t stream0) {
    cfg.validate();
    SqueezeStats sq;
    sq.n_chains = starts.size();
    sq.horizon = cfg.horizon;
    sq.delta2 = cfg.delta2();
    if (starts.empty()) throw SizeError("squeezing_stats: no starting pairs");
    for (std::size_t c = 0; c < starts.size(); ++c) {
        const auto& [u0, up0] = starts[c];
        if (sys.dist(u0, up0) > cfg.delta)
            throw ConfigError("squeezing_stats: start outside the diagonal set");
        CounterRng rng(seed, stream0 + c);
        StateVector u = u0, up = up0;
        int sigma = -1;
        double envelope = cfg.delta;
        for (int k = 1; k <= cfg.horizon; ++k) {
            const PairDraw d = build_pair(sys, st, cfg, u, up, rng);
            u = d.r1;
            up = d.r2;
            envelope *= cfg.r;
            if (d.dist_after > envelope) {
                sigma = k;
                break;
            }
        }
        if (sigma >= 0) {
            ++sq.n_finite;
            sq.sigma.push_back(sigma);
            if (sigma > (3 * cfg.horizon) / 4) ++sq.n_late;
        }
    }
    sq.p_infinite = double(sq.n_chains - sq.n_finite) / double(sq.n_chains);
    double acc = 0.0;
    for (int s : sq.sigma) acc += std::exp(sq.delta2 * double(s));
    sq.moment = sq.sigma.empty() ? 0.0 : acc / double(sq.n_chains);
    sq.inconclusive = sq.late_fraction() > 0.2;
    return sq;
}

// ---------------------------------------------------------------------------
// Independence of the two components while the pair stays far apart.
// ---------------------------------------------------------------------------

/// Chi-square independence test between binned endpoint functionals of the
/// two chain components, restricted to chains that remained outside the
/// diagonal set through step m (where every step used the independent rule).
/// Returns the p-value; m = 0 compares deterministic starts and is vacuous.
inline double independence_on_Tm_test(const std::vector<PairChain>& chains, int m,
                                      double delta, int n_bins = 4) {
    if (m == 0) return 1.0;
    if (m < 0) throw ConfigError("independence_on_Tm_test: negative m");
    std::vector<double> a, b;
    for (const PairChain& ch : chains) {
        if (int(ch.n_steps()) < m) continue;
        bool off = true;
        for (int k = 0; k < m; ++k)
            if (ch.dist[std::size_t(k)] <= delta) {
                off = false;
                break;
            }
        if (!off) continue;
        a.push_back(ch.u[std::size_t(m)].x[0]);
        b.push_back(ch.up[std::size_t(m)].x[0]);
    }
    const std::size_t need = std::size_t(n_bins) * std::size_t(n_bins) * 5;
    if (a.size() < need)
        throw NumericalError("independence_on_Tm_test: insufficient conditioning mass");

    // Quantile bin edges per margin, then a contingency table.
    auto edges_of = [&](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        std::vector<double> e;
        for (int i = 1; i < n_bins; ++i)
            e.push_back(v[std::min(v.size() - 1, i * v.size() / std::size_t(n_bins))]);
        return e;
    };
    const std::vector<double> ea = edges_of(a), eb = edges_of(b);
    auto bin_of = [&](double x, const std::vector<double>& e) {
        int b2 = 0;
        while (b2 < int(e.size()) && x >= e[std::size_t(b2)]) ++b2;
        return b2;
    };
    std::vector<std::vector<double>> table(std::size_t(n_bins),
                                           std::vector<double>(std::size_t(n_bins), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        table[std::size_t(bin_of(a[i], ea))][std::size_t(bin_of(b[i], eb))] += 1.0;
    return chi2_independence(table).p_value;
}

// ---------------------------------------------------------------------------
// Aggregated verifier result for the coupled-pair construction.
// ---------------------------------------------------------------------------

struct VerifierReport {
    HittingStats hitting;
    SqueezeStats squeezing;
    double independence_p = 1.0;
    double marginal_ks_1 = 0.0;       // coupled draws vs direct transitions
    double marginal_ks_2 = 0.0;
    double contraction_fail_rate = 0.0;   // P{dist_after > r * dist_before} on B
    double contraction_fail_bound = 0.0;  // calibrated TV-based bound
    bool pass = false;
};

} // namespace ergo
