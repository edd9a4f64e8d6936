#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "system.hpp"
#include "transport.hpp"

namespace ergo {

using Observable = std::function<std::vector<double>(const StateVector&)>;

struct MixingConfig {
    int k_max = 12;
    std::size_t n_samples = 20000;
    int max_support_1d = 160;    // histogram bins per side for scalar observables
    int max_support_nd = 64;     // subsample size per side otherwise (the LP cost
                                 // grows steeply past ~128 merged atoms)
    int batches_nd = 4;          // disjoint subsample batches to average
    double floor_factor = 1.5;   // fit uses lags with distance > factor * floor
    int jobs = 1;

    void validate() const {
        if (k_max < 1) throw ConfigError("MixingConfig: k_max must be >= 1");
        if (n_samples < 16) throw ConfigError("MixingConfig: need at least 16 samples");
        if (max_support_1d < 8 || max_support_nd < 8)
            throw ConfigError("MixingConfig: support caps too small");
    }
};

struct MixingLag {
    int k = 0;
    double d_pair = 0.0;      // law from start A vs law from start B
    double d_stat = 0.0;      // law from start A vs pooled long-run law
    double floor = 0.0;       // split-half distance under the same pipeline
    double spread = 0.0;      // batch spread where batching applies
    bool in_fit = false;
};

struct MixingReport {
    std::vector<MixingLag> lags;
    double gamma = 0.0;
    double gamma_stderr = 0.0;
    double c = 0.0;           // prefactor of the fitted envelope c * exp(-gamma k)
    double r2 = 0.0;
    std::size_t n_fit = 0;
    int k_burn = 0;           // first lag pooled into the stationary proxy
    bool inconclusive = false;
};

namespace detail {

/// Lag-sliced observable records: samples x lags x obs_dim, row-major.
struct ObsTable {
    std::size_t n = 0;
    int k_max = 0;
    int dim = 0;
    std::vector<double> data;

    const double* at(std::size_t sample, int k) const {
        return data.data() +
               ((sample * std::size_t(k_max + 1)) + std::size_t(k)) * std::size_t(dim);
    }
};

inline ObsTable observe_ensemble(const SystemMap& sys, const Observable& obs, int obs_dim,
                                 const StateVector& u0, int k_max, std::size_t n,
                                 std::uint64_t seed, std::uint64_t stream0, int jobs) {
    ObsTable t;
    t.n = n;
    t.k_max = k_max;
    t.dim = obs_dim;
    t.data.resize(n * std::size_t(k_max + 1) * std::size_t(obs_dim));
    parallel_for(n, jobs, [&](std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s) {
            CounterRng rng(seed, stream0 + s);
            StateVector u = u0;
            for (int k = 0; k <= k_max; ++k) {
                const std::vector<double> v = obs(u);
                if (int(v.size()) != obs_dim)
                    throw SizeError("mixing_rate: observable dimension mismatch");
                double* dst = t.data.data() +
                              ((s * std::size_t(k_max + 1)) + std::size_t(k)) * std::size_t(obs_dim);
                std::copy(v.begin(), v.end(), dst);
                if (k < k_max) u = sys.step(u, sys.noise().sample(rng));
            }
        }
    });
    return t;
}

/// Histogram compression of scalar samples onto a fixed common range.
inline DiscreteMeasure compress_1d(const double* vals, std::size_t n, std::size_t stride,
                                   double lo, double hi, int bins) {
    const double width = std::max(hi - lo, 1e-300);
    std::vector<double> count(std::size_t(bins), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = vals[i * stride];
        int b = int((x - lo) / width * bins);
        b = std::clamp(b, 0, bins - 1);
        count[std::size_t(b)] += 1.0;
    }
    std::vector<double> pts, w;
    for (int b = 0; b < bins; ++b)
        if (count[std::size_t(b)] > 0.0) {
            pts.push_back(lo + (b + 0.5) * width / bins);
            w.push_back(count[std::size_t(b)] / double(n));
        }
    return DiscreteMeasure(1, std::move(pts), std::move(w));
}

struct SliceView {
    const ObsTable* table = nullptr;
    int k = 0;
    std::size_t begin = 0, count = 0;
};

/// Dual-Lipschitz distance between two lag slices after compression. Scalar
/// observables are histogram-binned on a shared range; higher-dimensional
/// ones are compared on disjoint deterministic subsamples and averaged.
inline std::pair<double, double> slice_distance(const SliceView& a, const SliceView& b,
                                                const MixingConfig& cfg) {
    const int dim = a.table->dim;
    if (dim == 1) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < a.count; ++i) {
            const double x = *a.table->at(a.begin + i, a.k);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        for (std::size_t i = 0; i < b.count; ++i) {
            const double x = *b.table->at(b.begin + i, b.k);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        // Each table has its own row stride (the pooled table is single-lag).
        const std::size_t stride_a = std::size_t(a.table->k_max + 1) * std::size_t(dim);
        const std::size_t stride_b = std::size_t(b.table->k_max + 1) * std::size_t(dim);
        const DiscreteMeasure ma = compress_1d(a.table->at(a.begin, a.k), a.count,
                                               stride_a, lo, hi, cfg.max_support_1d);
        const DiscreteMeasure mb = compress_1d(b.table->at(b.begin, b.k), b.count,
                                               stride_b, lo, hi, cfg.max_support_1d);
        return {dual_lipschitz(ma, mb).value, 0.0};
    }

    const std::size_t cap = std::size_t(cfg.max_support_nd);
    const std::size_t usable = std::min(a.count, b.count);
    const int batches = std::max<std::size_t>(1, std::min<std::size_t>(cfg.batches_nd, usable / cap));
    Moments spread;
    double acc = 0.0;
    for (int bt = 0; bt < batches; ++bt) {
        auto take = [&](const SliceView& sv) {
            std::vector<double> pts;
            const std::size_t m = std::min(cap, sv.count);
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t idx = (std::size_t(bt) * cap + i) % sv.count;
                const double* p = sv.table->at(sv.begin + idx, sv.k);
                pts.insert(pts.end(), p, p + dim);
            }
            return DiscreteMeasure::empirical(dim, pts);
        };
        const double d = dual_lipschitz(take(a), take(b)).value;
        acc += d;
        spread.add(d);
    }
    return {acc / double(batches), batches > 1 ? spread.stderr_mean() : 0.0};
}

} // namespace detail

/// Exponential mixing estimate: per-lag dual-Lipschitz distances between the
/// observable laws started from two initial conditions, a split-half
/// statistical floor under the identical pipeline, and a log-linear fit of
/// the decaying range. A pooled long-run ensemble provides the stationary
/// comparison column.
inline MixingReport mixing_rate(const SystemMap& sys, const Observable& obs, int obs_dim,
                                const StateVector& u0_a, const StateVector& u0_b,
                                const MixingConfig& cfg, std::uint64_t seed,
                                std::uint64_t stream0 = 0) {
    cfg.validate();
    if (obs_dim < 1 || obs_dim > 8)
        throw ConfigError("mixing_rate: observable must map to 1..8 dimensions");
    const std::size_t n = cfg.n_samples;
    const detail::ObsTable ta = detail::observe_ensemble(sys, obs, obs_dim, u0_a, cfg.k_max,
                                                         n, seed, stream0, cfg.jobs);
    const detail::ObsTable tb = detail::observe_ensemble(sys, obs, obs_dim, u0_b, cfg.k_max,
                                                         n, seed, stream0 + n, cfg.jobs);

    MixingReport rep;
    rep.lags.resize(std::size_t(cfg.k_max) + 1);
    for (int k = 0; k <= cfg.k_max; ++k) {
        MixingLag& lag = rep.lags[std::size_t(k)];
        lag.k = k;
        const detail::SliceView full_a{&ta, k, 0, n};
        const detail::SliceView full_b{&tb, k, 0, n};
        auto [d, sp] = detail::slice_distance(full_a, full_b, cfg);
        lag.d_pair = d;
        lag.spread = sp;
        const detail::SliceView half1{&ta, k, 0, n / 2};
        const detail::SliceView half2{&ta, k, n / 2, n / 2};
        lag.floor = detail::slice_distance(half1, half2, cfg).first;
    }

    // Log-linear fit over resolved lags (k >= 1, distance above the floor).
    std::vector<double> xs, ys;
    for (int k = 1; k <= cfg.k_max; ++k) {
        MixingLag& lag = rep.lags[std::size_t(k)];
        if (lag.d_pair > cfg.floor_factor * lag.floor && lag.d_pair > 0.0) {
            lag.in_fit = true;
            xs.push_back(double(k));
            ys.push_back(std::log(lag.d_pair));
        }
    }
    rep.n_fit = xs.size();
    if (xs.size() < 3) {
        rep.inconclusive = true;
    } else {
        const LinearFit fit = fit_line(xs, ys);
        rep.gamma = -fit.slope;
        rep.gamma_stderr = fit.slope_stderr;
        rep.c = std::exp(fit.intercept);
        rep.r2 = fit.r2;
        if (!(rep.gamma > 0.0)) rep.inconclusive = true;
    }

    // Stationary proxy: pool a third ensemble over lags past the mixing scale.
    rep.k_burn = rep.inconclusive ? std::max(1, cfg.k_max / 2)
                                  : std::min(cfg.k_max - 1,
                                             std::max(1, int(std::ceil(2.0 / rep.gamma))));
    const detail::ObsTable tc = detail::observe_ensemble(sys, obs, obs_dim, u0_a, cfg.k_max,
                                                         std::max<std::size_t>(n / 4, 16),
                                                         seed, stream0 + 2 * n, cfg.jobs);
    // Flatten the pooled lags into a single-lag table.
    detail::ObsTable pool;
    pool.k_max = 0;
    pool.dim = obs_dim;
    for (int k = rep.k_burn; k <= cfg.k_max; ++k)
        for (std::size_t s = 0; s < tc.n; ++s) {
            const double* p = tc.at(s, k);
            pool.data.insert(pool.data.end(), p, p + obs_dim);
        }
    pool.n = pool.data.size() / std::size_t(obs_dim);
    for (int k = 0; k <= cfg.k_max; ++k) {
        const detail::SliceView sa{&ta, k, 0, n};
        const detail::SliceView sp{&pool, 0, 0, pool.n};
        rep.lags[std::size_t(k)].d_stat = detail::slice_distance(sa, sp, cfg).first;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Approximate controllability probe.
// ---------------------------------------------------------------------------

struct ControllabilityProbe {
    bool found = false;
    int m = -1;
    bool zero_control = false;
    double sup_dist = 0.0;
};

/// Finds the smallest horizon m at which all sampled starts can be driven
/// within eps of the target. The zero control is tried first (both provided
/// systems contract to the target without forcing); otherwise random
/// admissible sequences are sampled within a fixed budget. Not finding a
/// control proves nothing.
inline ControllabilityProbe approx_controllability_probe(
    const SystemMap& sys, const StateVector& u_hat, double eps,
    const std::vector<StateVector>& starts, int m_max, std::size_t shooting_budget,
    std::uint64_t seed) {
    if (eps <= 0.0) throw ConfigError("approx_controllability_probe: eps must be positive");
    if (starts.empty()) throw SizeError("approx_controllability_probe: no starts");
    ControllabilityProbe out;

    auto sup_dist_at = [&](const std::vector<StateVector>& pts) {
        double worst = 0.0;
        for (const StateVector& p : pts) worst = std::max(worst, sys.dist(p, u_hat));
        return worst;
    };

    const double diam = 2.0 * sys.radius();
    std::vector<StateVector> cur = starts;
    double sup0 = sup_dist_at(cur);
    if (eps >= diam || sup0 <= eps) {
        out.found = true;
        out.m = 0;
        out.zero_control = true;
        out.sup_dist = std::min(sup0, diam);
        return out;
    }

    NoiseVector zero;
    zero.xi.assign(std::size_t(sys.noise().n_modes()), 0.0);
    for (int m = 1; m <= m_max; ++m) {
        for (StateVector& p : cur) p = sys.step(p, zero);
        const double s = sup_dist_at(cur);
        if (s <= eps) {
            out.found = true;
            out.m = m;
            out.zero_control = true;
            out.sup_dist = s;
            return out;
        }
    }

    // Random shooting: one admissible noise sequence applied to all starts.
    CounterRng rng(seed, 0);
    for (std::size_t trial = 0; trial < shooting_budget; ++trial) {
        const int m = 1 + int(rng.uniform_index(std::size_t(m_max)));
        std::vector<StateVector> pts = starts;
        for (int k = 0; k < m; ++k) {
            NoiseVector xi;
            xi.xi.resize(std::size_t(sys.noise().n_modes()));
            for (double& v : xi.xi) v = rng.uniform_pm1();
            for (StateVector& p : pts) p = sys.step(p, xi);
        }
        const double s = sup_dist_at(pts);
        if (s <= eps && (!out.found || m < out.m)) {
            out.found = true;
            out.m = m;
            out.zero_control = false;
            out.sup_dist = s;
        }
    }
    return out;
}

} // namespace ergo
