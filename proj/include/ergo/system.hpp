#pragma once

#include <cstdint>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "state.hpp"

namespace ergo {

/// One-step map of a random dynamical system u_k = S(u_{k-1}, eta_k) with
/// decomposable bounded noise. Implementations must keep every reachable
/// state inside the ball of `radius()` around the origin (in `dist`).
class SystemMap {
  public:
    virtual ~SystemMap() = default;

    virtual int dim() const = 0;
    virtual const NoiseModel& noise() const = 0;
    virtual StateVector step(const StateVector& u, const NoiseVector& xi) const = 0;
    virtual double radius() const = 0;

    virtual double dist(const StateVector& a, const StateVector& b) const {
        return euclid_dist(a, b);
    }
    virtual double norm(const StateVector& a) const { return euclid_norm(a.x); }

    bool contains(const StateVector& u, double tol = 1e-9) const {
        return norm(u) <= radius() + tol;
    }
};

struct Trajectory {
    std::vector<StateVector> states;   // length n_steps + 1, starts at u0
    std::vector<NoiseVector> noises;   // length n_steps

    std::size_t n_steps() const { return noises.size(); }
};

inline Trajectory simulate_trajectory(const SystemMap& sys, const StateVector& u0,
                                      int n_steps, CounterRng& rng) {
    if (int(u0.x.size()) != sys.dim())
        throw SizeError("simulate_trajectory: initial state has wrong dimension");
    Trajectory tr;
    tr.states.reserve(std::size_t(n_steps) + 1);
    tr.noises.reserve(std::size_t(n_steps));
    tr.states.push_back(u0);
    for (int k = 0; k < n_steps; ++k) {
        tr.noises.push_back(sys.noise().sample(rng));
        tr.states.push_back(sys.step(tr.states.back(), tr.noises.back()));
    }
    return tr;
}

/// Empirical law of u_{n_steps} started from u0, one independent RNG stream
/// per sample so results do not depend on the number of worker threads.
inline DiscreteMeasure transition_ensemble(const SystemMap& sys, const StateVector& u0,
                                           int n_steps, std::size_t n_samples,
                                           std::uint64_t seed, std::uint64_t stream0,
                                           int jobs = 1) {
    const int dim = sys.dim();
    std::vector<double> pts(n_samples * std::size_t(dim));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            CounterRng rng(seed, stream0 + s);
            StateVector u = u0;
            for (int k = 0; k < n_steps; ++k) u = sys.step(u, sys.noise().sample(rng));
            for (int d = 0; d < dim; ++d) pts[s * std::size_t(dim) + d] = u.x[d];
        }
    };
    if (jobs <= 1) {
        work(0, n_samples);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_samples + std::size_t(jobs) - 1) / std::size_t(jobs);
        for (int t = 0; t < jobs; ++t) {
            const std::size_t b = std::min(n_samples, std::size_t(t) * chunk);
            const std::size_t e = std::min(n_samples, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return DiscreteMeasure(dim, std::move(pts), std::vector<double>(n_samples, 1.0 / double(n_samples)));
}

struct AbsorbingReport {
    double max_norm = 0.0;
    double radius = 0.0;
    bool contained = false;
};

/// Drives several trajectories and records the largest state norm seen.
inline AbsorbingReport absorbing_check(const SystemMap& sys, const StateVector& u0,
                                       int n_steps, std::size_t n_traj,
                                       std::uint64_t seed, std::uint64_t stream0) {
    AbsorbingReport rep;
    rep.radius = sys.radius();
    for (std::size_t t = 0; t < n_traj; ++t) {
        CounterRng rng(seed, stream0 + t);
        StateVector u = u0;
        rep.max_norm = std::max(rep.max_norm, sys.norm(u));
        for (int k = 0; k < n_steps; ++k) {
            u = sys.step(u, sys.noise().sample(rng));
            rep.max_norm = std::max(rep.max_norm, sys.norm(u));
        }
    }
    rep.contained = rep.max_norm <= rep.radius + 1e-9;
    return rep;
}

} // namespace ergo
