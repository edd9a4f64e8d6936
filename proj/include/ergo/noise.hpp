#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace ergo {

/// One scalar coordinate of the driving noise.
struct NoiseVector {
    std::vector<double> xi;   // xi_j in [-1,1], one per mode
};

/// Probability density on [-1,1] with a derivative evaluator and a tabulated
/// inverse CDF (4096 nodes, linear interpolation between nodes).
class ModeDensity {
  public:
    static constexpr int kTableNodes = 4096;

    ModeDensity() : ModeDensity(uniform()) {}

    ModeDensity(std::string name,
                std::function<double(double)> pdf,
                std::function<double(double)> dpdf)
        : name_(std::move(name)), pdf_(std::move(pdf)), dpdf_(std::move(dpdf)) {
        build_tables();
        if (pdf_(0.0) <= 0.0)
            throw ConfigError("ModeDensity: density must be positive at 0");
    }

    static ModeDensity uniform() {
        return ModeDensity("uniform",
                           [](double r) { return (r >= -1.0 && r <= 1.0) ? 0.5 : 0.0; },
                           [](double) { return 0.0; });
    }

    /// p(r) proportional to 1 - r^2.
    static ModeDensity quadratic() {
        return ModeDensity("quadratic",
                           [](double r) { return (r >= -1.0 && r <= 1.0) ? 0.75 * (1.0 - r * r) : 0.0; },
                           [](double r) { return (r >= -1.0 && r <= 1.0) ? -1.5 * r : 0.0; });
    }

    /// p(r) proportional to (1 - r^2)^2; continuously differentiable on R.
    static ModeDensity quartic() {
        return ModeDensity("quartic",
                           [](double r) {
                               if (r < -1.0 || r > 1.0) return 0.0;
                               const double s = 1.0 - r * r;
                               return 0.9375 * s * s;
                           },
                           [](double r) {
                               if (r < -1.0 || r > 1.0) return 0.0;
                               return 0.9375 * 2.0 * (1.0 - r * r) * (-2.0 * r);
                           });
    }

    static ModeDensity by_name(const std::string& name) {
        if (name == "uniform") return uniform();
        if (name == "quadratic") return quadratic();
        if (name == "quartic") return quartic();
        throw ConfigError("unknown mode density: " + name);
    }

    const std::string& name() const { return name_; }
    double pdf(double r) const { return pdf_(r); }
    double dpdf(double r) const { return dpdf_(r); }

    double cdf(double r) const {
        if (r <= -1.0) return 0.0;
        if (r >= 1.0) return 1.0;
        const double t = (r + 1.0) / h_;
        const int i = std::min(kTableNodes - 2, int(t));
        const double frac = t - i;
        return cdf_[i] * (1.0 - frac) + cdf_[i + 1] * frac;
    }

    /// Inverse CDF by binary search on the table plus linear interpolation.
    double quantile(double u) const {
        if (u <= 0.0) return -1.0;
        if (u >= 1.0) return 1.0;
        int lo = 0, hi = kTableNodes - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (cdf_[mid] <= u) lo = mid; else hi = mid;
        }
        const double c0 = cdf_[lo], c1 = cdf_[hi];
        const double frac = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.5;
        return -1.0 + h_ * (lo + frac);
    }

    double sample(CounterRng& rng) const { return quantile(rng.uniform01()); }

  private:
    void build_tables() {
        h_ = 2.0 / double(kTableNodes - 1);
        cdf_.resize(kTableNodes);
        cdf_[0] = 0.0;
        double prev = pdf_(-1.0);
        for (int i = 1; i < kTableNodes; ++i) {
            const double r = -1.0 + h_ * i;
            const double cur = pdf_(r);
            cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur) * h_;
            prev = cur;
        }
        const double total = cdf_.back();
        if (total <= 0.0) throw ConfigError("ModeDensity: zero mass");
        for (double& c : cdf_) c /= total;
    }

    std::string name_;
    std::function<double(double)> pdf_;
    std::function<double(double)> dpdf_;
    std::vector<double> cdf_;
    double h_ = 0.0;
};

/// Decomposable bounded noise: eta = sum_j amp_j * xi_j * (mode j), with the
/// xi_j independent, supported on [-1,1], and positive density at 0.
class NoiseModel {
  public:
    NoiseModel() = default;

    NoiseModel(std::vector<double> amplitudes, std::vector<ModeDensity> densities)
        : amp_(std::move(amplitudes)), dens_(std::move(densities)) {
        if (amp_.size() != dens_.size())
            throw ConfigError("NoiseModel: amplitude/density count mismatch");
        for (double a : amp_)
            if (a < 0.0) throw ConfigError("NoiseModel: negative amplitude");
    }

    static NoiseModel iid(int n_modes, double amp, const std::string& density) {
        std::vector<double> a(n_modes, amp);
        std::vector<ModeDensity> d;
        for (int j = 0; j < n_modes; ++j) d.push_back(ModeDensity::by_name(density));
        return NoiseModel(std::move(a), std::move(d));
    }

    int n_modes() const { return int(amp_.size()); }
    double amplitude(int j) const { return amp_.at(j); }
    const ModeDensity& density(int j) const { return dens_.at(j); }

    /// Sum of squared amplitudes (total noise energy budget).
    double total_energy() const {
        double s = 0;
        for (double a : amp_) s += a * a;
        return s;
    }

    /// Largest prefix of modes with nonzero amplitude; the stabiliser block
    /// must live inside it.
    int active_prefix() const {
        int n = 0;
        while (n < n_modes() && amp_[n] > 0.0) ++n;
        return n;
    }

    NoiseVector sample(CounterRng& rng) const {
        NoiseVector v;
        v.xi.resize(amp_.size());
        for (std::size_t j = 0; j < amp_.size(); ++j)
            v.xi[j] = dens_[j].sample(rng);
        return v;
    }

    /// Realized coefficient of mode j.
    double coeff(const NoiseVector& v, int j) const {
        return amp_.at(j) * v.xi.at(j);
    }

  private:
    std::vector<double> amp_;
    std::vector<ModeDensity> dens_;
};

} // namespace ergo
