#pragma once

#include <cmath>
#include <vector>

#include "errors.hpp"

namespace ergo {

/// Which norm the coordinate vector is meant to be measured in. Grid-backed
/// systems override the metric on the SystemMap; the tag keeps serialized
/// states self-describing.
enum class NormTag { euclid, grid_l2, grid_h1 };

struct StateVector {
    std::vector<double> x;
    NormTag norm_tag = NormTag::euclid;

    StateVector() = default;
    explicit StateVector(std::vector<double> coords, NormTag tag = NormTag::euclid)
        : x(std::move(coords)), norm_tag(tag) {}

    std::size_t dim() const { return x.size(); }
    double& operator[](std::size_t i) { return x[i]; }
    double operator[](std::size_t i) const { return x[i]; }
};

inline double euclid_norm(const std::vector<double>& v) {
    double s = 0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

inline double euclid_dist(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim()) throw SizeError("euclid_dist: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a.x[i] - b.x[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace ergo
