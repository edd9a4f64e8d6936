#pragma once

#include <stdexcept>
#include <string>

namespace ergo {

/// Invalid or out-of-range configuration; CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown (divergence, non-invertibility, budget exhaustion);
/// CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structural misuse: mismatched dimensions, oversized inputs, bad supports.
struct SizeError : std::runtime_error {
    explicit SizeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

} // namespace ergo
