#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace ergo {

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y ~ intercept + slope * x.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw SizeError("fit_line: need >= 2 paired points");
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0) throw NumericalError("fit_line: degenerate abscissae");
    LinearFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = (syy > 0) ? 1.0 - ss_res / syy : 1.0;
    if (n > 2) f.slope_stderr = std::sqrt(ss_res / double(n - 2) / sxx);
    return f;
}

struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / double(n);
        m2 += d * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / double(n - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    double stderr_mean() const { return n > 0 ? stddev() / std::sqrt(double(n)) : 0.0; }
};

/// Kolmogorov-Smirnov statistic of samples against a CDF callable.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
    if (samples.empty()) throw SizeError("ks_statistic: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double c = cdf(samples[i]);
        d = std::max(d, std::abs(c - double(i) / n));
        d = std::max(d, std::abs(c - double(i + 1) / n));
    }
    return d;
}

inline double ks_uniform01(const std::vector<double>& samples) {
    return ks_statistic(samples, [](double x) {
        return std::clamp(x, 0.0, 1.0);
    });
}

/// Two-sample Kolmogorov-Smirnov statistic. Ties are consumed from both
/// samples before the empirical CDFs are compared, so point masses shared by
/// the two samples do not register as discrepancies.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw SizeError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (i == a.size()) x = b[j];
        else if (j == b.size()) x = a[i];
        else x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(double(i) / double(a.size()) -
                                 double(j) / double(b.size())));
    }
    return d;
}

namespace detail {

inline double gamma_series_p(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_cf_q(double a, double x) {
    // Lentz continued fraction for the upper regularized gamma.
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace detail

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
    if (a <= 0 || x < 0) throw ConfigError("gamma_q: bad arguments");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_series_p(a, x);
    return detail::gamma_cf_q(a, x);
}

/// Survival function of the chi-square distribution with df degrees.
inline double chi2_survival(double stat, double df) {
    return gamma_q(df / 2.0, stat / 2.0);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Pearson chi-square independence test on a contingency table (row-major).
struct Chi2Result {
    double stat = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    double min_expected = 0.0;
};

inline Chi2Result chi2_independence(const std::vector<std::vector<double>>& table) {
    const std::size_t r = table.size();
    if (r == 0) throw SizeError("chi2_independence: empty table");
    const std::size_t c = table[0].size();
    std::vector<double> row(r, 0.0), col(c, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (table[i].size() != c) throw SizeError("chi2_independence: ragged table");
        for (std::size_t j = 0; j < c; ++j) {
            row[i] += table[i][j];
            col[j] += table[i][j];
            total += table[i][j];
        }
    }
    if (total <= 0) throw SizeError("chi2_independence: empty counts");
    Chi2Result res;
    res.min_expected = 1e300;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const double e = row[i] * col[j] / total;
            if (e <= 0) continue;
            res.min_expected = std::min(res.min_expected, e);
            const double d = table[i][j] - e;
            res.stat += d * d / e;
        }
    res.df = double((r - 1) * (c - 1));
    res.p_value = res.df > 0 ? chi2_survival(res.stat, res.df) : 1.0;
    return res;
}

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) throw SizeError("percentile: empty");
    std::sort(v.begin(), v.end());
    const double idx = p * double(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

} // namespace ergo
