#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ergo {

/// Sparse row of an inequality a.x <= rhs.
struct LpRow {
    std::vector<std::pair<int, double>> terms;
    double rhs = 0.0;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
    LpStatus status = LpStatus::optimal;
    double value = 0.0;                 // objective c.x at the optimum
    std::vector<double> x;
};

/// Dense tableau simplex for: maximize c.x subject to rows (a.x <= rhs), x >= 0.
/// Two-phase (artificial variables for rows with negative rhs), Dantzig pricing
/// with a Bland fallback after stalling. Sized for problems up to a few
/// thousand variables; everything is double precision with fixed tolerances.
class DenseSimplex {
  public:
    static constexpr double kEps = 1e-9;

    LpResult maximize(const std::vector<double>& c, const std::vector<LpRow>& rows,
                      std::size_t max_iters = 0) {
        const int n = int(c.size());
        const int m = int(rows.size());
        if (max_iters == 0) max_iters = 50u * std::size_t(n + m + 10);

        // Column layout: [0,n) structural, [n,n+m) slacks, then artificials.
        int n_art = 0;
        for (const auto& r : rows)
            if (r.rhs < 0) ++n_art;
        const int width = n + m + n_art;
        cols_ = width + 1;                       // last column holds the rhs
        rows_ = m;
        tab_.assign(std::size_t(m + 1) * cols_, 0.0);
        basis_.resize(m);

        int art = n + m;
        std::vector<int> art_of_row(m, -1);
        for (int i = 0; i < m; ++i) {
            double sign = rows[i].rhs < 0 ? -1.0 : 1.0;
            double* row = at(i);
            for (const auto& [j, v] : rows[i].terms) {
                if (j < 0 || j >= n) throw SizeError("DenseSimplex: column out of range");
                row[j] += sign * v;
            }
            row[n + i] = sign;                   // slack (negated with the row)
            row[width] = sign * rows[i].rhs;
            if (sign < 0) {
                art_of_row[i] = art;
                row[art] = 1.0;
                basis_[i] = art;
                ++art;
            } else {
                basis_[i] = n + i;
            }
        }

        if (n_art > 0) {
            // Phase 1: minimize the artificial sum, encoded as maximize -sum.
            // Reduced costs relative to the artificial basis: subtracting the
            // artificial rows handles the basic part, and the artificial
            // columns themselves must end at zero reduced cost (their own
            // objective coefficient cancels the basis term).
            double* obj = at(m);
            for (int j = 0; j < cols_; ++j) obj[j] = 0.0;
            for (int i = 0; i < m; ++i)
                if (art_of_row[i] >= 0)
                    for (int j = 0; j < cols_; ++j) obj[j] -= at(i)[j];
            for (int j = n + m; j < width; ++j) obj[j] = 0.0;
            const LpStatus st = iterate(max_iters);
            if (st != LpStatus::optimal) return finish(st, c, n);
            if (at(m)[width] < -1e-7) return finish(LpStatus::infeasible, c, n);
            // Pivot any artificial still basic (degenerate) out if possible,
            // then freeze artificial columns at zero.
            for (int i = 0; i < m; ++i) {
                if (basis_[i] < n + m) continue;
                int enter = -1;
                for (int j = 0; j < n + m && enter < 0; ++j)
                    if (std::abs(at(i)[j]) > kEps) enter = j;
                if (enter >= 0) pivot(i, enter);
            }
            for (int j = n + m; j < width; ++j)
                for (int i = 0; i <= m; ++i) at(i)[j] = 0.0;
        }

        // Phase 2 objective row: reduced costs of maximize c.x.
        double* obj = at(m);
        for (int j = 0; j < cols_; ++j) obj[j] = 0.0;
        for (int j = 0; j < n; ++j) obj[j] = -c[j];
        for (int i = 0; i < m; ++i) {
            const int b = basis_[i];
            if (b < n && std::abs(c[b]) > 0) {
                const double cb = c[b];
                const double* row = at(i);
                for (int j = 0; j < cols_; ++j) obj[j] += cb * row[j];
            }
        }
        const LpStatus st = iterate(max_iters);
        return finish(st, c, n);
    }

  private:
    double* at(int i) { return tab_.data() + std::size_t(i) * cols_; }

    void pivot(int prow, int pcol) {
        double* pr = at(prow);
        const double inv = 1.0 / pr[pcol];
        for (int j = 0; j < cols_; ++j) pr[j] *= inv;
        pr[pcol] = 1.0;
        for (int i = 0; i <= rows_; ++i) {
            if (i == prow) continue;
            double* row = at(i);
            const double f = row[pcol];
            if (f == 0.0) continue;
            for (int j = 0; j < cols_; ++j) row[j] -= f * pr[j];
            row[pcol] = 0.0;
        }
        basis_[prow] = pcol;
    }

    LpStatus iterate(std::size_t max_iters) {
        const int width = cols_ - 1;
        const std::size_t bland_after = max_iters / 2;
        for (std::size_t it = 0; it < max_iters; ++it) {
            const double* obj = at(rows_);
            int enter = -1;
            if (it < bland_after) {
                double best = -kEps;
                for (int j = 0; j < width; ++j)
                    if (obj[j] < best) { best = obj[j]; enter = j; }
            } else {
                for (int j = 0; j < width; ++j)
                    if (obj[j] < -kEps) { enter = j; break; }
            }
            if (enter < 0) return LpStatus::optimal;

            int leave = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < rows_; ++i) {
                const double a = at(i)[enter];
                if (a <= kEps) continue;
                const double ratio = at(i)[width] / a;
                if (leave < 0 || ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 && basis_[i] < basis_[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave < 0) return LpStatus::unbounded;
            pivot(leave, enter);
        }
        return LpStatus::iteration_limit;
    }

    LpResult finish(LpStatus st, const std::vector<double>& c, int n) {
        LpResult res;
        res.status = st;
        res.x.assign(n, 0.0);
        if (st == LpStatus::optimal) {
            for (int i = 0; i < rows_; ++i)
                if (basis_[i] < n) res.x[basis_[i]] = at(i)[cols_ - 1];
            res.value = 0.0;
            for (int j = 0; j < n; ++j) res.value += c[j] * res.x[j];
        }
        return res;
    }

    std::vector<double> tab_;
    std::vector<int> basis_;
    int rows_ = 0, cols_ = 0;
};

} // namespace ergo
