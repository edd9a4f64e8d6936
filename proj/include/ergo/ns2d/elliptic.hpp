#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fftw3.h>

#include "../errors.hpp"
#include "grid.hpp"

namespace ergo::ns2d {

/// Five-point Poisson solve on the corner nodes with Dirichlet data:
/// laplace(p) = f in the interior, p = g on the boundary nodes. The SPD
/// factorisation is computed once per resolution.
class NodalDirichletPoisson {
  public:
    explicit NodalDirichletPoisson(int n) : n_(n) {
        if (n < 4) throw ConfigError("NodalDirichletPoisson: n too small");
        const int m = n - 1;   // interior nodes per direction
        using T = Eigen::Triplet<double>;
        std::vector<T> trip;
        trip.reserve(std::size_t(5 * m * m));
        auto id = [m](int i, int j) { return (j - 1) * m + (i - 1); };
        for (int j = 1; j < n; ++j)
            for (int i = 1; i < n; ++i) {
                trip.emplace_back(id(i, j), id(i, j), 4.0);
                if (i > 1) trip.emplace_back(id(i, j), id(i - 1, j), -1.0);
                if (i < n - 1) trip.emplace_back(id(i, j), id(i + 1, j), -1.0);
                if (j > 1) trip.emplace_back(id(i, j), id(i, j - 1), -1.0);
                if (j < n - 1) trip.emplace_back(id(i, j), id(i, j + 1), -1.0);
            }
        Eigen::SparseMatrix<double> A(m * m, m * m);
        A.setFromTriplets(trip.begin(), trip.end());
        solver_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        solver_->compute(A);
        if (solver_->info() != Eigen::Success)
            throw NumericalError("NodalDirichletPoisson: factorisation failed");
    }

    int n() const { return n_; }

    /// f: interior source (full nodal array, boundary entries ignored);
    /// g: boundary values (full nodal array, interior entries ignored).
    StreamData solve(const StreamData& f, const StreamData& g) const {
        if (f.n != n_ || g.n != n_)
            throw SizeError("NodalDirichletPoisson: resolution mismatch");
        const int m = n_ - 1;
        const double h = 1.0 / double(n_);
        Eigen::VectorXd rhs(m * m);
        for (int j = 1; j < n_; ++j)
            for (int i = 1; i < n_; ++i) {
                double r = -h * h * f.at(i, j);
                if (i == 1) r += g.at(0, j);
                if (i == n_ - 1) r += g.at(n_, j);
                if (j == 1) r += g.at(i, 0);
                if (j == n_ - 1) r += g.at(i, n_);
                rhs((j - 1) * m + (i - 1)) = r;
            }
        const Eigen::VectorXd x = solver_->solve(rhs);
        if (solver_->info() != Eigen::Success)
            throw NumericalError("NodalDirichletPoisson: solve failed");
        StreamData out{};
        out.n = n_;
        out.psi.assign(std::size_t(n_ + 1) * std::size_t(n_ + 1), 0.0);
        for (int j = 0; j <= n_; ++j)
            for (int i = 0; i <= n_; ++i)
                if (i == 0 || i == n_ || j == 0 || j == n_) out.at(i, j) = g.at(i, j);
        for (int j = 1; j < n_; ++j)
            for (int i = 1; i < n_; ++i) out.at(i, j) = x((j - 1) * m + (i - 1));
        return out;
    }

  private:
    int n_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

/// Thirteen-point clamped biharmonic solve on the corner nodes:
/// biharm(q) = f in the interior with q = 0 and dq/dn = g on the boundary.
/// The normal derivative is imposed by mirror ghosts (ghost = mirror +
/// 2h * g), which fold the out-of-range stencil legs back onto the interior,
/// keep the operator symmetric positive definite, and push g to the right
/// hand side.
class ClampedBiharmonic {
  public:
    explicit ClampedBiharmonic(int n) : n_(n) {
        if (n < 6) throw ConfigError("ClampedBiharmonic: n too small");
        const int m = n - 1;
        using T = Eigen::Triplet<double>;
        std::vector<T> trip;
        trip.reserve(std::size_t(13 * m * m));
        auto inside = [this](int i, int j) {
            return i >= 1 && i <= n_ - 1 && j >= 1 && j <= n_ - 1;
        };
        auto id = [m](int i, int j) { return (j - 1) * m + (i - 1); };
        auto add = [&](int row, int i, int j, double c) {
            // Boundary nodes carry q = 0; legs two cells out mirror back in.
            if (i == -1) i = 1;
            if (i == n_ + 1) i = n_ - 1;
            if (j == -1) j = 1;
            if (j == n_ + 1) j = n_ - 1;
            if (inside(i, j)) trip.emplace_back(row, id(i, j), c);
        };
        for (int j = 1; j < n_; ++j)
            for (int i = 1; i < n_; ++i) {
                const int row = id(i, j);
                add(row, i, j, 20.0);
                add(row, i + 1, j, -8.0);
                add(row, i - 1, j, -8.0);
                add(row, i, j + 1, -8.0);
                add(row, i, j - 1, -8.0);
                add(row, i + 1, j + 1, 2.0);
                add(row, i + 1, j - 1, 2.0);
                add(row, i - 1, j + 1, 2.0);
                add(row, i - 1, j - 1, 2.0);
                add(row, i + 2, j, 1.0);
                add(row, i - 2, j, 1.0);
                add(row, i, j + 2, 1.0);
                add(row, i, j - 2, 1.0);
            }
        Eigen::SparseMatrix<double> A(m * m, m * m);
        A.setFromTriplets(trip.begin(), trip.end());
        solver_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        solver_->compute(A);
        if (solver_->info() != Eigen::Success)
            throw NumericalError("ClampedBiharmonic: factorisation failed");
    }

    int n() const { return n_; }

    /// f: interior source on the nodes (boundary entries ignored).
    /// dn: outward normal derivative on the boundary nodes (full nodal
    /// array; only non-corner boundary entries are read). Omitting dn gives
    /// the fully clamped solve.
    StreamData solve(const StreamData& f, const StreamData* dn = nullptr) const {
        if (f.n != n_) throw SizeError("ClampedBiharmonic: resolution mismatch");
        if (dn && dn->n != n_) throw SizeError("ClampedBiharmonic: derivative data mismatch");
        const int m = n_ - 1;
        const double h = 1.0 / double(n_);
        const double h4 = h * h * h * h;
        Eigen::VectorXd rhs(m * m);
        for (int j = 1; j < n_; ++j)
            for (int i = 1; i < n_; ++i) {
                double r = h4 * f.at(i, j);
                if (dn) {
                    // Each leg reaching two cells past a wall contributes its
                    // ghost offset 2h * g at the wall node it mirrors across.
                    if (i == 1) r -= 2.0 * h * dn->at(0, j);
                    if (i == n_ - 1) r -= 2.0 * h * dn->at(n_, j);
                    if (j == 1) r -= 2.0 * h * dn->at(i, 0);
                    if (j == n_ - 1) r -= 2.0 * h * dn->at(i, n_);
                }
                rhs((j - 1) * m + (i - 1)) = r;
            }
        const Eigen::VectorXd x = solver_->solve(rhs);
        if (solver_->info() != Eigen::Success)
            throw NumericalError("ClampedBiharmonic: solve failed");
        StreamData out{};
        out.n = n_;
        out.psi.assign(std::size_t(n_ + 1) * std::size_t(n_ + 1), 0.0);
        for (int j = 1; j < n_; ++j)
            for (int i = 1; i < n_; ++i) out.at(i, j) = x((j - 1) * m + (i - 1));
        return out;
    }

  private:
    int n_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

/// Cell-centered Poisson solve with homogeneous Neumann data via the cosine
/// transform. Solves laplace(p) = f - mean(f); the result has zero mean.
/// Transform plans are cached per resolution and executions serialised, so
/// concurrent callers are safe.
class CellNeumannPoisson {
    struct Plans {
        int n = 0;
        double* buf = nullptr;
        fftw_plan fwd = nullptr, inv = nullptr;
        std::vector<double> eig;   // 1-D Neumann Laplacian eigenvalues
        std::mutex run;

        explicit Plans(int nn) : n(nn) {
            buf = fftw_alloc_real(std::size_t(n) * std::size_t(n));
            if (!buf) throw NumericalError("CellNeumannPoisson: allocation failed");
            fwd = fftw_plan_r2r_2d(n, n, buf, buf, FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
            inv = fftw_plan_r2r_2d(n, n, buf, buf, FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
            if (!fwd || !inv) throw NumericalError("CellNeumannPoisson: planning failed");
            const double h2 = 1.0 / double(n) / double(n);
            eig.resize(std::size_t(n));
            for (int k = 0; k < n; ++k)
                eig[std::size_t(k)] = (2.0 * std::cos(std::numbers::pi * double(k) / double(n)) - 2.0) / h2;
        }
        ~Plans() {
            if (fwd) fftw_destroy_plan(fwd);
            if (inv) fftw_destroy_plan(inv);
            if (buf) fftw_free(buf);
        }
        Plans(const Plans&) = delete;
        Plans& operator=(const Plans&) = delete;
    };

    static std::shared_ptr<Plans> cached(int n) {
        static std::mutex mu;
        static std::map<int, std::shared_ptr<Plans>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, std::make_shared<Plans>(n)).first;
        return it->second;
    }

  public:
    explicit CellNeumannPoisson(int n) : n_(n), plans_(cached(n)) {
        if (n < 4) throw ConfigError("CellNeumannPoisson: n too small");
    }

    int n() const { return n_; }

    /// f: n*n cell values, row-major with x fastest.
    std::vector<double> solve(const std::vector<double>& f) const {
        const std::size_t nn = std::size_t(n_) * std::size_t(n_);
        if (f.size() != nn) throw SizeError("CellNeumannPoisson: size mismatch");
        std::lock_guard<std::mutex> lock(plans_->run);
        double* b = plans_->buf;
        std::copy(f.begin(), f.end(), b);
        fftw_execute(plans_->fwd);
        const double scale = 1.0 / (4.0 * double(n_) * double(n_));
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) {
                const std::size_t k = std::size_t(j) * std::size_t(n_) + std::size_t(i);
                const double lam = plans_->eig[std::size_t(i)] + plans_->eig[std::size_t(j)];
                b[k] = (i == 0 && j == 0) ? 0.0 : b[k] * scale / lam;
            }
        fftw_execute(plans_->inv);
        return std::vector<double>(b, b + nn);
    }

  private:
    int n_;
    std::shared_ptr<Plans> plans_;
};

} // namespace ergo::ns2d
