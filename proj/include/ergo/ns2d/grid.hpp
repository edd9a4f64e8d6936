#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../io.hpp"

namespace ergo::ns2d {

/// Unit square [0,1]^2 discretised on a staggered (MAC) mesh with n x n
/// cells: u-velocities live on vertical faces ((n+1) x n), v-velocities on
/// horizontal faces (n x (n+1)), scalars at cell centers (n x n), and stream
/// function values at the (n+1) x (n+1) corner nodes.
struct SquareDomain {
    int n = 64;

    explicit SquareDomain(int cells = 64) : n(cells) {
        if (n < 4 || n % 2 != 0) throw ConfigError("SquareDomain: n must be even and >= 4");
    }

    double h() const { return 1.0 / double(n); }

    // Coordinates of the staggered sample points.
    double xu(int i) const { return double(i) * h(); }              // u: x on vertical faces
    double yu(int j) const { return (double(j) + 0.5) * h(); }      // u: y at cell centers
    double xv(int i) const { return (double(i) + 0.5) * h(); }      // v: x at cell centers
    double yv(int j) const { return double(j) * h(); }              // v: y on horizontal faces
    double xc(int i) const { return (double(i) + 0.5) * h(); }      // cell centers
    double yc(int j) const { return (double(j) + 0.5) * h(); }
    double xn(int i) const { return double(i) * h(); }              // corner nodes
    double yn(int j) const { return double(j) * h(); }

    std::size_t n_u() const { return std::size_t(n + 1) * std::size_t(n); }
    std::size_t n_v() const { return std::size_t(n) * std::size_t(n + 1); }
    std::size_t n_c() const { return std::size_t(n) * std::size_t(n); }
    std::size_t n_node() const { return std::size_t(n + 1) * std::size_t(n + 1); }
};

/// Staggered velocity sample on a SquareDomain. Index helpers are row-major
/// with x fastest: u(i,j) with i in [0,n], j in [0,n-1]; v(i,j) with
/// i in [0,n-1], j in [0,n].
struct VelocityField {
    int n = 0;
    std::vector<double> u, v;

    VelocityField() = default;
    explicit VelocityField(const SquareDomain& dom)
        : n(dom.n), u(dom.n_u(), 0.0), v(dom.n_v(), 0.0) {}

    std::size_t iu(int i, int j) const { return std::size_t(j) * std::size_t(n + 1) + std::size_t(i); }
    std::size_t iv(int i, int j) const { return std::size_t(j) * std::size_t(n) + std::size_t(i); }

    double& at_u(int i, int j) { return u[iu(i, j)]; }
    double at_u(int i, int j) const { return u[iu(i, j)]; }
    double& at_v(int i, int j) { return v[iv(i, j)]; }
    double at_v(int i, int j) const { return v[iv(i, j)]; }

    VelocityField& operator+=(const VelocityField& o) {
        for (std::size_t k = 0; k < u.size(); ++k) u[k] += o.u[k];
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
        return *this;
    }
    VelocityField& operator-=(const VelocityField& o) {
        for (std::size_t k = 0; k < u.size(); ++k) u[k] -= o.u[k];
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k];
        return *this;
    }
    VelocityField& operator*=(double s) {
        for (double& a : u) a *= s;
        for (double& a : v) a *= s;
        return *this;
    }

    /// Discrete divergence at cell (i,j), i.e. the flux imbalance per cell.
    double div_at(int i, int j) const {
        const double h = 1.0 / double(n);
        return (at_u(i + 1, j) - at_u(i, j) + at_v(i, j + 1) - at_v(i, j)) / h;
    }

    double max_div() const {
        double worst = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(div_at(i, j)));
        return worst;
    }

    /// L2 norm weighted by the face-area measure h^2 per sample.
    double l2() const {
        const double h2 = 1.0 / double(n) / double(n);
        double s = 0.0;
        for (double a : u) s += a * a;
        for (double a : v) s += a * a;
        return std::sqrt(s * h2);
    }

    /// H1 seminorm from one-sided differences on each velocity array.
    double h1_semi() const {
        const double h = 1.0 / double(n);
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double dux = (at_u(i + 1, j) - at_u(i, j)) / h;
                s += dux * dux;
            }
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i <= n; ++i) {
                const double duy = (at_u(i, j + 1) - at_u(i, j)) / h;
                s += duy * duy;
            }
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i + 1 < n; ++i) {
                const double dvx = (at_v(i + 1, j) - at_v(i, j)) / h;
                s += dvx * dvx;
            }
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double dvy = (at_v(i, j + 1) - at_v(i, j)) / h;
                s += dvy * dvy;
            }
        return std::sqrt(s * h * h);
    }

    double h1() const {
        const double a = l2(), b = h1_semi();
        return std::sqrt(a * a + b * b);
    }

    double max_abs() const {
        double worst = 0.0;
        for (double a : u) worst = std::max(worst, std::abs(a));
        for (double a : v) worst = std::max(worst, std::abs(a));
        return worst;
    }

    /// Kinetic energy 0.5 * |U|_{L2}^2.
    double energy() const {
        const double a = l2();
        return 0.5 * a * a;
    }

    /// Outward normal velocity sampled on the boundary faces, anticlockwise
    /// from the bottom-left corner: bottom (i rising), right (j rising), top
    /// (i falling), left (j falling); 4n values. Their sum times h is the net
    /// outward volume flux.
    std::vector<double> normal_trace() const {
        std::vector<double> t;
        t.reserve(std::size_t(4 * n));
        for (int i = 0; i < n; ++i) t.push_back(-at_v(i, 0));
        for (int j = 0; j < n; ++j) t.push_back(at_u(n, j));
        for (int i = n - 1; i >= 0; --i) t.push_back(at_v(i, n));
        for (int j = n - 1; j >= 0; --j) t.push_back(-at_u(0, j));
        return t;
    }

    /// Tangential velocity on the walls, anticlockwise positive, sampled on
    /// the nearest interior row or column of the tangential component (half a
    /// cell inside, averaged to the face midpoints). Same ordering as
    /// normal_trace.
    std::vector<double> tangential_trace() const {
        std::vector<double> t;
        t.reserve(std::size_t(4 * n));
        for (int i = 0; i < n; ++i) t.push_back(0.5 * (at_u(i, 0) + at_u(i + 1, 0)));
        for (int j = 0; j < n; ++j) t.push_back(0.5 * (at_v(n - 1, j) + at_v(n - 1, j + 1)));
        for (int i = n - 1; i >= 0; --i) t.push_back(-0.5 * (at_u(i, n - 1) + at_u(i + 1, n - 1)));
        for (int j = n - 1; j >= 0; --j) t.push_back(-0.5 * (at_v(0, j) + at_v(0, j + 1)));
        return t;
    }
};

/// Boundary data for the four walls of the square, sampled at the face
/// midpoints, anticlockwise from the bottom-left corner: bottom, right, top,
/// left; 4n values per component. `normal` is the outward normal velocity,
/// `tangential` the anticlockwise tangential velocity.
struct BoundaryTrace {
    int n = 0;
    std::vector<double> normal;       // length 4n
    std::vector<double> tangential;   // length 4n

    BoundaryTrace() = default;
    explicit BoundaryTrace(int cells)
        : n(cells), normal(std::size_t(4 * cells), 0.0), tangential(std::size_t(4 * cells), 0.0) {
        if (cells < 1) throw ConfigError("BoundaryTrace: need at least one cell per side");
    }

    std::size_t size() const { return normal.size(); }

    /// Arclength of sample k on the perimeter scaled to [0,4).
    double arclength(std::size_t k) const { return (double(k) + 0.5) / double(n); }

    /// Net outward volume flux; must vanish for a divergence-free extension.
    double net_flux() const {
        double s = 0.0;
        for (double a : normal) s += a;
        return s / double(n);
    }

    /// Appends this trace's samples to a (t, s, v_n, v_t) table; callers
    /// stack several times into one file by reusing the table.
    void append_rows(CsvTable& tab, double t) const {
        for (std::size_t k = 0; k < size(); ++k)
            tab.add_row({t, arclength(k), normal[k], tangential[k]});
    }

    static CsvTable csv_table() { return CsvTable({"t", "s", "v_n", "v_t"}); }

    void save_csv(const std::string& path, double t = 0.0) const {
        CsvTable tab = csv_table();
        append_rows(tab, t);
        tab.save(path);
    }

    /// Reads back the trace stored at the first time value in the file.
    static BoundaryTrace load_csv(const std::string& path) {
        const CsvData t = read_csv(path);
        if (t.header.size() != 4 || t.rows.empty() || t.rows.size() % 4 != 0)
            throw ConfigError("BoundaryTrace: malformed trace file " + path);
        const double t0 = t.rows.front()[0];
        std::size_t count = 0;
        while (count < t.rows.size() && t.rows[count][0] == t0) ++count;
        if (count % 4 != 0) throw ConfigError("BoundaryTrace: ragged time block in " + path);
        BoundaryTrace b(int(count / 4));
        for (std::size_t k = 0; k < b.size(); ++k) {
            b.normal[k] = t.rows[k][2];
            b.tangential[k] = t.rows[k][3];
        }
        return b;
    }
};

/// Stream function on the corner nodes; its rotated gradient is an exactly
/// divergence-free staggered velocity.
struct StreamData {
    int n = 0;
    std::vector<double> psi;   // (n+1) x (n+1), row-major, x fastest

    StreamData() = default;
    explicit StreamData(const SquareDomain& dom) : n(dom.n), psi(dom.n_node(), 0.0) {}

    std::size_t idx(int i, int j) const { return std::size_t(j) * std::size_t(n + 1) + std::size_t(i); }
    double& at(int i, int j) { return psi[idx(i, j)]; }
    double at(int i, int j) const { return psi[idx(i, j)]; }

    /// U = (d psi / dy, -d psi / dx) evaluated on the staggered faces; the
    /// discrete divergence of the result is identically zero.
    VelocityField to_velocity() const {
        SquareDomain dom(n);
        VelocityField f(dom);
        const double h = dom.h();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i <= n; ++i) f.at_u(i, j) = (at(i, j + 1) - at(i, j)) / h;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i < n; ++i) f.at_v(i, j) = -(at(i + 1, j) - at(i, j)) / h;
        return f;
    }
};

/// Serialisation of a staggered field as a flat f64 record with a JSON
/// sidecar describing the layout.
inline void save_velocity(const VelocityField& f, const std::string& path) {
    std::vector<double> flat;
    flat.reserve(f.u.size() + f.v.size());
    flat.insert(flat.end(), f.u.begin(), f.u.end());
    flat.insert(flat.end(), f.v.begin(), f.v.end());
    write_f64_file(path, flat);
    nlohmann::json meta;
    meta["kind"] = "velocity_field";
    meta["n"] = f.n;
    meta["layout"] = "u[(n+1)*n] then v[n*(n+1)], row-major, x fastest";
    meta["count"] = flat.size();
    write_json_file(path + ".json", meta);
}

inline VelocityField load_velocity(const std::string& path) {
    const nlohmann::json meta = read_json_file(path + ".json");
    if (meta.value("kind", "") != std::string("velocity_field"))
        throw ConfigError("load_velocity: wrong record kind in " + path + ".json");
    const int n = meta.at("n").get<int>();
    SquareDomain dom(n);
    const std::vector<double> flat = read_f64_file(path);
    if (flat.size() != dom.n_u() + dom.n_v())
        throw ConfigError("load_velocity: size mismatch in " + path);
    VelocityField f(dom);
    std::copy(flat.begin(), flat.begin() + std::ptrdiff_t(dom.n_u()), f.u.begin());
    std::copy(flat.begin() + std::ptrdiff_t(dom.n_u()), flat.end(), f.v.begin());
    return f;
}

} // namespace ergo::ns2d
