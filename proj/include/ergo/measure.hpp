#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "io.hpp"
#include "noise.hpp"

namespace ergo {

/// Finitely supported probability measure on R^dim. Atom i occupies
/// pts[i*dim .. i*dim+dim); weights are nonnegative and sum to one.
struct DiscreteMeasure {
    int dim = 1;
    std::vector<double> pts;
    std::vector<double> w;

    DiscreteMeasure() = default;
    DiscreteMeasure(int d, std::vector<double> points, std::vector<double> weights)
        : dim(d), pts(std::move(points)), w(std::move(weights)) {
        validate();
    }

    std::size_t n_atoms() const { return w.size(); }
    const double* atom(std::size_t i) const { return pts.data() + i * std::size_t(dim); }

    void validate() const {
        if (dim <= 0) throw SizeError("DiscreteMeasure: dim must be positive");
        if (pts.size() != w.size() * std::size_t(dim))
            throw SizeError("DiscreteMeasure: points/weights mismatch");
        double total = 0;
        for (double wi : w) {
            if (wi < -1e-15) throw ConfigError("DiscreteMeasure: negative weight");
            total += wi;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ConfigError("DiscreteMeasure: weights sum to " + fmt_g17(total));
    }

    static DiscreteMeasure dirac(const std::vector<double>& point) {
        return DiscreteMeasure(int(point.size()), point, {1.0});
    }

    /// Uniform empirical measure over rows of `samples` (n x dim row-major).
    static DiscreteMeasure empirical(int dim, const std::vector<double>& samples) {
        const std::size_t n = samples.size() / std::size_t(dim);
        if (n * std::size_t(dim) != samples.size())
            throw SizeError("DiscreteMeasure::empirical: ragged sample array");
        return DiscreteMeasure(dim, samples, std::vector<double>(n, 1.0 / double(n)));
    }

    void save_csv(const std::filesystem::path& path) const {
        std::vector<std::string> header;
        for (int d = 0; d < dim; ++d) header.push_back("x" + std::to_string(d));
        header.push_back("w");
        CsvTable table(header);
        for (std::size_t i = 0; i < n_atoms(); ++i) {
            std::vector<double> row(atom(i), atom(i) + dim);
            row.push_back(w[i]);
            table.add_row(row);
        }
        table.save(path);
    }

    static DiscreteMeasure load_csv(const std::filesystem::path& path) {
        const CsvData data = read_csv(path);
        if (data.header.size() < 2 || data.header.back() != "w")
            throw ConfigError("measure csv must end with a 'w' column: " + path.string());
        const int dim = int(data.header.size()) - 1;
        DiscreteMeasure m;
        m.dim = dim;
        for (const auto& row : data.rows) {
            m.pts.insert(m.pts.end(), row.begin(), row.end() - 1);
            m.w.push_back(row.back());
        }
        m.validate();
        return m;
    }
};

inline double atom_dist(const DiscreteMeasure& a, std::size_t i,
                        const DiscreteMeasure& b, std::size_t j) {
    if (a.dim != b.dim) throw SizeError("atom_dist: dimension mismatch");
    double s = 0;
    const double* p = a.atom(i);
    const double* q = b.atom(j);
    for (int d = 0; d < a.dim; ++d) {
        const double diff = p[d] - q[d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

/// Density sampled on a regular grid over an axis-aligned box; values are
/// cell-centered, row-major with the last axis fastest.
struct DensityGrid {
    int dim = 1;
    std::vector<int> shape;
    std::vector<double> lo, hi;
    std::vector<double> val;

    DensityGrid() = default;
    DensityGrid(std::vector<int> shp, std::vector<double> low, std::vector<double> high)
        : dim(int(shp.size())), shape(std::move(shp)), lo(std::move(low)), hi(std::move(high)) {
        if (lo.size() != shape.size() || hi.size() != shape.size())
            throw SizeError("DensityGrid: box/shape mismatch");
        std::size_t n = 1;
        for (int s : shape) {
            if (s <= 0) throw SizeError("DensityGrid: empty axis");
            n *= std::size_t(s);
        }
        val.assign(n, 0.0);
    }

    std::size_t n_cells() const { return val.size(); }

    double cell_volume() const {
        double v = 1;
        for (int d = 0; d < dim; ++d) v *= (hi[d] - lo[d]) / shape[d];
        return v;
    }

    double step(int d) const { return (hi[d] - lo[d]) / shape[d]; }

    /// Center coordinate of cell index i along axis d.
    double center(std::size_t flat, int d) const {
        std::size_t rest = flat;
        std::vector<int> idx(dim);
        for (int k = dim - 1; k >= 0; --k) {
            idx[k] = int(rest % std::size_t(shape[k]));
            rest /= std::size_t(shape[k]);
        }
        return lo[d] + (idx[d] + 0.5) * step(d);
    }

    void fill(const std::function<double(const std::vector<double>&)>& f) {
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < val.size(); ++i) {
            for (int d = 0; d < dim; ++d) x[d] = center(i, d);
            val[i] = f(x);
        }
    }

    double integral() const {
        double s = 0;
        for (double v : val) s += v;
        return s * cell_volume();
    }

    void normalize() {
        const double z = integral();
        if (z <= 0) throw NumericalError("DensityGrid::normalize: nonpositive mass");
        for (double& v : val) v /= z;
    }

    bool same_layout(const DensityGrid& o) const {
        return dim == o.dim && shape == o.shape && lo == o.lo && hi == o.hi;
    }

    /// Flat binary float64 payload plus a JSON sidecar header.
    void save(const std::filesystem::path& bin_path) const {
        write_f64_file(bin_path, val);
        nlohmann::json j;
        j["kind"] = "density_grid";
        j["dim"] = dim;
        j["shape"] = shape;
        j["lo"] = lo;
        j["hi"] = hi;
        j["data"] = bin_path.filename().string();
        write_json_file(bin_path.string() + ".json", j);
    }

    static DensityGrid load(const std::filesystem::path& bin_path) {
        const nlohmann::json j = read_json_file(bin_path.string() + ".json");
        DensityGrid g(j.at("shape").get<std::vector<int>>(),
                      j.at("lo").get<std::vector<double>>(),
                      j.at("hi").get<std::vector<double>>());
        g.val = read_f64_file(bin_path);
        if (g.val.size() != g.n_cells())
            throw ConfigError("density grid payload size mismatch: " + bin_path.string());
        return g;
    }
};

/// Product of independent mode densities in normalized coordinates, scaled
/// per-axis: coordinate j has density dens_j(x/scale_j)/scale_j.
class ProductDensity {
  public:
    ProductDensity(std::vector<const ModeDensity*> dens, std::vector<double> scales)
        : dens_(std::move(dens)), scale_(std::move(scales)) {
        if (dens_.size() != scale_.size())
            throw SizeError("ProductDensity: scale count mismatch");
        for (double s : scale_)
            if (s <= 0) throw ConfigError("ProductDensity: scales must be positive");
    }

    int dim() const { return int(dens_.size()); }

    double pdf(const std::vector<double>& x) const {
        if (int(x.size()) != dim()) throw SizeError("ProductDensity::pdf: dim mismatch");
        double p = 1;
        for (int d = 0; d < dim(); ++d)
            p *= dens_[d]->pdf(x[d] / scale_[d]) / scale_[d];
        return p;
    }

    std::vector<double> sample(CounterRng& rng) const {
        std::vector<double> x(dim());
        for (int d = 0; d < dim(); ++d) x[d] = scale_[d] * dens_[d]->sample(rng);
        return x;
    }

    double scale(int d) const { return scale_.at(d); }
    const ModeDensity& density(int d) const { return *dens_.at(d); }

  private:
    std::vector<const ModeDensity*> dens_;
    std::vector<double> scale_;
};

} // namespace ergo
