#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include <ergo/io.hpp>
#include <ergo/measure.hpp>
#include <ergo/rng.hpp>

using namespace ergo;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ergo_test_" + std::to_string(std::rand()) + "_" +
                std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};
} // namespace

TEST_CASE("g17 formatting round-trips doubles exactly") {
    for (double v : {3.141592653589793, -1.0 / 3.0, 1e-300, 12345678.90123456, 0.0}) {
        const std::string s = fmt_g17(v);
        REQUIRE(std::stod(s) == v);
    }
}

TEST_CASE("discrete measure validation") {
    REQUIRE_THROWS_AS(DiscreteMeasure(1, {0.0, 1.0}, {0.5, 0.6}), ConfigError);
    REQUIRE_THROWS_AS(DiscreteMeasure(1, {0.0, 1.0}, {-0.1, 1.1}), ConfigError);
    REQUIRE_THROWS_AS(DiscreteMeasure(2, {0.0, 1.0, 2.0}, {1.0}), SizeError);

    const DiscreteMeasure d = DiscreteMeasure::dirac({0.3, -0.4});
    REQUIRE(d.dim == 2);
    REQUIRE(d.n_atoms() == 1);
    REQUIRE(d.w[0] == 1.0);

    const DiscreteMeasure e = DiscreteMeasure::empirical(2, {0, 0, 1, 1, 2, 2, 3, 3});
    REQUIRE(e.n_atoms() == 4);
    REQUIRE(e.w[2] == Catch::Approx(0.25));
    REQUIRE(atom_dist(e, 0, e, 1) == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("discrete measure csv round trip") {
    TempDir tmp;
    const DiscreteMeasure m(2, {0.1, 0.2, -1.0 / 3.0, 0.4}, {0.25, 0.75});
    const fs::path p = tmp.path / "measure.csv";
    m.save_csv(p);
    const DiscreteMeasure back = DiscreteMeasure::load_csv(p);
    REQUIRE(back.dim == 2);
    REQUIRE(back.n_atoms() == 2);
    for (std::size_t i = 0; i < m.pts.size(); ++i) REQUIRE(back.pts[i] == m.pts[i]);
    for (std::size_t i = 0; i < m.w.size(); ++i) REQUIRE(back.w[i] == m.w[i]);

    const CsvData raw = read_csv(p);
    REQUIRE(raw.header == std::vector<std::string>{"x0", "x1", "w"});
}

TEST_CASE("density grid basics") {
    DensityGrid g({4, 8}, {0.0, -1.0}, {2.0, 1.0});
    REQUIRE(g.n_cells() == 32);
    REQUIRE(g.cell_volume() == Catch::Approx(0.5 * 0.25));
    g.fill([](const std::vector<double>&) { return 0.25; });
    REQUIRE(g.integral() == Catch::Approx(1.0));

    // Centers of the first and last cells.
    REQUIRE(g.center(0, 0) == Catch::Approx(0.25));
    REQUIRE(g.center(0, 1) == Catch::Approx(-0.875));
    REQUIRE(g.center(31, 0) == Catch::Approx(1.75));
    REQUIRE(g.center(31, 1) == Catch::Approx(0.875));

    g.val[0] = 9.0;
    g.normalize();
    REQUIRE(g.integral() == Catch::Approx(1.0));

    DensityGrid h({4, 8}, {0.0, -1.0}, {2.0, 1.0});
    REQUIRE(g.same_layout(h));
    DensityGrid k({8, 4}, {0.0, -1.0}, {2.0, 1.0});
    REQUIRE_FALSE(g.same_layout(k));
}

TEST_CASE("density grid binary + sidecar round trip") {
    TempDir tmp;
    DensityGrid g({3, 5}, {-1.0, 0.0}, {1.0, 1.0});
    CounterRng rng(4, 4);
    for (double& v : g.val) v = rng.uniform01();
    const fs::path p = tmp.path / "grid.f64";
    g.save(p);
    REQUIRE(fs::exists(p));
    REQUIRE(fs::exists(tmp.path / "grid.f64.json"));
    const DensityGrid back = DensityGrid::load(p);
    REQUIRE(back.same_layout(g));
    for (std::size_t i = 0; i < g.val.size(); ++i) REQUIRE(back.val[i] == g.val[i]);

    const nlohmann::json j = read_json_file(tmp.path / "grid.f64.json");
    REQUIRE(j.at("kind") == "density_grid");
    REQUIRE(j.at("dim") == 2);
}

TEST_CASE("f64 and json files round trip") {
    TempDir tmp;
    const std::vector<double> data{1.5, -2.25, 1e-17, 3.0};
    write_f64_file(tmp.path / "x.f64", data);
    REQUIRE(read_f64_file(tmp.path / "x.f64") == data);

    nlohmann::json j;
    j["alpha"] = 0.5;
    j["tags"] = {"a", "b"};
    write_json_file(tmp.path / "x.json", j);
    REQUIRE(read_json_file(tmp.path / "x.json") == j);
}

TEST_CASE("csv table writes g17 cells") {
    TempDir tmp;
    CsvTable t({"k", "value"});
    t.add_row({1.0, 1.0 / 3.0});
    t.add_row({2.0, 2.0 / 3.0});
    REQUIRE_THROWS_AS(t.add_row({1.0}), SizeError);
    t.save(tmp.path / "t.csv");
    const CsvData back = read_csv(tmp.path / "t.csv");
    REQUIRE(back.rows.size() == 2);
    REQUIRE(back.rows[1][1] == 2.0 / 3.0);
}

TEST_CASE("svg plot emits a drawable document") {
    TempDir tmp;
    SvgPlot plot("decay", "lag", "distance", /*log_y=*/true);
    plot.add_series("pair", {0, 1, 2, 3}, {1.0, 0.5, 0.25, 0.125});
    plot.add_series("floor", {0, 1, 2, 3}, {0.01, 0.01, 0.011, 0.009});
    plot.save(tmp.path / "plot.svg");
    const std::string body = read_text_file(tmp.path / "plot.svg");
    REQUIRE(body.find("<svg") != std::string::npos);
    REQUIRE(body.find("polyline") != std::string::npos);
    REQUIRE(body.find("pair") != std::string::npos);
    REQUIRE(body.find("decay") != std::string::npos);
}

TEST_CASE("product density integrates and samples consistently") {
    const ModeDensity u = ModeDensity::uniform();
    const ModeDensity q = ModeDensity::quadratic();
    ProductDensity pd({&u, &q}, {0.5, 2.0});
    REQUIRE(pd.dim() == 2);
    // pdf at origin: (0.5/0.5) * (0.75/2).
    REQUIRE(pd.pdf({0.0, 0.0}) == Catch::Approx(1.0 * 0.375));
    // Outside the support of the first coordinate.
    REQUIRE(pd.pdf({0.6, 0.0}) == 0.0);

    CounterRng rng(11, 0);
    for (int i = 0; i < 500; ++i) {
        const std::vector<double> x = pd.sample(rng);
        REQUIRE(std::abs(x[0]) <= 0.5);
        REQUIRE(std::abs(x[1]) <= 2.0);
    }
}
