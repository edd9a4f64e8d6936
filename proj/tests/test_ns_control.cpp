// Feedback stabiliser for the boundary-driven flow: a Gauss-Newton search
// for a boundary-forcing correction, carried by the forcing bump inside the
// control window, that pulls a companion trajectory toward the reference by
// the objective time. Exercises validation, determinism, the zero-control
// shortcuts, best-effort semantics, and the pairwise contraction check.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ergo/io.hpp"
#include "ergo/ns2d/control.hpp"
#include "ergo/rng.hpp"

using namespace ergo;
using namespace ergo::ns2d;

namespace {

constexpr double kPi = std::numbers::pi;

NsSystem make_system(double nu) {
    NsSystemConfig cfg;
    cfg.ns = {32, nu, 5e-3};
    return NsSystem(cfg);
}

// Divergence-free no-slip state for seeding test pairs.
StateVector packed_state(const NsSystem& sys, double amp, double skew) {
    const int n = sys.config().ns.n;
    SquareDomain dom(n);
    StreamData psi(dom);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const double x = double(i) / n, y = double(j) / n;
            const double sx = std::sin(kPi * x), sy = std::sin(kPi * y);
            psi.at(i, j) = amp * sx * sx * sy * sy * (1.0 + skew * x * y);
        }
    return sys.pack(psi.to_velocity());
}

} // namespace

TEST_CASE("stabiliser factory validates its inputs", "[ns][control]") {
    const NsSystem sys = make_system(0.05);
    const ControlWindow w;   // 0.1 / 0.5 / 0.7 / 0.8
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, w, 0, 0.5, 2), ConfigError);
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, w, 99, 0.5, 2), ConfigError);
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, w, 2, 0.0, 2), ConfigError);
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, w, 2, 1.0, 2), ConfigError);
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, w, 2, 0.5, 0), ConfigError);
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, w, 2, 0.5, 2, -1.0), ConfigError);

    ControlWindow bad;
    bad.a = 0.0;   // violates 0 < a
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, bad, 2, 0.5, 2), ConfigError);

    ControlWindow shifted;   // window starts after the forcing bump onset
    shifted.a = 0.2;
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, shifted, 2, 0.5, 2), ConfigError);

    ControlWindow offgrid;   // objective time not on the substep lattice
    offgrid.b = 0.5012;
    REQUIRE_THROWS_AS(ns_feedback_stabiliser(sys, offgrid, 2, 0.5, 2), ConfigError);
}

TEST_CASE("identical states produce the exact zero correction", "[ns][control]") {
    const NsSystem sys = make_system(0.05);
    std::shared_ptr<NsFeedbackDiag> diag;
    const Stabiliser st = ns_feedback_stabiliser(sys, ControlWindow{}, 2, 0.5, 2, 0.05, &diag);
    REQUIRE(st.block == 2);
    REQUIRE_FALSE(st.eta_independent);

    const StateVector u = packed_state(sys, 0.05, 0.0);
    CounterRng rng(11, 0);
    const NoiseVector eta = sys.noise().sample(rng);
    const std::vector<double> c = st.correction(u, u, eta);
    REQUIRE(c.size() == 2);
    for (double v : c) REQUIRE(v == 0.0);
    REQUIRE(diag->d0 == 0.0);
}

TEST_CASE("correction is deterministic and helps by the objective time", "[ns][control]") {
    const NsSystem sys = make_system(0.05);
    std::shared_ptr<NsFeedbackDiag> diag;
    const Stabiliser st = ns_feedback_stabiliser(sys, ControlWindow{}, 2, 0.5, 3, 0.05, &diag);

    const StateVector u = packed_state(sys, 0.05, 0.0);
    const StateVector up = packed_state(sys, 0.05, 0.4);
    CounterRng rng(12, 0);
    const NoiseVector eta = sys.noise().sample(rng);

    const std::vector<double> c1 = st.correction(u, up, eta);
    const NsFeedbackDiag first = *diag;
    const std::vector<double> c2 = st.correction(u, up, eta);
    REQUIRE(c1.size() == 2);
    for (std::size_t k = 0; k < c1.size(); ++k) REQUIRE(c1[k] == c2[k]);

    REQUIRE(first.d0 > 0.0);
    REQUIRE(first.w_a > 0.0);
    REQUIRE_FALSE(first.trace.empty());
    REQUIRE(first.w_b <= first.w_b_zero + 1e-15);
    REQUIRE(first.factor_end < 1.0);   // viscosity plus control contract by time tau
}

TEST_CASE("strong viscosity meets the target without control", "[ns][control]") {
    const NsSystem sys = make_system(0.5);
    std::shared_ptr<NsFeedbackDiag> diag;
    const Stabiliser st = ns_feedback_stabiliser(sys, ControlWindow{}, 2, 0.9, 3, 0.05, &diag);

    const StateVector u = packed_state(sys, 0.05, 0.0);
    const StateVector up = packed_state(sys, 0.05, 0.3);
    CounterRng rng(13, 0);
    const std::vector<double> c = st.correction(u, up, sys.noise().sample(rng));
    for (double v : c) REQUIRE(v == 0.0);
    REQUIRE(diag->target_met);
    REQUIRE(diag->iterations == 0);
}

TEST_CASE("impossible targets degrade gracefully", "[ns][control]") {
    const NsSystem sys = make_system(0.05);
    std::shared_ptr<NsFeedbackDiag> diag;
    const Stabiliser st = ns_feedback_stabiliser(sys, ControlWindow{}, 2, 1e-6, 2, 0.05, &diag);

    const StateVector u = packed_state(sys, 0.05, 0.0);
    const StateVector up = packed_state(sys, 0.05, 0.4);
    CounterRng rng(14, 0);
    std::vector<double> c;
    REQUIRE_NOTHROW(c = st.correction(u, up, sys.noise().sample(rng)));
    REQUIRE_FALSE(diag->target_met);
    REQUIRE(diag->iterations >= 1);
    REQUIRE(diag->w_b <= diag->w_b_zero + 1e-15);
}

TEST_CASE("sampled pairs contract under the corrected noise", "[ns][control]") {
    const NsSystem sys = make_system(0.05);
    const Stabiliser st = ns_feedback_stabiliser(sys, ControlWindow{}, 2, 0.5, 2, 0.05);
    const StabiliserReport rep = verify_stabilisability(sys, st, 3, 99, 5000);
    REQUIRE(rep.n_pairs == 3);
    REQUIRE(rep.n_degenerate == 0);
    REQUIRE(rep.contraction_max < 1.0);
    REQUIRE(rep.pass);
}

TEST_CASE("optimizer trace round-trips through CSV", "[ns][control]") {
    const NsSystem sys = make_system(0.05);
    std::shared_ptr<NsFeedbackDiag> diag;
    const Stabiliser st = ns_feedback_stabiliser(sys, ControlWindow{}, 2, 0.5, 2, 0.05, &diag);
    const StateVector u = packed_state(sys, 0.05, 0.0);
    const StateVector up = packed_state(sys, 0.05, 0.4);
    CounterRng rng(15, 0);
    st.correction(u, up, sys.noise().sample(rng));

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "ergo_control_trace.csv";
    diag->save_trace_csv(path);
    const CsvData back = read_csv(path.string());
    REQUIRE(back.header == std::vector<std::string>{"iteration", "objective"});
    REQUIRE(back.rows.size() == diag->trace.size());
    for (std::size_t k = 0; k < back.rows.size(); ++k) {
        REQUIRE(back.rows[k][0] == double(diag->trace[k].first));
        REQUIRE(back.rows[k][1] == diag->trace[k].second);
    }
    std::filesystem::remove(path);
}
