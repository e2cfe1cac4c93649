#include "kbco/engine.hpp"
#include "kbco/properties.hpp"
#include "kbco/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace kbco;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

class ZeroOracle : public LossOracle {
public:
    double full_loss(long, const Vector&) const override { return 0.0; }
    int dim() const override { return 2; }
    const ConvexBody& body() const override { return body_; }
    double lipschitz() const override { return 0.0; }
    std::string name() const override { return "zero"; }

private:
    ConvexBody body_ = unit_cube(2);
};

AlgoParams cutting(long T) {
    ParamOverrides ov;
    ov.alpha = 0.5;
    return AlgoParams::make(Preset::practical, 2, T, ov);
}

}  // namespace

TEST_CASE("theory preset formulas") {
    const int n = 2;
    const long T = 20000;
    const AlgoParams p = AlgoParams::theory(n, T);
    const double lt = std::log(static_cast<double>(T));
    CHECK(p.gamma == doctest::Approx(1.0 / (5.0 * n * std::log2(static_cast<double>(T)))));
    CHECK(p.eta1 == doctest::Approx(1.0 / (20.0 * std::exp(2.0) * std::sqrt(n * T * lt))));
    CHECK(p.alpha == doctest::Approx(std::pow(2.0 * std::numbers::e, 17) * n * n * lt * lt));
    const double eps = 1.0 / (80.0 * std::numbers::e * 20.0);
    CHECK(p.eps == doctest::Approx(eps));
    CHECK(p.lambda == doctest::Approx(std::pow(eps, 4) / (1e6 * std::pow(n, 4) * p.alpha * p.alpha * lt * lt)));
    CHECK(p.sigma2 == doctest::Approx(eps * eps / (n * lt * (2.0 - p.lambda))));
    CHECK(p.beta == 4.0);
    CHECK_NOTHROW(p.validate());
    CHECK(p.cut_budget() == doctest::Approx(5.0 * n * std::log2(20000.0)));
    CHECK(std::pow(1.0 + p.gamma, std::floor(p.cut_budget())) <= std::numbers::e);
}

TEST_CASE("practical preset and Omega radius") {
    const AlgoParams p = AlgoParams::practical(2, 20000);
    CHECK(p.lambda == 0.05);
    CHECK(AlgoParams::practical(8, 100).lambda == doctest::Approx(1.0 / 32.0));
    CHECK(p.sigma2 == doctest::Approx(1.0 / (2.0 * std::log(20000.0))));
    CHECK(p.alpha == 8.0);
    CHECK(p.gamma == 0.1);
    CHECK(p.eta1 == doctest::Approx(1.0 / std::sqrt(40000.0)));
    CHECK(p.omega_radius() == doctest::Approx(10.0 * 2 * 8.0 * 0.05 + 20.0 * std::sqrt(0.05) * p.eps));
    CHECK(AlgoParams::practical(2, 0).eta1 == doctest::Approx(0.5));

    ParamOverrides ov;
    ov.lambda = 0.7;
    CHECK_THROWS_AS(AlgoParams::make(Preset::practical, 2, 100, ov).validate(), ConfigError);
    ParamOverrides small;
    small.alpha = 0.5;
    CHECK_THROWS_AS(AlgoParams::make(Preset::theory, 2, 100, small).validate(), ConfigError);
    CHECK(p.for_horizon(5000).eta1 == doctest::Approx(1.0 / std::sqrt(10000.0)));
}

TEST_CASE("enum parsing") {
    CHECK(parse_preset("theory") == Preset::theory);
    CHECK(parse_focus_primitive("ellipsoid") == FocusPrimitive::ellipsoid);
    CHECK(parse_density_mode("grid") == DensityMode::grid);
    CHECK_THROWS_AS(parse_preset("fast"), ConfigError);
    CHECK(to_string(Preset::practical) == "practical");
}

TEST_CASE("Omega region membership") {
    EngineState s = init_state(unit_cube(2), AlgoParams::practical(2, 1000));
    const OmegaRegion om = omega_region(s);
    CHECK(om.ellipsoid.radius == doctest::Approx(s.params.omega_radius()));
    CHECK(om.contains(s.moments.mean));
    CHECK_FALSE(om.contains(vec({1.2, 0.5})));
    const double r = om.ellipsoid.radius;
    const Vector edge = s.moments.mean + 0.999 * r * std::sqrt(s.moments.covariance(0, 0)) * vec({1.0, 0.0});
    CHECK(om.contains(edge) == body_contains(unit_cube(2), edge));
}

TEST_CASE("run with T = 0 is empty") {
    Rng rng = make_stream(51, 0, StreamTag::learner);
    ZeroOracle z;
    CHECK(run(z, AlgoParams::practical(2, 0), rng).rounds.empty());
}

TEST_CASE("zero losses leave the density unchanged") {
    Rng rng = make_stream(52, 0, StreamTag::learner);
    ZeroOracle z;
    EngineOptions o;
    o.enable_focus = false;
    EngineState s = init_state(unit_cube(2), AlgoParams::practical(2, 100), o);
    const Vector w0 = s.grid.weights;
    for (int t = 0; t < 10; ++t) engine_step(s, z, rng);
    CHECK((s.grid.weights - w0).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("engine properties") {
    CHECK(props::eta_schedule(53).pass);
    CHECK(props::monotone_focus(53).pass);
    CHECK(props::q_normalization(53).pass);
    CHECK(props::omega_injection(53).pass);
    CHECK(props::grid_tilt_sign(53).pass);
    CHECK(props::round_count(53).pass);
    CHECK(props::telescoping(100, 53).pass);
    CHECK(props::omega_coverage(100000, 53).pass);
}

TEST_CASE("update_focus examples") {
    Rng rng = make_stream(54, 0, StreamTag::learner);
    ParamOverrides ov;
    ov.alpha = 10.0;
    EngineState wide = init_state(unit_cube(2), AlgoParams::make(Preset::practical, 2, 100, ov));
    CHECK_FALSE(update_focus(wide, rng));
    CHECK(wide.N == 0);

    EngineState narrow = init_state(unit_cube(2), cutting(100));
    const double eta = narrow.eta;
    CHECK(update_focus(narrow, rng));
    CHECK(narrow.N == 1);
    CHECK(narrow.eta == doctest::Approx(eta * 1.1));
    CHECK(narrow.focus.cuts.size() == 1);
}

TEST_CASE("restart_check examples") {
    Rng rng = make_stream(55, 0, StreamTag::learner);
    EngineState fresh = init_state(unit_cube(2), AlgoParams::practical(2, 100));
    CHECK_FALSE(restart_probe(fresh).has_value());
    CHECK_FALSE(restart_check(fresh));

    // no bumps yet: L~ is flat, the difference is 0 <= beta / eta_1
    EngineState cut = init_state(unit_cube(2), cutting(100));
    REQUIRE(update_focus(cut, rng));
    const auto probe = restart_probe(cut);
    REQUIRE(probe.has_value());
    CHECK(probe->facets == 4);
    CHECK(probe->boundary_min - probe->interior_min == doctest::Approx(0.0));
    CHECK(restart_check(cut));

    ParamOverrides ov;
    ov.alpha = 0.5;
    EngineState ell = init_state(unit_cube(2), AlgoParams::make(Preset::practical, 2, 100, ov, FocusPrimitive::ellipsoid));
    REQUIRE(update_focus(ell, rng));
    CHECK_FALSE(restart_check(ell));
}

TEST_CASE("analytic mode runs and records") {
    Rng rng = make_stream(56, 0, StreamTag::learner);
    OraclePtr q = make_quadratic(unit_cube(3), vec({0.3, 0.6, 0.5}));
    EngineOptions o;
    o.moment_samples = 64;
    o.volume_samples = 256;
    const RunTrace tr = run(*q, AlgoParams::practical(3, 30), rng, o);
    CHECK(tr.rounds.size() == 30);
    CHECK_FALSE(tr.aborted);
    for (const auto& r : tr.rounds) {
        CHECK(r.loss >= 0.0);
        CHECK(r.loss <= 1.0);
        CHECK(r.u > 0.0);
    }
}
