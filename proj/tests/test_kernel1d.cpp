#include "kbco/environments.hpp"
#include "kbco/kernel1d.hpp"
#include "kbco/properties.hpp"
#include "kbco/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace kbco;
using namespace kbco::k1;

namespace {

class ConstantOracle : public LossOracle {
public:
    explicit ConstantOracle(double c) : c_(c) {}
    double full_loss(long, const Vector&) const override { return c_; }
    int dim() const override { return 1; }
    const ConvexBody& body() const override { return body_; }
    double lipschitz() const override { return 0.0; }
    std::string name() const override { return "constant"; }

private:
    double c_;
    ConvexBody body_ = Interval{0.0, 1.0};
};

GridDensity point_mass(int m, int cell) {
    GridDensity p = GridDensity::uniform(m);
    p.log_weights.setConstant(-std::numeric_limits<double>::infinity());
    p.log_weights(cell) = 0.0;
    return p;
}

GridDensity random_density(int m, Rng& rng) {
    GridDensity p = GridDensity::uniform(m);
    const double c = uniform01(rng), s = 2.0 + 30.0 * uniform01(rng);
    for (int j = 0; j < m; ++j) p.log_weights(j) = -s * (p.grid(j) - c) * (p.grid(j) - c);
    return p;
}

// max of affine pieces with slopes in [-L, L]
struct PiecewiseLinear {
    std::vector<double> a, b;
    double operator()(double x) const {
        double v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < a.size(); ++i) v = std::max(v, a[i] * x + b[i]);
        return v;
    }
};

PiecewiseLinear random_convex_1d(double L, Rng& rng) {
    PiecewiseLinear f;
    const int k = 1 + static_cast<int>(4.0 * uniform01(rng));
    for (int i = 0; i < k; ++i) {
        const double slope = L * (2.0 * uniform01(rng) - 1.0);
        const double knot = uniform01(rng);
        f.a.push_back(slope);
        f.b.push_back(-slope * knot);
    }
    return f;
}

}  // namespace

TEST_CASE("k1_density examples") {
    const auto params = Kernel1DParams::make(0.5, 0.01);
    CHECK(k1_density(params, 0.7, 0.9) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(k1_density(params, 0.495, 0.505) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(k1_density(params, 0.2, 0.9) == 0.0);
}

TEST_CASE("mirrored kernel when mu < eps") {
    const auto params = Kernel1DParams::make(0.005, 0.01);
    CHECK(params.mirrored);
    CHECK_FALSE(Kernel1DParams::make(0.5, 0.01).mirrored);
    // near branch reflected: uniform on [mu, mu + eps]
    CHECK(k1_density(params, 0.01, 0.0) == doctest::Approx(100.0));
    CHECK(k1_density(params, 0.002, 0.0) == 0.0);
}

TEST_CASE("k1_adjoint examples") {
    const auto id = [](double x) { return x; };
    CHECK(k1_adjoint(id, Kernel1DParams::make(0.5, 0.01), 0.9) == doctest::Approx(0.7).epsilon(1e-12));
    const auto sq = [](double x) { return x * x; };
    CHECK(std::abs(k1_adjoint(sq, Kernel1DParams::make(0.0, 0.01), 1.0) - 1.0 / 3.0) <= 1e-8);
    const auto c = [](double) { return 0.37; };
    for (double y : {0.0, 0.3, 0.5, 0.505, 1.0}) CHECK(k1_adjoint(c, Kernel1DParams::make(0.5, 0.01), y) == doctest::Approx(0.37));
}

TEST_CASE("k1_sample from a point mass is uniform on the segment") {
    Rng rng = make_stream(11, 0, StreamTag::verify);
    const GridDensity p = point_mass(11, 9);  // y = 0.9
    const auto params = Kernel1DParams::make(0.5, 0.01);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = k1_sample(p, params, rng);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = std::clamp((xs[i] - 0.5) / 0.4, 0.0, 1.0);
        ks = std::max({ks, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    CHECK(ks < 0.02);
}

TEST_CASE("k1_sample at y = mu stays in the near band") {
    Rng rng = make_stream(12, 0, StreamTag::verify);
    const GridDensity p = point_mass(11, 5);  // y = 0.5
    const auto params = Kernel1DParams::make(0.5, 0.01);
    for (int i = 0; i < 1000; ++i) {
        const double x = k1_sample(p, params, rng);
        CHECK(x >= 0.49);
        CHECK(x <= 0.5);
    }
}

TEST_CASE("k1_sample mean under uniform p") {
    Rng rng = make_stream(13, 0, StreamTag::verify);
    const GridDensity p = GridDensity::uniform(101);
    const auto params = Kernel1DParams::make(p.mean(), 1e-3);
    double s = 0.0, s2 = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const double x = k1_sample(p, params, rng);
        s += x;
        s2 += x * x;
    }
    const double mean = s / draws;
    const double se = std::sqrt((s2 / draws - mean * mean) / draws);
    CHECK(std::abs(mean - 0.5 * (params.mu + p.mean())) <= 3.0 * se);
}

TEST_CASE("k1_estimator examples") {
    GridDensity p = GridDensity::uniform(101);
    const auto params = Kernel1DParams::make(p.mean(), 0.01);
    const Vector zero = k1_estimator(0.3, 0.0, p, params);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
    const Vector est = k1_estimator(0.3, 0.8, p, params);
    // y = 0.9: segment [0.5, 0.9] does not contain 0.3
    CHECK(est(90) == 0.0);
    CHECK(est(10) > 0.0);
    // Kp(x_t) = 0 cannot be estimated
    const GridDensity delta = point_mass(11, 9);
    CHECK_THROWS_AS(k1_estimator(0.2, 0.5, delta, Kernel1DParams::make(0.5, 0.01)), EstimatorUndefinedError);
}

TEST_CASE("k1_run edge cases") {
    Rng rng = make_stream(14, 0, StreamTag::learner);
    ConstantOracle env(0.5);
    K1RunOptions o;
    o.grid_size = 256;
    const RunTrace empty = k1_run(env, 0, o, rng);
    CHECK(empty.rounds.empty());
    const RegretReport r0 = regret_report(empty, env);
    CHECK(r0.regret == 0.0);

    const RunTrace tr = k1_run(env, 500, o, rng);
    CHECK(tr.rounds.size() == 500);
    const RegretReport r = regret_report(tr, env);
    CHECK(r.regret == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(r.regret == r.cumulative_loss - r.best_fixed_loss);
}

TEST_CASE("kernel mass, adjoint duality and unbiasedness properties") {
    CHECK(props::k1_normalization().pass);
    CHECK(props::k1_adjoint_duality().pass);
    CHECK(props::k1_unbiasedness(100000, 10, 5).pass);
}

TEST_CASE("near-branch sign flip is caught") {
    testing::set_near_branch_sign_flip(true);
    const bool caught = !props::k1_unbiasedness(20000, 10, 5).pass;
    testing::set_near_branch_sign_flip(false);
    CHECK(caught);
}

TEST_CASE("K*f(x) <= (<Kp,f> + f(x)) / 2 + 2 eps L for convex f") {
    Rng rng = make_stream(15, 0, StreamTag::verify);
    const double L = 10.0;
    const double eps = 0.01;
    const GridDensity p = random_density(201, rng);
    const Vector w = p.weights();
    const auto params = Kernel1DParams::make(p.mean(), eps);
    double worst = -1.0;
    for (int k = 0; k < 50; ++k) {
        const PiecewiseLinear f = random_convex_1d(L, rng);
        double kpf = 0.0;
        Vector kstar(p.size());
        for (int j = 0; j < p.size(); ++j) {
            kstar(j) = k1_adjoint(f, params, p.grid(j));
            kpf += w(j) * kstar(j);
        }
        for (int j = 0; j < p.size(); ++j) {
            if (std::abs(p.grid(j) - params.mu) < eps) continue;
            worst = std::max(worst, kstar(j) - 0.5 * kpf - 0.5 * f(p.grid(j)) - 2.0 * eps * L);
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("integral of K^(2) p / Kp is at most 2 (1 + log(1/eps))") {
    Rng rng = make_stream(16, 0, StreamTag::verify);
    for (double eps : {0.01, 0.001}) {
        const GridDensity p = random_density(257, rng);
        const Vector w = p.weights();
        const auto params = Kernel1DParams::make(p.mean(), eps);
        const int m = 40000;
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            const double x = (i + 0.5) / m;
            double k2 = 0.0, kp = 0.0;
            for (int j = 0; j < p.size(); ++j) {
                const double k = k1_density(params, x, p.grid(j));
                kp += w(j) * k;
                k2 += w(j) * k * k;
            }
            if (kp > 0.0) acc += k2 / kp;
        }
        CHECK(acc / m <= 2.0 * (1.0 + std::log(1.0 / eps)));
    }
}

TEST_CASE("K*f is 1-Lipschitz on each side of mu + eps") {
    Rng rng = make_stream(17, 0, StreamTag::verify);
    const auto params = Kernel1DParams::make(0.45, 0.02);
    const double cut = params.mu + params.eps;
    for (int k = 0; k < 20; ++k) {
        const PiecewiseLinear f = random_convex_1d(1.0, rng);
        const int m = 2000;
        double worst = 0.0;
        for (int i = 0; i + 1 < m; ++i) {
            const double a = static_cast<double>(i) / (m - 1), b = static_cast<double>(i + 1) / (m - 1);
            if (a < cut && b >= cut) continue;
            worst = std::max(worst, std::abs(k1_adjoint(f, params, b) - k1_adjoint(f, params, a)) / (b - a));
        }
        CHECK(worst <= 1.0 + 1e-6);
    }
}
