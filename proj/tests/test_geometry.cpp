#include "kbco/geometry.hpp"
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

Matrix rotation(double th) {
    Matrix r(2, 2);
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    return r;
}

MomentBox centred_box(const Vector& mean, const Vector& half) {
    return box_from_moments(mean, half.array().square().matrix().asDiagonal(), 1.0);
}

}  // namespace

TEST_CASE("mahalanobis_norm examples") {
    const Vector m = vec({0.3, -0.2});
    CHECK(mahalanobis_norm(m, m, Matrix::Identity(2, 2)) == 0.0);
    CHECK(mahalanobis_norm(vec({3.3, 3.8}), m, Matrix::Identity(2, 2)) == doctest::Approx(5.0).epsilon(1e-9));
    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << 4.0, 1.0;
    CHECK(mahalanobis_norm(vec({2.3, 0.8}), m, d) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    Matrix neg = Matrix::Zero(2, 2);
    neg.diagonal() << 1.0, -1.0;
    CHECK_THROWS_AS(mahalanobis_norm(m, m, neg), DegenerateGeometryError);
}

TEST_CASE("covariance jitter") {
    CHECK(covariance_jitter(Matrix::Zero(2, 2)) == 1e-10);
    CHECK(covariance_jitter(4.0 * Matrix::Identity(2, 2)) == doctest::Approx(4e-10));
}

TEST_CASE("body_contains examples") {
    CHECK(body_contains(Interval{0.0, 1.0}, vec({0.5})));
    CHECK_FALSE(body_contains(unit_cube(2), vec({1.01, 0.5})));
    CHECK(body_contains(Ball{vec({0.0, 0.0}), 1.0}, vec({0.6, 0.8})));
    CHECK(body_contains(Box::axis_aligned(vec({0, 0}), vec({2, 1})), vec({2.0, 0.0})));
    CHECK_FALSE(body_contains(Box::axis_aligned(vec({0, 0}), vec({2, 1})), vec({2.0, 1.1})));
}

TEST_CASE("body helpers") {
    CHECK_NOTHROW(validate_body(unit_cube(3)));
    CHECK_THROWS_AS(validate_body(Interval{1.0, 1.0}), DegenerateGeometryError);
    const InnerBall ib = inner_ball(unit_cube(2));
    CHECK(ib.radius == doctest::Approx(0.5).epsilon(1e-9));
    CHECK((ib.center - vec({0.5, 0.5})).norm() <= 1e-9);
    CHECK(max_distance(unit_cube(2), vec({0.0, 0.0})) == doctest::Approx(std::sqrt(2.0)));
    const Vector p = project(unit_cube(2), vec({1.5, 0.5}));
    CHECK((p - vec({1.0, 0.5})).norm() <= 1e-6);
    const Vector q = project(Ball{vec({0.0, 0.0}), 1.0}, vec({3.0, 4.0}));
    CHECK((q - vec({0.6, 0.8})).norm() <= 1e-12);
}

TEST_CASE("box_from_moments examples") {
    const MomentBox cube = box_from_moments(vec({0, 0, 0}), Matrix::Identity(3, 3), 2.0);
    CHECK((cube.half_widths() - Vector::Constant(3, 2.0)).norm() <= 1e-12);

    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << 4.0, 1.0;
    const MomentBox b = box_from_moments(vec({0, 0}), d, 1.0);
    Vector hw = b.half_widths();
    std::sort(hw.data(), hw.data() + 2);
    CHECK((hw - vec({1.0, 2.0})).norm() <= 1e-12);

    const Matrix r = rotation(std::numbers::pi / 4);
    const MomentBox rb = box_from_moments(vec({0, 0}), r * d * r.transpose(), 1.0);
    Vector rhw = rb.half_widths();
    std::sort(rhw.data(), rhw.data() + 2);
    CHECK((rhw - vec({1.0, 2.0})).norm() <= 1e-12);
    // the long axis points along the rotated first coordinate
    CHECK(rb.contains(1.99 * r.col(0)));
    CHECK_FALSE(rb.contains(1.99 * r.col(1)));
}

TEST_CASE("moment boxes sit between E(r) and E(sqrt(n) r)") {
    Rng rng = make_stream(21, 0, StreamTag::verify);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = Matrix::Random(3, 3);
        const Matrix cov = a * a.transpose() + 0.1 * Matrix::Identity(3, 3);
        const Vector mean = Vector::Random(3);
        const double r = 0.5 + uniform01(rng);
        const MomentBox box = box_from_moments(mean, cov, r);
        const Matrix L = Eigen::LLT<Matrix>(cov).matrixL();
        for (int i = 0; i < 1000; ++i) {
            const Vector z = unit_sphere(3, rng) * std::pow(uniform01(rng), 1.0 / 3.0) * std::sqrt(3.0) * r;
            const Vector x = mean + L * z;
            const double d = mahalanobis_norm(x, mean, cov);
            if (d <= r * (1.0 - 1e-9)) CHECK(box.contains(x));
            if (box.contains(x)) CHECK(d <= std::sqrt(3.0) * r * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("boundary_facets examples") {
    FocusRegion f{unit_cube(2), {}};
    CHECK(boundary_facets(f).empty());

    f.cuts.push_back(centred_box(vec({0.5, 0.5}), vec({0.2, 0.1})));
    CHECK(boundary_facets(f).size() == 4);

    FocusRegion g{unit_cube(2), {centred_box(vec({0.9, 0.5}), vec({0.3, 0.2}))}};
    const auto facets = boundary_facets(g);
    CHECK(facets.size() == 3);

    Rng rng = make_stream(22, 0, StreamTag::verify);
    for (const auto& fc : facets) {
        CHECK(g.contains(fc.interior_point, 1e-9));
        CHECK(std::abs(fc.normal.dot(fc.interior_point) - fc.offset) <= 1e-9);
        // pushing outward leaves F
        CHECK_FALSE(g.contains(fc.interior_point + 1e-6 * fc.normal));
        for (int i = 0; i < 20; ++i) {
            const Vector p = fc.interior_point + fc.tangent.col(0) * ((uniform01(rng) - 0.5) * 0.01);
            CHECK(std::abs(fc.normal.dot(p) - fc.offset) <= 1e-9);
        }
    }

    FocusRegion e{unit_cube(2), {Ellipsoid{vec({0.5, 0.5}), 0.01 * Matrix::Identity(2, 2), 1.0}}};
    CHECK_THROWS_AS(boundary_facets(e), DegenerateGeometryError);
}

TEST_CASE("focus region interior point") {
    FocusRegion f{unit_cube(2), {centred_box(vec({0.2, 0.3}), vec({0.1, 0.1}))}};
    const auto p = f.interior_point();
    REQUIRE(p.has_value());
    CHECK(f.contains(*p));
    FocusRegion empty{unit_cube(2), {centred_box(vec({3.0, 3.0}), vec({0.1, 0.1}))}};
    CHECK_FALSE(empty.interior_point().has_value());
}
