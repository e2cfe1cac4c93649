#pragma once

// Convex bodies, Mahalanobis ellipsoids, moment boxes and focus regions.

#include "kbco/types.hpp"

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace kbco {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

struct Ball {
    Vector center;
    double radius = 1.0;
};

// H-representation {x : A x <= b}.
struct Polytope {
    Matrix A;
    Vector b;
};

// {x : |axes^T (x - center)|_i <= half_widths_i}; columns of `axes` are orthonormal.
struct Box {
    Vector center;
    Vector half_widths;
    Matrix axes;

    static Box axis_aligned(const Vector& lo, const Vector& hi);
};

using ConvexBody = std::variant<Interval, Ball, Polytope, Box>;

Polytope unit_cube(int n);

int dimension(const ConvexBody& body);

// Closed-set membership; `tol` widens every constraint by that amount.
bool body_contains(const ConvexBody& body, const Vector& x, double tol = 0.0);

struct InnerBall {
    Vector center;
    double radius = 0.0;
};

// Largest inscribed ball (Chebyshev ball for polytopes).
InnerBall inner_ball(const ConvexBody& body);

// Throws DegenerateGeometryError when the interior is empty.
void validate_body(const ConvexBody& body);

std::pair<Vector, Vector> bounding_box(const ConvexBody& body);
double diameter_bound(const ConvexBody& body);

// Largest distance from `point` to the body (exact for all variants except
// general polytopes, where the bounding-box corner distance is used).
double max_distance(const ConvexBody& body, const Vector& point);

// Euclidean projection; Dykstra's alternating projections for polytopes.
Vector project(const ConvexBody& body, const Vector& x);

// Interval, Box and Polytope bodies as a single H-representation.
Polytope to_polytope(const ConvexBody& body);

// Covariance jitter delta = 1e-10 * trace / n (absolute 1e-10 for a zero matrix).
double covariance_jitter(const Matrix& covariance);
Matrix regularize_covariance(const Matrix& covariance);

// ||x - mean|| in the inverse-covariance norm, after jitter. Throws
// DegenerateGeometryError when the regularised covariance is not positive definite.
template <typename DerivedX, typename DerivedM, typename DerivedC>
double mahalanobis_norm(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedM>& mean,
                        const Eigen::MatrixBase<DerivedC>& covariance) {
    const Matrix reg = regularize_covariance(covariance);
    Eigen::LLT<Matrix> llt(reg);
    if (llt.info() != Eigen::Success) {
        throw DegenerateGeometryError("mahalanobis_norm: covariance is singular after jitter");
    }
    const Vector diff = (x - mean).template cast<double>();
    return llt.matrixL().solve(diff).norm();
}

struct Ellipsoid {
    Vector mean;
    Matrix covariance;
    double radius = 1.0;

    bool contains(const Vector& x, double tol = 0.0) const;
};

// Box ||D^{-1/2} U (x - mean)||_inf <= radius with Cov = U^T D U: half-width
// along eigenvector i is radius * sqrt(D_i). Rows of U are the eigenvectors.
struct MomentBox {
    Vector mean;
    Vector eigenvalues;
    Matrix rotation;  // U
    double radius = 1.0;

    Vector half_widths() const;
    bool contains(const Vector& x, double tol = 0.0) const;
    Box as_box() const;
};

MomentBox box_from_moments(const Vector& mean, const Matrix& covariance, double radius);

using FocusCut = std::variant<MomentBox, Ellipsoid>;

bool cut_contains(const FocusCut& cut, const Vector& x, double tol = 0.0);

// K intersected with an accumulating list of cuts; F_1 = K.
struct FocusRegion {
    ConvexBody base;
    std::vector<FocusCut> cuts;

    int dim() const { return dimension(base); }
    bool contains(const Vector& x, double tol = 0.0) const;
    bool box_only() const;
    std::pair<Vector, Vector> bounding_box() const;
    // Strictly feasible point: Chebyshev centre for polyhedral regions, otherwise
    // the most recent cut centre when it lies inside.
    std::optional<Vector> interior_point() const;
};

// Polyhedral form of a box-only focus region.
Polytope focus_polytope(const FocusRegion& region);

struct Facet {
    Polytope region;        // H-rep including the face equality as two inequalities
    Vector normal;          // unit outward normal of the box face
    double offset = 0.0;    // normal . x = offset on the face
    std::size_t cut_index = 0;
    int axis = 0;
    int side = 1;
    Vector interior_point;  // relative-interior point, strictly inside int(K)
    Matrix tangent;         // n x (n-1) orthonormal basis of the face plane
};

inline constexpr double kFacetTolerance = 1e-9;

// (n-1)-dimensional faces of the box cuts that meet F inside int(K).
// Throws DegenerateGeometryError if the region carries ellipsoid cuts or a ball base.
std::vector<Facet> boundary_facets(const FocusRegion& region);

}  // namespace kbco
