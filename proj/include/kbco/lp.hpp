#pragma once

#include "kbco/types.hpp"

#include <optional>

namespace kbco::lp {

enum class Status { optimal, infeasible, unbounded };

struct Result {
    Status status = Status::infeasible;
    Vector x;
    double objective = 0.0;
};

// maximize c.x subject to G x <= h with x free. Dense two-phase simplex with
// Bland's rule; sized for the handful of variables used by focus-region geometry.
Result maximize(const Vector& c, const Matrix& G, const Vector& h);

struct ChebyshevBall {
    Vector center;
    double radius = 0.0;
};

// Largest ball inside {x : A x <= b}. Rows with zero norm are treated as
// constant constraints. Returns nullopt when the polytope is empty; radius is
// capped at `radius_cap` so unbounded sets stay well-posed.
std::optional<ChebyshevBall> chebyshev_center(const Matrix& A, const Vector& b,
                                              double radius_cap = 1e6);

}  // namespace kbco::lp
