#include "kbco/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace kbco::lp {

namespace {

constexpr double kPivotTol = 1e-11;

// Tableau simplex for: maximize obj.x s.t. tab[:, :-1] x = tab[:, -1], x >= 0, with
// `basis` feasible. Only the first `cols` columns may enter. Returns false when unbounded.
bool run_simplex(Matrix& tab, std::vector<int>& basis, const Vector& obj, int cols) {
    const int m = static_cast<int>(tab.rows());
    const int rhs = static_cast<int>(tab.cols()) - 1;
    for (int iter = 0; iter < 50000; ++iter) {
        // Reduced costs r_j = obj_j - sum_i obj_basis(i) * tab(i, j).
        int entering = -1;
        for (int j = 0; j < cols; ++j) {
            double r = obj(j);
            for (int i = 0; i < m; ++i) r -= obj(basis[i]) * tab(i, j);
            if (r > 1e-10) {
                entering = j;  // Bland: smallest index
                break;
            }
        }
        if (entering < 0) return true;

        int leaving = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            const double a = tab(i, entering);
            if (a > kPivotTol) {
                const double ratio = tab(i, rhs) / a;
                if (ratio < best - 1e-14 ||
                    (std::abs(ratio - best) <= 1e-14 && leaving >= 0 && basis[i] < basis[leaving])) {
                    best = ratio;
                    leaving = i;
                }
            }
        }
        if (leaving < 0) return false;

        tab.row(leaving) /= tab(leaving, entering);
        for (int i = 0; i < m; ++i) {
            if (i != leaving) {
                const double f = tab(i, entering);
                if (f != 0.0) tab.row(i) -= f * tab.row(leaving);
            }
        }
        basis[leaving] = entering;
    }
    return true;
}

}  // namespace

Result maximize(const Vector& c, const Matrix& G, const Vector& h) {
    const int k = static_cast<int>(c.size());
    const int m = static_cast<int>(G.rows());
    // Columns: x+ (k), x- (k), slack (m), artificial (m), rhs.
    const int n_struct = 2 * k + m;
    const int cols = n_struct + m;
    Matrix tab = Matrix::Zero(m, cols + 1);
    for (int i = 0; i < m; ++i) {
        const double sign = h(i) < 0.0 ? -1.0 : 1.0;
        tab.block(i, 0, 1, k) = sign * G.row(i);
        tab.block(i, k, 1, k) = -sign * G.row(i);
        tab(i, 2 * k + i) = sign;
        tab(i, n_struct + i) = 1.0;
        tab(i, cols) = sign * h(i);
    }
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n_struct + i;

    // Phase I: minimise the sum of artificials.
    Vector phase1 = Vector::Zero(cols);
    phase1.tail(m).setConstant(-1.0);
    run_simplex(tab, basis, phase1, cols);
    double infeas = 0.0;
    for (int i = 0; i < m; ++i) {
        if (basis[i] >= n_struct) infeas += tab(i, cols);
    }
    const double scale = 1.0 + h.cwiseAbs().maxCoeff();
    Result res;
    if (infeas > 1e-9 * scale) {
        res.status = Status::infeasible;
        return res;
    }
    // Drive remaining (zero-valued) artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n_struct) continue;
        for (int j = 0; j < n_struct; ++j) {
            if (std::abs(tab(i, j)) > kPivotTol) {
                tab.row(i) /= tab(i, j);
                for (int r = 0; r < m; ++r) {
                    if (r != i) tab.row(r) -= tab(r, j) * tab.row(i);
                }
                basis[i] = j;
                break;
            }
        }
    }
    // Phase II over structural columns; artificials get a prohibitive cost.
    Vector phase2 = Vector::Zero(cols);
    phase2.head(k) = c;
    phase2.segment(k, k) = -c;
    phase2.tail(m).setConstant(-1e12);
    if (!run_simplex(tab, basis, phase2, n_struct)) {
        res.status = Status::unbounded;
        return res;
    }
    Vector z = Vector::Zero(cols);
    for (int i = 0; i < m; ++i) z(basis[i]) = tab(i, cols);
    res.status = Status::optimal;
    res.x = z.head(k) - z.segment(k, k);
    res.objective = c.dot(res.x);
    return res;
}

std::optional<ChebyshevBall> chebyshev_center(const Matrix& A, const Vector& b, double radius_cap) {
    const int n = static_cast<int>(A.cols());
    const int m = static_cast<int>(A.rows());
    Matrix G(m + 1, n + 1);
    Vector h(m + 1);
    for (int i = 0; i < m; ++i) {
        G.block(i, 0, 1, n) = A.row(i);
        G(i, n) = A.row(i).norm();
        h(i) = b(i);
    }
    G.row(m).setZero();
    G(m, n) = 1.0;
    h(m) = radius_cap;
    Vector c = Vector::Zero(n + 1);
    c(n) = 1.0;
    const Result r = maximize(c, G, h);
    if (r.status != Status::optimal || r.x(n) < 0.0) return std::nullopt;
    return ChebyshevBall{r.x.head(n), r.x(n)};
}

}  // namespace kbco::lp
