#include "kbco/geometry.hpp"

#include "kbco/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kbco {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Orthonormal basis of the complement of a unit vector.
Matrix complement_basis(const Vector& normal) {
    const int n = static_cast<int>(normal.size());
    Matrix basis(n, n - 1);
    if (n == 1) return basis;
    Eigen::HouseholderQR<Matrix> qr(normal);
    const Matrix q = qr.householderQ();
    basis = q.rightCols(n - 1);
    return basis;
}

}  // namespace

Box Box::axis_aligned(const Vector& lo, const Vector& hi) {
    const int n = static_cast<int>(lo.size());
    return Box{(lo + hi) / 2.0, (hi - lo) / 2.0, Matrix::Identity(n, n)};
}

Polytope unit_cube(int n) {
    Polytope p;
    p.A.resize(2 * n, n);
    p.A.topRows(n) = Matrix::Identity(n, n);
    p.A.bottomRows(n) = -Matrix::Identity(n, n);
    p.b.resize(2 * n);
    p.b.head(n).setOnes();
    p.b.tail(n).setZero();
    return p;
}

int dimension(const ConvexBody& body) {
    return std::visit(Overloaded{
                          [](const Interval&) { return 1; },
                          [](const Ball& b) { return static_cast<int>(b.center.size()); },
                          [](const Polytope& p) { return static_cast<int>(p.A.cols()); },
                          [](const Box& b) { return static_cast<int>(b.center.size()); },
                      },
                      body);
}

bool body_contains(const ConvexBody& body, const Vector& x, double tol) {
    return std::visit(Overloaded{
                          [&](const Interval& k) { return x(0) >= k.lo - tol && x(0) <= k.hi + tol; },
                          [&](const Ball& k) { return (x - k.center).norm() <= k.radius + tol; },
                          [&](const Polytope& k) {
                              for (Eigen::Index i = 0; i < k.A.rows(); ++i) {
                                  if (k.A.row(i).dot(x) > k.b(i) + tol * k.A.row(i).norm()) return false;
                              }
                              return true;
                          },
                          [&](const Box& k) {
                              const Vector z = k.axes.transpose() * (x - k.center);
                              return ((z.cwiseAbs() - k.half_widths).array() <= tol).all();
                          },
                      },
                      body);
}

InnerBall inner_ball(const ConvexBody& body) {
    return std::visit(Overloaded{
                          [](const Interval& k) {
                              Vector c(1);
                              c(0) = 0.5 * (k.lo + k.hi);
                              return InnerBall{c, 0.5 * (k.hi - k.lo)};
                          },
                          [](const Ball& k) { return InnerBall{k.center, k.radius}; },
                          [](const Polytope& k) {
                              const auto cheb = lp::chebyshev_center(k.A, k.b);
                              if (!cheb) {
                                  return InnerBall{Vector::Zero(k.A.cols()), -1.0};
                              }
                              return InnerBall{cheb->center, cheb->radius};
                          },
                          [](const Box& k) { return InnerBall{k.center, k.half_widths.minCoeff()}; },
                      },
                      body);
}

void validate_body(const ConvexBody& body) {
    const InnerBall ib = inner_ball(body);
    if (!(ib.radius > 1e-12)) {
        throw DegenerateGeometryError("convex body has empty interior");
    }
}

std::pair<Vector, Vector> bounding_box(const ConvexBody& body) {
    return std::visit(
        Overloaded{
            [](const Interval& k) {
                Vector lo(1), hi(1);
                lo(0) = k.lo;
                hi(0) = k.hi;
                return std::pair{lo, hi};
            },
            [](const Ball& k) {
                const Vector r = Vector::Constant(k.center.size(), k.radius);
                return std::pair<Vector, Vector>{k.center - r, k.center + r};
            },
            [](const Polytope& k) {
                const int n = static_cast<int>(k.A.cols());
                Vector lo(n), hi(n);
                for (int j = 0; j < n; ++j) {
                    Vector c = Vector::Zero(n);
                    c(j) = 1.0;
                    const auto up = lp::maximize(c, k.A, k.b);
                    const auto down = lp::maximize(-c, k.A, k.b);
                    if (up.status != lp::Status::optimal || down.status != lp::Status::optimal) {
                        throw DegenerateGeometryError("polytope is empty or unbounded");
                    }
                    hi(j) = up.x(j);
                    lo(j) = down.x(j);
                }
                return std::pair{lo, hi};
            },
            [](const Box& k) {
                const Vector extent = k.axes.cwiseAbs() * k.half_widths;
                return std::pair<Vector, Vector>{k.center - extent, k.center + extent};
            },
        },
        body);
}

double diameter_bound(const ConvexBody& body) {
    if (const auto* ball = std::get_if<Ball>(&body)) return 2.0 * ball->radius;
    if (const auto* box = std::get_if<Box>(&body)) return 2.0 * box->half_widths.norm();
    const auto [lo, hi] = bounding_box(body);
    return (hi - lo).norm();
}

double max_distance(const ConvexBody& body, const Vector& point) {
    return std::visit(Overloaded{
                          [&](const Interval& k) { return std::max(std::abs(point(0) - k.lo), std::abs(point(0) - k.hi)); },
                          [&](const Ball& k) { return (point - k.center).norm() + k.radius; },
                          [&](const Polytope&) {
                              const auto [lo, hi] = bounding_box(body);
                              const Vector far = (point - lo).cwiseAbs().cwiseMax((point - hi).cwiseAbs());
                              return far.norm();
                          },
                          [&](const Box& k) {
                              const Vector z = k.axes.transpose() * (point - k.center);
                              return (z.cwiseAbs() + k.half_widths).norm();
                          },
                      },
                      body);
}

Vector project(const ConvexBody& body, const Vector& x) {
    return std::visit(
        Overloaded{
            [&](const Interval& k) {
                Vector y(1);
                y(0) = std::clamp(x(0), k.lo, k.hi);
                return y;
            },
            [&](const Ball& k) {
                const Vector d = x - k.center;
                const double r = d.norm();
                return r <= k.radius ? x : Vector(k.center + d * (k.radius / r));
            },
            [&](const Polytope& k) {
                // Dykstra's algorithm over the half-spaces.
                const Eigen::Index m = k.A.rows();
                Vector y = x;
                Matrix incr = Matrix::Zero(x.size(), m);
                for (int sweep = 0; sweep < 2000; ++sweep) {
                    const Vector before = y;
                    for (Eigen::Index i = 0; i < m; ++i) {
                        const Vector a = k.A.row(i).transpose();
                        const Vector z = y + incr.col(i);
                        const double viol = a.dot(z) - k.b(i);
                        const Vector proj = viol > 0.0 ? Vector(z - a * (viol / a.squaredNorm())) : z;
                        incr.col(i) = z - proj;
                        y = proj;
                    }
                    if ((y - before).norm() < 1e-13) break;
                }
                return y;
            },
            [&](const Box& k) {
                Vector z = k.axes.transpose() * (x - k.center);
                z = z.cwiseMax(-k.half_widths).cwiseMin(k.half_widths);
                return Vector(k.center + k.axes * z);
            },
        },
        body);
}

Polytope to_polytope(const ConvexBody& body) {
    return std::visit(Overloaded{
                          [](const Interval& k) {
                              Polytope p;
                              p.A.resize(2, 1);
                              p.A << 1.0, -1.0;
                              p.b.resize(2);
                              p.b << k.hi, -k.lo;
                              return p;
                          },
                          [](const Ball&) -> Polytope {
                              throw DegenerateGeometryError("a ball has no H-representation");
                          },
                          [](const Polytope& k) { return k; },
                          [](const Box& k) {
                              const int n = static_cast<int>(k.center.size());
                              Polytope p;
                              p.A.resize(2 * n, n);
                              p.A.topRows(n) = k.axes.transpose();
                              p.A.bottomRows(n) = -k.axes.transpose();
                              const Vector proj = k.axes.transpose() * k.center;
                              p.b.resize(2 * n);
                              p.b.head(n) = proj + k.half_widths;
                              p.b.tail(n) = -proj + k.half_widths;
                              return p;
                          },
                      },
                      body);
}

double covariance_jitter(const Matrix& covariance) {
    const double n = static_cast<double>(covariance.rows());
    const double tr = covariance.trace();
    return tr > 0.0 ? 1e-10 * tr / n : 1e-10;
}

Matrix regularize_covariance(const Matrix& covariance) {
    Matrix sym = 0.5 * (covariance + covariance.transpose());
    sym.diagonal().array() += covariance_jitter(covariance);
    return sym;
}

bool Ellipsoid::contains(const Vector& x, double tol) const {
    return mahalanobis_norm(x, mean, covariance) <= radius + tol;
}

Vector MomentBox::half_widths() const { return radius * eigenvalues.cwiseMax(0.0).cwiseSqrt(); }

bool MomentBox::contains(const Vector& x, double tol) const {
    const Vector z = rotation * (x - mean);
    return ((z.cwiseAbs() - half_widths()).array() <= tol).all();
}

Box MomentBox::as_box() const { return Box{mean, half_widths(), rotation.transpose()}; }

MomentBox box_from_moments(const Vector& mean, const Matrix& covariance, double radius) {
    if (!(radius > 0.0)) throw DegenerateGeometryError("box_from_moments: radius must be positive");
    const Matrix sym = 0.5 * (covariance + covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) throw DegenerateGeometryError("box_from_moments: eigensolver failed");
    const double scale = std::max(sym.trace(), 1e-300);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
        throw DegenerateGeometryError("box_from_moments: covariance is not PSD");
    }
    MomentBox box;
    box.mean = mean;
    box.eigenvalues = eig.eigenvalues().cwiseMax(0.0);
    box.rotation = eig.eigenvectors().transpose();
    box.radius = radius;
    return box;
}

bool cut_contains(const FocusCut& cut, const Vector& x, double tol) {
    return std::visit([&](const auto& c) { return c.contains(x, tol); }, cut);
}

bool FocusRegion::contains(const Vector& x, double tol) const {
    if (!body_contains(base, x, tol)) return false;
    for (const auto& cut : cuts) {
        if (!cut_contains(cut, x, tol)) return false;
    }
    return true;
}

bool FocusRegion::box_only() const {
    if (std::holds_alternative<Ball>(base)) return false;
    return std::all_of(cuts.begin(), cuts.end(),
                       [](const FocusCut& c) { return std::holds_alternative<MomentBox>(c); });
}

std::pair<Vector, Vector> FocusRegion::bounding_box() const {
    auto [lo, hi] = kbco::bounding_box(base);
    for (const auto& cut : cuts) {
        Vector clo, chi;
        if (const auto* box = std::get_if<MomentBox>(&cut)) {
            std::tie(clo, chi) = kbco::bounding_box(box->as_box());
        } else {
            const auto& e = std::get<Ellipsoid>(cut);
            const Vector ext = e.radius * regularize_covariance(e.covariance).diagonal().cwiseSqrt();
            clo = e.mean - ext;
            chi = e.mean + ext;
        }
        lo = lo.cwiseMax(clo);
        hi = hi.cwiseMin(chi);
    }
    return {lo, hi};
}

std::optional<Vector> FocusRegion::interior_point() const {
    if (box_only()) {
        const Polytope poly = focus_polytope(*this);
        const auto cheb = lp::chebyshev_center(poly.A, poly.b);
        if (cheb && cheb->radius > 1e-12) return cheb->center;
        return std::nullopt;
    }
    for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) {
        const Vector c = std::visit([](const auto& cut) { return cut.mean; }, *it);
        if (contains(c)) return c;
    }
    const InnerBall ib = inner_ball(base);
    if (ib.radius > 0.0 && contains(ib.center)) return ib.center;
    return std::nullopt;
}

Polytope focus_polytope(const FocusRegion& region) {
    if (!region.box_only()) {
        throw DegenerateGeometryError("focus_polytope: region has non-polyhedral pieces");
    }
    Polytope base = to_polytope(region.base);
    const Eigen::Index n = base.A.cols();
    Eigen::Index rows = base.A.rows() + 2 * n * static_cast<Eigen::Index>(region.cuts.size());
    Polytope out;
    out.A.resize(rows, n);
    out.b.resize(rows);
    out.A.topRows(base.A.rows()) = base.A;
    out.b.head(base.b.size()) = base.b;
    Eigen::Index r = base.A.rows();
    for (const auto& cut : region.cuts) {
        const Polytope p = to_polytope(std::get<MomentBox>(cut).as_box());
        out.A.middleRows(r, p.A.rows()) = p.A;
        out.b.segment(r, p.b.size()) = p.b;
        r += p.A.rows();
    }
    return out;
}

std::vector<Facet> boundary_facets(const FocusRegion& region) {
    if (!region.box_only()) {
        throw DegenerateGeometryError("boundary_facets requires a polyhedral base and box cuts");
    }
    const Polytope poly = focus_polytope(region);
    const Polytope base = to_polytope(region.base);
    const Eigen::Index n = poly.A.cols();
    const Eigen::Index base_rows = base.A.rows();
    std::vector<Facet> facets;

    for (std::size_t c = 0; c < region.cuts.size(); ++c) {
        const auto& box = std::get<MomentBox>(region.cuts[c]);
        const Vector hw = box.half_widths();
        for (int axis = 0; axis < n; ++axis) {
            for (int side : {1, -1}) {
                const Eigen::Index own_row = base_rows + 2 * n * static_cast<Eigen::Index>(c) +
                                             (side > 0 ? axis : n + axis);
                Facet f;
                f.normal = side * box.rotation.row(axis).transpose();
                f.offset = f.normal.dot(box.mean) + hw(axis);
                f.cut_index = c;
                f.axis = axis;
                f.side = side;
                f.tangent = complement_basis(f.normal);
                const Vector x0 = f.normal * f.offset;

                // maximise slack s over (z, s) with x = x0 + V z.
                const Eigen::Index k = n - 1;
                std::vector<Eigen::Index> lp_rows;
                bool empty = false;
                for (Eigen::Index i = 0; i < poly.A.rows(); ++i) {
                    if (i == own_row) continue;
                    const Vector a = poly.A.row(i).transpose();
                    const double an = a.norm();
                    const Vector va = f.tangent.transpose() * a;
                    const double slack = poly.b(i) - a.dot(x0);
                    if (va.norm() <= 1e-12 * an) {
                        const bool strict = i < base_rows;
                        if (strict ? slack <= kFacetTolerance * an : slack < -kFacetTolerance * an) {
                            empty = true;
                            break;
                        }
                        continue;
                    }
                    lp_rows.push_back(i);
                }
                if (empty) continue;
                Matrix G(static_cast<Eigen::Index>(lp_rows.size()) + 1, k + 1);
                Vector h(G.rows());
                for (std::size_t r = 0; r < lp_rows.size(); ++r) {
                    const Eigen::Index i = lp_rows[r];
                    const Vector a = poly.A.row(i).transpose();
                    const Vector va = f.tangent.transpose() * a;
                    G.block(static_cast<Eigen::Index>(r), 0, 1, k) = va.transpose();
                    G(static_cast<Eigen::Index>(r), k) = va.norm();
                    h(static_cast<Eigen::Index>(r)) = poly.b(i) - a.dot(x0);
                }
                G.row(G.rows() - 1).setZero();
                G(G.rows() - 1, k) = 1.0;
                h(h.size() - 1) = 1e6;
                Vector obj = Vector::Zero(k + 1);
                obj(k) = 1.0;
                const lp::Result res = lp::maximize(obj, G, h);
                if (res.status != lp::Status::optimal || res.x(k) <= kFacetTolerance) continue;

                f.interior_point = x0 + f.tangent * res.x.head(k);
                f.region.A.resize(poly.A.rows() + 2, n);
                f.region.b.resize(poly.b.size() + 2);
                f.region.A.topRows(poly.A.rows()) = poly.A;
                f.region.b.head(poly.b.size()) = poly.b;
                f.region.A.row(poly.A.rows()) = f.normal.transpose();
                f.region.A.row(poly.A.rows() + 1) = -f.normal.transpose();
                f.region.b(poly.b.size()) = f.offset;
                f.region.b(poly.b.size() + 1) = -f.offset;
                facets.push_back(std::move(f));
            }
        }
    }
    return facets;
}

}  // namespace kbco
