#include "kbco/kernel_hd.hpp"

#include "kbco/geometry.hpp"
#include "kbco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace kbco {

KernelParams KernelParams::theory(int n, double T, double lambda, double eps) {
    KernelParams kp;
    kp.lambda = lambda;
    kp.eps = eps;
    kp.sigma2 = eps * eps / (n * std::log(T) * (2.0 - lambda));
    return kp;
}

void KernelParams::validate() const {
    if (!(lambda > 0.0 && lambda < 0.5)) throw ConfigError("kernel lambda must lie in (0, 1/2)");
    if (!(sigma2 > 0.0)) throw ConfigError("kernel sigma^2 must be positive");
    if (!(eps > 0.0)) throw ConfigError("kernel eps must be positive");
}

GaussianCore::GaussianCore(Vector mean, Matrix covariance, std::optional<Vector> shift)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), shift_(std::move(shift)) {
    const Matrix sym = 0.5 * (covariance_ + covariance_.transpose());
    Eigen::LLT<Matrix> llt(sym);
    if (llt.info() != Eigen::Success) {
        llt.compute(regularize_covariance(sym));
        if (llt.info() != Eigen::Success) throw DegenerateGeometryError("GaussianCore: covariance is not PSD");
    }
    chol_ = llt.matrixL();
    const double n = static_cast<double>(mean_.size());
    log_norm_ = -0.5 * n * std::log(2.0 * std::numbers::pi) - chol_.diagonal().array().log().sum();
}

double GaussianCore::squared_distance(const Vector& z) const {
    return chol_.triangularView<Eigen::Lower>().solve(z - mean_).squaredNorm();
}

Vector GaussianCore::squared_distances(const Matrix& z) const {
    const Matrix centred = z.colwise() - mean_;
    return chol_.triangularView<Eigen::Lower>().solve(centred).colwise().squaredNorm().transpose();
}

double GaussianCore::log_density(const Vector& z) const { return log_norm_ - 0.5 * squared_distance(z); }

Vector GaussianCore::precision_times(const Vector& v) const {
    const Vector w = chol_.triangularView<Eigen::Lower>().solve(v);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(w);
}

Vector GaussianCore::sample(Rng& rng) const { return mean_ + chol_ * gaussian_vector(dim(), rng); }

GaussianCore gaussian_core(const Vector& mean, const Matrix& covariance, const KernelParams& kp) {
    const Matrix sym = 0.5 * (covariance + covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(sym.trace(), 1e-300)) {
        throw DegenerateGeometryError("gaussian_core: covariance is not PSD");
    }
    return GaussianCore(mean, kp.sigma2 * kp.lambda * sym);
}

GaussianCore shifted_gaussian_core(const Matrix& samples, const Matrix& cov_estimate, const KernelParams& kp) {
    const Vector centre = samples.rowwise().mean();
    const GaussianCore base = gaussian_core(centre, cov_estimate, kp);
    return GaussianCore(centre, base.covariance(), centre);
}

double log_kernel_density(const GaussianCore& core, double lambda, const Vector& x, const Vector& y) {
    const Vector z = (x - lambda * y) / (1.0 - lambda);
    return core.log_density(z) - core.dim() * std::log1p(-lambda);
}

double kernel_density(const GaussianCore& core, double lambda, const Vector& x, const Vector& y) {
    return std::exp(log_kernel_density(core, lambda, x, y));
}

Vector log_kernel_density_columns(const GaussianCore& core, double lambda, const Vector& x, const Matrix& ys) {
    const Matrix z = ((-lambda * ys).colwise() + x) / (1.0 - lambda);
    const double base = core.log_density(core.mean()) - core.dim() * std::log1p(-lambda);
    return (base - 0.5 * core.squared_distances(z).array()).matrix();
}

Vector kernel_sample(const GaussianCore& core, const std::function<Vector(Rng&)>& draw_p, double lambda, Rng& rng) {
    const Vector x = draw_p(rng);
    const Vector c = core.sample(rng);
    return lambda * x + (1.0 - lambda) * c;
}

UEstimate estimate_u(const Vector& x_t, const Matrix& p_samples, const GaussianCore& core, double lambda) {
    if (p_samples.cols() == 0) throw Error("estimate_u: need at least one sample");
    Vector logs(p_samples.cols());
    for (Eigen::Index i = 0; i < p_samples.cols(); ++i) {
        logs(i) = log_kernel_density(core, lambda, x_t, p_samples.col(i));
    }
    const double mx = logs.maxCoeff();
    UEstimate est;
    if (!std::isfinite(mx)) {
        est.u = kMinU;
        est.floored = true;
        return est;
    }
    const double log_u = mx + std::log(exp_exact(logs.array() - mx).mean());
    est.u = std::exp(log_u);
    if (!(est.u >= kMinU)) {
        est.u = kMinU;
        est.floored = true;
    }
    return est;
}

GaussianBump::GaussianBump(double weight, Vector center_sample, GaussianCore core, double lambda, double eta)
    : weight_(weight), center_(std::move(center_sample)), core_(std::move(core)), lambda_(lambda), eta_(eta) {
    log_weight_scale_ = weight_ > 0.0 ? std::log(weight_) - core_.dim() * std::log1p(-lambda_)
                                      : -std::numeric_limits<double>::infinity();
}

GaussianBump GaussianBump::from_log_weight(double log_weight, Vector center_sample, GaussianCore core, double lambda,
                                           double eta) {
    GaussianBump b(1.0, std::move(center_sample), std::move(core), lambda, eta);
    b.weight_ = std::exp(log_weight);
    b.log_weight_scale_ = log_weight - b.core_.dim() * std::log1p(-lambda);
    return b;
}

double GaussianBump::log_value(const Vector& y) const {
    if (!(weight_ > 0.0)) return -std::numeric_limits<double>::infinity();
    const Vector z = (center_ - lambda_ * y) / (1.0 - lambda_);
    return log_weight_scale_ + core_.log_density(z);
}

double GaussianBump::operator()(const Vector& y) const {
    if (!(weight_ > 0.0)) return 0.0;
    return std::exp(log_value(y));
}

Vector GaussianBump::values(const Matrix& ys) const {
    if (!(weight_ > 0.0)) return Vector::Zero(ys.cols());
    const Matrix z = ((-lambda_ * ys).colwise() + center_) / (1.0 - lambda_);
    const double base = log_weight_scale_ + core_.log_density(core_.mean());
    return exp_exact(base - 0.5 * core_.squared_distances(z).array());
}

Vector GaussianBump::gradient(const Vector& y) const {
    if (!(weight_ > 0.0)) return Vector::Zero(y.size());
    const Vector z = (center_ - lambda_ * y) / (1.0 - lambda_);
    return (*this)(y) * (lambda_ / (1.0 - lambda_)) * core_.precision_times(z - core_.mean());
}

Vector GaussianBump::peak() const { return (center_ - (1.0 - lambda_) * core_.mean()) / lambda_; }

double GaussianBump::peak_value() const {
    if (!(weight_ > 0.0)) return 0.0;
    return std::exp(log_weight_scale_ + core_.log_density(core_.mean()));
}

double GaussianBump::y_spread() const {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(core_.covariance(), Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0)) * (1.0 - lambda_) / lambda_;
}

GaussianBump make_bump(const Vector& x_t, double loss, double u, const GaussianCore& core, double lambda, double eta,
                       bool in_omega) {
    if (!(u > 0.0)) throw EstimatorUndefinedError("make_bump: u must be positive");
    const double weight = in_omega ? loss / u : 0.0;
    return GaussianBump(weight, x_t, core, lambda, eta);
}

int core_series_terms(double lambda, double tol, double diameter) {
    if (lambda >= 1.0 || diameter <= tol) return 0;
    return static_cast<int>(std::ceil(std::log(diameter / tol) / -std::log1p(-lambda)));
}

Vector core_series_sample(const std::function<Vector(Rng&)>& draw_x, double lambda, double tol, double diameter,
                          Rng& rng) {
    const int k_max = core_series_terms(lambda, tol, diameter);
    Vector z = lambda * draw_x(rng);
    double scale = 1.0 - lambda;
    for (int k = 1; k <= k_max; ++k) {
        z += scale * lambda * draw_x(rng);
        scale *= 1.0 - lambda;
    }
    z += scale * draw_x(rng);
    return z;
}

}  // namespace kbco
