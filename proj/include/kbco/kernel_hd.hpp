#pragma once

// Gaussian-core kernel for n >= 1:
//   K[p](x, y) = c[p]((x - lambda y) / (1 - lambda)) (1 - lambda)^{-n},
// with c[p] = N(mean, sigma^2 lambda Cov(p)). Everything is evaluated in log-space.

#include "kbco/types.hpp"

#include <functional>
#include <optional>

namespace kbco {

struct KernelParams {
    double lambda = 0.05;
    double sigma2 = 0.1;
    double eps = 1.0 / (80.0 * 2.718281828459045 * 20.0);

    // sigma^2 = eps^2 / ((n log T)(2 - lambda)), so that sigma^2 lambda Cov(p)
    // equals the epsilon-parameterised core covariance.
    static KernelParams theory(int n, double T, double lambda, double eps = 1.0 / (80.0 * 2.718281828459045 * 20.0));
    void validate() const;
};

class GaussianCore {
public:
    GaussianCore() = default;
    GaussianCore(Vector mean, Matrix covariance, std::optional<Vector> shift = std::nullopt);

    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    const std::optional<Vector>& shift() const { return shift_; }
    int dim() const { return static_cast<int>(mean_.size()); }
    const Matrix& cholesky() const { return chol_; }

    double log_density(const Vector& z) const;
    // Squared Mahalanobis distance of z to the mean.
    double squared_distance(const Vector& z) const;
    // Column-wise squared distances for a batch of points.
    Vector squared_distances(const Matrix& z) const;
    // Solves Cov^{-1} v.
    Vector precision_times(const Vector& v) const;
    Vector sample(Rng& rng) const;

private:
    Vector mean_;
    Matrix covariance_;
    std::optional<Vector> shift_;
    Matrix chol_;  // lower Cholesky factor
    double log_norm_ = 0.0;
};

// c[p] = N(mean, sigma^2 lambda cov).
GaussianCore gaussian_core(const Vector& mean, const Matrix& covariance, const KernelParams& kp);

// Core centred at the average of `samples` (columns), covariance sigma^2 lambda A
// with A an estimate of Cov(p).
GaussianCore shifted_gaussian_core(const Matrix& samples, const Matrix& cov_estimate, const KernelParams& kp);

double log_kernel_density(const GaussianCore& core, double lambda, const Vector& x, const Vector& y);
double kernel_density(const GaussianCore& core, double lambda, const Vector& x, const Vector& y);
// log K[p](x, y_j) for every column y_j of `ys`.
Vector log_kernel_density_columns(const GaussianCore& core, double lambda, const Vector& x, const Matrix& ys);

// x = lambda X + (1 - lambda) C with X from `draw_p` and C from the core.
Vector kernel_sample(const GaussianCore& core, const std::function<Vector(Rng&)>& draw_p, double lambda, Rng& rng);

struct UEstimate {
    double u = 0.0;
    bool floored = false;
};

inline constexpr double kMinU = 1e-300;

// Monte Carlo K[p]p(x_t): mean over the columns X_i of kernel_density(x_t, X_i).
UEstimate estimate_u(const Vector& x_t, const Matrix& p_samples, const GaussianCore& core, double lambda);

// One loss-estimate term, y -> weight * K[p](x_t, y), weight = loss / u.
class GaussianBump {
public:
    GaussianBump() = default;
    GaussianBump(double weight, Vector center_sample, GaussianCore core, double lambda, double eta);
    // For weights beyond double range (u far below 1e-300); weight() may read inf.
    static GaussianBump from_log_weight(double log_weight, Vector center_sample, GaussianCore core, double lambda,
                                        double eta);

    double weight() const { return weight_; }
    const Vector& center_sample() const { return center_; }
    const GaussianCore& core() const { return core_; }
    double lambda() const { return lambda_; }
    double eta() const { return eta_; }

    double operator()(const Vector& y) const;
    double log_value(const Vector& y) const;  // -inf when weight is 0
    // Values at every column of `ys`.
    Vector values(const Matrix& ys) const;
    Vector gradient(const Vector& y) const;
    // y at which the bump peaks: (x_t - (1 - lambda) core_mean) / lambda.
    Vector peak() const;
    // Peak height and the y-space standard deviation along the widest axis.
    double peak_value() const;
    double y_spread() const;

private:
    double weight_ = 0.0;
    Vector center_;
    GaussianCore core_;
    double lambda_ = 0.0;
    double eta_ = 0.0;
    double log_weight_scale_ = 0.0;
};

// weight = loss / u, zeroed when x_t falls outside Omega_t.
GaussianBump make_bump(const Vector& x_t, double loss, double u, const GaussianCore& core, double lambda,
                       double eta, bool in_omega = true);

// Generalized Bernoulli convolution Z = sum_k (1 - lambda)^k lambda X_k truncated
// after k_max = ceil(log(D / tol) / -log(1 - lambda)) terms; the remaining tail is
// replaced by (1 - lambda)^{k_max + 1} X_{k_max + 1}, so the error is at most tol
// for X with support diameter D.
Vector core_series_sample(const std::function<Vector(Rng&)>& draw_x, double lambda, double tol, double diameter,
                          Rng& rng);

int core_series_terms(double lambda, double tol, double diameter);

}  // namespace kbco
