#pragma once

// One-dimensional kernel on K = [0, 1]: K delta_y is uniform on the segment
// between y and the mean mu of p, or uniform on [mu - eps, mu] when y is within
// eps of mu. When mu < eps the reflected kernel (x -> 1 - x) is used.

#include "kbco/environments.hpp"
#include "kbco/trace.hpp"
#include "kbco/types.hpp"

#include <functional>

namespace kbco::k1 {

struct Kernel1DParams {
    double mu = 0.5;
    double eps = 1e-2;
    bool mirrored = false;

    // Picks the mirrored variant exactly when mu < eps.
    static Kernel1DParams make(double mu, double eps);
};

struct GridDensity {
    Vector grid;         // m equally spaced points on [0, 1], endpoints included
    Vector log_weights;  // -inf marks truncated cells

    static GridDensity uniform(int m);
    int size() const { return static_cast<int>(grid.size()); }
    // Shifts so that max log weight is 0.
    void normalize();
    Vector weights() const;  // sums to one
    double mean() const;
};

double k1_density(const Kernel1DParams& params, double x, double y);

// K* f(y) = E f(U mu + (1 - U) y), or E f(mu - eps U) in the near branch,
// by composite 3-point Gauss-Legendre on 8192 panels.
double k1_adjoint(const std::function<double(double)>& f, const Kernel1DParams& params, double y);

// Kp(x) = sum_j w_j K(x, y_j) for the grid measure.
double k1_kp(const GridDensity& p, const Kernel1DParams& params, double x);

struct Draw1D {
    double x = 0.0;
    int cell = 0;
};
Draw1D k1_draw(const GridDensity& p, const Kernel1DParams& params, Rng& rng);
double k1_sample(const GridDensity& p, const Kernel1DParams& params, Rng& rng);

// tilde-ell(y_j) = loss / Kp(x_t) * K(x_t, y_j) for every grid point.
// Throws EstimatorUndefinedError when Kp(x_t) == 0.
Vector k1_estimator(double x_t, double loss, const GridDensity& p, const Kernel1DParams& params);

struct K1RunOptions {
    int grid_size = 2048;
    // eps and eta default to 1/T^2 and sqrt(2 log(T^3) / (C T)), C = 2 log(e T^2).
    double eps = 0.0;
    double eta = 0.0;
};

double k1_default_eta(long T);

// Observation noise comes from `env_rng` when given, else from `rng`.
RunTrace k1_run(LossOracle& env, long T, const K1RunOptions& options, Rng& rng, Rng* env_rng = nullptr);

namespace testing {
// Mutation switch for the verification suite: negates the density in the
// branch where y is within eps of mu.
void set_near_branch_sign_flip(bool on);
bool near_branch_sign_flip();
}  // namespace testing

}  // namespace kbco::k1
