#pragma once

// Property checks shared by the `verify` command and the test binaries. Every
// check is deterministic given its seed and reports a one-line detail.

#include "kbco/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kbco::props {

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// kernel1d
PropertyResult k1_normalization();
PropertyResult k1_adjoint_duality();
// Monte Carlo mean of the estimator over x ~ Kp against K*loss at `points`
// grid nodes (two of them inside the eps-band around mu), 3 standard errors.
PropertyResult k1_unbiasedness(long draws, int points, std::uint64_t seed);

// kernel_hd
PropertyResult hd_kernel_normalization();
// Same as k1_unbiasedness for n = 2 with an exact grid measure and a
// closed-form adjoint.
PropertyResult hd_unbiasedness(long draws, int points, std::uint64_t seed);
// (1 - lambda) Z + lambda X against N(0, 1/3) for lambda = 1/2, X ~ N(0, 1):
// first four raw moments within 3 standard errors.
PropertyResult gaussian_core_fixed_point(long draws, std::uint64_t seed);
// Series core of Rademacher X with lambda = 1/2 against uniform[-1, 1] (KS < 0.01).
PropertyResult core_series_uniform(long draws, std::uint64_t seed);
// Series core of N(0, 1) with lambda = 0.3: Var(Z) = lambda / (2 - lambda) and
// the first four moments of (1 - lambda) Z + lambda X match those of Z.
PropertyResult core_series_fixed_point(long draws, std::uint64_t seed);
// <c[p], f> <= <K[p]p, f> + 1/T^2 + 3 se over random convex f, n = 2.
PropertyResult convex_domination(int functions, long draws, std::uint64_t seed);
// <r, f> <= <p, f> + 3 se for r uniform on the ball of radius 1/(80e) and p isotropic.
PropertyResult ball_domination(int functions, long draws, std::uint64_t seed);
// Theory-preset lambda: K(x, y) / Kp(x) <= e and ||grad||_Cov <= T^2 over
// x in Omega, y in E_p(10 n alpha); finite differences match to 1e-4.
PropertyResult smoothness_bounds(long pairs, std::uint64_t seed);

// sampler
PropertyResult sampler_uniform_square(long draws, std::uint64_t seed);
PropertyResult sampler_truncated_gaussian(long draws, std::uint64_t seed);
// Hit-and-run against grid-oracle moments on random bump-sum densities.
PropertyResult sampler_vs_grid(int densities, int samples, std::uint64_t seed);
PropertyResult sampler_determinism(std::uint64_t seed);

// engine
// Exponential-weights inequality on random nested instances (50 points, 30 rounds).
PropertyResult telescoping(int instances, std::uint64_t seed);
// Fraction of kernel draws outside Omega_t under theory-scaled sigma^2 lambda.
PropertyResult omega_coverage(long draws, std::uint64_t seed, double* fraction_out = nullptr);
PropertyResult eta_schedule(std::uint64_t seed);
PropertyResult monotone_focus(std::uint64_t seed);
PropertyResult q_normalization(std::uint64_t seed);
PropertyResult omega_injection(std::uint64_t seed);
PropertyResult grid_tilt_sign(std::uint64_t seed);
PropertyResult round_count(std::uint64_t seed);

struct SuiteOptions {
    std::uint64_t seed = 20241016;
    // Multiplies the Monte Carlo sizes.
    double scale = 1.0;
};

// suite in {kernel1d, kernel_hd, sampler, engine, all}; throws ConfigError otherwise.
std::vector<PropertyResult> run_suite(const std::string& suite, const SuiteOptions& options = {});

}  // namespace kbco::props
