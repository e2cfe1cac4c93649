#pragma once

// Loss oracles (adversaries), best-fixed-point search, regret reports and the
// one-point-gradient baseline.

#include "kbco/geometry.hpp"
#include "kbco/trace.hpp"
#include "kbco/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace kbco {

class LossOracle {
public:
    virtual ~LossOracle() = default;

    // Observed loss at round t (1-based), clipped to [0, 1].
    double query(long t, const Vector& x, Rng& rng);
    // Noiseless convex loss, used only for offline regret accounting.
    virtual double full_loss(long t, const Vector& x) const = 0;
    // sum_{s=1}^{T} full_loss(s, x); stationary oracles override with T * loss.
    virtual double cumulative_full_loss(const Vector& x, long T) const;

    virtual int dim() const = 0;
    virtual const ConvexBody& body() const = 0;
    virtual double lipschitz() const = 0;
    virtual std::string name() const = 0;

    long clipped_queries() const { return clipped_; }
    long total_queries() const { return queries_; }

protected:
    // Unclipped observation; default is the noiseless loss.
    virtual double raw_query(long t, const Vector& x, Rng& rng);

private:
    long clipped_ = 0;
    long queries_ = 0;
};

using OraclePtr = std::shared_ptr<LossOracle>;

// Stationary convex shapes on K, normalised so that sup_K loss <= 1.
OraclePtr make_linear(ConvexBody K, Vector direction);
OraclePtr make_quadratic(ConvexBody K, Vector optimum);
OraclePtr make_abs(ConvexBody K, Vector optimum);
// Bounded i.i.d. noise: observation = full_loss + noise_scale * U[-1, 1].
OraclePtr make_stochastic(OraclePtr inner, double noise_scale);
// Exactly floor(eps_fraction * T) rounds (drawn from `seed`) return 1 - true loss.
OraclePtr make_corrupted(OraclePtr inner, double eps_fraction, long T, std::uint64_t seed);
// clip(||x - x_a|| / diam) before `switch_round`, x_b from then on.
OraclePtr make_moving_optimum(ConvexBody K, long switch_round, Vector x_a, Vector x_b);

// Rounds at which the corrupted oracle lies (empty for other oracles).
std::vector<long> corrupted_rounds(const LossOracle& oracle);

// Midpoint-convexity spot check; returns the largest violation seen.
double convexity_violation(const LossOracle& oracle, long t, int pairs, Rng& rng);

struct FixedPoint {
    Vector x;
    double value = 0.0;
};

// argmin_x sum_{t<=T} full_loss(t, x): grid search (1024^n) plus local
// refinement for n <= 2, projected subgradient with 10 restarts otherwise.
FixedPoint best_fixed_point(const LossOracle& env, long T);

struct RegretReport {
    double cumulative_loss = 0.0;
    double full_cumulative_loss = 0.0;
    double best_fixed_loss = 0.0;
    double regret = 0.0;
    double pseudo_regret = 0.0;
    double growth_exponent = 0.0;  // NaN when fewer than two positive checkpoints
    std::vector<long> checkpoints;
    std::vector<double> checkpoint_regret;
};

// Least-squares slope/intercept of log(y) against log(x) over positive pairs.
struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    int points = 0;
};
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// Regret from a stored trace and offline environment replay. The point played
// when x_t leaves K is taken as its projection onto K.
RegretReport regret_report(const RunTrace& trace, const LossOracle& env, const std::vector<long>& checkpoints = {});

struct FkmParams {
    double delta_scale = 1.0;  // delta = delta_scale * T^{-1/4}
    double step_scale = 1.0;   // step  = step_scale  * T^{-3/4}
};

// One-point spherical gradient estimate with projected gradient descent.
RunTrace fkm_baseline(LossOracle& env, long T, const FkmParams& params, Rng& rng, Rng* env_rng = nullptr);

}  // namespace kbco
