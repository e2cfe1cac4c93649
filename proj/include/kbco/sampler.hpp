#pragma once

// Sampling and moment estimation for p proportional to exp(-Q) on a focus region:
// hit-and-run MCMC for the analytic representation, exact grids for n <= 2.

#include "kbco/geometry.hpp"
#include "kbco/kernel_hd.hpp"
#include "kbco/types.hpp"

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace kbco {

using Potential = std::function<double(const Vector&)>;

struct HitAndRunOptions {
    int burn_in_per_dim = 500;
    int thin_per_dim = 10;
    int knots = 64;
    int bisection_steps = 52;
};

// Hit-and-run over F: uniform direction, chord by bisection on the membership
// oracle, then an independence Metropolis move along the chord whose proposal is
// the potential discretised at `knots` cell midpoints. An empty potential means
// the uniform distribution on F.
class HitAndRunChain {
public:
    HitAndRunChain(const FocusRegion& region, Potential potential, Vector start, HitAndRunOptions options = {});

    void step(Rng& rng);
    void advance(int steps, Rng& rng);
    const Vector& state() const { return x_; }
    long accepted() const { return accepted_; }
    long proposed() const { return proposed_; }

private:
    double chord_end(const Vector& d) const;
    double eval(const Vector& y) const { return potential_ ? potential_(y) : 0.0; }

    const FocusRegion* region_;
    Potential potential_;
    Vector x_;
    double q_x_ = 0.0;
    HitAndRunOptions options_;
    double diameter_ = 1.0;
    long accepted_ = 0;
    long proposed_ = 0;
};

struct Moments {
    Vector mean;
    Matrix covariance;  // jitter-regularised
};

// Sample mean and covariance of the columns. Needs at least n + 2 samples.
Moments moments(const Matrix& samples);

// Exact density on the cell centres of a resolution^n grid over the bounding box
// of F; cells whose centre is outside F carry zero weight.
struct GridDensity {
    Matrix points;       // n x m cell centres
    Vector log_weights;  // -inf outside F
    double cell_volume = 0.0;
    Vector lo, hi;
    int resolution = 0;

    int size() const { return static_cast<int>(points.cols()); }
    int dim() const { return static_cast<int>(points.rows()); }
    Vector weights() const;
    Moments moments() const;
    Vector sample(Rng& rng) const;
};

GridDensity grid_oracle(const Potential& q, const FocusRegion& region, int resolution);

// p(y) proportional to exp(-(sum_s eta_s bump_s(y) - offset)) on the focus region.
struct AnalyticDensity {
    std::vector<GaussianBump> bumps;
    double offset = 0.0;
    FocusRegion focus;
    std::vector<Vector> warm_chain;

    double potential(const Vector& y) const;
};

using Density = std::variant<GridDensity, AnalyticDensity>;

// Draws `count` points from the region under exp(-Q): a burned-in chain thinned
// every thin_per_dim * n steps. A warm start skips the burn-in.
Matrix sample_p(const FocusRegion& region, const Potential& q, int count, Rng& rng,
                const std::optional<Vector>& warm_start = std::nullopt, const HitAndRunOptions& options = {},
                Vector* end_state = nullptr);

// Dispatches on the density representation; analytic mode continues its warm chain.
Matrix sample_p(Density& density, int count, Rng& rng, const HitAndRunOptions& options = {});

// Fraction of m approximately uniform points of F that land in the cut.
double volume_ratio(const FocusRegion& region, const FocusCut& cut, int m, Rng& rng,
                    const HitAndRunOptions& options = {});

// Standard error of a correlated series' mean by non-overlapping batch means.
double batch_means_stderr(const Vector& series, int batches = 50);

}  // namespace kbco
