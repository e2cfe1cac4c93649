#pragma once

// Kernelized exponential weights in n dimensions with focus regions, annealed
// learning rates and restarts.

#include "kbco/environments.hpp"
#include "kbco/geometry.hpp"
#include "kbco/kernel_hd.hpp"
#include "kbco/sampler.hpp"
#include "kbco/trace.hpp"
#include "kbco/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kbco {

enum class Preset { theory, practical };
enum class FocusPrimitive { box, ellipsoid };
// Grid: exact density on a node lattice over the focus region (n <= 2).
// Analytic: bump-sum potential sampled by hit-and-run.
enum class DensityMode { automatic, grid, analytic };

std::string to_string(Preset p);
std::string to_string(FocusPrimitive f);
std::string to_string(DensityMode m);
Preset parse_preset(const std::string& s);
FocusPrimitive parse_focus_primitive(const std::string& s);
DensityMode parse_density_mode(const std::string& s);

// Values that replace the preset formulas; kept so that a restart can
// re-derive the parameters for the shortened horizon.
struct ParamOverrides {
    std::optional<double> lambda, sigma2, eta1, alpha, gamma, beta, eps;
};

struct AlgoParams {
    int n = 1;
    long T = 2;
    Preset preset = Preset::practical;
    FocusPrimitive focus_primitive = FocusPrimitive::box;
    double lambda = 0.05;
    double sigma2 = 0.1;
    double eta1 = 0.01;
    double alpha = 4.0;
    double gamma = 0.1;
    double beta = 4.0;
    double eps = 1.0 / (80.0 * 2.718281828459045 * 20.0);
    ParamOverrides overrides;

    // Horizons below 2 use the T = 2 formulas.
    static AlgoParams make(Preset preset, int n, long T, const ParamOverrides& overrides = {},
                           FocusPrimitive focus = FocusPrimitive::box);
    static AlgoParams theory(int n, long T) { return make(Preset::theory, n, T); }
    static AlgoParams practical(int n, long T) { return make(Preset::practical, n, T); }

    AlgoParams for_horizon(long horizon) const;
    KernelParams kernel() const;
    // Throws ConfigError; the theory preset also checks its assumption block.
    void validate() const;
    // Mahalanobis radius of Omega_t: 10 n alpha lambda + 20 sqrt(lambda) eps.
    double omega_radius() const;
    // 5 n log2 T, the cut count beyond which eta_T / eta_1 <= e is no longer guaranteed.
    double cut_budget() const;
};

struct EngineOptions {
    DensityMode mode = DensityMode::automatic;
    int grid_nodes_1d = 1025;
    int grid_nodes_2d = 65;
    int moment_samples = 512;
    int core_shift_samples = 64;
    int volume_samples = 2048;
    double volume_threshold = 0.375;
    int restart_starts = 16;
    int facet_samples = 256;
    bool enable_focus = true;
    bool enable_restart = true;
    HitAndRunOptions hit_and_run;
};

// Lattice of nodes over the bounding box of F; Q and L~ are held on every node,
// the density only on nodes inside F.
struct NodeGrid {
    Matrix nodes;       // n x m
    Vector lo, hi;
    int per_axis = 0;
    std::vector<char> in_focus;
    Vector q;           // sum eta_s bump_s, shifted so min over F nodes is 0
    Vector l_tilde;     // sum bump_s
    Vector weights;     // normalised exp(-q) on F nodes, 0 elsewhere

    int size() const { return static_cast<int>(nodes.cols()); }
    // Multilinear interpolation of a node field at x (clamped to the lattice box).
    double interpolate(const Vector& field, const Vector& x) const;
};

// Bump sums flattened for fast pointwise evaluation.
class BumpSum {
public:
    explicit BumpSum(int n = 1) : n_(n) {}
    void add(const GaussianBump& bump);
    // sum_s eta_s bump_s(y) when `weighted`, else sum_s bump_s(y).
    double eval(const Vector& y, bool weighted) const;
    int size() const { return count_; }

private:
    int n_;
    int count_ = 0;
    std::vector<double> data_;  // per bump: log scale, a, eta, d (n), L^{-1} (n x n, row-major)
};

struct EngineState {
    long t = 0;            // rounds completed since the last restart
    long round_offset = 0; // rounds played before the last restart
    AlgoParams params;
    EngineOptions options;
    ConvexBody body;
    DensityMode mode = DensityMode::grid;
    FocusRegion focus;
    std::vector<GaussianBump> bumps;
    BumpSum bump_sum;
    double eta = 0.0;
    int N = 0;
    int restart_count = 0;

    Moments moments;       // of the current p_t
    NodeGrid grid;         // grid mode
    Density density;       // AnalyticDensity in analytic mode, the grid density otherwise
    Matrix p_samples;      // analytic mode: current draws from p_t
    std::vector<Facet> facets;
    bool facets_valid = false;
    bool budget_warned = false;
    std::vector<std::string> diagnostics;
};

// Fresh state: uniform density on K, F = K, eta = eta_1.
EngineState init_state(const ConvexBody& K, const AlgoParams& params, const EngineOptions& options = {},
                       Rng* rng = nullptr);

struct OmegaRegion {
    Ellipsoid ellipsoid;
    const ConvexBody* body = nullptr;
    bool contains(const Vector& x) const;
};

OmegaRegion omega_region(const EngineState& state);

// The round's outcome. `forced_play` replaces the kernel draw (test injection).
// Observation noise is drawn from `env_rng` when given, else from `rng`.
RoundRecord engine_step(EngineState& state, LossOracle& env, Rng& rng,
                        const std::optional<Vector>& forced_play = std::nullopt, Rng* env_rng = nullptr);

// Adds a cut when the estimated volume ratio of F_t cap E_{p_{t+1}}(alpha) is
// below the threshold; returns whether it did.
bool update_focus(EngineState& state, Rng& rng);

struct RestartProbe {
    double interior_min = 0.0;
    double boundary_min = 0.0;
    int facets = 0;
};

// Minima of L~ over F and over the boundary facets inside int(K); nullopt when
// there is nothing to compare (no facets, or ellipsoid cuts).
std::optional<RestartProbe> restart_probe(EngineState& state);
bool restart_check(EngineState& state);

// Rounds 1..T; a restart reinitialises the state with horizon T - t.
RunTrace run(LossOracle& env, const AlgoParams& params, Rng& rng, const EngineOptions& options = {},
             Rng* env_rng = nullptr);

// Refresh the density, moments and derived caches after bumps or cuts changed.
void refresh_density(EngineState& state, Rng& rng, bool regrid);

}  // namespace kbco
