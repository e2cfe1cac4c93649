#include "kbco/engine.hpp"

#include "kbco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace kbco {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTheoryC = 1e3;
constexpr int kMinFocusNodes = 16;

}  // namespace

std::string to_string(Preset p) { return p == Preset::theory ? "theory" : "practical"; }
std::string to_string(FocusPrimitive f) { return f == FocusPrimitive::box ? "box" : "ellipsoid"; }
std::string to_string(DensityMode m) {
    switch (m) {
        case DensityMode::grid: return "grid";
        case DensityMode::analytic: return "analytic";
        default: return "auto";
    }
}

Preset parse_preset(const std::string& s) {
    if (s == "theory") return Preset::theory;
    if (s == "practical") return Preset::practical;
    throw ConfigError("unknown preset '" + s + "'");
}

FocusPrimitive parse_focus_primitive(const std::string& s) {
    if (s == "box") return FocusPrimitive::box;
    if (s == "ellipsoid") return FocusPrimitive::ellipsoid;
    throw ConfigError("unknown focus primitive '" + s + "'");
}

DensityMode parse_density_mode(const std::string& s) {
    if (s == "auto") return DensityMode::automatic;
    if (s == "grid") return DensityMode::grid;
    if (s == "analytic") return DensityMode::analytic;
    throw ConfigError("unknown density mode '" + s + "'");
}

AlgoParams AlgoParams::make(Preset preset, int n, long T, const ParamOverrides& ov, FocusPrimitive focus) {
    if (n < 1) throw ConfigError("dimension must be at least 1");
    AlgoParams p;
    p.n = n;
    p.T = T;
    p.preset = preset;
    p.focus_primitive = focus;
    p.overrides = ov;
    const double Tl = std::max<double>(static_cast<double>(T), 2.0);
    const double logT = std::log(Tl);
    const double dn = n;
    p.eps = ov.eps.value_or(1.0 / (80.0 * std::numbers::e * 20.0));
    p.beta = ov.beta.value_or(4.0);
    if (preset == Preset::theory) {
        p.gamma = ov.gamma.value_or(1.0 / (5.0 * dn * std::log2(Tl)));
        p.eta1 = ov.eta1.value_or(1.0 / (20.0 * std::numbers::e * std::numbers::e * std::sqrt(dn * Tl * logT)));
        p.alpha = ov.alpha.value_or(std::pow(2.0 * std::numbers::e, 17) * dn * dn * logT * logT);
        const double e2 = p.eps * p.eps;
        p.lambda = ov.lambda.value_or(e2 * e2 /
                                      (kTheoryC * kTheoryC * std::pow(dn, 4) * p.alpha * p.alpha * logT * logT));
        p.sigma2 = ov.sigma2.value_or(KernelParams::theory(n, Tl, p.lambda, p.eps).sigma2);
    } else {
        p.lambda = ov.lambda.value_or(std::min(0.05, 1.0 / (4.0 * dn)));
        p.sigma2 = ov.sigma2.value_or(1.0 / (dn * logT));
        p.alpha = ov.alpha.value_or(4.0 * dn);
        p.gamma = ov.gamma.value_or(0.1);
        p.eta1 = ov.eta1.value_or(1.0 / std::sqrt(dn * Tl));
    }
    return p;
}

AlgoParams AlgoParams::for_horizon(long horizon) const { return make(preset, n, horizon, overrides, focus_primitive); }

KernelParams AlgoParams::kernel() const {
    KernelParams kp;
    kp.lambda = lambda;
    kp.sigma2 = sigma2;
    kp.eps = eps;
    return kp;
}

void AlgoParams::validate() const {
    if (n < 1) throw ConfigError("dimension must be at least 1");
    if (T < 0) throw ConfigError("horizon must be non-negative");
    kernel().validate();
    if (!(eta1 > 0.0)) throw ConfigError("eta1 must be positive");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (preset == Preset::theory) {
        if (!(eta1 < 0.5)) throw ConfigError("theory preset: eta1 must be below 1/2");
        if (!(gamma < 0.5)) throw ConfigError("theory preset: gamma must be below 1/2");
        if (!(alpha >= 1.0)) throw ConfigError("theory preset: alpha must be at least 1");
        if (!(n * alpha * std::sqrt(lambda) <= 1.0 + 1e-12)) {
            throw ConfigError("theory preset: n alpha sqrt(lambda) must not exceed 1");
        }
        if (!(eps > 0.0 && eps < 1.0 / std::numbers::e)) throw ConfigError("theory preset: eps must lie in (0, 1/e)");
    }
}

double AlgoParams::omega_radius() const { return 10.0 * n * alpha * lambda + 20.0 * std::sqrt(lambda) * eps; }

double AlgoParams::cut_budget() const { return 5.0 * n * std::log2(std::max<double>(static_cast<double>(T), 2.0)); }

void BumpSum::add(const GaussianBump& bump) {
    ++count_;
    const GaussianCore& core = bump.core();
    const double lam = bump.lambda();
    const Matrix linv = core.cholesky().triangularView<Eigen::Lower>().solve(Matrix::Identity(n_, n_));
    const Vector c = bump.center_sample() / (1.0 - lam) - core.mean();
    const Vector d = linv * c;
    const double log_scale = bump.weight() > 0.0 ? std::log(bump.weight()) - n_ * std::log1p(-lam) +
                                                       core.log_density(core.mean())
                                                 : -kInf;
    data_.push_back(log_scale);
    data_.push_back(lam / (1.0 - lam));
    data_.push_back(bump.eta());
    for (int i = 0; i < n_; ++i) data_.push_back(d(i));
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) data_.push_back(linv(i, j));
}

double BumpSum::eval(const Vector& y, bool weighted) const {
    const std::size_t stride = 3 + static_cast<std::size_t>(n_) * (n_ + 1);
    double acc = 0.0;
    for (int s = 0; s < count_; ++s) {
        const double* b = data_.data() + s * stride;
        if (b[0] == -kInf) continue;
        const double a = b[1];
        const double* d = b + 3;
        const double* linv = d + n_;
        double sq = 0.0;
        for (int i = 0; i < n_; ++i) {
            double w = d[i];
            for (int j = 0; j < n_; ++j) w -= a * linv[i * n_ + j] * y(j);
            sq += w * w;
        }
        const double v = std::exp(b[0] - 0.5 * sq);
        acc += weighted ? b[2] * v : v;
    }
    return acc;
}

double NodeGrid::interpolate(const Vector& field, const Vector& x) const {
    const int n = static_cast<int>(lo.size());
    const int m = per_axis;
    int idx[2] = {0, 0};
    double frac[2] = {0.0, 0.0};
    for (int k = 0; k < n; ++k) {
        const double width = hi(k) - lo(k);
        double s = width > 0.0 ? (x(k) - lo(k)) / width * (m - 1) : 0.0;
        s = std::clamp(s, 0.0, static_cast<double>(m - 1));
        idx[k] = std::min(static_cast<int>(std::floor(s)), m - 2);
        frac[k] = s - idx[k];
    }
    if (n == 1) return (1.0 - frac[0]) * field(idx[0]) + frac[0] * field(idx[0] + 1);
    const auto at = [&](int i, int j) { return field(i + m * j); };
    return (1.0 - frac[0]) * (1.0 - frac[1]) * at(idx[0], idx[1]) + frac[0] * (1.0 - frac[1]) * at(idx[0] + 1, idx[1]) +
           (1.0 - frac[0]) * frac[1] * at(idx[0], idx[1] + 1) + frac[0] * frac[1] * at(idx[0] + 1, idx[1] + 1);
}

namespace {

void note(EngineState& state, const std::string& msg) {
    if (std::find(state.diagnostics.begin(), state.diagnostics.end(), msg) == state.diagnostics.end()) {
        state.diagnostics.push_back(msg);
    }
}

void build_grid(EngineState& state) {
    const int n = state.params.n;
    if (n > 2) throw ConfigError("grid density mode needs n <= 2");
    NodeGrid& g = state.grid;
    std::tie(g.lo, g.hi) = state.focus.bounding_box();
    int per_axis = n == 1 ? state.options.grid_nodes_1d : state.options.grid_nodes_2d;
    // Thin rotated boxes can slip between lattice nodes; refine until enough land inside.
    for (int attempt = 0; attempt < 5; ++attempt, per_axis = 2 * per_axis - 1) {
        const int m = n == 1 ? per_axis : per_axis * per_axis;
        g.per_axis = per_axis;
        g.nodes.resize(n, m);
        for (int idx = 0; idx < m; ++idx) {
            const int i = idx % per_axis;
            g.nodes(0, idx) = g.lo(0) + (g.hi(0) - g.lo(0)) * i / (per_axis - 1);
            if (n == 2) {
                const int j = idx / per_axis;
                g.nodes(1, idx) = g.lo(1) + (g.hi(1) - g.lo(1)) * j / (per_axis - 1);
            }
        }
        g.in_focus.assign(static_cast<std::size_t>(m), 0);
        int inside = 0;
        for (int idx = 0; idx < m; ++idx) {
            if (state.focus.contains(g.nodes.col(idx), 1e-12)) {
                g.in_focus[static_cast<std::size_t>(idx)] = 1;
                ++inside;
            }
        }
        if (inside >= kMinFocusNodes) break;
        if (attempt == 4) throw InfeasibleRegionError("focus region holds too few lattice nodes");
    }
    const int m = g.size();
    g.l_tilde = Vector::Zero(m);
    g.q = Vector::Zero(m);
    for (const auto& bump : state.bumps) {
        if (!(bump.weight() > 0.0)) continue;
        const Vector v = bump.values(g.nodes);
        g.l_tilde += v;
        g.q += bump.eta() * v;
    }
}

// Shift q so its minimum over F nodes is 0, then set weights, moments and the
// exported grid density.
void normalise_grid(EngineState& state) {
    NodeGrid& g = state.grid;
    const int m = g.size();
    double qmin = kInf;
    for (int i = 0; i < m; ++i)
        if (g.in_focus[static_cast<std::size_t>(i)]) qmin = std::min(qmin, g.q(i));
    g.q.array() -= qmin;
    g.weights = Vector::Zero(m);
    for (int i = 0; i < m; ++i)
        if (g.in_focus[static_cast<std::size_t>(i)]) g.weights(i) = std::exp(-g.q(i));
    g.weights /= g.weights.sum();

    Moments mom;
    mom.mean = g.nodes * g.weights;
    const Matrix centred = g.nodes.colwise() - mom.mean;
    mom.covariance = regularize_covariance(centred * g.weights.asDiagonal() * centred.transpose());
    state.moments = std::move(mom);

    GridDensity gd;
    gd.points = g.nodes;
    gd.log_weights = Vector::Constant(m, -kInf);
    for (int i = 0; i < m; ++i)
        if (g.weights(i) > 0.0) gd.log_weights(i) = std::log(g.weights(i));
    gd.lo = g.lo;
    gd.hi = g.hi;
    gd.resolution = g.per_axis;
    gd.cell_volume = 1.0;
    for (Eigen::Index k = 0; k < g.lo.size(); ++k) gd.cell_volume *= (g.hi(k) - g.lo(k)) / (g.per_axis - 1);
    state.density = std::move(gd);
}

Potential analytic_potential(const EngineState& state) {
    const BumpSum* sum = &state.bump_sum;
    const double offset = std::get<AnalyticDensity>(state.density).offset;
    return [sum, offset](const Vector& y) { return sum->eval(y, true) - offset; };
}

std::optional<Vector> warm_point(const EngineState& state) {
    const auto& ad = std::get<AnalyticDensity>(state.density);
    if (!ad.warm_chain.empty() && state.focus.contains(ad.warm_chain.back())) return ad.warm_chain.back();
    return std::nullopt;
}

void resample_analytic(EngineState& state, Rng& rng) {
    auto& ad = std::get<AnalyticDensity>(state.density);
    ad.focus = state.focus;
    ad.offset = 0.0;
    const auto warm = warm_point(state);
    Vector end;
    const Potential q = analytic_potential(state);
    state.p_samples = sample_p(state.focus, q, state.options.moment_samples, rng, warm, state.options.hit_and_run, &end);
    ad.warm_chain.assign(1, end);
    double qmin = kInf;
    for (Eigen::Index i = 0; i < state.p_samples.cols(); ++i) {
        qmin = std::min(qmin, state.bump_sum.eval(state.p_samples.col(i), true));
    }
    ad.offset = std::isfinite(qmin) ? qmin : 0.0;
    state.moments = moments(state.p_samples);
}

Vector draw_from_p(EngineState& state, Rng& rng) {
    if (state.mode == DensityMode::grid) {
        const Vector& w = state.grid.weights;
        double u = uniform01(rng);
        int last = 0;
        for (int i = 0; i < w.size(); ++i) {
            if (w(i) <= 0.0) continue;
            last = i;
            u -= w(i);
            if (u < 0.0) return state.grid.nodes.col(i);
        }
        return state.grid.nodes.col(last);
    }
    auto& ad = std::get<AnalyticDensity>(state.density);
    Vector end;
    const Matrix one = sample_p(state.focus, analytic_potential(state), 1, rng, warm_point(state),
                                state.options.hit_and_run, &end);
    ad.warm_chain.assign(1, end);
    return one.col(0);
}

// Pattern search over z in R^k for f(origin + basis z), moves restricted by `feasible`.
double pattern_minimise(const std::function<double(const Vector&)>& f,
                        const std::function<bool(const Vector&)>& feasible, const Vector& origin, const Matrix& basis,
                        double step, double min_step) {
    const int k = static_cast<int>(basis.cols());
    Vector z = Vector::Zero(k);
    double best = f(origin);
    if (k == 0) return best;
    while (step > min_step) {
        bool improved = false;
        for (int i = 0; i < k; ++i) {
            for (double dir : {1.0, -1.0}) {
                Vector cand = z;
                cand(i) += dir * step;
                const Vector y = origin + basis * cand;
                if (!feasible(y)) continue;
                const double v = f(y);
                if (v < best) {
                    best = v;
                    z = cand;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return best;
}

// Parameter range [lo, hi] of x0 + s d inside the polytope, ignoring rows parallel to d.
std::pair<double, double> chord(const Polytope& poly, const Vector& x0, const Vector& d) {
    double lo = -kInf, hi = kInf;
    for (Eigen::Index r = 0; r < poly.A.rows(); ++r) {
        const double ad = poly.A.row(r).dot(d);
        const double slack = poly.b(r) - poly.A.row(r).dot(x0);
        if (std::abs(ad) <= 1e-12 * poly.A.row(r).norm()) continue;
        const double s = slack / ad;
        if (ad > 0.0) hi = std::min(hi, s);
        else lo = std::max(lo, s);
    }
    return {lo, hi};
}

}  // namespace

void refresh_density(EngineState& state, Rng& rng, bool regrid) {
    if (state.mode == DensityMode::grid) {
        if (regrid) build_grid(state);
        normalise_grid(state);
    } else {
        resample_analytic(state, rng);
    }
}

EngineState init_state(const ConvexBody& K, const AlgoParams& params, const EngineOptions& options, Rng* rng) {
    params.validate();
    validate_body(K);
    if (dimension(K) != params.n) throw ConfigError("body dimension does not match n");
    EngineState state;
    state.params = params;
    state.options = options;
    state.body = K;
    state.focus.base = K;
    state.eta = params.eta1;
    state.bump_sum = BumpSum(params.n);
    state.mode = options.mode;
    if (state.mode == DensityMode::automatic) state.mode = params.n <= 2 ? DensityMode::grid : DensityMode::analytic;
    if (state.mode == DensityMode::grid) {
        build_grid(state);
        normalise_grid(state);
    } else {
        if (rng == nullptr) throw ConfigError("analytic density mode needs a random stream at initialisation");
        AnalyticDensity ad;
        ad.focus = state.focus;
        state.density = std::move(ad);
        resample_analytic(state, *rng);
    }
    return state;
}

bool OmegaRegion::contains(const Vector& x) const {
    return body != nullptr && body_contains(*body, x) && ellipsoid.contains(x);
}

OmegaRegion omega_region(const EngineState& state) {
    OmegaRegion omega;
    omega.ellipsoid = Ellipsoid{state.moments.mean, state.moments.covariance, state.params.omega_radius()};
    omega.body = &state.body;
    return omega;
}

RoundRecord engine_step(EngineState& state, LossOracle& env, Rng& rng, const std::optional<Vector>& forced_play,
                        Rng* env_rng) {
    const AlgoParams& P = state.params;
    const double lam = P.lambda;
    const KernelParams kp = P.kernel();

    RoundRecord rec;
    rec.t = state.round_offset + state.t + 1;
    rec.eta = state.eta;

    GaussianCore core;
    if (state.mode == DensityMode::grid) {
        core = gaussian_core(state.moments.mean, state.moments.covariance, kp);
    } else {
        const int k = std::min<int>(state.options.core_shift_samples, static_cast<int>(state.p_samples.cols()));
        core = shifted_gaussian_core(state.p_samples.leftCols(k), state.moments.covariance, kp);
    }
    const OmegaRegion omega = omega_region(state);

    Vector x;
    if (forced_play) {
        x = *forced_play;
    } else {
        const Vector X = draw_from_p(state, rng);
        x = lam * X + (1.0 - lam) * core.sample(rng);
    }
    rec.x = x;
    rec.in_K = body_contains(state.body, x);
    rec.in_Omega = omega.contains(x);
    rec.loss = rec.in_K ? env.query(rec.t, x, env_rng ? *env_rng : rng) : 0.0;

    Vector log_k;  // grid mode: log K(x, node)
    double u = 0.0;
    bool floored = false;
    if (state.mode == DensityMode::grid) {
        log_k = log_kernel_density_columns(core, lam, x, state.grid.nodes);
        double mx = -kInf;
        for (int i = 0; i < log_k.size(); ++i)
            if (state.grid.weights(i) > 0.0) mx = std::max(mx, log_k(i));
        double acc = 0.0;
        if (std::isfinite(mx)) {
            for (int i = 0; i < log_k.size(); ++i)
                if (state.grid.weights(i) > 0.0) acc += state.grid.weights(i) * std::exp(log_k(i) - mx);
        }
        u = acc > 0.0 ? std::exp(mx + std::log(acc)) : 0.0;
        if (!(u >= kMinU)) {
            u = kMinU;
            floored = true;
        }
    } else {
        const UEstimate est = estimate_u(x, state.p_samples, core, lam);
        u = est.u;
        floored = est.floored;
    }
    if (floored) note(state, "u underflowed and was floored at 1e-300");
    rec.u = u;

    GaussianBump bump = make_bump(x, rec.loss, u, core, lam, state.eta, rec.in_Omega);
    state.bumps.push_back(bump);
    state.bump_sum.add(bump);
    if (state.mode == DensityMode::grid) {
        if (bump.weight() > 0.0) {
            const Vector v = exp_exact(std::log(bump.weight()) + log_k.array());
            state.grid.l_tilde += v;
            state.grid.q += state.eta * v;
        }
        normalise_grid(state);
    } else {
        std::get<AnalyticDensity>(state.density).bumps.push_back(std::move(bump));
        resample_analytic(state, rng);
    }
    ++state.t;

    if (state.options.enable_focus) rec.focus_cut = update_focus(state, rng);
    if (state.options.enable_restart) rec.restart = restart_check(state);
    return rec;
}

bool update_focus(EngineState& state, Rng& rng) {
    const AlgoParams& P = state.params;
    FocusCut cut;
    if (P.focus_primitive == FocusPrimitive::box) {
        cut = box_from_moments(state.moments.mean, state.moments.covariance, P.alpha);
    } else {
        cut = Ellipsoid{state.moments.mean, state.moments.covariance, P.alpha};
    }
    double ratio = 1.0;
    if (state.mode == DensityMode::grid) {
        const NodeGrid& g = state.grid;
        long inside = 0, total = 0;
        for (int i = 0; i < g.size(); ++i) {
            if (!g.in_focus[static_cast<std::size_t>(i)]) continue;
            ++total;
            if (cut_contains(cut, g.nodes.col(i))) ++inside;
        }
        ratio = total > 0 ? static_cast<double>(inside) / static_cast<double>(total) : 1.0;
    } else {
        ratio = volume_ratio(state.focus, cut, state.options.volume_samples, rng, state.options.hit_and_run);
    }
    if (!(ratio < state.options.volume_threshold)) return false;

    state.focus.cuts.push_back(std::move(cut));
    ++state.N;
    state.eta *= 1.0 + P.gamma;
    state.facets_valid = false;
    if (!state.budget_warned && state.N > P.cut_budget()) {
        state.budget_warned = true;
        std::ostringstream msg;
        msg << "cut count " << state.N << " exceeds 5 n log2 T = " << P.cut_budget();
        note(state, msg.str());
    }
    refresh_density(state, rng, true);
    return true;
}

std::optional<RestartProbe> restart_probe(EngineState& state) {
    if (state.focus.cuts.empty()) return std::nullopt;
    if (state.params.focus_primitive != FocusPrimitive::box || !state.focus.box_only()) {
        note(state, "restart search skipped: focus region has ellipsoid cuts or a ball base");
        return std::nullopt;
    }
    if (!state.facets_valid) {
        state.facets = boundary_facets(state.focus);
        state.facets_valid = true;
    }
    if (state.facets.empty()) return std::nullopt;

    RestartProbe probe;
    probe.facets = static_cast<int>(state.facets.size());
    probe.boundary_min = kInf;
    probe.interior_min = kInf;
    const int n = state.params.n;

    if (state.mode == DensityMode::grid) {
        const NodeGrid& g = state.grid;
        for (int i = 0; i < g.size(); ++i)
            if (g.in_focus[static_cast<std::size_t>(i)]) probe.interior_min = std::min(probe.interior_min, g.l_tilde(i));
        const int m = std::max(state.options.facet_samples, 1);
        for (const Facet& f : state.facets) {
            probe.boundary_min = std::min(probe.boundary_min, g.interpolate(g.l_tilde, f.interior_point));
            if (n < 2) continue;
            for (int c = 0; c < f.tangent.cols(); ++c) {
                const Vector d = f.tangent.col(c);
                const auto [lo, hi] = chord(f.region, f.interior_point, d);
                if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) continue;
                for (int k = 0; k < m; ++k) {
                    const double s = lo + (hi - lo) * (k + 0.5) / m;
                    probe.boundary_min = std::min(probe.boundary_min, g.interpolate(g.l_tilde, f.interior_point + s * d));
                }
            }
        }
    } else {
        const auto L = [&](const Vector& y) { return state.bump_sum.eval(y, false); };
        const auto [lo, hi] = state.focus.bounding_box();
        const double width = (hi - lo).maxCoeff();
        const Matrix eye = Matrix::Identity(n, n);
        const auto in_focus = [&](const Vector& y) { return state.focus.contains(y); };
        const int starts = std::min<int>(state.options.restart_starts, static_cast<int>(state.p_samples.cols()));
        for (int s = 0; s < starts; ++s) {
            probe.interior_min = std::min(
                probe.interior_min, pattern_minimise(L, in_focus, state.p_samples.col(s), eye, 0.25 * width, 1e-6 * width));
        }
        for (const Facet& f : state.facets) {
            const auto on_facet = [&](const Vector& y) { return body_contains(f.region, y, kFacetTolerance); };
            probe.boundary_min = std::min(
                probe.boundary_min, pattern_minimise(L, on_facet, f.interior_point, f.tangent, 0.25 * width, 1e-6 * width));
        }
    }
    probe.interior_min = std::min(probe.interior_min, probe.boundary_min);
    return probe;
}

bool restart_check(EngineState& state) {
    const auto probe = restart_probe(state);
    if (!probe) return false;
    return probe->boundary_min - probe->interior_min <= state.params.beta / state.params.eta1;
}

RunTrace run(LossOracle& env, const AlgoParams& params, Rng& rng, const EngineOptions& options, Rng* env_rng) {
    RunTrace trace;
    trace.n = params.n;
    if (params.T <= 0) return trace;
    if (env.dim() != params.n) throw ConfigError("environment dimension does not match n");

    const long T = params.T;
    long played = 0;
    std::optional<EngineState> state;
    const auto flush = [&] {
        if (!state) return;
        for (const auto& d : state->diagnostics) {
            if (std::find(trace.diagnostics.begin(), trace.diagnostics.end(), d) == trace.diagnostics.end()) {
                trace.diagnostics.push_back(d);
            }
        }
    };
    try {
        state.emplace(init_state(env.body(), params, options, &rng));
        while (played < T) {
            RoundRecord rec = engine_step(*state, env, rng, std::nullopt, env_rng);
            ++played;
            const bool restart = rec.restart;
            trace.push(std::move(rec));
            if (restart && played < T) {
                flush();
                const int restarts = state->restart_count + 1;
                state.emplace(init_state(env.body(), params.for_horizon(T - played), options, &rng));
                state->round_offset = played;
                state->restart_count = restarts;
            }
        }
    } catch (const InfeasibleRegionError& e) {
        trace.aborted = true;
        trace.diagnostics.push_back(std::string("aborted: ") + e.what());
    } catch (const DegenerateGeometryError& e) {
        trace.aborted = true;
        trace.diagnostics.push_back(std::string("aborted: ") + e.what());
    } catch (const EstimatorUndefinedError& e) {
        trace.aborted = true;
        trace.diagnostics.push_back(std::string("aborted: ") + e.what());
    }
    flush();
    return trace;
}

}  // namespace kbco
