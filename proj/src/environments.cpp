#include "kbco/environments.hpp"

#include "kbco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace kbco {

double LossOracle::query(long t, const Vector& x, Rng& rng) {
    ++queries_;
    const double raw = raw_query(t, x, rng);
    if (raw < 0.0 || raw > 1.0 || !std::isfinite(raw)) ++clipped_;
    if (!std::isfinite(raw)) return 1.0;
    return std::clamp(raw, 0.0, 1.0);
}

double LossOracle::raw_query(long t, const Vector& x, Rng&) { return full_loss(t, x); }

double LossOracle::cumulative_full_loss(const Vector& x, long T) const {
    double acc = 0.0;
    for (long t = 1; t <= T; ++t) acc += full_loss(t, x);
    return acc;
}

namespace {

void require_inside(const ConvexBody& K, const Vector& x, const char* what) {
    if (x.size() != dimension(K)) throw ConfigError(std::string(what) + ": dimension mismatch");
    if (!body_contains(K, x, 1e-12)) throw ConfigError(std::string(what) + ": optimum lies outside K");
}

class StationaryOracle : public LossOracle {
public:
    explicit StationaryOracle(ConvexBody K) : K_(std::move(K)) {}
    double cumulative_full_loss(const Vector& x, long T) const override { return static_cast<double>(T) * value(x); }
    double full_loss(long, const Vector& x) const override { return value(x); }
    int dim() const override { return dimension(K_); }
    const ConvexBody& body() const override { return K_; }

protected:
    virtual double value(const Vector& x) const = 0;
    ConvexBody K_;
};

class LinearOracle final : public StationaryOracle {
public:
    LinearOracle(ConvexBody K, Vector a) : StationaryOracle(std::move(K)), a_(std::move(a)) {
        if (a_.size() != dimension(K_)) throw ConfigError("linear: direction dimension mismatch");
        // Range of a.x over K from the bounding box (exact for axis-aligned boxes and intervals).
        const auto [lo, hi] = bounding_box(K_);
        lo_ = 0.0;
        double top = 0.0;
        for (Eigen::Index i = 0; i < a_.size(); ++i) {
            lo_ += std::min(a_(i) * lo(i), a_(i) * hi(i));
            top += std::max(a_(i) * lo(i), a_(i) * hi(i));
        }
        span_ = std::max(top - lo_, 1e-300);
    }
    double lipschitz() const override { return a_.norm() / span_; }
    std::string name() const override { return "linear"; }

protected:
    double value(const Vector& x) const override { return (a_.dot(x) - lo_) / span_; }

private:
    Vector a_;
    double lo_ = 0.0;
    double span_ = 1.0;
};

class QuadraticOracle final : public StationaryOracle {
public:
    QuadraticOracle(ConvexBody K, Vector opt) : StationaryOracle(std::move(K)), opt_(std::move(opt)) {
        require_inside(K_, opt_, "quadratic");
        const double r = max_distance(K_, opt_);
        scale_ = 1.0 / (r * r);
        lip_ = 2.0 * r * scale_;
    }
    double lipschitz() const override { return lip_; }
    std::string name() const override { return "quadratic"; }

protected:
    double value(const Vector& x) const override { return scale_ * (x - opt_).squaredNorm(); }

private:
    Vector opt_;
    double scale_ = 1.0;
    double lip_ = 1.0;
};

class AbsOracle final : public StationaryOracle {
public:
    AbsOracle(ConvexBody K, Vector opt) : StationaryOracle(std::move(K)), opt_(std::move(opt)) {
        require_inside(K_, opt_, "abs");
        scale_ = 1.0 / max_distance(K_, opt_);
    }
    double lipschitz() const override { return scale_; }
    std::string name() const override { return "abs"; }

protected:
    double value(const Vector& x) const override { return scale_ * (x - opt_).norm(); }

private:
    Vector opt_;
    double scale_ = 1.0;
};

class WrappedOracle : public LossOracle {
public:
    explicit WrappedOracle(OraclePtr inner) : inner_(std::move(inner)) {}
    double full_loss(long t, const Vector& x) const override { return inner_->full_loss(t, x); }
    double cumulative_full_loss(const Vector& x, long T) const override { return inner_->cumulative_full_loss(x, T); }
    int dim() const override { return inner_->dim(); }
    const ConvexBody& body() const override { return inner_->body(); }
    double lipschitz() const override { return inner_->lipschitz(); }

protected:
    OraclePtr inner_;
};

class StochasticOracle final : public WrappedOracle {
public:
    StochasticOracle(OraclePtr inner, double scale) : WrappedOracle(std::move(inner)), scale_(scale) {
        if (scale_ < 0.0) throw ConfigError("stochastic: noise scale must be non-negative");
    }
    std::string name() const override { return "stochastic(" + inner_->name() + ")"; }

protected:
    double raw_query(long t, const Vector& x, Rng& rng) override {
        const double base = inner_->full_loss(t, x);
        if (scale_ == 0.0) return base;
        return base + scale_ * (2.0 * uniform01(rng) - 1.0);
    }

private:
    double scale_;
};

class CorruptedOracle final : public WrappedOracle {
public:
    CorruptedOracle(OraclePtr inner, double fraction, long T, std::uint64_t seed) : WrappedOracle(std::move(inner)) {
        if (fraction < 0.0 || fraction > 1.0) throw ConfigError("corrupted: fraction must lie in [0, 1]");
        const long count = static_cast<long>(std::floor(fraction * static_cast<double>(T)));
        // Partial Fisher-Yates over 1..T.
        std::vector<long> rounds(static_cast<std::size_t>(std::max<long>(T, 0)));
        std::iota(rounds.begin(), rounds.end(), 1L);
        Rng rng = make_stream(seed, 0, StreamTag::corruption);
        for (long i = 0; i < count; ++i) {
            const long j = i + static_cast<long>(uniform01(rng) * static_cast<double>(T - i));
            std::swap(rounds[static_cast<std::size_t>(i)], rounds[static_cast<std::size_t>(j)]);
        }
        corrupted_.assign(rounds.begin(), rounds.begin() + count);
        std::sort(corrupted_.begin(), corrupted_.end());
    }
    std::string name() const override { return "corrupted(" + inner_->name() + ")"; }
    const std::vector<long>& rounds() const { return corrupted_; }

protected:
    double raw_query(long t, const Vector& x, Rng& rng) override {
        const double truth = std::clamp(inner_->query(t, x, rng), 0.0, 1.0);
        if (std::binary_search(corrupted_.begin(), corrupted_.end(), t)) return 1.0 - truth;
        return truth;
    }

private:
    std::vector<long> corrupted_;
};

class MovingOptimumOracle final : public LossOracle {
public:
    MovingOptimumOracle(ConvexBody K, long switch_round, Vector a, Vector b)
        : K_(std::move(K)), switch_(switch_round), a_(std::move(a)), b_(std::move(b)) {
        require_inside(K_, a_, "moving_optimum");
        require_inside(K_, b_, "moving_optimum");
        diam_ = diameter_bound(K_);
    }
    double full_loss(long t, const Vector& x) const override {
        const Vector& opt = t < switch_ ? a_ : b_;
        return std::clamp((x - opt).norm() / diam_, 0.0, 1.0);
    }
    double cumulative_full_loss(const Vector& x, long T) const override {
        const long before = std::clamp(switch_ - 1, 0L, T);
        return static_cast<double>(before) * full_loss(1, x) +
               static_cast<double>(T - before) * full_loss(std::max(switch_, 1L), x);
    }
    int dim() const override { return dimension(K_); }
    const ConvexBody& body() const override { return K_; }
    double lipschitz() const override { return 1.0 / diam_; }
    std::string name() const override { return "moving_optimum"; }

private:
    ConvexBody K_;
    long switch_;
    Vector a_, b_;
    double diam_ = 1.0;
};

}  // namespace

OraclePtr make_linear(ConvexBody K, Vector direction) {
    return std::make_shared<LinearOracle>(std::move(K), std::move(direction));
}
OraclePtr make_quadratic(ConvexBody K, Vector optimum) {
    return std::make_shared<QuadraticOracle>(std::move(K), std::move(optimum));
}
OraclePtr make_abs(ConvexBody K, Vector optimum) { return std::make_shared<AbsOracle>(std::move(K), std::move(optimum)); }
OraclePtr make_stochastic(OraclePtr inner, double noise_scale) {
    return std::make_shared<StochasticOracle>(std::move(inner), noise_scale);
}
OraclePtr make_corrupted(OraclePtr inner, double eps_fraction, long T, std::uint64_t seed) {
    return std::make_shared<CorruptedOracle>(std::move(inner), eps_fraction, T, seed);
}
OraclePtr make_moving_optimum(ConvexBody K, long switch_round, Vector x_a, Vector x_b) {
    return std::make_shared<MovingOptimumOracle>(std::move(K), switch_round, std::move(x_a), std::move(x_b));
}

std::vector<long> corrupted_rounds(const LossOracle& oracle) {
    if (const auto* c = dynamic_cast<const CorruptedOracle*>(&oracle)) return c->rounds();
    return {};
}

double convexity_violation(const LossOracle& oracle, long t, int pairs, Rng& rng) {
    const auto [lo, hi] = bounding_box(oracle.body());
    const int n = oracle.dim();
    double worst = 0.0;
    int done = 0;
    for (int attempt = 0; done < pairs && attempt < 100 * pairs; ++attempt) {
        Vector a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a(i) = lo(i) + (hi(i) - lo(i)) * uniform01(rng);
            b(i) = lo(i) + (hi(i) - lo(i)) * uniform01(rng);
        }
        if (!body_contains(oracle.body(), a) || !body_contains(oracle.body(), b)) continue;
        const double mid = oracle.full_loss(t, 0.5 * (a + b));
        const double chord = 0.5 * (oracle.full_loss(t, a) + oracle.full_loss(t, b));
        worst = std::max(worst, mid - chord);
        ++done;
    }
    return worst;
}

namespace {

// Coordinate pattern search inside K, shrinking the step to `min_step`.
FixedPoint refine(const LossOracle& env, long T, Vector x, double step, double min_step) {
    double best = env.cumulative_full_loss(x, T);
    const int n = env.dim();
    while (step > min_step) {
        bool improved = false;
        for (int i = 0; i < n; ++i) {
            for (double dir : {1.0, -1.0}) {
                Vector y = x;
                y(i) += dir * step;
                if (!body_contains(env.body(), y)) continue;
                const double v = env.cumulative_full_loss(y, T);
                if (v < best) {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return {x, best};
}

}  // namespace

FixedPoint best_fixed_point(const LossOracle& env, long T) {
    const int n = env.dim();
    const auto [lo, hi] = bounding_box(env.body());
    if (n <= 2) {
        constexpr int res = 1024;
        FixedPoint best{inner_ball(env.body()).center, std::numeric_limits<double>::infinity()};
        const Vector h = (hi - lo) / (res - 1);
        Vector y(n);
        const int total = n == 1 ? res : res * res;
        for (int idx = 0; idx < total; ++idx) {
            y(0) = lo(0) + (idx % res) * h(0);
            if (n == 2) y(1) = lo(1) + (idx / res) * h(1);
            if (!body_contains(env.body(), y)) continue;
            const double v = env.cumulative_full_loss(y, T);
            if (v < best.value) best = {y, v};
        }
        const FixedPoint r = refine(env, T, best.x, h.maxCoeff(), 1e-9 * h.maxCoeff());
        return r.value <= best.value ? r : best;
    }
    // Projected subgradient descent on the averaged loss from 10 starts.
    Rng rng = make_stream(0x5eed, 0, StreamTag::verify);
    const double diam = (hi - lo).norm();
    FixedPoint best{inner_ball(env.body()).center, env.cumulative_full_loss(inner_ball(env.body()).center, T)};
    const double scale = 1.0 / std::max<double>(static_cast<double>(T), 1.0);
    for (int start = 0; start < 10; ++start) {
        Vector x(n);
        for (int i = 0; i < n; ++i) x(i) = lo(i) + (hi(i) - lo(i)) * uniform01(rng);
        x = project(env.body(), x);
        for (int it = 1; it <= 2000; ++it) {
            Vector g(n);
            const double fd = 1e-7 * diam;
            for (int i = 0; i < n; ++i) {
                Vector a = x, b = x;
                a(i) += fd;
                b(i) -= fd;
                g(i) = scale * (env.cumulative_full_loss(a, T) - env.cumulative_full_loss(b, T)) / (2.0 * fd);
            }
            const double gn = g.norm();
            if (gn < 1e-14) break;
            x = project(env.body(), x - (diam / std::sqrt(static_cast<double>(it))) * 0.1 * g / gn);
            const double v = env.cumulative_full_loss(x, T);
            if (v < best.value) best = {x, v};
        }
    }
    return best;
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    LogLogFit fit;
    fit.points = static_cast<int>(lx.size());
    if (lx.size() < 2) {
        fit.slope = std::numeric_limits<double>::quiet_NaN();
        fit.intercept = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    const double k = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

RegretReport regret_report(const RunTrace& trace, const LossOracle& env, const std::vector<long>& checkpoints) {
    RegretReport rep;
    const long T = static_cast<long>(trace.rounds.size());
    std::vector<double> prefix_full(static_cast<std::size_t>(T) + 1, 0.0);
    std::vector<double> prefix_obs(static_cast<std::size_t>(T) + 1, 0.0);
    for (long i = 0; i < T; ++i) {
        const auto& r = trace.rounds[static_cast<std::size_t>(i)];
        const Vector played = r.in_K ? r.x : project(env.body(), r.x);
        prefix_full[static_cast<std::size_t>(i) + 1] = prefix_full[static_cast<std::size_t>(i)] + env.full_loss(r.t, played);
        prefix_obs[static_cast<std::size_t>(i) + 1] = prefix_obs[static_cast<std::size_t>(i)] + r.loss;
    }
    rep.cumulative_loss = prefix_obs.back();
    rep.full_cumulative_loss = prefix_full.back();
    rep.best_fixed_loss = T > 0 ? best_fixed_point(env, T).value : 0.0;
    rep.regret = rep.cumulative_loss - rep.best_fixed_loss;
    rep.pseudo_regret = rep.full_cumulative_loss - rep.best_fixed_loss;

    std::vector<double> xs;
    for (long c : checkpoints) {
        if (c <= 0 || c > T) continue;
        const double best = best_fixed_point(env, c).value;
        rep.checkpoints.push_back(c);
        rep.checkpoint_regret.push_back(prefix_full[static_cast<std::size_t>(c)] - best);
        xs.push_back(static_cast<double>(c));
    }
    rep.growth_exponent = fit_loglog(xs, rep.checkpoint_regret).slope;
    return rep;
}

RunTrace fkm_baseline(LossOracle& env, long T, const FkmParams& params, Rng& rng, Rng* env_rng) {
    RunTrace trace;
    const int n = env.dim();
    trace.n = n;
    if (T <= 0) return trace;
    const InnerBall ib = inner_ball(env.body());
    const double t_real = static_cast<double>(T);
    const double delta = std::min(params.delta_scale * std::pow(t_real, -0.25), ib.radius);
    const double step = params.step_scale * std::pow(t_real, -0.75);
    const double shrink = std::max(0.0, 1.0 - delta / ib.radius);

    // Projection onto c + shrink (K - c).
    const auto project_shrunk = [&](const Vector& z) -> Vector {
        if (shrink <= 0.0) return ib.center;
        return ib.center + shrink * (project(env.body(), ib.center + (z - ib.center) / shrink) - ib.center);
    };

    Vector y = ib.center;
    trace.rounds.reserve(static_cast<std::size_t>(T));
    for (long t = 1; t <= T; ++t) {
        const Vector u = unit_sphere(n, rng);
        const Vector x = y + delta * u;
        const bool inside = body_contains(env.body(), x, 1e-12);
        if (!inside) throw Error("fkm_baseline: play left K");
        const double loss = env.query(t, x, env_rng ? *env_rng : rng);
        y = project_shrunk(y - step * (n / delta) * loss * u);

        RoundRecord rec;
        rec.t = t;
        rec.x = x;
        rec.loss = loss;
        rec.u = delta;
        rec.eta = step;
        trace.push(std::move(rec));
    }
    return trace;
}

}  // namespace kbco
