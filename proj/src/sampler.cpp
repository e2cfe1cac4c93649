#include "kbco/sampler.hpp"

#include "kbco/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kbco {

HitAndRunChain::HitAndRunChain(const FocusRegion& region, Potential potential, Vector start, HitAndRunOptions options)
    : region_(&region), potential_(std::move(potential)), x_(std::move(start)), options_(options) {
    if (!region_->contains(x_)) throw InfeasibleRegionError("hit-and-run start point lies outside the focus region");
    const auto [lo, hi] = region_->bounding_box();
    diameter_ = std::max((hi - lo).norm(), 1e-300);
    q_x_ = eval(x_);
}

double HitAndRunChain::chord_end(const Vector& d) const {
    double inside = 0.0;
    double outside = 1.01 * diameter_;
    for (int i = 0; i < options_.bisection_steps; ++i) {
        const double mid = 0.5 * (inside + outside);
        if (region_->contains(x_ + mid * d)) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    return inside;
}

void HitAndRunChain::step(Rng& rng) {
    const int n = static_cast<int>(x_.size());
    const Vector d = unit_sphere(n, rng);
    const double t_hi = chord_end(d);
    const double t_lo = -chord_end(-d);
    const double len = t_hi - t_lo;
    ++proposed_;
    if (!(len > 0.0)) return;

    if (!potential_) {
        x_ += (t_lo + len * uniform01(rng)) * d;
        ++accepted_;
        return;
    }

    const int k = options_.knots;
    const double width = len / k;
    std::vector<double> q(static_cast<std::size_t>(k));
    double q_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        q[static_cast<std::size_t>(i)] = eval(x_ + (t_lo + (i + 0.5) * width) * d);
        q_min = std::min(q_min, q[static_cast<std::size_t>(i)]);
    }
    std::vector<double> g(static_cast<std::size_t>(k));
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        g[static_cast<std::size_t>(i)] = std::exp(-(q[static_cast<std::size_t>(i)] - q_min));
        total += g[static_cast<std::size_t>(i)];
    }
    const double target = uniform01(rng) * total;
    int cell = k - 1;
    double cum = 0.0;
    for (int i = 0; i < k; ++i) {
        cum += g[static_cast<std::size_t>(i)];
        if (target < cum) {
            cell = i;
            break;
        }
    }
    const double s_new = t_lo + (cell + uniform01(rng)) * width;
    const int cell_cur = std::clamp(static_cast<int>(std::floor((0.0 - t_lo) / width)), 0, k - 1);
    const Vector y = x_ + s_new * d;
    const double q_y = eval(y);
    // Independence Metropolis on the line: pi(y) g(cur) / (pi(x) g(new)).
    const double log_ratio = -(q_y - q_x_) + std::log(g[static_cast<std::size_t>(cell_cur)]) -
                             std::log(g[static_cast<std::size_t>(cell)]);
    if (log_ratio >= 0.0 || uniform01(rng) < std::exp(log_ratio)) {
        x_ = y;
        q_x_ = q_y;
        ++accepted_;
    }
}

void HitAndRunChain::advance(int steps, Rng& rng) {
    for (int i = 0; i < steps; ++i) step(rng);
}

Moments moments(const Matrix& samples) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index count = samples.cols();
    if (count < n + 2) throw Error("moments: need at least n + 2 samples");
    Moments m;
    m.mean = samples.rowwise().mean();
    const Matrix centred = samples.colwise() - m.mean;
    m.covariance = regularize_covariance(centred * centred.transpose() / static_cast<double>(count - 1));
    return m;
}

Vector GridDensity::weights() const {
    const double mx = log_weights.maxCoeff();
    Vector w = exp_exact(log_weights.array() - mx);
    return w / w.sum();
}

Moments GridDensity::moments() const {
    const Vector w = weights();
    Moments m;
    m.mean = points * w;
    const Matrix centred = points.colwise() - m.mean;
    m.covariance = regularize_covariance(centred * w.asDiagonal() * centred.transpose());
    return m;
}

Vector GridDensity::sample(Rng& rng) const {
    const Vector w = weights();
    const double target = uniform01(rng);
    double cum = 0.0;
    for (int i = 0; i < size(); ++i) {
        cum += w(i);
        if (target < cum && w(i) > 0.0) return points.col(i);
    }
    int last = size() - 1;
    while (last > 0 && !(w(last) > 0.0)) --last;
    return points.col(last);
}

GridDensity grid_oracle(const Potential& q, const FocusRegion& region, int resolution) {
    const int n = region.dim();
    if (n > 2) throw Error("grid_oracle: only n <= 2 is supported");
    const auto [lo, hi] = region.bounding_box();
    GridDensity g;
    g.lo = lo;
    g.hi = hi;
    g.resolution = resolution;
    const Vector h = (hi - lo) / resolution;
    g.cell_volume = h.prod();
    const int m = n == 1 ? resolution : resolution * resolution;
    g.points.resize(n, m);
    g.log_weights.resize(m);
    for (int idx = 0; idx < m; ++idx) {
        Vector y(n);
        y(0) = lo(0) + (idx % resolution + 0.5) * h(0);
        if (n == 2) y(1) = lo(1) + (idx / resolution + 0.5) * h(1);
        g.points.col(idx) = y;
        g.log_weights(idx) = region.contains(y) ? -(q ? q(y) : 0.0) : -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(g.log_weights.maxCoeff())) throw InfeasibleRegionError("grid_oracle: no cell centre in F");
    g.log_weights.array() -= g.log_weights.maxCoeff();
    return g;
}

double AnalyticDensity::potential(const Vector& y) const {
    double acc = 0.0;
    for (const auto& b : bumps) acc += b.eta() * b(y);
    return acc - offset;
}

Matrix sample_p(const FocusRegion& region, const Potential& q, int count, Rng& rng,
                const std::optional<Vector>& warm_start, const HitAndRunOptions& options, Vector* end_state) {
    const int n = region.dim();
    Matrix out(n, std::max(count, 0));
    if (count <= 0) {
        if (end_state && warm_start) *end_state = *warm_start;
        return out;
    }
    Vector start;
    if (warm_start && region.contains(*warm_start)) {
        start = *warm_start;
    } else {
        const auto p = region.interior_point();
        if (!p) throw InfeasibleRegionError("sample_p: focus region has no strictly feasible point");
        start = *p;
    }
    const bool warm = warm_start && region.contains(*warm_start);
    HitAndRunChain chain(region, q, start, options);
    if (!warm) chain.advance(options.burn_in_per_dim * n, rng);
    const int thin = std::max(1, options.thin_per_dim * n);
    for (int i = 0; i < count; ++i) {
        chain.advance(thin, rng);
        out.col(i) = chain.state();
    }
    if (end_state) *end_state = chain.state();
    return out;
}

Matrix sample_p(Density& density, int count, Rng& rng, const HitAndRunOptions& options) {
    if (auto* g = std::get_if<GridDensity>(&density)) {
        Matrix out(g->dim(), std::max(count, 0));
        for (int i = 0; i < count; ++i) out.col(i) = g->sample(rng);
        return out;
    }
    auto& a = std::get<AnalyticDensity>(density);
    std::optional<Vector> warm;
    if (!a.warm_chain.empty()) warm = a.warm_chain.back();
    Vector end;
    const Potential q = [&a](const Vector& y) { return a.potential(y); };
    Matrix out = sample_p(a.focus, q, count, rng, warm, options, &end);
    if (count > 0) {
        a.warm_chain.clear();
        a.warm_chain.push_back(end);
    }
    return out;
}

double volume_ratio(const FocusRegion& region, const FocusCut& cut, int m, Rng& rng, const HitAndRunOptions& options) {
    if (m <= 0) return 0.0;
    const Matrix pts = sample_p(region, Potential{}, m, rng, std::nullopt, options);
    int hits = 0;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        if (cut_contains(cut, pts.col(i))) ++hits;
    }
    return static_cast<double>(hits) / m;
}

double batch_means_stderr(const Vector& series, int batches) {
    const Eigen::Index n = series.size();
    const Eigen::Index per = n / batches;
    if (per < 1) return std::sqrt((series.array() - series.mean()).square().sum() / std::max<Eigen::Index>(n - 1, 1) / n);
    Vector means(batches);
    for (int b = 0; b < batches; ++b) means(b) = series.segment(b * per, per).mean();
    const double var = (means.array() - means.mean()).square().sum() / (batches - 1);
    return std::sqrt(var / batches);
}

}  // namespace kbco
