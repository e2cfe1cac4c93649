#include "kbco/kernel1d.hpp"

#include "kbco/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <utility>

namespace kbco::k1 {

namespace {

std::atomic<bool> g_near_flip{false};

// Unmirrored kernel with mean mu.
double base_density(double mu, double eps, double x, double y) {
    const double gap = std::abs(y - mu);
    if (gap >= eps) {
        const double lo = std::min(y, mu);
        const double hi = std::max(y, mu);
        return (x >= lo && x <= hi) ? 1.0 / gap : 0.0;
    }
    const double near = g_near_flip.load(std::memory_order_relaxed) ? -1.0 / eps : 1.0 / eps;
    return (x >= mu - eps && x <= mu) ? near : 0.0;
}

// Segment carrying K delta_y.
std::pair<double, double> segment_for(const Kernel1DParams& params, double y) {
    if (std::abs(y - params.mu) >= params.eps) return {std::min(y, params.mu), std::max(y, params.mu)};
    if (params.mirrored) return {params.mu, params.mu + params.eps};
    return {params.mu - params.eps, params.mu};
}

Draw1D draw_with_weights(const Vector& w, const Vector& grid, const Kernel1DParams& params, Rng& rng) {
    const int m = static_cast<int>(w.size());
    const double target = uniform01(rng);
    double cum = 0.0;
    int j = m - 1;
    for (int i = 0; i < m; ++i) {
        cum += w(i);
        if (target < cum) {
            j = i;
            break;
        }
    }
    while (w(j) <= 0.0 && j > 0) --j;
    const auto [lo, hi] = segment_for(params, grid(j));
    // Clamp so rounding never moves x off the segment it was drawn from.
    const double x = std::clamp(lo + (hi - lo) * uniform01(rng), lo, hi);
    return Draw1D{x, j};
}

}  // namespace

Kernel1DParams Kernel1DParams::make(double mu, double eps) {
    return Kernel1DParams{mu, eps, mu < eps};
}

GridDensity GridDensity::uniform(int m) {
    GridDensity p;
    p.grid = Vector::LinSpaced(m, 0.0, 1.0);
    p.log_weights = Vector::Zero(m);
    return p;
}

void GridDensity::normalize() {
    const double mx = log_weights.maxCoeff();
    if (std::isfinite(mx)) log_weights.array() -= mx;
}

Vector GridDensity::weights() const {
    const double mx = log_weights.maxCoeff();
    Vector w = exp_exact(log_weights.array() - mx);
    return w / w.sum();
}

double GridDensity::mean() const { return weights().dot(grid); }

double k1_density(const Kernel1DParams& params, double x, double y) {
    if (params.mirrored) return base_density(1.0 - params.mu, params.eps, 1.0 - x, 1.0 - y);
    return base_density(params.mu, params.eps, x, y);
}

double k1_adjoint(const std::function<double(double)>& f, const Kernel1DParams& params, double y) {
    // x = a + (b - a) U with U uniform on [0, 1]; the orientation of the
    // segment does not matter for the expectation.
    const auto [a, b] = segment_for(params, y);
    constexpr int panels = 8192;
    static const std::array<double, 3> nodes{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    static const std::array<double, 3> wts{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const double h = 1.0 / panels;
    double acc = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double mid = (i + 0.5) * h;
        double panel = 0.0;
        for (int q = 0; q < 3; ++q) {
            const double u = mid + 0.5 * h * nodes[q];
            panel += wts[q] * f(a + (b - a) * u);
        }
        acc += 0.5 * h * panel;
    }
    return acc;
}

double k1_kp(const GridDensity& p, const Kernel1DParams& params, double x) {
    const Vector w = p.weights();
    double acc = 0.0;
    for (int j = 0; j < p.size(); ++j) {
        if (w(j) > 0.0) acc += w(j) * k1_density(params, x, p.grid(j));
    }
    return acc;
}

Draw1D k1_draw(const GridDensity& p, const Kernel1DParams& params, Rng& rng) {
    return draw_with_weights(p.weights(), p.grid, params, rng);
}

double k1_sample(const GridDensity& p, const Kernel1DParams& params, Rng& rng) {
    return k1_draw(p, params, rng).x;
}

Vector k1_estimator(double x_t, double loss, const GridDensity& p, const Kernel1DParams& params) {
    const double kp = k1_kp(p, params, x_t);
    if (!(kp > 0.0)) {
        throw EstimatorUndefinedError("k1_estimator: Kp(x_t) = 0; sampler and grid disagree");
    }
    Vector est(p.size());
    const double scale = loss / kp;
    for (int j = 0; j < p.size(); ++j) est(j) = scale * k1_density(params, x_t, p.grid(j));
    return est;
}

double k1_default_eta(long T) {
    const double t = static_cast<double>(std::max<long>(T, 2));
    const double c = 2.0 * std::log(std::exp(1.0) * t * t);
    return std::sqrt(2.0 * std::log(t * t * t) / (c * t));
}

namespace testing {
void set_near_branch_sign_flip(bool on) { g_near_flip.store(on); }
bool near_branch_sign_flip() { return g_near_flip.load(); }
}  // namespace testing

RunTrace k1_run(LossOracle& env, long T, const K1RunOptions& options, Rng& rng, Rng* env_rng) {
    RunTrace trace;
    trace.n = 1;
    if (T <= 0) return trace;
    const double t_real = static_cast<double>(T);
    const double eps = options.eps > 0.0 ? options.eps : 1.0 / (t_real * t_real);
    const double eta = options.eta > 0.0 ? options.eta : k1_default_eta(T);

    GridDensity p = GridDensity::uniform(options.grid_size);
    const int m = p.size();
    Vector w(m);
    Vector kernel_row(m);
    trace.rounds.reserve(static_cast<std::size_t>(T));

    for (long t = 1; t <= T; ++t) {
        const double mx = p.log_weights.maxCoeff();
        w = exp_exact(p.log_weights.array() - mx);
        w /= w.sum();
        const double mu = w.dot(p.grid);
        const Kernel1DParams params = Kernel1DParams::make(mu, eps);

        const double x = draw_with_weights(w, p.grid, params, rng).x;

        Vector xv(1);
        xv(0) = x;
        const double loss = env.query(t, xv, env_rng ? *env_rng : rng);

        double kp = 0.0;
        for (int i = 0; i < m; ++i) {
            kernel_row(i) = k1_density(params, x, p.grid(i));
            kp += w(i) * kernel_row(i);
        }
        if (!(kp > 0.0)) throw EstimatorUndefinedError("k1_run: Kp(x_t) = 0");
        p.log_weights -= (eta * loss / kp) * kernel_row;
        p.normalize();

        RoundRecord rec;
        rec.t = t;
        rec.x = xv;
        rec.loss = loss;
        rec.u = kp;
        rec.eta = eta;
        trace.push(std::move(rec));
    }
    return trace;
}

}  // namespace kbco::k1
