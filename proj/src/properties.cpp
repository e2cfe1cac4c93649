#include "kbco/properties.hpp"

#include "kbco/engine.hpp"
#include "kbco/environments.hpp"
#include "kbco/geometry.hpp"
#include "kbco/kernel1d.hpp"
#include "kbco/kernel_hd.hpp"
#include "kbco/rng.hpp"
#include "kbco/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace kbco::props {

namespace {

struct Stat {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    double var() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double se() const { return n > 0 ? std::sqrt(var() / static_cast<double>(n)) : 0.0; }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

PropertyResult result(const std::string& name, bool pass, std::string detail) {
    return PropertyResult{name, pass, std::move(detail)};
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// max(0, max_i a_i . x + b_i) with 1..5 pieces whose zero sets pass near `centre`
// at log-uniform distances between scale_lo and scale_hi.
struct ConvexPiecewise {
    std::vector<Vector> a;
    std::vector<double> b;

    double operator()(const Vector& x) const {
        double v = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) v = std::max(v, a[i].dot(x) + b[i]);
        return v;
    }
};

ConvexPiecewise random_convex(const Vector& centre, double scale_lo, double scale_hi, double max_slope, Rng& rng) {
    ConvexPiecewise f;
    const int n = static_cast<int>(centre.size());
    const int pieces = 1 + std::min(4, static_cast<int>(5.0 * uniform01(rng)));
    for (int i = 0; i < pieces; ++i) {
        const Vector dir = unit_sphere(n, rng);
        const double slope = max_slope * uniform01(rng);
        const double s = scale_lo * std::pow(scale_hi / scale_lo, uniform01(rng));
        const Vector anchor = centre + s * gaussian_vector(n, rng);
        f.a.push_back(slope * dir);
        f.b.push_back(-slope * dir.dot(anchor));
    }
    return f;
}

Vector uniform_in_ball(int n, Rng& rng) { return std::pow(uniform01(rng), 1.0 / n) * unit_sphere(n, rng); }

// Symmetric grid measure on [-0.5, 0.5]^2 with weights exp(-2 |y|^2); its mean is 0.
struct CentredGrid {
    Matrix nodes;
    Vector w;
    Matrix cov;
};

CentredGrid centred_grid() {
    constexpr int k = 21;
    CentredGrid g;
    g.nodes.resize(2, k * k);
    g.w.resize(k * k);
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
            const int idx = i + k * j;
            g.nodes(0, idx) = -0.5 + static_cast<double>(i) / (k - 1);
            g.nodes(1, idx) = -0.5 + static_cast<double>(j) / (k - 1);
            g.w(idx) = std::exp(-2.0 * g.nodes.col(idx).squaredNorm());
        }
    }
    g.w /= g.w.sum();
    g.cov = g.nodes * g.w.asDiagonal() * g.nodes.transpose();
    return g;
}

int draw_index(const Vector& w, Rng& rng) {
    double u = uniform01(rng);
    for (int i = 0; i < w.size(); ++i) {
        u -= w(i);
        if (u < 0.0) return i;
    }
    return static_cast<int>(w.size()) - 1;
}

double log_sum_weighted(const Vector& logs, const Vector& w) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < logs.size(); ++i)
        if (w(i) > 0.0) mx = std::max(mx, logs(i));
    double acc = 0.0;
    for (int i = 0; i < logs.size(); ++i)
        if (w(i) > 0.0) acc += w(i) * std::exp(logs(i) - mx);
    return mx + std::log(acc);
}

}  // namespace

// ---------------------------------------------------------------- kernel1d

PropertyResult k1_normalization() {
    const std::array<std::pair<double, double>, 4> cases{{{0.5, 0.05}, {0.2, 0.01}, {0.1, 0.3}, {0.02, 0.05}}};
    const std::array<double, 6> ys{0.0, 0.03, 0.19, 0.5, 0.51, 1.0};
    constexpr int m = 200000;
    double worst = 0.0;
    for (const auto& [mu, eps] : cases) {
        const auto params = k1::Kernel1DParams::make(mu, eps);
        for (double y : ys) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += k1::k1_density(params, (i + 0.5) / m, y);
            worst = std::max(worst, std::abs(acc / m - 1.0));
        }
    }
    return result("k1 density integrates to one", worst <= 2e-3, fmt("max |integral - 1| = %.3g", worst));
}

PropertyResult k1_adjoint_duality() {
    // <Kp, f> integrated exactly piece by piece (Kp is piecewise constant, f cubic)
    // against sum_j w_j K*f(y_j).
    const auto f = [](double x) { return x * x * x - 0.5 * x + 0.3; };
    double worst = 0.0;
    for (int variant = 0; variant < 2; ++variant) {
        k1::GridDensity p = k1::GridDensity::uniform(257);
        const double centre = variant == 0 ? 0.6 : 0.1;
        const double eps = variant == 0 ? 0.05 : 0.3;
        for (int j = 0; j < p.size(); ++j) p.log_weights(j) = -40.0 * (p.grid(j) - centre) * (p.grid(j) - centre);
        const Vector w = p.weights();
        const auto params = k1::Kernel1DParams::make(p.mean(), eps);

        std::vector<double> cuts(p.grid.data(), p.grid.data() + p.size());
        for (double c : {params.mu, params.mu - params.eps, params.mu + params.eps}) {
            if (c > 0.0 && c < 1.0) cuts.push_back(c);
        }
        std::sort(cuts.begin(), cuts.end());
        static const std::array<double, 3> gl_x{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
        static const std::array<double, 3> gl_w{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        double lhs = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double a = cuts[i], b = cuts[i + 1];
            if (!(b > a)) continue;
            const double kp = k1::k1_kp(p, params, 0.5 * (a + b));
            double piece = 0.0;
            for (int q = 0; q < 3; ++q) piece += gl_w[static_cast<std::size_t>(q)] * f(0.5 * (a + b) + 0.5 * (b - a) * gl_x[static_cast<std::size_t>(q)]);
            lhs += kp * 0.5 * (b - a) * piece;
        }
        double rhs = 0.0;
        for (int j = 0; j < p.size(); ++j) rhs += w(j) * k1::k1_adjoint(f, params, p.grid(j));
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return result("k1 adjoint duality <Kp,f> = <p,K*f>", worst <= 1e-9, fmt("max |difference| = %.3g", worst));
}

PropertyResult k1_unbiasedness(long draws, int points, std::uint64_t seed) {
    const std::string name = "k1 estimator unbiased for K*loss";
    Rng rng = make_stream(seed, 1, StreamTag::verify);
    k1::GridDensity p = k1::GridDensity::uniform(512);
    for (int j = 0; j < p.size(); ++j) p.log_weights(j) = -4.0 * (p.grid(j) - 0.6) * (p.grid(j) - 0.6);
    const Vector w = p.weights();
    const auto params = k1::Kernel1DParams::make(p.mean(), 0.05);
    const auto loss = [](double x) { return std::abs(x - 0.3); };
    const int m = p.size();

    std::vector<int> idx;
    for (int k = 0; k < points; ++k) idx.push_back(static_cast<int>(std::lround((k + 0.5) / points * (m - 1))));
    const auto nearest = [&](double y) { return static_cast<int>(std::lround(y * (m - 1))); };
    if (points >= 2) {
        idx[0] = nearest(params.mu - 0.5 * params.eps);
        idx[1] = nearest(params.mu + 0.5 * params.eps);
    }
    std::vector<double> exact;
    for (int j : idx) exact.push_back(k1::k1_adjoint(loss, params, p.grid(j)));

    std::vector<Stat> stats(idx.size());
    for (long d = 0; d < draws; ++d) {
        const double x = k1::k1_sample(p, params, rng);
        double kp = 0.0;
        for (int j = 0; j < m; ++j) kp += w(j) * k1::k1_density(params, x, p.grid(j));
        if (!(kp > 0.0)) return result(name, false, "Kp(x_t) <= 0 at a sampled point");
        const double scale = loss(x) / kp;
        for (std::size_t k = 0; k < idx.size(); ++k) stats[k].add(scale * k1::k1_density(params, x, p.grid(idx[k])));
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        worst = std::max(worst, std::abs(stats[k].mean - exact[k]) / std::max(stats[k].se(), 1e-300));
    }
    return result(name, worst <= 3.0, fmt("max |mean - K*loss| / se = %.3f over %.0f points", worst, idx.size()));
}

// ---------------------------------------------------------------- kernel_hd

PropertyResult hd_kernel_normalization() {
    KernelParams kp;
    kp.lambda = 0.3;
    kp.sigma2 = 0.5;
    Matrix cov(2, 2);
    cov << 0.04, 0.01, 0.01, 0.02;
    Vector mean(2);
    mean << 0.4, 0.6;
    const GaussianCore core = gaussian_core(mean, cov, kp);
    const double sd = std::sqrt(kp.sigma2 * kp.lambda * cov.diagonal().maxCoeff());
    double worst = 0.0;
    for (const auto& yv : {std::array<double, 2>{0.5, 0.5}, std::array<double, 2>{-1.0, 2.0}}) {
        Vector y(2);
        y << yv[0], yv[1];
        const Vector centre = kp.lambda * y + (1.0 - kp.lambda) * mean;
        constexpr int r = 400;
        const double half = 9.0 * sd;
        const double h = 2.0 * half / r;
        Matrix xs(2, r * r);
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i) {
                xs(0, i + r * j) = centre(0) - half + (i + 0.5) * h;
                xs(1, i + r * j) = centre(1) - half + (j + 0.5) * h;
            }
        double acc = 0.0;
        for (int c = 0; c < xs.cols(); ++c) acc += kernel_density(core, kp.lambda, xs.col(c), y);
        worst = std::max(worst, std::abs(acc * h * h - 1.0));
    }
    return result("hd kernel density integrates to one", worst <= 1e-4, fmt("max |integral - 1| = %.3g", worst));
}

PropertyResult hd_unbiasedness(long draws, int points, std::uint64_t seed) {
    const std::string name = "hd estimator unbiased for K*loss (grid oracle)";
    Rng rng = make_stream(seed, 2, StreamTag::verify);
    constexpr int k = 16;
    Matrix nodes(2, k * k);
    Vector w(k * k);
    Vector peak(2);
    peak << 0.6, 0.4;
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
            const int idx = i + k * j;
            nodes(0, idx) = (i + 0.5) / k;
            nodes(1, idx) = (j + 0.5) / k;
            w(idx) = std::exp(-3.0 * (nodes.col(idx) - peak).squaredNorm());
        }
    w /= w.sum();
    const Vector mu = nodes * w;
    const Matrix centred = nodes.colwise() - mu;
    const Matrix cov = centred * w.asDiagonal() * centred.transpose();
    KernelParams kp;
    kp.lambda = 0.3;
    kp.sigma2 = 0.5;
    const double lam = kp.lambda;
    const GaussianCore core = gaussian_core(mu, cov, kp);

    Vector a(2);
    a << 0.3, 0.7;
    const auto loss = [&](const Vector& x) { return 1.0 - std::exp(-(x - a).squaredNorm()); };
    // E exp(-|v|^2) for v ~ N(m, S) is det(I + 2S)^{-1/2} exp(-m^T (I + 2S)^{-1} m).
    const Matrix S = (1.0 - lam) * (1.0 - lam) * core.covariance();
    const Matrix M = Matrix::Identity(2, 2) + 2.0 * S;
    const Eigen::LLT<Matrix> mllt(M);
    const auto adjoint = [&](const Vector& y) {
        const Vector m = lam * y + (1.0 - lam) * mu - a;
        return 1.0 - std::exp(-m.dot(mllt.solve(m))) / std::sqrt(M.determinant());
    };

    std::vector<int> idx;
    for (int q = 0; q < points; ++q) idx.push_back(static_cast<int>((static_cast<long>(q) * 97 + 13) % (k * k)));
    std::vector<double> exact;
    for (int j : idx) exact.push_back(adjoint(nodes.col(j)));
    std::vector<Stat> stats(idx.size());
    for (long d = 0; d < draws; ++d) {
        const Vector X = nodes.col(draw_index(w, rng));
        const Vector x = lam * X + (1.0 - lam) * core.sample(rng);
        const Vector logk = log_kernel_density_columns(core, lam, x, nodes);
        const double log_u = log_sum_weighted(logk, w);
        const double l = loss(x);
        for (std::size_t q = 0; q < idx.size(); ++q) stats[q].add(l * std::exp(logk(idx[q]) - log_u));
    }
    double worst = 0.0;
    for (std::size_t q = 0; q < idx.size(); ++q) {
        worst = std::max(worst, std::abs(stats[q].mean - exact[q]) / std::max(stats[q].se(), 1e-300));
    }
    return result(name, worst <= 3.0, fmt("max |mean - K*loss| / se = %.3f over %.0f points", worst, idx.size()));
}

PropertyResult gaussian_core_fixed_point(long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 3, StreamTag::verify);
    const double lam = 0.5;
    const double sz = std::sqrt(1.0 / 3.0);
    std::array<Stat, 4> st;
    for (long d = 0; d < draws; ++d) {
        const double z = sz * standard_normal(rng);
        const double x = standard_normal(rng);
        const double v = (1.0 - lam) * z + lam * x;
        double pw = 1.0;
        for (int k = 0; k < 4; ++k) {
            pw *= v;
            st[static_cast<std::size_t>(k)].add(pw);
        }
    }
    const std::array<double, 4> exact{0.0, 1.0 / 3.0, 0.0, 3.0 / 9.0};
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(st[k].mean - exact[k]) / st[k].se());
    return result("Gaussian core is a fixed point (four moments)", worst <= 3.0, fmt("max |moment error| / se = %.3f", worst));
}

PropertyResult core_series_uniform(long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 4, StreamTag::verify);
    const auto rademacher = [](Rng& r) {
        Vector v(1);
        v(0) = uniform01(r) < 0.5 ? -1.0 : 1.0;
        return v;
    };
    std::vector<double> z(static_cast<std::size_t>(draws));
    for (auto& v : z) v = core_series_sample(rademacher, 0.5, 1e-6, 2.0, rng)(0);
    std::sort(z.begin(), z.end());
    double ks = 0.0;
    const double n = static_cast<double>(draws);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double cdf = std::clamp(0.5 * (z[i] + 1.0), 0.0, 1.0);
        ks = std::max({ks, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    return result("series core of Rademacher is uniform on [-1,1]", ks < 0.01, fmt("KS distance = %.4f", ks));
}

PropertyResult core_series_fixed_point(long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 5, StreamTag::verify);
    const double lam = 0.3;
    const auto normal = [](Rng& r) {
        Vector v(1);
        v(0) = standard_normal(r);
        return v;
    };
    // Gaussian X has unbounded support; 12 standard deviations stands in for D.
    std::array<Stat, 4> sz, sw;
    for (long d = 0; d < draws; ++d) {
        const double z = core_series_sample(normal, lam, 1e-6, 12.0, rng)(0);
        const double z2 = core_series_sample(normal, lam, 1e-6, 12.0, rng)(0);
        const double w = (1.0 - lam) * z2 + lam * standard_normal(rng);
        double pz = 1.0, pw = 1.0;
        for (std::size_t k = 0; k < 4; ++k) {
            pz *= z;
            pw *= w;
            sz[k].add(pz);
            sw[k].add(pw);
        }
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double se = std::sqrt(sz[k].se() * sz[k].se() + sw[k].se() * sw[k].se());
        worst = std::max(worst, std::abs(sz[k].mean - sw[k].mean) / se);
    }
    const double var_z = sz[1].mean - sz[0].mean * sz[0].mean;
    const double var_target = lam / (2.0 - lam);
    const double var_dev = std::abs(sz[1].mean - var_target) / sz[1].se();
    const bool pass = worst <= 3.0 && var_dev <= 3.0;
    return result("series core fixed point and variance", pass,
                  fmt("max moment gap / se = %.3f, Var(Z) = %.5f (target %.5f)", worst, var_z, var_target));
}

PropertyResult convex_domination(int functions, long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 6, StreamTag::verify);
    const long T = 10000;
    const double lam = 0.25;
    const KernelParams kp = KernelParams::theory(2, static_cast<double>(T), lam);
    // p: N((0.5, 0.5), 0.2^2 I) truncated to the unit square; moments by quadrature.
    const double s = 0.2;
    Vector m0(2);
    m0 << 0.5, 0.5;
    constexpr int r = 400;
    Vector mu = Vector::Zero(2);
    Matrix second = Matrix::Zero(2, 2);
    double mass = 0.0;
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i) {
            Vector y(2);
            y << (i + 0.5) / r, (j + 0.5) / r;
            const double wgt = std::exp(-(y - m0).squaredNorm() / (2.0 * s * s));
            mass += wgt;
            mu += wgt * y;
            second += wgt * y * y.transpose();
        }
    mu /= mass;
    const Matrix cov = second / mass - mu * mu.transpose();
    const GaussianCore core = gaussian_core(mu, cov, kp);

    Matrix cs(2, draws), ks(2, draws);
    for (long d = 0; d < draws; ++d) {
        cs.col(d) = core.sample(rng);
        Vector X(2);
        do {
            X = m0 + s * gaussian_vector(2, rng);
        } while (X.minCoeff() < 0.0 || X.maxCoeff() > 1.0);
        ks.col(d) = lam * X + (1.0 - lam) * core.sample(rng);
    }
    const double sd_c = std::sqrt(core.covariance().trace());
    int failures = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < functions; ++q) {
        const ConvexPiecewise f = random_convex(mu, sd_c, s, 10.0, rng);
        Stat a, b;
        for (long d = 0; d < draws; ++d) {
            a.add(f(cs.col(d)));
            b.add(f(ks.col(d)));
        }
        const double slack = 1.0 / (static_cast<double>(T) * T) + 3.0 * std::sqrt(a.se() * a.se() + b.se() * b.se());
        const double gap = a.mean - b.mean - slack;
        worst = std::max(worst, gap);
        if (gap > 0.0) ++failures;
    }
    return result("c[p] convexly dominated by K[p]p", failures == 0,
                  fmt("%.0f of %.0f functions violate; max excess %.3g", failures, functions, worst));
}

PropertyResult ball_domination(int functions, long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 7, StreamTag::verify);
    const double radius = 1.0 / (80.0 * std::numbers::e);
    // Standard normal truncated to [-a, a]^2, rescaled to unit variance per axis.
    const double a = 1.5;
    const double z = 2.0 * normal_cdf(a) - 1.0;
    const double var = 1.0 - 2.0 * a * normal_pdf(a) / z;
    const double scale = 1.0 / std::sqrt(var);
    Matrix rs(2, draws), ps(2, draws);
    for (long d = 0; d < draws; ++d) {
        rs.col(d) = radius * uniform_in_ball(2, rng);
        Vector X(2);
        do {
            X = gaussian_vector(2, rng);
        } while (X.cwiseAbs().maxCoeff() > a);
        ps.col(d) = scale * X;
    }
    int failures = 0;
    double worst = -std::numeric_limits<double>::infinity();
    const Vector origin = Vector::Zero(2);
    for (int q = 0; q < functions; ++q) {
        const ConvexPiecewise f = random_convex(origin, 0.1 * radius, 1.0, 10.0, rng);
        Stat sr, sp;
        for (long d = 0; d < draws; ++d) {
            sr.add(f(rs.col(d)));
            sp.add(f(ps.col(d)));
        }
        const double gap = sr.mean - sp.mean - 3.0 * std::sqrt(sr.se() * sr.se() + sp.se() * sp.se());
        worst = std::max(worst, gap);
        if (gap > 0.0) ++failures;
    }
    return result("small ball convexly dominated by isotropic p", failures == 0,
                  fmt("%.0f of %.0f functions violate; max excess %.3g", failures, functions, worst));
}

PropertyResult smoothness_bounds(long pairs, std::uint64_t seed) {
    Rng rng = make_stream(seed, 8, StreamTag::verify);
    const int n = 2;
    const long T = 20000;
    const AlgoParams P = AlgoParams::theory(n, T);
    const KernelParams kp = P.kernel();
    const double lam = kp.lambda;
    // Centred measure keeps lambda y and the core offsets representable next to mu = 0.
    const CentredGrid g = centred_grid();
    const Vector mu = Vector::Zero(n);
    const GaussianCore core = gaussian_core(mu, g.cov, kp);
    const Matrix half = Eigen::LLT<Matrix>(g.cov).matrixL();
    const double r1 = P.omega_radius();
    const double r2 = 10.0 * n * P.alpha;
    const double t2 = static_cast<double>(T) * T;
    const Matrix core_prec = core.covariance().inverse();
    Eigen::SelfAdjointEigenSolver<Matrix> es(half.transpose() * core_prec * half, Eigen::EigenvaluesOnly);
    const double grad_unit = lam / (1.0 - lam) * std::sqrt(es.eigenvalues().maxCoeff());

    double max_value = 0.0, max_grad = 0.0, max_fd_err = 0.0;
    for (long q = 0; q < pairs; ++q) {
        const Vector x = mu + half * (r1 * uniform_in_ball(n, rng));
        const Vector y = mu + half * (r2 * uniform_in_ball(n, rng));
        const Vector logk = log_kernel_density_columns(core, lam, x, g.nodes);
        // Kp(x) underflows at the edge of Omega, so the ratio is formed in log space.
        const GaussianBump bump = GaussianBump::from_log_weight(-log_sum_weighted(logk, g.w), x, core, lam, 1.0);
        const double v = bump(y);
        const Vector grad = bump.gradient(y);
        const double gnorm = std::sqrt(grad.dot(g.cov * grad));
        Vector fd(n);
        for (int i = 0; i < n; ++i) {
            const double h = 0.5 * r2 * std::sqrt(g.cov(i, i));
            Vector yp = y, ym = y;
            yp(i) += h;
            ym(i) -= h;
            fd(i) = (bump(yp) - bump(ym)) / (2.0 * h);
        }
        const Vector diff = fd - grad;
        const double err = std::sqrt(diff.dot(g.cov * diff)) / std::max(gnorm, 1e-9 * v * grad_unit);
        max_value = std::max(max_value, v);
        max_grad = std::max(max_grad, gnorm);
        max_fd_err = std::max(max_fd_err, err);
    }
    const bool pass = max_value <= std::numbers::e && max_grad <= t2 && max_fd_err <= 1e-4;
    return result("bump bounded by e, Cov-gradient by T^2", pass,
                  fmt("max value %.6f, max ||grad||_Cov %.3g, max finite-difference rel err %.2g", max_value, max_grad,
                      max_fd_err));
}

// ---------------------------------------------------------------- sampler

PropertyResult sampler_uniform_square(long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 9, StreamTag::verify);
    FocusRegion region{unit_cube(2), {}};
    const Matrix s = sample_p(region, Potential{}, static_cast<int>(draws), rng);
    const Moments m = moments(s);
    double worst_mean = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double se = batch_means_stderr(s.row(i).transpose());
        worst_mean = std::max(worst_mean, std::abs(m.mean(i) - 0.5) / se);
    }
    const double target = 1.0 / 12.0;
    const double cov_err = std::max({std::abs(m.covariance(0, 0) / target - 1.0), std::abs(m.covariance(1, 1) / target - 1.0),
                                     std::abs(m.covariance(0, 1) / target)});
    return result("hit-and-run uniform moments on the unit square", worst_mean <= 3.0 && cov_err <= 0.05,
                  fmt("max |mean error| / se = %.3f, max relative covariance error = %.4f", worst_mean, cov_err));
}

PropertyResult sampler_truncated_gaussian(long draws, std::uint64_t seed) {
    Rng rng = make_stream(seed, 10, StreamTag::verify);
    Vector lo(2), hi(2);
    lo << -3.0, -1.0;
    hi << 3.0, 2.0;
    FocusRegion region{Box::axis_aligned(lo, hi), {}};
    const Potential q = [](const Vector& y) { return 0.5 * y.squaredNorm(); };
    const Matrix s = sample_p(region, q, static_cast<int>(draws), rng);
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double a = lo(i), b = hi(i);
        const double z = normal_cdf(b) - normal_cdf(a);
        const double mean = (normal_pdf(a) - normal_pdf(b)) / z;
        const double var = 1.0 + (a * normal_pdf(a) - b * normal_pdf(b)) / z - mean * mean;
        const Vector xs = s.row(i).transpose();
        const Vector dev2 = (xs.array() - mean).square().matrix();
        worst = std::max(worst, std::abs(xs.mean() - mean) / batch_means_stderr(xs));
        worst = std::max(worst, std::abs(dev2.mean() - var) / batch_means_stderr(dev2));
    }
    return result("hit-and-run matches truncated Gaussian moments", worst <= 3.0, fmt("max |error| / se = %.3f", worst));
}

PropertyResult sampler_vs_grid(int densities, int samples, std::uint64_t seed) {
    Rng rng = make_stream(seed, 11, StreamTag::verify);
    int failures = 0;
    double worst = 0.0;
    for (int d = 0; d < densities; ++d) {
        FocusRegion region{unit_cube(2), {}};
        if (d % 2 == 1) {
            Vector centre(2);
            centre << 0.3 + 0.4 * uniform01(rng), 0.3 + 0.4 * uniform01(rng);
            const double th = std::numbers::pi * uniform01(rng);
            Matrix rot(2, 2);
            rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
            Vector ev(2);
            ev << std::pow(0.05 + 0.1 * uniform01(rng), 2), std::pow(0.05 + 0.1 * uniform01(rng), 2);
            region.cuts.push_back(box_from_moments(centre, rot * ev.asDiagonal() * rot.transpose(), 2.0));
        }
        const double lam = 0.25;
        const int count = 1 + static_cast<int>(50.0 * uniform01(rng));
        const double total_height = 1.0 + 3.0 * uniform01(rng);
        BumpSum sum(2);
        for (int b = 0; b < count; ++b) {
            const double spread = 0.3 + 0.7 * uniform01(rng);
            const double core_sd = spread * lam / (1.0 - lam);
            Vector core_mean(2);
            core_mean << uniform01(rng), uniform01(rng);
            const GaussianCore core(core_mean, core_sd * core_sd * Matrix::Identity(2, 2));
            Vector peak(2);
            peak << 0.5, 0.5;
            peak += (0.5 + 1.5 * uniform01(rng)) * unit_sphere(2, rng);
            const Vector x_t = lam * peak + (1.0 - lam) * core_mean;
            const GaussianBump unit(1.0, x_t, core, lam, 1.0);
            sum.add(GaussianBump(total_height / count / unit.peak_value(), x_t, core, lam, 1.0));
        }
        const Potential q = [&sum](const Vector& y) { return sum.eval(y, true); };
        const Moments exact = grid_oracle(q, region, 512).moments();
        const Matrix s = sample_p(region, q, samples, rng);
        const Vector mean = s.rowwise().mean();
        const Matrix c = s.colwise() - mean;
        for (int i = 0; i < 2; ++i) {
            const Vector xi = s.row(i).transpose();
            const double z = std::abs(mean(i) - exact.mean(i)) / batch_means_stderr(xi);
            worst = std::max(worst, z);
            if (z > 3.0) ++failures;
            for (int j = i; j < 2; ++j) {
                const Vector prod = (c.row(i).array() * c.row(j).array()).matrix().transpose();
                const double zc = std::abs(prod.mean() - exact.covariance(i, j)) / batch_means_stderr(prod);
                worst = std::max(worst, zc);
                if (zc > 3.0) ++failures;
            }
        }
    }
    return result("hit-and-run moments match the grid oracle", failures == 0,
                  fmt("%.0f of %.0f comparisons beyond 3 se; max |error| / se = %.3f", failures, 5.0 * densities, worst));
}

PropertyResult sampler_determinism(std::uint64_t seed) {
    FocusRegion region{unit_cube(2), {}};
    const Potential q = [](const Vector& y) { return 3.0 * y(0) + y.squaredNorm(); };
    Rng a = make_stream(seed, 12, StreamTag::sampler);
    Rng b = make_stream(seed, 12, StreamTag::sampler);
    const Matrix sa = sample_p(region, q, 200, a);
    const Matrix sb = sample_p(region, q, 200, b);
    const bool same = sa.size() == sb.size() && std::equal(sa.data(), sa.data() + sa.size(), sb.data());
    return result("identical seeds give identical samples", same, same ? "bit-identical" : "samples differ");
}

// ---------------------------------------------------------------- engine

PropertyResult telescoping(int instances, std::uint64_t seed) {
    Rng rng = make_stream(seed, 13, StreamTag::verify);
    constexpr int m = 50;
    constexpr int tau = 30;
    long checked = 0, violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < instances; ++inst) {
        std::vector<std::vector<char>> F(tau + 1, std::vector<char>(m, 1));
        for (int t = 1; t < tau; ++t) {
            F[static_cast<std::size_t>(t)] = F[static_cast<std::size_t>(t - 1)];
            if (uniform01(rng) < 0.3) {
                auto& cur = F[static_cast<std::size_t>(t)];
                const int alive = static_cast<int>(std::count(cur.begin(), cur.end(), 1));
                for (int i = 0; i < m && alive > 5; ++i) {
                    if (cur[static_cast<std::size_t>(i)] && uniform01(rng) < 0.2) cur[static_cast<std::size_t>(i)] = 0;
                }
                if (std::count(cur.begin(), cur.end(), 1) < 5) cur = F[static_cast<std::size_t>(t - 1)];
            }
        }
        // F[t - 1] holds F_t for t = 1..tau.
        std::vector<Vector> logp(tau + 2, Vector::Constant(m, -std::log(static_cast<double>(m))));
        std::vector<Vector> f(tau + 1, Vector::Zero(m));
        std::vector<double> eta(tau + 1, 0.0);
        double lhs_common = 0.0, second = 0.0;
        for (int t = 1; t <= tau; ++t) {
            Vector& ft = f[static_cast<std::size_t>(t)];
            for (int i = 0; i < m; ++i) ft(i) = 3.0 * uniform01(rng);
            eta[static_cast<std::size_t>(t)] = 0.01 + 1.99 * uniform01(rng);
            const Vector& lp = logp[static_cast<std::size_t>(t)];
            const Vector p = exp_exact(lp.array());
            lhs_common += p.dot(ft);
            second += eta[static_cast<std::size_t>(t)] * p.dot(ft.cwiseProduct(ft));
            Vector next(m);
            const auto& Ft = F[static_cast<std::size_t>(t - 1)];
            double mx = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                next(i) = Ft[static_cast<std::size_t>(i)] ? lp(i) - eta[static_cast<std::size_t>(t)] * ft(i)
                                                          : -std::numeric_limits<double>::infinity();
                mx = std::max(mx, next(i));
            }
            double z = 0.0;
            for (int i = 0; i < m; ++i) z += std::exp(next(i) - mx);
            next.array() -= mx + std::log(z);
            logp[static_cast<std::size_t>(t + 1)] = next;
        }
        for (int x = 0; x < m; ++x) {
            if (!F[tau - 1][static_cast<std::size_t>(x)]) continue;
            double lhs = lhs_common, rhs = second;
            for (int t = 1; t <= tau; ++t) {
                lhs -= f[static_cast<std::size_t>(t)](x);
                rhs += (logp[static_cast<std::size_t>(t + 1)](x) - logp[static_cast<std::size_t>(t)](x)) /
                       eta[static_cast<std::size_t>(t)];
            }
            ++checked;
            worst = std::max(worst, lhs - rhs);
            if (lhs > rhs + 1e-9) ++violations;
        }
    }
    return result("exponential-weights telescoping inequality", violations == 0,
                  fmt("%.0f violations over %.0f (instance, x) pairs; max lhs - rhs = %.3g", violations, checked, worst));
}

PropertyResult omega_coverage(long draws, std::uint64_t seed, double* fraction_out) {
    Rng rng = make_stream(seed, 14, StreamTag::verify);
    const int n = 2;
    const AlgoParams P = AlgoParams::theory(n, 20000);
    const KernelParams kp = P.kernel();
    const CentredGrid g = centred_grid();
    const Vector mu = Vector::Zero(n);
    const GaussianCore core = gaussian_core(mu, g.cov, kp);
    Vector lo = Vector::Constant(n, -1.0), hi = Vector::Constant(n, 1.0);
    const ConvexBody K = Box::axis_aligned(lo, hi);
    const Ellipsoid omega{mu, g.cov, P.omega_radius()};
    long outside = 0;
    for (long d = 0; d < draws; ++d) {
        const Vector X = g.nodes.col(draw_index(g.w, rng));
        const Vector x = kp.lambda * X + (1.0 - kp.lambda) * core.sample(rng);
        if (!(body_contains(K, x) && omega.contains(x))) ++outside;
    }
    const double frac = static_cast<double>(outside) / static_cast<double>(draws);
    if (fraction_out) *fraction_out = frac;
    return result("kernel draws stay in Omega (theory scaling)", frac <= 0.01, fmt("fraction outside = %.5f", frac));
}

namespace {

AlgoParams cutting_params(long T) {
    ParamOverrides ov;
    ov.alpha = 0.5;
    return AlgoParams::make(Preset::practical, 2, T, ov);
}

}  // namespace

PropertyResult eta_schedule(std::uint64_t seed) {
    Rng rng = make_stream(seed, 15, StreamTag::verify);
    const AlgoParams P = cutting_params(2);
    EngineState state = init_state(unit_cube(2), P);
    double worst = 0.0;
    int cuts = 0;
    for (int k = 1; k <= 12; ++k) {
        if (update_focus(state, rng)) ++cuts;
        const double expected = P.eta1 * std::pow(1.0 + P.gamma, state.N);
        worst = std::max(worst, std::abs(state.eta / expected - 1.0));
    }
    const bool warned = std::any_of(state.diagnostics.begin(), state.diagnostics.end(),
                                    [](const std::string& s) { return s.find("exceeds") != std::string::npos; });
    const AlgoParams th = AlgoParams::theory(2, 20000);
    const double ratio = std::pow(1.0 + th.gamma, std::floor(th.cut_budget()));
    const bool pass = worst <= 1e-13 && cuts == state.N && cuts > P.cut_budget() && warned && ratio <= std::numbers::e;
    return result("eta_t = eta_1 (1 + gamma)^N, budget diagnostic", pass,
                  fmt("max relative error %.2g, cuts %.0f, theory (1+gamma)^budget = %.4f", worst, cuts, ratio));
}

PropertyResult monotone_focus(std::uint64_t seed) {
    Rng rng = make_stream(seed, 16, StreamTag::verify);
    Vector opt(2);
    opt << 0.3, 0.7;
    OraclePtr env = make_quadratic(unit_cube(2), opt);
    EngineOptions opts;
    opts.enable_restart = false;
    EngineState state = init_state(unit_cube(2), cutting_params(40), opts);
    bool ok = true;
    for (int t = 0; t < 40 && ok; ++t) {
        const FocusRegion before = state.focus;
        engine_step(state, *env, rng);
        if (state.focus.cuts.size() < before.cuts.size()) ok = false;
        for (std::size_t i = 0; ok && i < before.cuts.size(); ++i) {
            const auto& a = before.cuts[i];
            const auto& b = state.focus.cuts[i];
            const Vector ma = std::visit([](const auto& c) { return c.mean; }, a);
            const Vector mb = std::visit([](const auto& c) { return c.mean; }, b);
            if (ma != mb) ok = false;
        }
        for (int i = 0; ok && i < state.grid.size(); ++i) {
            if (state.grid.in_focus[static_cast<std::size_t>(i)] && !before.contains(state.grid.nodes.col(i), 1e-9)) ok = false;
        }
    }
    return result("focus regions only shrink", ok && state.N > 0, fmt("cuts after 40 rounds: %.0f", state.N));
}

PropertyResult q_normalization(std::uint64_t seed) {
    Rng rng = make_stream(seed, 17, StreamTag::verify);
    Vector opt(2);
    opt << 0.3, 0.7;
    OraclePtr env = make_quadratic(unit_cube(2), opt);
    double worst = 0.0;
    {
        ParamOverrides ov;
        ov.eta1 = 0.5;
        EngineState state = init_state(unit_cube(2), AlgoParams::make(Preset::practical, 2, 200, ov));
        for (int t = 0; t < 60; ++t) {
            engine_step(state, *env, rng);
            double mn = std::numeric_limits<double>::infinity();
            for (int i = 0; i < state.grid.size(); ++i)
                if (state.grid.in_focus[static_cast<std::size_t>(i)]) mn = std::min(mn, state.grid.q(i));
            worst = std::max(worst, std::abs(mn));
        }
    }
    {
        EngineOptions opts;
        opts.mode = DensityMode::analytic;
        opts.moment_samples = 64;
        opts.volume_samples = 256;
        ParamOverrides ov;
        ov.eta1 = 0.5;
        EngineState state = init_state(unit_cube(2), AlgoParams::make(Preset::practical, 2, 200, ov), opts, &rng);
        for (int t = 0; t < 8; ++t) {
            engine_step(state, *env, rng);
            const double offset = std::get<AnalyticDensity>(state.density).offset;
            double mn = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < state.p_samples.cols(); ++i)
                mn = std::min(mn, state.bump_sum.eval(state.p_samples.col(i), true) - offset);
            worst = std::max(worst, std::abs(mn));
        }
    }
    return result("Q normalised to min 0 over the reference set", worst <= 1e-9, fmt("max |min Q| = %.3g", worst));
}

PropertyResult omega_injection(std::uint64_t seed) {
    Rng rng = make_stream(seed, 18, StreamTag::verify);
    Vector opt(2);
    opt << 0.3, 0.7;
    OraclePtr env = make_quadratic(unit_cube(2), opt);
    EngineState state = init_state(unit_cube(2), AlgoParams::theory(2, 1000));
    const Vector q_before = state.grid.q;
    Vector forced(2);
    forced << 0.95, 0.05;
    const RoundRecord rec = engine_step(state, *env, rng, forced);
    const bool zero = state.bumps.back().weight() == 0.0 && state.grid.q == q_before;
    const bool pass = !rec.in_Omega && rec.in_K && rec.loss > 0.0 && zero;
    return result("play outside Omega adds a zero bump", pass,
                  fmt("in_Omega %.0f, loss %.3f, bump weight %.3g", rec.in_Omega, rec.loss, state.bumps.back().weight()));
}

PropertyResult grid_tilt_sign(std::uint64_t seed) {
    Rng rng = make_stream(seed, 19, StreamTag::verify);
    Vector dir(2);
    dir << 1.0, 0.5;
    OraclePtr env = make_linear(unit_cube(2), dir);
    ParamOverrides ov;
    // Small enough that eta * bump stays below one and the update is first order.
    ov.eta1 = 0.01;
    ov.lambda = 0.25;
    const AlgoParams P = AlgoParams::make(Preset::practical, 2, 100, ov);
    EngineOptions opts;
    opts.enable_focus = false;
    opts.enable_restart = false;
    opts.grid_nodes_2d = 33;
    const EngineState fresh = init_state(unit_cube(2), P, opts);
    Stat shift;
    for (int trial = 0; trial < 2000; ++trial) {
        EngineState state = fresh;
        engine_step(state, *env, rng);
        shift.add((state.moments.mean - fresh.moments.mean).dot(dir));
    }
    const bool pass = shift.mean < 0.0 && std::abs(shift.mean) > 3.0 * shift.se();
    return result("one grid step tilts the mean against the loss gradient", pass,
                  fmt("mean shift along gradient %.3g (se %.2g)", shift.mean, shift.se()));
}

PropertyResult round_count(std::uint64_t seed) {
    Rng rng = make_stream(seed, 20, StreamTag::verify);
    Vector xa(2), xb(2);
    xa << 0.2, 0.2;
    xb << 0.8, 0.8;
    const long T = 300;
    OraclePtr env = make_moving_optimum(unit_cube(2), T / 2, xa, xb);
    ParamOverrides ov;
    ov.alpha = 0.5;
    ov.beta = 1e9;
    const RunTrace tr = run(*env, AlgoParams::make(Preset::practical, 2, T, ov), rng);
    bool ok = static_cast<long>(tr.rounds.size()) == T && !tr.aborted;
    for (std::size_t i = 0; ok && i < tr.rounds.size(); ++i) {
        if (tr.rounds[i].t != static_cast<long>(i) + 1) ok = false;
        if (!(tr.rounds[i].loss >= 0.0 && tr.rounds[i].loss <= 1.0)) ok = false;
    }
    ok = ok && !tr.restart_times.empty();
    return result("a run emits exactly T records across restarts", ok,
                  fmt("records %.0f, restarts %.0f", static_cast<double>(tr.rounds.size()), static_cast<double>(tr.restart_times.size())));
}

std::vector<PropertyResult> run_suite(const std::string& suite, const SuiteOptions& o) {
    const auto sz = [&](double base) { return std::max(1L, std::lround(base * o.scale)); };
    const bool all = suite == "all";
    if (!all && suite != "kernel1d" && suite != "kernel_hd" && suite != "sampler" && suite != "engine") {
        throw ConfigError("unknown suite '" + suite + "'");
    }
    std::vector<PropertyResult> out;
    const auto guard = [&](const std::string& name, const auto& fn) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back(result(name, false, std::string("threw: ") + e.what()));
        }
    };
    if (all || suite == "kernel1d") {
        guard("k1 density integrates to one", [] { return k1_normalization(); });
        guard("k1 adjoint duality", [] { return k1_adjoint_duality(); });
        guard("k1 estimator unbiased", [&] { return k1_unbiasedness(sz(200000), 10, o.seed); });
    }
    if (all || suite == "kernel_hd") {
        guard("hd kernel normalisation", [] { return hd_kernel_normalization(); });
        guard("hd estimator unbiased", [&] { return hd_unbiasedness(sz(200000), 10, o.seed); });
        guard("Gaussian core fixed point", [&] { return gaussian_core_fixed_point(sz(100000), o.seed); });
        guard("series core uniform", [&] { return core_series_uniform(sz(100000), o.seed); });
        guard("series core fixed point", [&] { return core_series_fixed_point(sz(100000), o.seed); });
        guard("convex domination", [&] { return convex_domination(200, sz(50000), o.seed); });
        guard("ball domination", [&] { return ball_domination(200, sz(50000), o.seed); });
        guard("smoothness bounds", [&] { return smoothness_bounds(sz(5000), o.seed); });
    }
    if (all || suite == "sampler") {
        guard("sampler uniform square", [&] { return sampler_uniform_square(sz(10000), o.seed); });
        guard("sampler truncated Gaussian", [&] { return sampler_truncated_gaussian(sz(10000), o.seed); });
        guard("sampler vs grid", [&] { return sampler_vs_grid(6, static_cast<int>(sz(4000)), o.seed); });
        guard("sampler determinism", [&] { return sampler_determinism(o.seed); });
    }
    if (all || suite == "engine") {
        guard("telescoping", [&] { return telescoping(100, o.seed); });
        guard("omega coverage", [&] { return omega_coverage(sz(100000), o.seed); });
        guard("eta schedule", [&] { return eta_schedule(o.seed); });
        guard("monotone focus", [&] { return monotone_focus(o.seed); });
        guard("Q normalisation", [&] { return q_normalization(o.seed); });
        guard("Omega injection", [&] { return omega_injection(o.seed); });
        guard("grid tilt sign", [&] { return grid_tilt_sign(o.seed); });
        guard("round count", [&] { return round_count(o.seed); });
    }
    return out;
}

}  // namespace kbco::props
