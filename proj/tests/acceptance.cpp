// One PASS/FAIL line per acceptance criterion. Optional arguments select
// criteria by id (e.g. `acceptance 3 7 10`); the exit code is nonzero when any
// selected criterion fails.

#include "kbco/harness.hpp"
#include "kbco/properties.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace kbco;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Outcome from_props(const std::vector<props::PropertyResult>& rs) {
    Outcome o{true, ""};
    for (const auto& r : rs) {
        o.pass = o.pass && r.pass;
        if (!o.detail.empty()) o.detail += "; ";
        o.detail += r.name + (r.pass ? " ok (" : " FAILED (") + r.detail + ")";
    }
    return o;
}

std::vector<std::uint64_t> seeds_1_to_20() {
    std::vector<std::uint64_t> s(20);
    std::iota(s.begin(), s.end(), 1);
    return s;
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ExperimentConfig one_d_abs() {
    ExperimentConfig c;
    c.algo = "kernel1d";
    c.n = 1;
    c.env.kind = "abs";
    c.env.noise = 0.1;
    c.grid_size = 2048;
    c.seeds = seeds_1_to_20();
    c.traces = false;
    return c;
}

double mean_pseudo_regret(const ExperimentConfig& c, long T) {
    std::vector<double> v;
    for (const auto& r : run_seeds(c, T)) v.push_back(r.report.pseudo_regret);
    return mean(v);
}

double sweep_slope(const ExperimentConfig& c, const std::vector<long>& Ts, std::string& detail) {
    std::vector<double> x, y;
    for (long T : Ts) {
        x.push_back(static_cast<double>(T));
        y.push_back(mean_pseudo_regret(c, T));
        detail += fmt(" T=%.0f:%.1f", x.back(), y.back());
    }
    return fit_loglog(x, y).slope;
}

Outcome c1() {
    const long T = 100000;
    const double m = mean_pseudo_regret(one_d_abs(), T);
    const double bound = 12.0 * std::log(static_cast<double>(T)) * std::sqrt(static_cast<double>(T));
    return {m <= bound, fmt("mean pseudo-regret %.1f, bound %.1f", m, bound)};
}

Outcome c2() {
    const std::vector<long> Ts{1000, 10000, 100000};
    std::string dk, df;
    const double sk = sweep_slope(one_d_abs(), Ts, dk);
    ExperimentConfig f = one_d_abs();
    f.algo = "fkm";
    const double sf = sweep_slope(f, Ts, df);
    const bool pass = sk >= 0.4 && sk <= 0.6 && sf >= sk - 0.05;
    return {pass, fmt("kernel slope %.3f (want [0.4, 0.6]), fkm slope %.3f;", sk, sf) + " kernel" + dk + "; fkm" + df};
}

Outcome c3() {
    return from_props({props::k1_unbiasedness(1000000, 10, 301), props::hd_unbiasedness(1000000, 10, 302)});
}

Outcome c4() {
    return from_props({props::gaussian_core_fixed_point(100000, 401), props::core_series_uniform(100000, 402)});
}

Outcome c5() {
    return from_props({props::convex_domination(200, 50000, 501), props::ball_domination(200, 50000, 502)});
}

Outcome c6() { return from_props({props::smoothness_bounds(20000, 601)}); }

Outcome c7() { return from_props({props::telescoping(100, 701)}); }

ExperimentConfig practical_2d(const std::string& env) {
    ExperimentConfig c;
    c.algo = "kernel_hd";
    c.n = 2;
    c.env.kind = env;
    c.preset = Preset::practical;
    c.seeds = seeds_1_to_20();
    c.traces = false;
    return c;
}

Outcome c8() {
    const long T = 20000;
    const auto quad = run_seeds(practical_2d("quadratic"), T);
    std::vector<long> cps = quad.front().report.checkpoints;
    std::vector<double> avg(cps.size(), 0.0);
    int restart_free = 0;
    for (const auto& r : quad) {
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += r.report.checkpoint_regret[i] / quad.size();
        if (r.trace.restart_times.empty()) ++restart_free;
    }
    const double expo = fit_loglog(std::vector<double>(cps.begin(), cps.end()), avg).slope;
    const bool a = expo <= 0.75 && restart_free >= 18;

    const auto moving = run_seeds(practical_2d("moving_optimum"), T);
    int restarted = 0;
    double cuts = 0.0;
    for (const auto& r : moving) {
        if (!r.trace.restart_times.empty()) ++restarted;
        cuts += r.trace.focus_cuts;
    }
    const bool b = restarted >= 16;

    double frac = 0.0;
    const auto cov = props::omega_coverage(100000, 803, &frac);

    Outcome o;
    o.pass = a && b && cov.pass;
    o.detail = std::string("8a ") + (a ? "pass" : "fail") +
               fmt(": exponent %.3f (want <= 0.75), restart-free %.0f/20; ", expo, restart_free) + "8b " +
               (b ? "pass" : "fail") + fmt(": restarts in %.0f/20 seeds (want >= 16), mean cuts %.2f; ", restarted, cuts / 20.0) +
               "8c " + (cov.pass ? "pass: " : "fail: ") + cov.detail;
    return o;
}

Outcome c9() { return from_props({props::sampler_vs_grid(20, 4000, 901)}); }

std::string csv_of(const ExperimentConfig& c, long T, std::uint64_t seed) {
    std::ostringstream os;
    write_trace_csv(os, run_seed(c, T, seed).trace);
    return os.str();
}

Outcome c10() {
    ExperimentConfig hd = practical_2d("quadratic");
    ExperimentConfig k1 = one_d_abs();
    bool pass = true;
    int compared = 0;
    for (std::uint64_t s : {1ull, 7ull}) {
        pass = pass && csv_of(hd, 2000, s) == csv_of(hd, 2000, s);
        pass = pass && csv_of(k1, 5000, s) == csv_of(k1, 5000, s);
        compared += 2;
    }
    const bool differ = csv_of(k1, 500, 1) != csv_of(k1, 500, 2);
    return {pass && differ, fmt("%.0f repeated seeded runs byte-identical: ", compared) + (pass ? "yes" : "no") +
                                "; different seeds differ: " + (differ ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, c1}, {2, c2}, {3, c3}, {4, c4}, {5, c5}, {6, c6}, {7, c7}, {8, c8}, {9, c9}, {10, c10}};
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

    int failed = 0;
    for (const auto& [id, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s  criterion %d: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
