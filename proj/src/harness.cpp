#include "kbco/harness.hpp"

#include "kbco/kernel1d.hpp"
#include "kbco/properties.hpp"
#include "kbco/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace kbco {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

long to_long(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || v != std::floor(v)) throw ConfigError("");
        return static_cast<long>(v);
    } catch (const std::exception&) {
        throw ConfigError("not an integer: '" + s + "'");
    }
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ConfigError("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + s + "'");
    }
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

Vector or_fill(const std::vector<double>& v, int n, double fill, const char* what) {
    if (v.empty()) return Vector::Constant(n, fill);
    if (static_cast<int>(v.size()) != n) throw ConfigError(std::string(what) + " must have n entries");
    return to_vector(v);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

std::vector<std::uint64_t> seeds_from_json(const json& j) {
    if (j.is_string()) return parse_seeds(j.get<std::string>());
    if (j.is_number_integer()) return {j.get<std::uint64_t>()};
    if (j.is_array()) {
        std::vector<std::uint64_t> out;
        for (const auto& v : j) {
            if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("seeds must be non-negative integers");
            out.push_back(v.get<std::uint64_t>());
        }
        return out;
    }
    throw ConfigError("seeds must be a string, an integer or a list");
}

std::vector<long> longs_from_json(const json& j, const std::string& key) {
    if (j.is_string()) return parse_long_list(j.get<std::string>());
    if (j.is_number()) return {to_long(std::to_string(j.get<double>()))};
    if (j.is_array()) {
        std::vector<long> out;
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(key + " entries must be numbers");
            const double d = v.get<double>();
            if (d != std::floor(d)) throw ConfigError(key + " entries must be integers");
            out.push_back(static_cast<long>(d));
        }
        return out;
    }
    throw ConfigError(key + " must be a number, a string or a list");
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json mean_std(const std::vector<double>& v) {
    if (v.empty()) return json{{"mean", nullptr}, {"std", nullptr}};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
    return json{{"mean", number_or_null(m)}, {"std", number_or_null(s)}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

void write_traces(const std::filesystem::path& dir, const std::vector<SeedResult>& results) {
    std::filesystem::create_directories(dir);
    for (const auto& r : results) {
        std::ostringstream os;
        write_trace_csv(os, r.trace);
        write_file(dir / ("seed_" + std::to_string(r.seed) + ".csv"), os.str());
    }
}

bool any_aborted(const std::vector<SeedResult>& results) {
    return std::any_of(results.begin(), results.end(), [](const SeedResult& r) { return r.trace.aborted; });
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const auto& part : split(text, ',')) {
        if (part.empty()) continue;
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            const long v = to_long(part);
            if (v < 0) throw ConfigError("seeds must be non-negative");
            out.push_back(static_cast<std::uint64_t>(v));
            continue;
        }
        const long a = to_long(trim(part.substr(0, dots)));
        const long b = to_long(trim(part.substr(dots + 2)));
        if (a < 0 || b < a) throw ConfigError("bad seed range '" + part + "'");
        for (long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
    }
    return out;
}

std::vector<long> parse_long_list(const std::string& text) {
    std::vector<long> out;
    for (const auto& part : split(text, ','))
        if (!part.empty()) out.push_back(to_long(part));
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& part : split(text, ','))
        if (!part.empty()) out.push_back(to_double(part));
    return out;
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j,
               {"algo", "n", "T", "preset", "focus_primitive", "density_mode", "seeds", "out", "checkpoints", "env",
                "body", "params", "kernel1d", "fkm", "traces"},
               "config");
    ExperimentConfig c;
    if (j.contains("algo")) c.algo = get<std::string>(j, "algo");
    if (j.contains("n")) c.n = get<int>(j, "n");
    if (j.contains("T")) c.T = longs_from_json(j.at("T"), "T");
    if (j.contains("preset")) c.preset = parse_preset(get<std::string>(j, "preset"));
    if (j.contains("focus_primitive")) c.focus = parse_focus_primitive(get<std::string>(j, "focus_primitive"));
    if (j.contains("density_mode")) c.mode = parse_density_mode(get<std::string>(j, "density_mode"));
    if (j.contains("seeds")) c.seeds = seeds_from_json(j.at("seeds"));
    if (j.contains("out")) c.out = get<std::string>(j, "out");
    if (j.contains("checkpoints")) c.checkpoints = longs_from_json(j.at("checkpoints"), "checkpoints");
    if (j.contains("traces")) c.traces = get<bool>(j, "traces");
    if (j.contains("env")) {
        const json& e = j.at("env");
        check_keys(e, {"kind", "optimum", "direction", "x_a", "x_b", "switch_round", "noise", "corrupt"}, "env");
        if (e.contains("kind")) c.env.kind = get<std::string>(e, "kind");
        if (e.contains("optimum")) c.env.optimum = get<std::vector<double>>(e, "optimum");
        if (e.contains("direction")) c.env.direction = get<std::vector<double>>(e, "direction");
        if (e.contains("x_a")) c.env.x_a = get<std::vector<double>>(e, "x_a");
        if (e.contains("x_b")) c.env.x_b = get<std::vector<double>>(e, "x_b");
        if (e.contains("switch_round")) c.env.switch_round = get<long>(e, "switch_round");
        if (e.contains("noise")) c.env.noise = get<double>(e, "noise");
        if (e.contains("corrupt")) c.env.corrupt = get<double>(e, "corrupt");
    }
    if (j.contains("body")) {
        const json& b = j.at("body");
        check_keys(b, {"kind", "lo", "hi", "center", "radius", "A", "b"}, "body");
        if (b.contains("kind")) c.body.kind = get<std::string>(b, "kind");
        if (b.contains("lo")) c.body.lo = get<std::vector<double>>(b, "lo");
        if (b.contains("hi")) c.body.hi = get<std::vector<double>>(b, "hi");
        if (b.contains("center")) c.body.center = get<std::vector<double>>(b, "center");
        if (b.contains("radius")) c.body.radius = get<double>(b, "radius");
        if (b.contains("A")) c.body.A = get<std::vector<std::vector<double>>>(b, "A");
        if (b.contains("b")) c.body.b = get<std::vector<double>>(b, "b");
    }
    if (j.contains("params")) {
        const json& p = j.at("params");
        check_keys(p, {"lambda", "sigma2", "eta1", "alpha", "gamma", "beta", "eps"}, "params");
        const auto opt = [&](const char* key, std::optional<double>& dst) {
            if (p.contains(key)) dst = get<double>(p, key);
        };
        opt("lambda", c.overrides.lambda);
        opt("sigma2", c.overrides.sigma2);
        opt("eta1", c.overrides.eta1);
        opt("alpha", c.overrides.alpha);
        opt("gamma", c.overrides.gamma);
        opt("beta", c.overrides.beta);
        opt("eps", c.overrides.eps);
    }
    if (j.contains("kernel1d")) {
        const json& k = j.at("kernel1d");
        check_keys(k, {"grid_size", "eps", "eta"}, "kernel1d");
        if (k.contains("grid_size")) c.grid_size = get<int>(k, "grid_size");
        if (k.contains("eps")) c.eps1d = get<double>(k, "eps");
        if (k.contains("eta")) c.eta1d = get<double>(k, "eta");
    }
    if (j.contains("fkm")) {
        const json& f = j.at("fkm");
        check_keys(f, {"delta_scale", "step_scale"}, "fkm");
        if (f.contains("delta_scale")) c.fkm.delta_scale = get<double>(f, "delta_scale");
        if (f.contains("step_scale")) c.fkm.step_scale = get<double>(f, "step_scale");
    }
    return c;
}

void validate_config(const ExperimentConfig& c) {
    if (c.algo != "kernel1d" && c.algo != "kernel_hd" && c.algo != "fkm") throw ConfigError("unknown algo '" + c.algo + "'");
    if (c.n < 1) throw ConfigError("n must be at least 1");
    if (c.algo == "kernel1d" && c.n != 1) throw ConfigError("kernel1d requires n = 1");
    if (c.seeds.empty()) throw ConfigError("seed list is empty");
    if (c.T.empty()) throw ConfigError("no horizon given");
    for (long T : c.T)
        if (T < 0) throw ConfigError("T must be non-negative");
    for (long cp : c.checkpoints)
        if (cp < 1) throw ConfigError("checkpoints must be positive");
    if (c.grid_size < 2) throw ConfigError("grid_size must be at least 2");
    if (c.env.noise < 0.0) throw ConfigError("noise must be non-negative");
    if (c.env.corrupt < 0.0 || c.env.corrupt > 1.0) throw ConfigError("corrupt must lie in [0, 1]");
    const ConvexBody K = make_body(c.body, c.n);
    if (c.algo == "kernel1d") {
        const auto [lo, hi] = bounding_box(K);
        if (lo(0) != 0.0 || hi(0) != 1.0 || !std::holds_alternative<Interval>(K))
            throw ConfigError("kernel1d runs on the interval [0, 1]");
    }
    if (c.algo == "kernel_hd") AlgoParams::make(c.preset, c.n, c.T.front(), c.overrides, c.focus).validate();
    make_environment(c, std::max(2L, c.T.front()), c.seeds.front());
}

ConvexBody make_body(const BodySpec& s, int n) {
    std::string kind = s.kind.empty() ? (n == 1 ? "interval" : "cube") : s.kind;
    ConvexBody K;
    if (kind == "cube") {
        K = unit_cube(n);
    } else if (kind == "interval") {
        if (n != 1) throw ConfigError("interval body requires n = 1");
        Interval iv;
        if (!s.lo.empty()) iv.lo = s.lo.at(0);
        if (!s.hi.empty()) iv.hi = s.hi.at(0);
        K = iv;
    } else if (kind == "box") {
        K = Box::axis_aligned(or_fill(s.lo, n, 0.0, "body.lo"), or_fill(s.hi, n, 1.0, "body.hi"));
    } else if (kind == "ball") {
        K = Ball{or_fill(s.center, n, 0.0, "body.center"), s.radius};
    } else if (kind == "polytope") {
        if (s.A.empty() || s.A.size() != s.b.size()) throw ConfigError("polytope needs matching A rows and b");
        Polytope P;
        P.A.resize(static_cast<Eigen::Index>(s.A.size()), n);
        for (std::size_t i = 0; i < s.A.size(); ++i) {
            if (static_cast<int>(s.A[i].size()) != n) throw ConfigError("polytope rows must have n entries");
            for (int k = 0; k < n; ++k) P.A(static_cast<Eigen::Index>(i), k) = s.A[i][static_cast<std::size_t>(k)];
        }
        P.b = to_vector(s.b);
        K = P;
    } else {
        throw ConfigError("unknown body kind '" + kind + "'");
    }
    try {
        validate_body(K);
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid body: ") + e.what());
    }
    return K;
}

OraclePtr make_environment(const ExperimentConfig& c, long T, std::uint64_t seed) {
    const ConvexBody K = make_body(c.body, c.n);
    OraclePtr env;
    try {
        if (c.env.kind == "linear") {
            env = make_linear(K, or_fill(c.env.direction, c.n, 1.0, "env.direction"));
        } else if (c.env.kind == "quadratic") {
            env = make_quadratic(K, or_fill(c.env.optimum, c.n, 0.3, "env.optimum"));
        } else if (c.env.kind == "abs") {
            env = make_abs(K, or_fill(c.env.optimum, c.n, 0.3, "env.optimum"));
        } else if (c.env.kind == "moving_optimum") {
            const long sw = c.env.switch_round > 0 ? c.env.switch_round : T / 2;
            env = make_moving_optimum(K, sw, or_fill(c.env.x_a, c.n, 0.2, "env.x_a"), or_fill(c.env.x_b, c.n, 0.8, "env.x_b"));
        } else {
            throw ConfigError("unknown env kind '" + c.env.kind + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid environment: ") + e.what());
    }
    if (c.env.noise > 0.0) env = make_stochastic(env, c.env.noise);
    if (c.env.corrupt > 0.0) {
        const std::uint64_t cs = splitmix64(seed ^ (static_cast<std::uint64_t>(StreamTag::corruption) << 56));
        env = make_corrupted(env, c.env.corrupt, T, cs);
    }
    return env;
}

std::vector<long> default_checkpoints(long T) {
    std::vector<long> out;
    if (T < 16) {
        if (T > 0) out.push_back(T);
        return out;
    }
    for (int k = 4; k >= 0; --k) out.push_back(std::max(1L, T >> k));
    out.back() = T;
    return out;
}

SeedResult run_seed(const ExperimentConfig& c, long T, std::uint64_t seed) {
    SeedResult r;
    r.seed = seed;
    OraclePtr env = make_environment(c, T, seed);
    Rng rng = make_stream(seed, 0, StreamTag::learner);
    Rng env_rng = make_stream(seed, 0, StreamTag::environment);
    if (c.algo == "kernel1d") {
        k1::K1RunOptions o;
        o.grid_size = c.grid_size;
        o.eps = c.eps1d;
        o.eta = c.eta1d;
        try {
            r.trace = k1::k1_run(*env, T, o, rng, &env_rng);
        } catch (const Error& e) {
            r.trace.n = 1;
            r.trace.aborted = true;
            r.trace.diagnostics.push_back(std::string("aborted: ") + e.what());
        }
    } else if (c.algo == "fkm") {
        Rng base = make_stream(seed, 0, StreamTag::baseline);
        r.trace = fkm_baseline(*env, T, c.fkm, base, &env_rng);
    } else {
        EngineOptions o;
        o.mode = c.mode;
        r.trace = run(*env, AlgoParams::make(c.preset, c.n, T, c.overrides, c.focus), rng, o, &env_rng);
    }
    std::vector<long> cps = c.checkpoints.empty() ? default_checkpoints(T) : c.checkpoints;
    cps.erase(std::remove_if(cps.begin(), cps.end(), [&](long cp) { return cp > static_cast<long>(r.trace.rounds.size()); }),
              cps.end());
    r.report = regret_report(r.trace, *env, cps);
    r.clipped_fraction = env->total_queries() > 0
                             ? static_cast<double>(env->clipped_queries()) / static_cast<double>(env->total_queries())
                             : 0.0;
    return r;
}

int worker_count() {
    if (const char* s = std::getenv("KBCO_THREADS")) {
        const int v = std::atoi(s);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SeedResult> run_seeds(const ExperimentConfig& c, long T) {
    std::vector<SeedResult> results(c.seeds.size());
    std::vector<std::string> errors(c.seeds.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < c.seeds.size(); i = next++) {
            try {
                results[i] = run_seed(c, T, c.seeds[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int workers = std::min<int>(worker_count(), static_cast<int>(c.seeds.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) throw ConfigError("seed " + std::to_string(c.seeds[i]) + ": " + errors[i]);
    }
    return results;
}

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
    os << "t";
    for (int i = 1; i <= trace.n; ++i) os << ",x" << i;
    os << ",in_K,in_Omega,loss,u,eta,focus_cut,restart\n";
    for (const auto& r : trace.rounds) {
        os << r.t;
        for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << fmt_double(r.x(i));
        os << ',' << (r.in_K ? 1 : 0) << ',' << (r.in_Omega ? 1 : 0) << ',' << fmt_double(r.loss) << ','
           << fmt_double(r.u) << ',' << fmt_double(r.eta) << ',' << (r.focus_cut ? 1 : 0) << ','
           << (r.restart ? 1 : 0) << '\n';
    }
}

std::vector<CsvRow> read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty CSV");
    const auto header = split(line, ',');
    const int n = static_cast<int>(header.size()) - 8;
    if (n < 1 || header.front() != "t") throw ConfigError("unexpected CSV header");
    const std::vector<std::string> tail{"in_K", "in_Omega", "loss", "u", "eta", "focus_cut", "restart"};
    for (int i = 0; i < n; ++i)
        if (header[static_cast<std::size_t>(i + 1)] != "x" + std::to_string(i + 1)) throw ConfigError("unexpected CSV header");
    if (!std::equal(tail.begin(), tail.end(), header.begin() + n + 1)) throw ConfigError("unexpected CSV header");
    std::vector<CsvRow> rows;
    while (std::getline(is, line)) {
        const auto f = split(line, ',');
        if (f.size() != header.size()) throw ConfigError("CSV row has the wrong field count");
        CsvRow r;
        r.t = to_long(f[0]);
        r.x.resize(n);
        for (int i = 0; i < n; ++i) r.x(i) = to_double(f[static_cast<std::size_t>(i + 1)]);
        std::size_t k = static_cast<std::size_t>(n) + 1;
        r.in_K = f[k++] == "1";
        r.in_Omega = f[k++] == "1";
        r.loss = to_double(f[k++]);
        r.u = to_double(f[k++]);
        r.eta = to_double(f[k++]);
        r.focus_cut = f[k++] == "1";
        r.restart = f[k++] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

json summary_json(const ExperimentConfig& c, long T, const std::vector<SeedResult>& results) {
    json seeds = json::array();
    std::vector<double> cum, best, reg, pseudo, restarts, cuts, expo;
    for (const auto& r : results) {
        const RegretReport& rep = r.report;
        json s{{"seed", r.seed},
               {"cumulative_loss", rep.cumulative_loss},
               {"best_fixed_loss", rep.best_fixed_loss},
               {"regret", rep.regret},
               {"pseudo_regret", rep.pseudo_regret},
               {"restarts", r.trace.restart_times.size()},
               {"focus_cuts", r.trace.focus_cuts},
               {"growth_exponent", number_or_null(rep.growth_exponent)},
               {"checkpoints", rep.checkpoints},
               {"checkpoint_regret", rep.checkpoint_regret},
               {"rounds", r.trace.rounds.size()},
               {"aborted", r.trace.aborted},
               {"clipped_fraction", r.clipped_fraction},
               {"diagnostics", r.trace.diagnostics}};
        if (r.clipped_fraction > 1e-3) s["warning"] = "losses clipped in more than 0.1% of rounds";
        seeds.push_back(std::move(s));
        cum.push_back(rep.cumulative_loss);
        best.push_back(rep.best_fixed_loss);
        reg.push_back(rep.regret);
        pseudo.push_back(rep.pseudo_regret);
        restarts.push_back(static_cast<double>(r.trace.restart_times.size()));
        cuts.push_back(r.trace.focus_cuts);
        if (std::isfinite(rep.growth_exponent)) expo.push_back(rep.growth_exponent);
    }
    // Growth exponent of the seed-averaged regret curve.
    double mean_exponent = std::numeric_limits<double>::quiet_NaN();
    if (!results.empty()) {
        const auto& cps = results.front().report.checkpoints;
        std::vector<double> xs, ys;
        for (std::size_t k = 0; k < cps.size(); ++k) {
            double m = 0.0;
            for (const auto& r : results) m += r.report.checkpoint_regret.at(k);
            xs.push_back(static_cast<double>(cps[k]));
            ys.push_back(m / static_cast<double>(results.size()));
        }
        const LogLogFit fit = fit_loglog(xs, ys);
        if (fit.points >= 2) mean_exponent = fit.slope;
    }
    json aggregate{{"cumulative_loss", mean_std(cum)}, {"best_fixed_loss", mean_std(best)}, {"regret", mean_std(reg)},
                   {"pseudo_regret", mean_std(pseudo)}, {"restarts", mean_std(restarts)}, {"focus_cuts", mean_std(cuts)},
                   {"growth_exponent", mean_std(expo)}, {"mean_regret_growth_exponent", number_or_null(mean_exponent)}};
    return json{{"algo", c.algo}, {"env", c.env.kind}, {"n", c.n}, {"T", T}, {"preset", to_string(c.preset)},
                {"seeds", seeds}, {"aggregate", aggregate}};
}

int cli_run(const ExperimentConfig& c) {
    try {
        validate_config(c);
        const long T = c.T.front();
        const std::vector<SeedResult> results = run_seeds(c, T);
        const std::filesystem::path out(c.out);
        std::filesystem::create_directories(out);
        if (c.traces) write_traces(out, results);
        write_file(out / "summary.json", summary_json(c, T, results).dump(2) + "\n");
        if (any_aborted(results)) {
            for (const auto& r : results)
                for (const auto& d : r.trace.diagnostics) std::cerr << "seed " << r.seed << ": " << d << "\n";
            return 3;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

int cli_sweep(const ExperimentConfig& c) {
    try {
        if (c.T.size() < 2) throw ConfigError("sweep needs at least two T values");
        validate_config(c);
        const std::filesystem::path out(c.out);
        std::filesystem::create_directories(out);
        std::vector<double> ts, means;
        json per_t = json::array();
        bool aborted = false;
        for (long T : c.T) {
            const std::vector<SeedResult> results = run_seeds(c, T);
            if (c.traces) write_traces(out / ("T" + std::to_string(T)), results);
            const json summary = summary_json(c, T, results);
            aborted = aborted || any_aborted(results);
            const double m = summary["aggregate"]["pseudo_regret"]["mean"].is_number()
                                 ? summary["aggregate"]["pseudo_regret"]["mean"].get<double>()
                                 : std::numeric_limits<double>::quiet_NaN();
            ts.push_back(static_cast<double>(T));
            means.push_back(m);
            per_t.push_back(json{{"T", T},
                                 {"mean_pseudo_regret", number_or_null(m)},
                                 {"std_pseudo_regret", summary["aggregate"]["pseudo_regret"]["std"]},
                                 {"mean_regret", summary["aggregate"]["regret"]["mean"]}});
        }
        const LogLogFit fit = fit_loglog(ts, means);
        const json sweep{{"algo", c.algo}, {"env", c.env.kind}, {"n", c.n}, {"seeds", c.seeds.size()},
                         {"slope", fit.points >= 2 ? json(fit.slope) : json(nullptr)},
                         {"intercept", fit.points >= 2 ? json(fit.intercept) : json(nullptr)}, {"per_T", per_t}};
        write_file(out / "sweep.json", sweep.dump(2) + "\n");
        return aborted ? 3 : 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

int cli_verify(const std::string& suite, const std::string& mutate, double scale) {
    if (!mutate.empty() && mutate != "near-branch-sign") {
        std::cerr << "config error: unknown mutation '" << mutate << "'\n";
        return 2;
    }
    k1::testing::set_near_branch_sign_flip(mutate == "near-branch-sign");
    std::vector<props::PropertyResult> results;
    try {
        props::SuiteOptions o;
        o.scale = scale;
        results = props::run_suite(suite, o);
    } catch (const ConfigError& e) {
        k1::testing::set_near_branch_sign_flip(false);
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    k1::testing::set_near_branch_sign_flip(false);
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name << ": " << r.detail << "\n";
        if (!r.pass) ++failed;
    }
    std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " properties passed\n";
    if (failed > 0) {
        for (const auto& r : results)
            if (!r.pass) std::cerr << "failed: " << r.name << "\n";
        return 1;
    }
    return 0;
}

namespace {

struct Flags {
    std::string config, algo, env, preset, focus, mode, seeds, out, t, checkpoints, body;
    std::string optimum, direction, xa, xb, lo, hi, center;
    int n = 0;
    long switch_round = 0;
    double noise = -1.0, corrupt = -1.0, radius = -1.0;
    double lambda = 0, sigma2 = 0, eta1 = 0, alpha = 0, gamma = 0, beta = 0, eps = 0;
    int grid_size = 0;
    double eps1d = 0, eta1d = 0;
    bool no_traces = false;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file; flags override its fields");
    app->add_option("--algo", f.algo, "kernel1d, kernel_hd or fkm");
    app->add_option("--env", f.env, "linear, quadratic, abs or moving_optimum");
    app->add_option("--n", f.n, "dimension");
    app->add_option("--t", f.t, "horizon (comma list for sweep)");
    app->add_option("--preset", f.preset, "theory or practical");
    app->add_option("--focus", f.focus, "box or ellipsoid");
    app->add_option("--mode", f.mode, "automatic, grid or analytic");
    app->add_option("--seeds", f.seeds, "e.g. 1..20 or 1,2,5");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--checkpoints", f.checkpoints, "rounds for regret snapshots");
    app->add_option("--body", f.body, "cube, interval, box, ball or polytope");
    app->add_option("--lo", f.lo, "box lower corner");
    app->add_option("--hi", f.hi, "box upper corner");
    app->add_option("--center", f.center, "ball center");
    app->add_option("--radius", f.radius, "ball radius");
    app->add_option("--optimum", f.optimum, "quadratic/abs optimum");
    app->add_option("--direction", f.direction, "linear loss direction");
    app->add_option("--xa", f.xa, "moving optimum before the switch");
    app->add_option("--xb", f.xb, "moving optimum after the switch");
    app->add_option("--switch", f.switch_round, "moving optimum switch round");
    app->add_option("--noise", f.noise, "bounded noise scale");
    app->add_option("--corrupt", f.corrupt, "corrupted fraction of rounds");
    app->add_option("--lambda", f.lambda);
    app->add_option("--sigma2", f.sigma2);
    app->add_option("--eta1", f.eta1);
    app->add_option("--alpha", f.alpha);
    app->add_option("--gamma", f.gamma);
    app->add_option("--beta", f.beta);
    app->add_option("--eps", f.eps);
    app->add_option("--grid-size", f.grid_size, "kernel1d grid size");
    app->add_option("--eps1d", f.eps1d, "kernel1d eps (default 1/T^2)");
    app->add_option("--eta1d", f.eta1d, "kernel1d learning rate");
    app->add_flag("--no-traces", f.no_traces, "skip per-round CSV files");
}

ExperimentConfig build_config(const CLI::App& app, const Flags& f) {
    ExperimentConfig c;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw ConfigError("cannot read config " + f.config);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad JSON: ") + e.what());
        }
        c = config_from_json(j);
    }
    const auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--algo")) c.algo = f.algo;
    if (given("--n")) c.n = f.n;
    else if (f.config.empty() && c.algo == "kernel1d") c.n = 1;
    if (given("--env")) c.env.kind = f.env;
    if (given("--t")) c.T = parse_long_list(f.t);
    if (given("--preset")) c.preset = parse_preset(f.preset);
    if (given("--focus")) c.focus = parse_focus_primitive(f.focus);
    if (given("--mode")) c.mode = parse_density_mode(f.mode);
    if (given("--seeds")) c.seeds = parse_seeds(f.seeds);
    if (given("--out")) c.out = f.out;
    if (given("--checkpoints")) c.checkpoints = parse_long_list(f.checkpoints);
    if (given("--body")) c.body.kind = f.body;
    if (given("--lo")) c.body.lo = parse_double_list(f.lo);
    if (given("--hi")) c.body.hi = parse_double_list(f.hi);
    if (given("--center")) c.body.center = parse_double_list(f.center);
    if (given("--radius")) c.body.radius = f.radius;
    if (given("--optimum")) c.env.optimum = parse_double_list(f.optimum);
    if (given("--direction")) c.env.direction = parse_double_list(f.direction);
    if (given("--xa")) c.env.x_a = parse_double_list(f.xa);
    if (given("--xb")) c.env.x_b = parse_double_list(f.xb);
    if (given("--switch")) c.env.switch_round = f.switch_round;
    if (given("--noise")) c.env.noise = f.noise;
    if (given("--corrupt")) c.env.corrupt = f.corrupt;
    if (given("--lambda")) c.overrides.lambda = f.lambda;
    if (given("--sigma2")) c.overrides.sigma2 = f.sigma2;
    if (given("--eta1")) c.overrides.eta1 = f.eta1;
    if (given("--alpha")) c.overrides.alpha = f.alpha;
    if (given("--gamma")) c.overrides.gamma = f.gamma;
    if (given("--beta")) c.overrides.beta = f.beta;
    if (given("--eps")) c.overrides.eps = f.eps;
    if (given("--grid-size")) c.grid_size = f.grid_size;
    if (given("--eps1d")) c.eps1d = f.eps1d;
    if (given("--eta1d")) c.eta1d = f.eta1d;
    if (f.no_traces) c.traces = false;
    return c;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"kbco: run, sweep and verify the kernel learners"};
    app.require_subcommand(1);
    Flags run_flags, sweep_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "one run per seed: per-round CSV and summary.json");
    add_common(run_cmd, run_flags);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "runs over several horizons and fits the regret slope");
    add_common(sweep_cmd, sweep_flags);
    std::string suite = "all", mutate;
    double scale = 1.0;
    CLI::App* verify_cmd = app.add_subcommand("verify", "property suites with fixed seeds");
    verify_cmd->add_option("--suite", suite, "kernel1d, kernel_hd, sampler, engine or all");
    verify_cmd->add_option("--mutate", mutate, "inject a known defect (near-branch-sign)");
    verify_cmd->add_option("--scale", scale, "multiplier on Monte Carlo sizes");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (run_cmd->parsed()) return cli_run(build_config(*run_cmd, run_flags));
        if (sweep_cmd->parsed()) return cli_sweep(build_config(*sweep_cmd, sweep_flags));
        return cli_verify(suite, mutate, scale);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace kbco
