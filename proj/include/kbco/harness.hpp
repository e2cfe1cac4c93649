#pragma once

// Experiment configuration, seeded runs over a worker pool, CSV/JSON outputs and
// the `run`, `sweep` and `verify` commands.

#include "kbco/engine.hpp"
#include "kbco/environments.hpp"
#include "kbco/trace.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kbco {

struct EnvSpec {
    std::string kind = "quadratic";  // linear, quadratic, abs, moving_optimum
    std::vector<double> optimum;     // quadratic, abs; default 0.3 per coordinate
    std::vector<double> direction;   // linear; default all ones
    std::vector<double> x_a, x_b;    // moving_optimum; default 0.2 / 0.8 per coordinate
    long switch_round = 0;           // 0 means T / 2
    double noise = 0.0;              // > 0 wraps in bounded i.i.d. noise
    double corrupt = 0.0;            // > 0 corrupts floor(corrupt * T) rounds
};

struct BodySpec {
    std::string kind;  // cube, interval, box, ball, polytope; empty picks interval (n = 1) or cube
    std::vector<double> lo, hi, center;
    double radius = 1.0;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
};

struct ExperimentConfig {
    std::string algo = "kernel_hd";  // kernel1d, kernel_hd, fkm
    EnvSpec env;
    BodySpec body;
    int n = 2;
    std::vector<long> T{1000};       // run uses T.front(); sweep needs two or more
    Preset preset = Preset::practical;
    FocusPrimitive focus = FocusPrimitive::box;
    DensityMode mode = DensityMode::automatic;
    ParamOverrides overrides;
    std::vector<std::uint64_t> seeds{1};
    std::string out = "out";
    std::vector<long> checkpoints;   // empty: T/16, T/8, ..., T
    int grid_size = 2048;            // kernel1d
    double eps1d = 0.0;              // kernel1d; 0 means 1/T^2
    double eta1d = 0.0;              // kernel1d; 0 means the default rate
    FkmParams fkm;
    bool traces = true;
};

// "1..20", "1,2,5" or a mix ("1..3,7").
std::vector<std::uint64_t> parse_seeds(const std::string& text);
std::vector<long> parse_long_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// Strict: unknown keys or wrong types throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
void validate_config(const ExperimentConfig& c);

ConvexBody make_body(const BodySpecConvexBody make_body(const BodySpec& spec, int n); body, int n);
OraclePtr make_environment(const ExperimentConfig& c, long T, std::uint64_t seed);

struct SeedResult {
    std::uint64_t seed = 0;
    RunTrace trace;
    RegretReport report;
    double clipped_fraction = 0.0;
};

// One run end-to-end: learner and environment streams come from the seed.
SeedResult run_seed(const ExperimentConfig& c, long T, std::uint64_t seed);
// All seeds over a pool capped by KBCO_THREADS; results in seed order.
std::vector<SeedResult> run_seeds(const ExperimentConfig& c, long T);
int worker_count();

std::vector<long> default_checkpoints(long T);

void write_trace_csv(std::ostream& os, const RunTrace& trace);
struct CsvRow {
    long t = 0;
    Vector x;
    bool in_K = false, in_Omega = false;
    double loss = 0.0, u = 0.0, eta = 0.0;
    bool focus_cut = false, restart = false;
};
// Parses what write_trace_csv writes; throws ConfigError on a schema mismatch.
std::vector<CsvRow> read_trace_csv(std::istream& is);

nlohmann::json summary_json(const ExperimentConfig& c, long T, const std::vector<SeedResult>& results);

// Exit codes: 0 success, 1 verification failure, 2 configuration error, 3 runtime abort.
int cli_run(const ExperimentConfig& c);
int cli_sweep(const ExperimentConfig& c);
int cli_verify(const std::string& suite, const std::string& mutate, double scale);
int cli_main(int argc, char** argv);

}  // namespace kbco
