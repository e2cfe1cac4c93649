#include "kbco/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace kbco;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("kbco_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig small_1d(const std::filesystem::path& out) {
    ExperimentConfig c;
    c.algo = "kernel1d";
    c.n = 1;
    c.env.kind = "abs";
    c.env.noise = 0.1;
    c.T = {1000};
    c.grid_size = 256;
    c.seeds = {3};
    c.out = out.string();
    return c;
}

}  // namespace

TEST_CASE("seed and list parsing") {
    CHECK(parse_seeds("1..4") == std::vector<std::uint64_t>{1, 2, 3, 4});
    CHECK(parse_seeds("1,2, 5..6") == std::vector<std::uint64_t>{1, 2, 5, 6});
    CHECK(parse_seeds("").empty());
    CHECK_THROWS_AS(parse_seeds("4..2"), ConfigError);
    CHECK_THROWS_AS(parse_seeds("x"), ConfigError);
    CHECK(parse_long_list("1000,1e4,100000") == std::vector<long>{1000, 10000, 100000});
    CHECK(parse_double_list("0.3, 0.7") == std::vector<double>{0.3, 0.7});
}

TEST_CASE("config parsing is strict") {
    const auto j = nlohmann::json::parse(R"({"algo":"kernel_hd","n":2,"T":[1000,2000],"seeds":"1..3",
        "env":{"kind":"moving_optimum","x_a":[0.1,0.1]},"params":{"beta":2},"body":{"kind":"box","lo":[0,0],"hi":[2,1]}})");
    const ExperimentConfig c = config_from_json(j);
    CHECK(c.T == std::vector<long>{1000, 2000});
    CHECK(c.seeds.size() == 3);
    CHECK(c.env.x_a == std::vector<double>{0.1, 0.1});
    CHECK(c.overrides.beta.value() == 2.0);
    CHECK(std::holds_alternative<Box>(make_body(c.body, 2)));
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"algoo":"fkm"})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"env":{"kind":"abs","noize":1}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"n":"two"})")), ConfigError);

    ExperimentConfig bad;
    bad.algo = "kernel1d";
    bad.n = 2;
    CHECK_THROWS_AS(validate_config(bad), ConfigError);
    ExperimentConfig off;
    off.env.optimum = {1.5, 0.5};
    CHECK_THROWS_AS(validate_config(off), ConfigError);
}

TEST_CASE("empty seed list exits 2") {
    ExperimentConfig c = small_1d(scratch("empty"));
    c.seeds.clear();
    CHECK(cli_run(c) == 2);
}

TEST_CASE("1D run writes T rows plus header and a summary") {
    const auto out = scratch("run1d");
    CHECK(cli_run(small_1d(out)) == 0);
    std::ifstream csv(out / "seed_3.csv");
    const auto rows = read_trace_csv(csv);
    CHECK(rows.size() == 1000);
    CHECK(rows.front().t == 1);
    CHECK(rows.back().t == 1000);
    std::ifstream js(out / "summary.json");
    const auto summary = nlohmann::json::parse(js);
    const auto& s = summary["seeds"][0];
    for (const char* key : {"cumulative_loss", "best_fixed_loss", "regret", "pseudo_regret", "restarts", "focus_cuts"})
        CHECK(s.contains(key));
    CHECK(s["regret"].get<double>() == doctest::Approx(s["cumulative_loss"].get<double>() - s["best_fixed_loss"].get<double>()));
    CHECK(summary["aggregate"]["regret"].contains("mean"));
    CHECK(summary["aggregate"]["regret"].contains("std"));
}

TEST_CASE("same seed twice gives byte-identical CSV") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    ExperimentConfig c = small_1d(a);
    CHECK(cli_run(c) == 0);
    c.out = b.string();
    CHECK(cli_run(c) == 0);
    CHECK(slurp(a / "seed_3.csv") == slurp(b / "seed_3.csv"));

    ExperimentConfig hd;
    hd.env.kind = "quadratic";
    hd.T = {200};
    hd.seeds = {1, 2};
    hd.out = scratch("det_hd_a").string();
    CHECK(cli_run(hd) == 0);
    const std::string first = slurp(std::filesystem::path(hd.out) / "seed_2.csv");
    hd.out = scratch("det_hd_b").string();
    hd.seeds = {2};
    CHECK(cli_run(hd) == 0);
    CHECK(first == slurp(std::filesystem::path(hd.out) / "seed_2.csv"));
}

TEST_CASE("CSV round trip") {
    RunTrace tr;
    tr.n = 2;
    RoundRecord r;
    r.t = 1;
    r.x = Eigen::Vector2d(0.1, 1.0 / 3.0);
    r.in_Omega = false;
    r.loss = 0.25;
    r.u = 1e-300;
    r.eta = 0.01;
    r.focus_cut = true;
    tr.push(r);
    std::stringstream ss;
    write_trace_csv(ss, tr);
    CHECK(ss.str().substr(0, ss.str().find('\n')) == "t,x1,x2,in_K,in_Omega,loss,u,eta,focus_cut,restart");
    const auto rows = read_trace_csv(ss);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].x(1) == 1.0 / 3.0);
    CHECK(rows[0].u == 1e-300);
    CHECK_FALSE(rows[0].in_Omega);
    CHECK(rows[0].focus_cut);
    CHECK_FALSE(rows[0].restart);
    std::stringstream bad("t,x1,loss\n1,0.5,0.2\n");
    CHECK_THROWS_AS(read_trace_csv(bad), ConfigError);
}

TEST_CASE("sweep needs two horizons") {
    ExperimentConfig c = small_1d(scratch("sweep1"));
    CHECK(cli_sweep(c) == 2);
    c.T = {300, 3000};
    c.traces = false;
    c.seeds = {1, 2};
    CHECK(cli_sweep(c) == 0);
    std::ifstream js(std::filesystem::path(c.out) / "sweep.json");
    const auto sweep = nlohmann::json::parse(js);
    CHECK(sweep["per_T"].size() == 2);
    CHECK(sweep["slope"].is_number());
}

TEST_CASE("verify exit codes") {
    CHECK(cli_verify("kernel1d", "", 0.1) == 0);
    CHECK(cli_verify("kernel1d", "near-branch-sign", 0.1) == 1);
    CHECK(cli_verify("nonsense", "", 1.0) == 2);
}

TEST_CASE("command line") {
    const auto out = scratch("cli");
    std::vector<std::string> args{"kbco", "run", "--algo", "fkm", "--env", "linear", "--n", "2", "--t", "300",
                                  "--seeds", "1..2", "--out", out.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    CHECK(cli_main(static_cast<int>(argv.size()), argv.data()) == 0);
    CHECK(std::filesystem::exists(out / "seed_2.csv"));
    std::vector<std::string> bad{"kbco", "run", "--seeds", ""};
    std::vector<char*> badv;
    for (auto& a : bad) badv.push_back(a.data());
    CHECK(cli_main(static_cast<int>(badv.size()), badv.data()) == 2);
    std::vector<std::string> nothing{"kbco"};
    std::vector<char*> nv{nothing[0].data()};
    CHECK(cli_main(1, nv.data()) == 2);
}
