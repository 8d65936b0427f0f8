#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tailqr/cli.hpp"
#include "tailqr/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

using namespace tailqr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_config(const fs::path& out) {
    const auto src = oracle::source_dir();
    return json{{"data",
                 {{"csv", (src / "data/synthetic_fredqd.csv").string()},
                  {"spec", (src / "data/synthetic_fredqd_spec.json").string()},
                  {"target", "GDPC1"}}},
                {"output_dir", out.string()},
                {"experiment",
                 {{"priors", {"ridge", "minnesota"}},
                  {"bases", {"none"}},
                  {"horizons", {1}},
                  {"holdout_start", "2018Q3"},
                  {"holdout_end", "2021Q3"},
                  {"fit", {{"max_iter", 300}, {"tol", 1e-4}}}}}};
}

fs::path write_config(const fs::path& dir, const json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "tailqr");
    return cli::run(args);
}

}  // namespace

TEST_CASE("help and version exit cleanly") {
    CHECK(run({"--help"}) == cli::kExitOk);
    CHECK(run({"--version"}) == cli::kExitOk);
}

TEST_CASE("bad flags and configs exit with 2") {
    const auto dir = oracle::scratch_dir("cli_bad");
    CHECK(run({"forecast"}) == cli::kExitConfig);
    CHECK(run({"no-such-command"}) == cli::kExitConfig);
    CHECK(run({"forecast", "-c", (dir / "missing.json").string()}) == cli::kExitConfig);
    auto j = tiny_config(dir / "out");
    j["experiment"]["priors"] = json::array();
    CHECK(run({"forecast", "-c", write_config(dir, j).string()}) == cli::kExitConfig);
    j = tiny_config(dir / "out");
    j["experiment"]["priors"] = {"spike_slab"};
    CHECK(run({"forecast", "-c", write_config(dir, j).string()}) == cli::kExitConfig);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run({"forecast", "-c", (dir / "broken.json").string()}) == cli::kExitConfig);
}

TEST_CASE("forecast then evaluate") {
    const auto dir = oracle::scratch_dir("cli_roundtrip");
    const auto out = dir / "out";
    const auto cfg = write_config(dir, tiny_config(out));
    REQUIRE(run({"forecast", "-c", cfg.string(), "-j", "1"}) == cli::kExitOk);
    for (const char* f : {"forecasts.csv", "failures.csv", "panel.csv", "shrinkage.csv", "manifest_forecast.json"})
        CHECK(fs::exists(out / f));
    const auto manifest = json::parse(io::read_file(out / "manifest_forecast.json"));
    CHECK(manifest["command"] == "forecast");
    CHECK(manifest["inputs"].size() == 3);
    CHECK(manifest["software_version"] == cli::kVersion);

    const std::string store = (out / "forecasts.csv").string();
    REQUIRE(run({"evaluate", "--forecasts", store, "-o", out.string(), "--subsample", "2020Q1:2021Q3"}) == cli::kExitOk);
    for (const char* f : {"scores.csv", "scores.txt", "cumulative.csv", "scores_subsample.csv", "manifest_evaluate.json"})
        CHECK(fs::exists(out / f));
    const auto first = io::read_file(out / "scores.csv");
    CHECK(first.find("ridge-none,1,CRPS,") != std::string::npos);
    REQUIRE(run({"evaluate", "--forecasts", store, "-o", out.string(), "--subsample", "2020Q1:2021Q3"}) == cli::kExitOk);
    CHECK(io::read_file(out / "scores.csv") == first);
    CHECK(run({"evaluate", "--forecasts", store, "-o", out.string(), "--benchmark", "dl-none"}) != cli::kExitOk);

    REQUIRE(run({"fit", "-c", cfg.string(), "--origin", "2021Q2", "--horizon", "1"}) == cli::kExitOk);
    CHECK(fs::exists(out / "fit" / "ridge-none_h1_q0.5.json"));
}

TEST_CASE("output directory from the environment wins") {
    const auto dir = oracle::scratch_dir("cli_env");
    const auto env_out = dir / "from_env";
    ::setenv(cli::kOutputDirEnv, env_out.string().c_str(), 1);
    const int rc = run({"bench", "--dims", "5,10", "--T", "60", "--draws", "50", "--burn-in", "10", "-o", (dir / "flag").string()});
    ::unsetenv(cli::kOutputDirEnv);
    CHECK(rc == cli::kExitOk);
    CHECK(fs::exists(env_out / "bench.csv"));
    CHECK_FALSE(fs::exists(dir / "flag" / "bench.csv"));
    const auto csv = io::read_file(env_out / "bench.csv");
    CHECK(csv.rfind("dim,engine,seconds,seed,iterations\n", 0) == 0);
}
