#include "support.hpp"

#include <batauth/commands.hpp>
#include <batauth/config.hpp>
#include <batauth/synth.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace batauth;
using batauth::test::error_of;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "batauth-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string small_config(const fs::path& out, const std::string& extra = "") {
  return R"({"pipeline": "dca", "paths": {"output_dir": ")" + out.string() + R"("},
    "synth": {"cells_per_spec": 4, "cycles_per_cell": 6, "n_points": 300, "seed": 3},
    "models": [{"kind": "RandomForest", "grid": {"n_estimators": [15]}}],
    "eval": {"balances": [50, 20], "cv_folds": 3, "seed": 5})" + extra + "}";
}

std::string bad_config_message(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadConfig);
    return e.what();
  }
  FAIL("config was accepted");
  return {};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BATAUTH_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config validation names the field") {
    const std::string base = R"({"pipeline": "dca", "paths": {"input": "x.csv"})";
    CHECK(bad_config_message(base + R"(, "dca": {"savgol_window": 50}})").find("dca.savgol_window") != std::string::npos);
    CHECK(bad_config_message(base + R"(, "colour": 1})").find("colour: unknown key") != std::string::npos);
    CHECK(bad_config_message(R"({"paths": {"input": "x"}})").find("pipeline") != std::string::npos);
    CHECK(bad_config_message(base + R"(, "catalog_version": "v0"})").find("catalog_version") != std::string::npos);
    CHECK(bad_config_message(base + R"(, "models": [{"kind": "KNN", "grid": {"depth": [1]}}]})")
              .find("models[0].grid") != std::string::npos);
    CHECK(bad_config_message(base + R"(, "eval": {"balances": [45]}})").find("eval.balances") != std::string::npos);
    CHECK(bad_config_message(base + R"(, "threads": 0})").find("threads") != std::string::npos);
    CHECK(bad_config_message("{not json").find("invalid JSON") != std::string::npos);
  }

  TEST_CASE("config defaults") {
    const RunConfig dca = parse_run_config(R"({"pipeline": "dca", "paths": {"input": "d.csv"}})", "/data");
    CHECK(dca.input == fs::path("/data/d.csv"));
    CHECK_FALSE(dca.eval.select_features);
    REQUIRE(dca.models.size() == 1);
    CHECK(dca.models[0].kind == ModelKind::RandomForest);
    const RunConfig eis = parse_run_config(R"({"pipeline": "eis", "paths": {"input": "e.csv"}})");
    CHECK(eis.eval.select_features);
    const RunConfig grid = parse_run_config(
        R"({"pipeline": "dca", "paths": {"input": "d"}, "models": [{"kind": "KNN", "grid": {"weights": ["distance"], "k": [7, 1]}}]})");
    CHECK(grid.models[0].grid[0].name == "weights");
    CHECK(grid.models[0].grid[1].values[1] == 1);
  }

  TEST_CASE("hash and thread helpers") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    const RunConfig a = parse_run_config(R"({"pipeline": "dca", "paths": {"input": "d"}, "threads": 1})");
    const RunConfig b = parse_run_config(R"({"pipeline": "dca", "paths": {"input": "d"}, "threads": 8})");
    CHECK(a.canonical == b.canonical);
    CHECK(resolve_threads(b, 3) == 3);
    CHECK(error_of([&] { resolve_threads(b, 0); }) == ErrorCode::BadConfig);
  }

  TEST_CASE("run writes reports deterministically") {
    const fs::path dir = scratch("run");
    const RunConfig config = parse_run_config(small_config(dir / "a"));
    const RunResult first = execute_run(config);
    REQUIRE(fs::exists(dir / "a" / "report.json"));
    REQUIRE(fs::exists(dir / "a" / "report.csv"));
    const auto report = nlohmann::json::parse(read_text(dir / "a" / "report.json"));
    CHECK(report["identification"][0]["models"][0]["model"] == "RandomForest");
    CHECK(report["identification"][0]["models"][0]["metrics"].contains("f1"));
    CHECK(report["provenance"]["catalog_version"] == kCatalogVersion);
    CHECK(report["provenance"]["config_hash"].get<std::string>().size() == 16);
    CHECK(fs::exists(dir / "a" / "models" / "model_identification_RF.json"));

    RunOverrides o;
    o.threads = 4;
    o.output_dir = dir / "b";
    execute_run(config, o);
    CHECK(read_text(dir / "a" / "report.json") == read_text(dir / "b" / "report.json"));
    CHECK(read_text(dir / "a" / "report.csv") == read_text(dir / "b" / "report.csv"));
    o.threads = 1;
    o.output_dir = dir / "c";
    execute_run(config, o);
    CHECK(read_text(dir / "a" / "report.json") == read_text(dir / "c" / "report.json"));
  }

  TEST_CASE("authenticate and bench") {
    const fs::path dir = scratch("auth");
    execute_run(parse_run_config(small_config(dir / "out")));
    const fs::path model = dir / "out" / "models" / "model_authentication_LFP-A_50-50_RF.json";
    REQUIRE(fs::exists(model));
    const TrainedModel m = load_model(model);

    SynthConfig fresh;
    fresh.cells_per_spec = 1;
    fresh.cycles_per_cell = 2;
    fresh.n_points = 300;
    fresh.seed = 999;
    const DatasetCatalog sample = synthesize(PipelineKind::Dca, fresh);
    const auto decisions = authenticate(m, write_cycle_csv(sample.cycles));
    REQUIRE(decisions.size() == 10);
    CHECK(decisions[0].label == "authenticated");
    CHECK(decisions[1].label == "authenticated");
    CHECK(decisions[0].score.has_value());

    fresh.sweeps_per_spec = 1;
    fresh.n_freq = 20;
    const DatasetCatalog eis = synthesize(PipelineKind::Eis, fresh);
    CHECK(error_of([&] { authenticate(m, write_eis_csv(eis.spectra)); }) == ErrorCode::DimensionMismatch);

    write_text(dir / "broken.json", "{\"format_version\": 1, \"kind\": ");
    CHECK(error_of([&] { load_model(dir / "broken.json"); }) == ErrorCode::FormatVersionMismatch);

    const Matrix x = featurize_samples(m, write_cycle_csv(sample.cycles));
    const BenchRow a = bench_model(m, x, 3);
    const BenchRow b = bench_model(m, x, 3);
    CHECK(a.size_kb == b.size_kb);
    CHECK(a.time_ms > 0.0);
    CHECK(a.time_ms < 50.0);
    CHECK(bench_csv({a}).rfind("model,time_ms,size_kb\nRF,", 0) == 0);
    CHECK(error_of([&] { bench_model(m, x, 0); }) == ErrorCode::BadArgument);
  }

  TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("exit");
    write_text(dir / "ok.json", small_config(dir / "out"));
    CHECK(run_cli("run --config " + (dir / "ok.json").string()) == 0);
    CHECK(fs::exists(dir / "out" / "report.json"));

    write_text(dir / "even.json", small_config(dir / "out2", R"(, "dca": {"savgol_window": 50})"));
    CHECK(run_cli("run --config " + (dir / "even.json").string()) == 2);
    CHECK(run_cli("run") == 2);
    CHECK(run_cli("frobnicate") == 2);
    write_text(dir / "missing.json", R"({"pipeline": "dca", "paths": {"input": "nope.csv"}})");
    CHECK(run_cli("run --config " + (dir / "missing.json").string()) == 1);

    const std::string data = (dir / "data.csv").string();
    CHECK(run_cli("synth --cells 2 --cycles 3 --n-points 200 --out " + data) == 0);
    CHECK(run_cli("authenticate --model " + (dir / "out" / "models" / "model_identification_RF.json").string() +
                  " --sample " + data + " --json") == 0);
    CHECK(run_cli("bench --repeats 0 --model " + (dir / "out" / "models" / "model_identification_RF.json").string() +
                  " --samples " + data) == 1);
    CHECK(run_cli("extract --input " + data + " --out " + (dir / "f.csv").string()) == 0);
    CHECK(run_cli("select --features " + (dir / "f.csv").string() + " --out " + (dir / "mask.json").string()) == 0);
    CHECK(run_cli("train --features " + (dir / "f.csv").string() + " --model DecisionTree --folds 2 --out " +
                  (dir / "dt.json").string()) == 0);
    CHECK(run_cli("explain --model " + (dir / "dt.json").string() + " --features " + (dir / "f.csv").string() +
                  " --out " + (dir / "imp.csv").string()) == 0);
    CHECK(run_cli("process --input " + data + " --out " + (dir / "series").string()) == 0);
    CHECK(fs::exists(dir / "series" / "record_0.csv"));
    CHECK(run_cli("ingest --input " + data + " --out " + (dir / "catalog.json").string()) == 0);
  }

  TEST_CASE("environment thread override") {
    setenv("BATAUTH_THREADS", "x", 1);
    CHECK(error_of([] { threads_from_env(); }) == ErrorCode::BadConfig);
    setenv("BATAUTH_THREADS", "6", 1);
    CHECK(threads_from_env() == 6);
    unsetenv("BATAUTH_THREADS");
    CHECK_FALSE(threads_from_env().has_value());
  }
}
