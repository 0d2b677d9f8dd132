#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "planted_chain.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path out = dir / "_stdout.txt";
    const fs::path err = dir / "_stderr.txt";
    const std::string command = "cd '" + dir.string() + "' && '" + CAUSALTAB_CLI_PATH + "' " +
                                args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = testsupport::read_file(out);
    result.err = testsupport::read_file(err);
    return result;
}

void write_fixture(const fs::path& dir, const planted::Fixture& fx) {
    testsupport::write_file(dir, "table.csv", fx.table_csv);
    testsupport::write_file(dir, "labels.csv", fx.labels_csv);
    testsupport::write_file(dir, "defs.json", fx.defs_json);
    testsupport::write_file(dir, "values.csv", fx.values_csv);
}

const char* kConfig = R"({
  "paths": {
    "table": "table.csv",
    "labels": "labels.csv",
    "factor_defs": "defs.json",
    "factor_values": "values.csv",
    "breakdown": "breakdown.csv"
  },
  "ordering": {"k": 5},
  "eval": {"seeds": [0, 1]},
  "threads": 1
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("order reproduces the brute-force optimum on the cycle fixture") {
    const auto dir = testsupport::make_temp_dir("cli_order");
    // w(1->2)=2, w(2->3)=1, w(3->1)=1: brute-force optimum 3.
    testsupport::write_file(dir, "preference.json", R"({
      "columns": ["c1", "c2", "c3"],
      "w": [[0.0, 2.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]
    })");
    const RunResult run = run_cli(dir, "order --preference preference.json --k 10");
    CAPTURE(run.err);
    CHECK(run.exit_code == 0);

    const auto doc = nlohmann::json::parse(testsupport::read_file(dir / "orderings.json"));
    CHECK(doc.at("optimum").get<double>() == 3.0);
    CHECK(doc.at("threshold").get<double>() == doctest::Approx(2.7));
    REQUIRE(doc.at("orderings").size() == 2);
    CHECK(doc.at("orderings")[0].at("ranks").get<std::vector<int>>() ==
          std::vector<int>{0, 1, 2});
}

TEST_CASE("missing factor-values path is a usage error") {
    const auto dir = testsupport::make_temp_dir("cli_usage");
    const planted::Fixture fx = planted::make(30, 5, 1);
    write_fixture(dir, fx);
    const RunResult run = run_cli(dir, "discover --table table.csv --factor-defs defs.json");
    CHECK(run.exit_code == 2);
    CHECK(run.err.find("factor_values") != std::string::npos);
}

TEST_CASE("missing input files are data errors") {
    const auto dir = testsupport::make_temp_dir("cli_data");
    const RunResult run = run_cli(dir, "order --preference nowhere.json");
    CHECK(run.exit_code == 3);
}

TEST_CASE("the enumeration cap maps to the resource exit code") {
    const auto dir = testsupport::make_temp_dir("cli_cap");
    // Uniform weights: all 720 permutations tie at the optimum.
    nlohmann::json doc;
    doc["columns"] = {"a", "b", "c", "d", "e", "f"};
    auto& rows = doc["w"] = nlohmann::json::array();
    for (int i = 0; i < 6; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < 6; ++j) row.push_back(i == j ? 0.0 : 1.0);
        rows.push_back(row);
    }
    testsupport::write_file(dir, "preference.json", doc.dump());
    const RunResult run = run_cli(dir, "order --preference preference.json --solution-cap 100");
    CHECK(run.exit_code == 4);
    CHECK(run.err.find("cap") != std::string::npos);
}

TEST_CASE("pipeline produces artifacts byte-identical to stage-by-stage runs") {
    const planted::Fixture fx = planted::make(200, 20, 3);

    const auto pipe_dir = testsupport::make_temp_dir("cli_pipeline");
    write_fixture(pipe_dir, fx);
    testsupport::write_file(pipe_dir, "config.json", kConfig);
    const RunResult pipeline = run_cli(pipe_dir, "pipeline --config config.json");
    CAPTURE(pipeline.err);
    REQUIRE(pipeline.exit_code == 0);

    const auto stage_dir = testsupport::make_temp_dir("cli_stages");
    write_fixture(stage_dir, fx);
    testsupport::write_file(stage_dir, "config.json", kConfig);
    for (const char* stage : {"discover", "project", "order", "fit", "score", "eval"}) {
        const RunResult run = run_cli(stage_dir, std::string(stage) + " --config config.json");
        CAPTURE(run.err);
        REQUIRE(run.exit_code == 0);
    }

    for (const char* artifact : {"graph.json", "preference.json", "orderings.json", "scorer.json",
                                 "scores.csv", "breakdown.csv", "report.json", "report.csv"}) {
        CAPTURE(artifact);
        CHECK(testsupport::read_file(pipe_dir / artifact) ==
              testsupport::read_file(stage_dir / artifact));
    }

    // The report contains the full 2x2 grid with one run per seed.
    const auto report = nlohmann::json::parse(testsupport::read_file(pipe_dir / "report.json"));
    REQUIRE(report.at("cells").size() == 4);
    for (const auto& cell : report.at("cells")) {
        CHECK(cell.at("runs").size() == 2);
        CHECK(cell.at("mean_auc").get<double>() >= 0.0);
        CHECK(cell.at("mean_auc").get<double>() <= 1.0);
    }
}

TEST_CASE("scoring from exported breakdowns reproduces the surrogate scores") {
    const planted::Fixture fx = planted::make(120, 12, 9);
    const auto dir = testsupport::make_temp_dir("cli_external");
    write_fixture(dir, fx);
    testsupport::write_file(dir, "config.json", kConfig);
    for (const char* stage : {"discover", "project", "order", "fit", "score"}) {
        const RunResult run = run_cli(dir, std::string(stage) + " --config config.json");
        REQUIRE(run.exit_code == 0);
    }
    const std::string surrogate_scores = testsupport::read_file(dir / "scores.csv");

    const RunResult external = run_cli(
        dir, "score --config config.json --external-nll breakdown.csv --scores external.csv");
    CAPTURE(external.err);
    REQUIRE(external.exit_code == 0);
    CHECK(testsupport::read_file(dir / "external.csv") == surrogate_scores);
}

TEST_CASE("sequences export writes one record per sample and ordering") {
    const planted::Fixture fx = planted::make(40, 5, 4);
    const auto dir = testsupport::make_temp_dir("cli_sequences");
    write_fixture(dir, fx);
    testsupport::write_file(dir, "config.json", kConfig);
    for (const char* stage : {"discover", "project", "order"}) {
        const RunResult run = run_cli(dir, std::string(stage) + " --config config.json");
        REQUIRE(run.exit_code == 0);
    }
    const RunResult run = run_cli(
        dir, "score --config config.json --export-sequences seq.jsonl --sequences-only");
    CAPTURE(run.err);
    REQUIRE(run.exit_code == 0);

    const std::string body = testsupport::read_file(dir / "seq.jsonl");
    std::size_t lines = 0;
    for (char c : body) lines += c == '\n' ? 1 : 0;
    const auto orderings = nlohmann::json::parse(testsupport::read_file(dir / "orderings.json"));
    CHECK(lines == 45 * orderings.at("orderings").size());
    CHECK_FALSE(fs::exists(dir / "scores.csv"));
}

TEST_CASE("flag overrides beat config values") {
    const auto dir = testsupport::make_temp_dir("cli_override");
    testsupport::write_file(dir, "preference.json", R"({
      "columns": ["a", "b"],
      "w": [[0.0, 1.0], [0.0, 0.0]]
    })");
    testsupport::write_file(dir, "config.json", R"({"ordering": {"k": 2}})");
    const RunResult run =
        run_cli(dir, "order --config config.json --preference preference.json --k 1");
    REQUIRE(run.exit_code == 0);
    const auto doc = nlohmann::json::parse(testsupport::read_file(dir / "orderings.json"));
    CHECK(doc.at("orderings").size() == 1);
}

TEST_CASE("help exits cleanly, bare invocations are usage errors") {
    const auto dir = testsupport::make_temp_dir("cli_help");
    CHECK(run_cli(dir, "--help").exit_code == 0);
    CHECK(run_cli(dir, "score --help").exit_code == 0);
    CHECK(run_cli(dir, "").exit_code == 2);
    CHECK(run_cli(dir, "frobnicate").exit_code == 2);
}

TEST_CASE("config files reject unknown keys") {
    const auto dir = testsupport::make_temp_dir("cli_badconfig");
    testsupport::write_file(dir, "config.json", R"({"orderings": {"k": 2}})");
    const RunResult run = run_cli(dir, "order --config config.json");
    CHECK(run.exit_code == 2);
    CHECK(run.err.find("unknown key") != std::string::npos);
}

}  // TEST_SUITE
