#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arbmarl/cli.hpp"
#include "arbmarl/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "arbmarl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = arbmarl::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// two_bus scenario shortened so a few episodes run in well under a second
fs::path small_scenario(const fs::path& dir) {
    REQUIRE(cli({"gen-data", "--preset", "two_bus", "--seed", "7", "--out", dir.string()}).code == 0);
    auto doc = nlohmann::json::parse(std::ifstream(dir / "scenario.json"));
    doc["trainer"]["episodes"] = 3;
    doc["trainer"]["eval_every"] = 1;
    doc["trainer"]["minibatch"] = 16;
    doc["trainer"]["hidden"] = {8};
    std::ofstream(dir / "scenario.json") << doc.dump(2);
    return dir / "scenario.json";
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({}).code == 2);
    CHECK(cli({"train"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("clear-lfm on the congestion fixture") {
    const auto r = cli({"clear-lfm", "--input", ARBMARL_DATA_DIR "/fixtures/two_bus_congestion.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("status optimal") != std::string::npos);
    CHECK(r.out.find("g_up=0.5 ") != std::string::npos);
    CHECK(r.out.find("objective 10\n") != std::string::npos);

    const auto dir = fresh_dir("arbmarl_cli_lp");
    const auto lp = dir / "model.lp";
    CHECK(cli({"clear-lfm", "--input", ARBMARL_DATA_DIR "/fixtures/two_bus_congestion.json", "--dump-lp",
               lp.string()})
              .code == 0);
    CHECK(fs::file_size(lp) > 0);
    fs::remove_all(dir);
}

TEST_CASE("clear-lem prints dispatch and costs") {
    const auto dir = fresh_dir("arbmarl_cli_lem");
    std::ofstream(dir / "cells.json") << R"({"cells": [
        {"marginal_cost": 10, "demand": 2, "gen_cap": 5, "import_price": 50, "export_price": 45},
        {"marginal_cost": 48, "demand": 2, "gen_cap": 5, "import_price": 50, "export_price": 45, "withhold_factor": 0}
    ]})";
    const auto r = cli({"clear-lem", "--input", (dir / "cells.json").string()});
    REQUIRE(r.code == 0);
    const auto out = nlohmann::json::parse(r.out);
    REQUIRE(out.size() == 2);
    CHECK(out[0]["cost"].get<double>() == doctest::Approx(-85.0));
    CHECK(out[1]["cost"].get<double>() == doctest::Approx(100.0));
    CHECK(out[1]["reference_cost"].get<double>() == doctest::Approx(96.0));

    std::ofstream(dir / "bad.json") << R"({"marginal_cost": 10, "demand": -1})";
    CHECK(cli({"clear-lem", "--input", (dir / "bad.json").string()}).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("data generation, training, evaluation and replay pipeline") {
    const auto dir = fresh_dir("arbmarl_cli_pipeline");
    const auto config = small_scenario(dir);
    CHECK(fs::exists(dir / "prices.csv"));
    CHECK(fs::exists(dir / "profiles.csv"));
    CHECK(fs::exists(dir / "network.json"));

    const auto run = dir / "run";
    auto r = cli({"train", "--config", config.string(), "--seed", "3", "--out", run.string(), "--quiet"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(run / "training_curve.csv"));
    CHECK(fs::exists(run / "checkpoints" / "agent2_primary.bin"));
    CHECK(fs::exists(run / "checkpoints" / "agent2_secondary.bin"));
    const auto curve = arbmarl::io::read_csv(run / "training_curve.csv");
    CHECK(curve.rows.size() == 3);

    const auto log = dir / "log.csv";
    r = cli({"evaluate", "--config", config.string(), "--checkpoint", (run / "checkpoints").string(), "--weeks",
             "0,1", "--jobs", "2", "--log", log.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("week,agent,stage1,stage2,total", 0) == 0);

    r = cli({"replay", "--config", config.string(), "--log", log.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("0 mismatching") != std::string::npos);

    // a tampered reward breaks the replay
    std::ifstream in(log);
    std::stringstream text;
    text << in.rdbuf();
    auto table = text.str();
    const auto line_end = table.find('\n', table.find('\n') + 1);
    const auto last_comma = table.rfind(',', line_end);
    table.replace(last_comma + 1, line_end - last_comma - 1, "12345");
    std::ofstream(dir / "tampered.csv") << table;
    CHECK(cli({"replay", "--config", config.string(), "--log", (dir / "tampered.csv").string()}).code == 1);

    r = cli({"evaluate", "--config", config.string(), "--checkpoint", (run / "checkpoints").string(), "--weeks",
             "9"});
    CHECK(r.code == 1);
    fs::remove_all(dir);
}

TEST_CASE("test subcommand prints a score table") {
    const auto dir = fresh_dir("arbmarl_cli_table");
    REQUIRE(cli({"gen-data", "--preset", "four_node", "--seed", "2", "--out", dir.string()}).code == 0);
    auto doc = nlohmann::json::parse(std::ifstream(dir / "scenario.json"));
    doc["trainer"]["episodes"] = 1;
    doc["trainer"]["hidden"] = {8};
    std::ofstream(dir / "scenario.json") << doc.dump(2);
    const auto config = (dir / "scenario.json").string();
    REQUIRE(cli({"train", "--config", config, "--out", (dir / "run").string(), "--quiet"}).code == 0);
    const auto r = cli({"test", "--config", config, "--checkpoint", (dir / "run" / "checkpoints").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("first-stage") != std::string::npos);
    CHECK(r.out.find("second-stage") != std::string::npos);
    CHECK(r.out.find("mean over 1 week(s)") != std::string::npos);
    fs::remove_all(dir);
}
