#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

using namespace gexp_cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "gexp_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path file = dir / "config.ini";
    std::ofstream(file, std::ios::binary) << text;
    return file;
}

int invoke(std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return main_entry(static_cast<int>(argv.size()), argv.data());
}

const char* kSmallGrid =
    "[grid]\n"
    "t_steps = 100\n"
    "t_end = 0.5\n"
    "x_min = -3\n"
    "x_max = 3\n"
    "x_steps = 40\n";

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config(
        "[problem]\nname = full-coupled\nkappa = 0.2 ; inline comment\n"
        "[uncertainty]\nsigma_min_sq = 0.4\nsigma_max_sq = 0.9\n"
        "[grid]\nt_steps = 500\n"
        "[run]\nseed = 7\nlevels = 3\npayoff = call\n"
        "[tolerances]\ngheat_value = 0.1\n");
    CHECK(cfg.problem == "full-coupled");
    CHECK(cfg.problem_params.at("kappa") == "0.2");
    CHECK(cfg.uncertainty.sigma_min_sq == 0.4);
    CHECK(cfg.grid.t_steps == 500);
    CHECK(cfg.grid.x_steps == 240);
    CHECK(cfg.seed == 7);
    CHECK(cfg.levels == 3);
    CHECK(cfg.run.at("payoff") == "call");
    CHECK(cfg.tolerances.at("gheat_value") == 0.1);
    CHECK(cfg.tolerances.at("dpp_multi") == 5e-3);

    CHECK_THROWS_AS(parse_config("[nonsense]\na = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_config("[grid]\nt_steps = many\n"), ParseError);
    CHECK_THROWS_AS(parse_config("[grid]\nwidth = 3\n"), ParseError);
    CHECK_THROWS_AS(parse_config("[run]\nflavour = 3\n"), ParseError);
    CHECK_THROWS_AS(parse_config("[tolerances]\nunknown = 3\n"), ParseError);
    CHECK_THROWS_AS(parse_config("[grid\nt_steps = 1\n"), ParseError);
}

TEST_CASE("closed forms") {
    const gexp_uncertainty u{0.5, 1.0, 1};
    CHECK(*closed_form("x2", 0.0, 0.0, u, 1.0) == 1.0);
    CHECK(*closed_form("neg-x2", 0.0, 0.0, u, 1.0) == doctest::Approx(-0.5));
    CHECK_FALSE(closed_form("x2", 4.0, 0.0, u, 1.0).has_value());
    CHECK_FALSE(closed_form("cos", 0.0, 0.0, u, 1.0).has_value());
}

TEST_CASE("exit codes") {
    const auto dir = scratch("exit");
    const auto bad = write_config(dir, "[grid]\nt_steps = ten\n");
    CHECK(invoke({"gexp", "gheat", "--config", bad.string(), "--out", dir.string()}) == kParseFailure);
    CHECK(invoke({"gexp", "gheat", "--config", (dir / "missing.ini").string()}) == kParseFailure);
    const auto ok = write_config(dir, kSmallGrid);
    CHECK(invoke({"gexp", "teleport", "--config", ok.string(), "--out", dir.string()}) == kParseFailure);
    CHECK(invoke({"gexp", "gheat"}) == kParseFailure);

    const auto unknown = write_config(dir, std::string("[problem]\nname = nowhere\n") + kSmallGrid);
    CHECK(invoke({"gexp", "value", "--config", unknown.string(), "--out", dir.string()}) == kValidationFailure);
    const auto cfl = write_config(dir, "[grid]\nt_steps = 10\n");
    CHECK(invoke({"gexp", "gheat", "--config", cfl.string(), "--out", dir.string()}) == kValidationFailure);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["status"] == "validation_failure");

    const auto strict = write_config(dir, "[run]\npayoff = x2\n[tolerances]\ngheat_value = 1e-15\n");
    CHECK(invoke({"gexp", "gheat", "--config", strict.string(), "--out", dir.string()}) == kToleranceFailure);

    const auto good = write_config(dir, "[run]\npayoff = x2\n");
    CHECK(invoke({"gexp", "expectation", "--config", good.string(), "--out", dir.string()}) == kOk);
    const auto doc = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(doc["status"] == "ok");
}

TEST_CASE("reruns are byte-identical") {
    const auto a = scratch("rerun_a");
    const auto b = scratch("rerun_b");
    const auto text = std::string("[problem]\nname = full-coupled\n") + kSmallGrid + "[run]\npaths = 50\n";
    for (const char* cmd : {"simulate", "value", "bsde"}) {
        CAPTURE(cmd);
        const auto ca = write_config(a, text);
        const auto cb = write_config(b, text);
        CHECK(invoke({"gexp", cmd, "--config", ca.string(), "--out", a.string(), "--seed", "11"}) == kOk);
        CHECK(invoke({"gexp", cmd, "--config", cb.string(), "--out", b.string(), "--seed", "11"}) == kOk);
        for (const char* file : {"paths.csv", "field.csv"}) {
            if (fs::exists(a / file)) CHECK(slurp(a / file) == slurp(b / file));
        }
    }
    CHECK(fs::exists(a / "paths.csv"));
    CHECK(fs::exists(a / "field.csv"));
}

TEST_CASE("every command runs on every catalog problem") {
    const auto dir = scratch("smoke");
    const std::vector<std::string> problems = {"pure-gbm", "drift-control", "linear-generator", "quadratic-cell",
                                               "full-coupled"};
    std::vector<std::string> keys;
    for (const auto& problem : problems) {
        for (const auto& cmd : command_names()) {
            CAPTURE(problem);
            CAPTURE(cmd);
            ExperimentConfig cfg = parse_config("[problem]\nname = " + problem + "\n" + kSmallGrid +
                                                "[run]\npaths = 20\nlocal_steps = 10\n");
            cfg.command = cmd;
            cfg.levels = 3;
            cfg.out_dir = (dir / problem / cmd).string();
            if (cmd == "rate-study") cfg.run["delta_list"] = "0.04,0.02,0.01";
            std::ostringstream log;
            const int code = run(cfg, log);
            CAPTURE(log.str());
            CHECK((code == kOk || code == kToleranceFailure));
            const auto doc = nlohmann::ordered_json::parse(slurp(fs::path(cfg.out_dir) / "summary.json"));
            std::vector<std::string> these;
            for (const auto& item : doc.items()) these.push_back(item.key());
            if (keys.empty()) keys = these;
            CHECK(these == keys);
        }
    }
    CHECK(keys == std::vector<std::string>{"command", "status", "inputs", "results", "tolerances", "checks",
                                           "runtime_seconds"});
}
