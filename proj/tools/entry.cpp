#include <algorithm>
#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

namespace gexp_cli {

int main_entry(int argc, char** argv) {
    CLI::App app{"G-expectation stochastic control lab"};
    std::string command;
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::size_t levels = 0;
    app.add_option("command", command, "one of: gheat expectation simulate bsde value hjb compare dpp-check "
                                       "regularity rate-study")
        ->required();
    app.add_option("--config", config_path, "INI experiment config")->required();
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    auto* levels_opt = app.add_option("--levels", levels, "refinement levels");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kParseFailure;
    }

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kParseFailure;
    }
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        std::cerr << "error: unknown command '" << command << "'\n";
        return kParseFailure;
    }
    cfg.command = command;
    if (*out_opt) cfg.out_dir = out_dir;
    if (*seed_opt) cfg.seed = seed;
    if (*levels_opt) cfg.levels = levels;
    return run(cfg, std::cerr);
}

}  // namespace gexp_cli
