#pragma once

// `gexp` command-line driver. Everything here goes through the C interface.

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gexp/gexp.h"

namespace gexp_cli {

enum ExitCode : int { kOk = 0, kToleranceFailure = 1, kParseFailure = 2, kValidationFailure = 3 };

/// Malformed config or command line.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Well-formed config that names something invalid or violates a precondition.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A library call failed.
struct LibraryError : std::runtime_error {
    LibraryError(gexp_status s, const std::string& what) : std::runtime_error(what), status(s) {}
    gexp_status status;
};

struct ExperimentConfig {
    std::string command;
    std::string problem = "pure-gbm";
    std::map<std::string, std::string> problem_params;
    gexp_uncertainty uncertainty{0.5, 1.0, 1};
    gexp_grid grid{1000, 0.0, 1.0, -6.0, 6.0, 240, 5};
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::size_t levels = 4;
    std::map<std::string, std::string> run;       // command-specific knobs
    std::map<std::string, double> tolerances;     // defaults merged with overrides
};

const std::vector<std::string>& command_names();
std::map<std::string, double> default_tolerances();

/// Parses INI text with sections [problem], [uncertainty], [grid], [run],
/// [tolerances]. Throws ParseError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Closed-form G-normal value E[phi(sqrt(T) X)] at x = 0 when one is known.
std::optional<double> closed_form(const std::string& payoff, double clamp, double param, const gexp_uncertainty& u,
                                  double horizon);

/// Runs one command, writing artifacts into config.out_dir. Returns the exit code.
int run(const ExperimentConfig& config, std::ostream& log);

/// Full entry point: argument parsing, config loading, dispatch.
int main_entry(int argc, char** argv);

}  // namespace gexp_cli
