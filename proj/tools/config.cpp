#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cli.hpp"

namespace gexp_cli {

namespace {

std::string trim(std::string s) {
    // Inline comments: " ;" or " #" after the value.
    for (const char* marker : {" ;", "\t;", " #", "\t#"}) {
        const auto pos = s.find(marker);
        if (pos != std::string::npos) s.erase(pos);
    }
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_number(const std::string& section, const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError("[" + section + "] " + key + ": '" + text + "' is not a finite number");
    }
    return v;
}

std::size_t to_count(const std::string& section, const std::string& key, const std::string& text) {
    const double v = to_number(section, key, text);
    if (v < 0.0 || v != std::floor(v) || v > 1e9) {
        throw ParseError("[" + section + "] " + key + ": '" + text + "' is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

const std::set<std::string> kRunKeys = {"seed",  "levels",     "threads", "payoff", "payoff_clamp", "payoff_param",
                                        "control", "x0",       "paths",   "gamma",  "deltas",       "study",
                                        "delta_list", "local_steps", "picard", "t_probe", "phi"};

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"gheat",   "expectation", "simulate",   "bsde",
                                                   "value",   "hjb",         "compare",    "dpp-check",
                                                   "regularity", "rate-study"};
    return names;
}

std::map<std::string, double> default_tolerances() {
    return {
        {"gheat_value", 2e-2},   {"lattice_pde", 1e-2},      {"qv_exact", 0.0},          {"k_increment", 1e-12},
        {"k_martingale", 1e-10}, {"hjb_self", 1e-12},        {"dpp_one_step", 1e-12},    {"dpp_multi", 5e-3},
        {"compare_distance", 5e-2}, {"refine_ratio", 1.5},   {"ratio_floor", 1e-12},     {"regularity_factor", 2.0},
        {"local_slope", 1.4},  {"gheat_ratio", 1.5},       {"heat_slope", 2.0},        {"heat_slope_band", 0.5},
    };
}

ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }

    ExperimentConfig cfg;
    cfg.tolerances = default_tolerances();
    for (const auto& [section, body] : tree) {
        if (!body.data().empty() && body.empty()) throw ParseError("config: key '" + section + "' outside a section");
        for (const auto& [key, node] : body) {
            const std::string value = trim(node.data());
            if (section == "problem") {
                if (key == "name") {
                    cfg.problem = value;
                } else {
                    cfg.problem_params[key] = value;
                }
            } else if (section == "uncertainty") {
                if (key == "sigma_min_sq") {
                    cfg.uncertainty.sigma_min_sq = to_number(section, key, value);
                } else if (key == "sigma_max_sq") {
                    cfg.uncertainty.sigma_max_sq = to_number(section, key, value);
                } else if (key == "dimension") {
                    cfg.uncertainty.dimension = to_count(section, key, value);
                } else {
                    throw ParseError("[uncertainty] unknown key '" + key + "'");
                }
            } else if (section == "grid") {
                gexp_grid& g = cfg.grid;
                if (key == "t_steps") g.t_steps = to_count(section, key, value);
                else if (key == "t_start") g.t_start = to_number(section, key, value);
                else if (key == "t_end") g.t_end = to_number(section, key, value);
                else if (key == "x_min") g.x_min = to_number(section, key, value);
                else if (key == "x_max") g.x_max = to_number(section, key, value);
                else if (key == "x_steps") g.x_steps = to_count(section, key, value);
                else if (key == "vol_levels") g.vol_levels = to_count(section, key, value);
                else throw ParseError("[grid] unknown key '" + key + "'");
            } else if (section == "run") {
                if (!kRunKeys.count(key)) throw ParseError("[run] unknown key '" + key + "'");
                if (key == "seed") {
                    cfg.seed = to_count(section, key, value);
                } else if (key == "levels") {
                    cfg.levels = to_count(section, key, value);
                } else {
                    cfg.run[key] = value;
                }
            } else if (section == "tolerances") {
                if (!cfg.tolerances.count(key)) throw ParseError("[tolerances] unknown key '" + key + "'");
                cfg.tolerances[key] = to_number(section, key, value);
            } else {
                throw ParseError("config: unknown section [" + section + "]");
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::optional<double> closed_form(const std::string& payoff, double clamp, double param, const gexp_uncertainty& u,
                                  double horizon) {
    // Clamped payoffs have no simple closed form.
    if (clamp > 0.0 && payoff != "const") return std::nullopt;
    const double pi = 3.14159265358979323846;
    const double hi = std::sqrt(u.sigma_max_sq * horizon);
    const double lo = std::sqrt(u.sigma_min_sq * horizon);
    if (payoff == "x2") return hi * hi;
    if (payoff == "neg-x2") return -lo * lo;
    if (payoff == "call") return hi / std::sqrt(2.0 * pi);
    if (payoff == "neg-abs") return -lo * std::sqrt(2.0 / pi);
    if (payoff == "linear") return 0.0;
    if (payoff == "const") return clamp > 0.0 ? std::clamp(param, -clamp, clamp) : param;
    if (payoff == "cos" && u.sigma_min_sq == u.sigma_max_sq) return std::exp(-0.5 * hi * hi);
    return std::nullopt;
}

}  // namespace gexp_cli
