#include <algorithm>
#include <cmath>
#include <limits>

#include "gexp/model.hpp"

namespace gexp {

namespace {

double clamp_to(double v, double m) { return std::isfinite(m) ? std::clamp(v, -m, m) : v; }

}  // namespace

Payoff make_payoff(std::string_view name, double m, double param) {
    if (std::isfinite(m) && !(m > 0.0)) fail(ErrorCode::invalid_argument, "payoff clamp bound must be positive");
    const bool clamped = std::isfinite(m);
    const double inf = std::numeric_limits<double>::infinity();

    Payoff p;
    p.label = std::string(name);
    p.bound = clamped ? m : inf;
    if (name == "x2") {
        p.fn = [m](double x) { return clamp_to(x * x, m); };
        p.lipschitz = clamped ? 2.0 * std::sqrt(m) : inf;
    } else if (name == "neg-x2") {
        p.fn = [m](double x) { return clamp_to(-x * x, m); };
        p.lipschitz = clamped ? 2.0 * std::sqrt(m) : inf;
    } else if (name == "call") {
        p.fn = [m](double x) { return clamp_to(std::max(x, 0.0), m); };
    } else if (name == "neg-abs") {
        p.fn = [m](double x) { return clamp_to(-std::abs(x), m); };
    } else if (name == "linear") {
        p.fn = [m](double x) { return clamp_to(x, m); };
    } else if (name == "const") {
        p.fn = [c = clamp_to(param, m)](double) { return c; };
        p.lipschitz = 0.0;
        p.bound = std::abs(clamp_to(param, m));
    } else if (name == "clamp") {
        const double bound = clamped ? m : (param > 0.0 ? param : 1.0);
        p.fn = [bound](double x) { return std::clamp(x, -bound, bound); };
        p.bound = bound;
    } else if (name == "tanh") {
        const double scale = clamped ? m : (param > 0.0 ? param : 1.0);
        p.fn = [scale](double x) { return scale * std::tanh(x / scale); };
        p.bound = scale;
    } else if (name == "cos") {
        p.fn = [m](double x) { return clamp_to(std::cos(x), m); };
        p.bound = clamped ? std::min(m, 1.0) : 1.0;
    } else {
        fail(ErrorCode::unknown_name, "unknown payoff '" + std::string(name) + "'");
    }
    return p;
}

std::vector<std::string> payoff_names() {
    return {"x2", "neg-x2", "call", "neg-abs", "linear", "const", "clamp", "tanh", "cos"};
}

}  // namespace gexp
