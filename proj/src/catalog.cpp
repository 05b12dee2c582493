#include <algorithm>
#include <cmath>

#include "gexp/model.hpp"

namespace gexp {

namespace {

Coefficient constant_coef(double c) {
    return [c](double, double, double) { return c; };
}

Generator zero_generator() {
    return [](double, double, double, std::span<const double>, double) { return 0.0; };
}

double clamp_sym(double v, double m) { return std::clamp(v, -m, m); }

std::vector<double> uniform_controls(double lo, double hi, std::size_t count) {
    if (count == 0) fail(ErrorCode::invalid_argument, "control grid needs at least one point");
    if (count == 1) return {0.5 * (lo + hi)};
    std::vector<double> out(count);
    for (std::size_t j = 0; j < count; ++j) {
        out[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

double positive(const Params& params, const std::string& key, double fallback) {
    const double v = params.number(key, fallback);
    if (!std::isfinite(v) || !(v > 0.0)) fail(ErrorCode::invalid_argument, "parameter '" + key + "' must be positive");
    return v;
}

std::size_t count_param(const Params& params, const std::string& key, std::size_t fallback) {
    const double v = params.number(key, static_cast<double>(fallback));
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e6) {
        fail(ErrorCode::invalid_argument, "parameter '" + key + "' must be a positive integer");
    }
    return static_cast<std::size_t>(v);
}

ControlProblem scalar_shell(std::string name, double horizon) {
    ControlProblem p;
    p.name = std::move(name);
    p.horizon = horizon;
    p.b = constant_coef(0.0);
    p.h = {constant_coef(0.0)};
    p.sigma = {constant_coef(1.0)};
    p.f = zero_generator();
    p.g = {zero_generator()};
    p.controls = {0.0};
    return p;
}

void attach_payoff(ControlProblem& p, const Payoff& payoff) {
    p.phi = payoff.fn;
    p.phi_label = payoff.label;
    p.terminal_bound = payoff.bound;
}

ControlProblem pure_gbm(const Params& params) {
    params.expect_only({"T", "M", "payoff", "value", "sigma"});
    ControlProblem p = scalar_shell("pure-gbm", positive(params, "T", 1.0));
    const double sigma = params.number("sigma", 1.0);
    if (!std::isfinite(sigma)) fail(ErrorCode::invalid_argument, "sigma must be finite");
    p.sigma = {constant_coef(sigma)};
    const Payoff payoff = make_payoff(params.text("payoff", "x2"), positive(params, "M", 100.0),
                                      params.number("value", 0.0));
    attach_payoff(p, payoff);
    p.lipschitz = std::max(1.0, payoff.lipschitz);
    return p;
}

ControlProblem drift_control(const Params& params) {
    params.expect_only({"T", "M", "sigma", "controls"});
    ControlProblem p = scalar_shell("drift-control", positive(params, "T", 1.0));
    const double sigma = params.number("sigma", 0.1);
    if (!std::isfinite(sigma) || sigma < 0.0) fail(ErrorCode::invalid_argument, "sigma must be >= 0");
    p.b = [](double, double, double v) { return v; };
    p.sigma = {constant_coef(sigma)};
    p.controls = uniform_controls(-1.0, 1.0, count_param(params, "controls", 11));
    const double m = positive(params, "M", 3.0);
    attach_payoff(p, make_payoff("clamp", m));
    p.lipschitz = 1.0;
    return p;
}

ControlProblem linear_generator(const Params& params) {
    params.expect_only({"T", "M", "c0", "c1", "sigma", "payoff", "value", "ybound"});
    ControlProblem p = scalar_shell("linear-generator", positive(params, "T", 1.0));
    const double c0 = params.number("c0", 0.1);
    const double c1 = params.number("c1", 0.1);
    const double sigma = params.number("sigma", 1.0);
    const double ybound = positive(params, "ybound", 100.0);
    if (!std::isfinite(c0) || !std::isfinite(c1) || !std::isfinite(sigma)) {
        fail(ErrorCode::invalid_argument, "linear-generator coefficients must be finite");
    }
    p.sigma = {constant_coef(sigma)};
    // Bounded in y through the clamp; exactly c0 + c1*y for |y| <= ybound.
    p.f = [c0, c1, ybound](double, double, double y, std::span<const double>, double) {
        return c0 + c1 * clamp_sym(y, ybound);
    };
    const Payoff payoff = make_payoff(params.text("payoff", "clamp"), positive(params, "M", 1.0),
                                      params.number("value", 0.0));
    attach_payoff(p, payoff);
    p.lipschitz = std::max({1.0, std::abs(c1), payoff.lipschitz});
    return p;
}

ControlProblem quadratic_cell(const Params& params) {
    params.expect_only({"T", "M", "sign", "sigma", "controls", "drift"});
    ControlProblem p = scalar_shell("quadratic-cell", positive(params, "T", 1.0));
    const double sign = params.number("sign", 1.0);
    if (sign != 1.0 && sign != -1.0) fail(ErrorCode::invalid_argument, "sign must be +1 or -1");
    const double sigma = params.number("sigma", 1.0);
    const double drift = params.number("drift", 0.5);
    if (!std::isfinite(sigma) || !std::isfinite(drift) || drift < 0.0) {
        fail(ErrorCode::invalid_argument, "quadratic-cell sigma/drift invalid");
    }
    p.sigma = {constant_coef(sigma)};
    p.b = [](double, double, double v) { return v; };
    p.controls = uniform_controls(-drift, drift, count_param(params, "controls", 3));
    const double m = positive(params, "M", 4.0);
    const Payoff payoff = make_payoff(sign > 0.0 ? "x2" : "neg-x2", m);
    attach_payoff(p, payoff);
    p.lipschitz = std::max(1.0, payoff.lipschitz);
    return p;
}

ControlProblem full_coupled(const Params& params) {
    params.expect_only({"T", "M", "kappa", "controls", "ybound", "zbound"});
    ControlProblem p = scalar_shell("full-coupled", positive(params, "T", 1.0));
    const double kappa = params.number("kappa", 0.3);
    const double ybound = positive(params, "ybound", 100.0);
    const double zbound = positive(params, "zbound", 100.0);
    if (!std::isfinite(kappa) || std::abs(kappa) > 0.9) {
        fail(ErrorCode::invalid_argument, "kappa must satisfy |kappa| <= 0.9");
    }
    // Drift stays positive and the quadratic-variation drift nonnegative for
    // every control, so the effective drift b + h*gamma never changes sign.
    p.b = [](double, double x, double v) { return 0.5 + 0.3 * v + 0.1 * std::sin(x); };
    p.h = {[](double, double x, double v) { return 0.1 + 0.05 * std::cos(x) + 0.05 * v; }};
    p.sigma = {[](double, double x, double) { return 1.0 + 0.2 * std::sin(x); }};
    p.f = [ybound, zbound](double, double x, double y, std::span<const double> z, double) {
        return 0.2 * std::cos(x) - 0.1 * clamp_sym(y, ybound) + 0.1 * clamp_sym(z[0], zbound);
    };
    p.g = {[kappa, zbound](double, double, double, std::span<const double> z, double) {
        return kappa * clamp_sym(z[0], zbound);
    }};
    p.controls = uniform_controls(-1.0, 1.0, count_param(params, "controls", 3));
    attach_payoff(p, make_payoff("tanh", positive(params, "M", 1.0)));
    p.lipschitz = std::max(1.0, 0.1 + std::abs(kappa) + 0.2);
    return p;
}

}  // namespace

ControlProblem catalog_problem(std::string_view name, const Params& params) {
    if (name == "pure-gbm") return pure_gbm(params);
    if (name == "drift-control") return drift_control(params);
    if (name == "linear-generator") return linear_generator(params);
    if (name == "quadratic-cell") return quadratic_cell(params);
    if (name == "full-coupled") return full_coupled(params);
    fail(ErrorCode::unknown_name, "unknown catalog problem '" + std::string(name) + "'");
}

std::vector<std::string> catalog_names() {
    return {"pure-gbm", "drift-control", "linear-generator", "quadratic-cell", "full-coupled"};
}

}  // namespace gexp
