#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "gexp/model.hpp"

namespace gexp {

namespace {

// A sampled ratio may exceed the declared constant by at most 1%.
constexpr double kLipschitzSlack = 1.01;
constexpr double kContinuityStep = 1e-7;
constexpr double kContinuityTolerance = 1e-4;

struct Sampler {
    std::mt19937_64 rng;
    const ControlProblem& p;
    double v_lo;
    double v_hi;

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    double t() { return uniform(0.0, p.horizon); }
    double x() { return uniform(p.sample_x_min, p.sample_x_max); }
    double yz() { return uniform(-p.sample_yz_range, p.sample_yz_range); }
    double v() { return v_hi > v_lo ? uniform(v_lo, v_hi) : v_lo; }
    // Perturbation spanning several orders of magnitude so both local and
    // global Lipschitz behaviour is probed.
    double step(double range) { return uniform(-1.0, 1.0) * range * std::pow(10.0, uniform(-4.0, 0.0)); }
};

std::string describe(double worst, double bound) {
    std::ostringstream os;
    os << "worst sampled ratio " << worst << " vs declared " << bound;
    return os.str();
}

double coefficient_time_jump(const ControlProblem& p, double t, double t2, double x, double v) {
    double s = std::abs(p.b(t, x, v) - p.b(t2, x, v));
    for (const auto& c : p.h) s += std::abs(c(t, x, v) - c(t2, x, v));
    for (const auto& c : p.sigma) s += std::abs(c(t, x, v) - c(t2, x, v));
    return s;
}

double coefficient_increment(const ControlProblem& p, double t, double x, double v, double x2, double v2) {
    double s = std::abs(p.b(t, x, v) - p.b(t, x2, v2));
    for (const auto& c : p.h) s += std::abs(c(t, x, v) - c(t, x2, v2));
    for (const auto& c : p.sigma) s += std::abs(c(t, x, v) - c(t, x2, v2));
    return s;
}

double generator_increment(const ControlProblem& p, double t, double x, double y, std::span<const double> z, double v,
                           double x2, double y2, std::span<const double> z2, double v2) {
    double s = std::abs(p.f(t, x, y, z, v) - p.f(t, x2, y2, z2, v2));
    for (const auto& c : p.g) s += std::abs(c(t, x, y, z, v) - c(t, x2, y2, z2, v2));
    return s;
}

HypothesisCheck symmetry_check(std::string name, std::size_t d, const std::function<double(std::size_t, std::size_t)>& at_pair,
                               std::size_t samples, const std::function<void()>& resample) {
    HypothesisCheck c{std::move(name), true, 0.0, "symmetric on all samples"};
    for (std::size_t s = 0; s < samples; ++s) {
        resample();
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
                const double a = at_pair(i, j);
                const double b = at_pair(j, i);
                const double gap = std::abs(a - b);
                c.worst = std::max(c.worst, gap);
                if (gap > 1e-12 * (1.0 + std::abs(a))) c.passed = false;
            }
        }
    }
    if (!c.passed) {
        std::ostringstream os;
        os << "asymmetry up to " << c.worst;
        c.detail = os.str();
    }
    return c;
}

}  // namespace

bool ValidationReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
}

const HypothesisCheck* ValidationReport::find(std::string_view name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

ValidationReport validate_problem(const ControlProblem& p, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) fail(ErrorCode::invalid_argument, "validate_problem needs at least one sample");
    const std::size_t d = p.brownian_dim;
    if (!p.b || !p.f || !p.phi || p.h.size() != d * d || p.g.size() != d * d || p.sigma.size() != d ||
        p.controls.empty()) {
        fail(ErrorCode::invalid_argument, "problem '" + p.name + "' has inconsistent coefficient arrays");
    }
    const auto [vmin, vmax] = std::minmax_element(p.controls.begin(), p.controls.end());
    Sampler s{std::mt19937_64(seed), p, *vmin, *vmax};
    ValidationReport report;

    // Symmetry of h and g.
    {
        double t = 0, x = 0, v = 0, y = 0;
        std::vector<double> z(d);
        auto resample = [&] {
            t = s.t();
            x = s.x();
            v = s.v();
            y = s.yz();
            for (auto& zi : z) zi = s.yz();
        };
        report.checks.push_back(symmetry_check(
            "h-symmetric", d, [&](std::size_t i, std::size_t j) { return p.h[i * d + j](t, x, v); }, samples, resample));
        report.checks.push_back(symmetry_check(
            "g-symmetric", d, [&](std::size_t i, std::size_t j) { return p.g[i * d + j](t, x, y, z, v); }, samples,
            resample));
    }

    // Sampled modulus of continuity in t.
    {
        HypothesisCheck coef_t{"coefficients-continuous-t", true, 0.0, ""};
        HypothesisCheck gen_t{"generators-continuous-t", true, 0.0, ""};
        std::vector<double> z(d);
        for (std::size_t k = 0; k < samples; ++k) {
            const double t = s.uniform(0.0, std::max(0.0, p.horizon - kContinuityStep));
            const double x = s.x();
            const double v = s.v();
            const double y = s.yz();
            for (auto& zi : z) zi = s.yz();
            const double t2 = t + kContinuityStep;
            const double jump_a = coefficient_time_jump(p, t, t2, x, v);
            coef_t.worst = std::max(coef_t.worst, jump_a);
            double jump_g = std::abs(p.f(t2, x, y, z, v) - p.f(t, x, y, z, v));
            for (const auto& c : p.g) jump_g += std::abs(c(t2, x, y, z, v) - c(t, x, y, z, v));
            gen_t.worst = std::max(gen_t.worst, jump_g);
        }
        coef_t.passed = coef_t.worst <= kContinuityTolerance;
        gen_t.passed = gen_t.worst <= kContinuityTolerance;
        coef_t.detail = "max jump over dt=1e-7: " + std::to_string(coef_t.worst);
        gen_t.detail = "max jump over dt=1e-7: " + std::to_string(gen_t.worst);
        report.checks.push_back(coef_t);
        report.checks.push_back(gen_t);
    }

    // |b| + sum|h| + sum|sigma| increments <= L(|dx| + |dv|).
    {
        HypothesisCheck c{"coefficients-lipschitz", true, 0.0, ""};
        const double xr = p.sample_x_max - p.sample_x_min;
        const double vr = std::max(*vmax - *vmin, 0.0);
        for (std::size_t k = 0; k < samples; ++k) {
            const double t = s.t();
            const double x = s.x();
            const double v = s.v();
            const double x2 = x + s.step(xr);
            const double v2 = vr > 0 ? std::clamp(v + s.step(vr), *vmin, *vmax) : v;
            const double dist = std::abs(x - x2) + std::abs(v - v2);
            if (dist <= 0.0) continue;
            c.worst = std::max(c.worst, coefficient_increment(p, t, x, v, x2, v2) / dist);
        }
        c.passed = c.worst <= kLipschitzSlack * p.lipschitz;
        c.detail = describe(c.worst, p.lipschitz);
        report.checks.push_back(c);
    }

    // Lipschitz bounds for Phi and for the generators.
    {
        HypothesisCheck c{"terminal-lipschitz", true, 0.0, ""};
        const double xr = p.sample_x_max - p.sample_x_min;
        for (std::size_t k = 0; k < samples; ++k) {
            const double x = s.x();
            const double x2 = x + s.step(xr);
            const double dist = std::abs(x - x2);
            if (dist <= 0.0) continue;
            c.worst = std::max(c.worst, std::abs(p.phi(x) - p.phi(x2)) / dist);
        }
        c.passed = c.worst <= kLipschitzSlack * p.lipschitz;
        c.detail = describe(c.worst, p.lipschitz);
        report.checks.push_back(c);
    }
    {
        HypothesisCheck c{"generators-lipschitz", true, 0.0, ""};
        const double xr = p.sample_x_max - p.sample_x_min;
        const double yr = 2.0 * p.sample_yz_range;
        const double vr = std::max(*vmax - *vmin, 0.0);
        std::vector<double> z(d), z2(d);
        for (std::size_t k = 0; k < samples; ++k) {
            const double t = s.t();
            const double x = s.x();
            const double y = s.yz();
            const double v = s.v();
            for (auto& zi : z) zi = s.yz();
            const double x2 = x + s.step(xr);
            const double y2 = y + s.step(yr);
            double dist = std::abs(x - x2) + std::abs(y - y2);
            for (std::size_t i = 0; i < d; ++i) {
                z2[i] = z[i] + s.step(yr);
                dist += std::abs(z[i] - z2[i]);
            }
            const double v2 = vr > 0 ? std::clamp(v + s.step(vr), *vmin, *vmax) : v;
            dist += std::abs(v - v2);
            if (dist <= 0.0) continue;
            c.worst = std::max(c.worst, generator_increment(p, t, x, y, z, v, x2, y2, z2, v2) / dist);
        }
        c.passed = c.worst <= kLipschitzSlack * p.lipschitz;
        c.detail = describe(c.worst, p.lipschitz);
        report.checks.push_back(c);
    }

    // Boundedness of Phi, probed well beyond the sampling box.
    {
        HypothesisCheck c{"Phi-bounded", true, 0.0, ""};
        for (std::size_t k = 0; k < samples; ++k) {
            const double scale = std::pow(10.0, s.uniform(0.0, 6.0));
            const double x = s.uniform(-1.0, 1.0) * scale;
            const double value = p.phi(x);
            if (!std::isfinite(value)) {
                c.passed = false;
                c.worst = std::numeric_limits<double>::infinity();
                break;
            }
            c.worst = std::max(c.worst, std::abs(value));
        }
        if (!std::isfinite(p.terminal_bound) || c.worst > p.terminal_bound * (1.0 + 1e-12)) c.passed = false;
        std::ostringstream os;
        os << "max |Phi| sampled " << c.worst << " vs declared bound " << p.terminal_bound;
        c.detail = os.str();
        report.checks.push_back(c);
    }
    return report;
}

}  // namespace gexp
