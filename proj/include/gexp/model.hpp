#pragma once

// Domain types shared by every solver: the volatility uncertainty set and its
// G function, controlled-problem coefficients, grids, and the problem catalog.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gexp/error.hpp"

namespace gexp {

/// Isotropic volatility interval {gamma : sigma_min_sq*I <= gamma <= sigma_max_sq*I}.
struct UncertaintySet {
    double sigma_min_sq = 1.0;
    double sigma_max_sq = 1.0;
    std::size_t dimension = 1;

    /// Throws unless 0 < lo <= hi and d >= 1.
    static UncertaintySet make(double lo, double hi, std::size_t d = 1);

    bool degenerate() const noexcept { return sigma_min_sq == sigma_max_sq; }
    /// Ellipticity constant: G(A) - G(B) >= beta * tr(A - B) for A >= B.
    double beta() const noexcept { return 0.5 * sigma_min_sq; }
};

/// G(A) = 1/2 sup_{gamma in Gamma} tr(gamma A), closed form for the interval set.
class GFunction {
public:
    explicit GFunction(UncertaintySet u) : u_(u) {}

    const UncertaintySet& uncertainty() const noexcept { return u_; }

    /// Scalar case d = 1.
    double operator()(double a) const noexcept {
        return a >= 0.0 ? 0.5 * u_.sigma_max_sq * a : 0.5 * u_.sigma_min_sq * a;
    }

    /// Row-major symmetric d x d matrix, d = uncertainty().dimension.
    double operator()(std::span<const double> a) const;

private:
    UncertaintySet u_;
};

/// Free-function form; validates symmetry (1e-12) and finiteness.
double eval_G(const GFunction& g, std::span<const double> a);

using Coefficient = std::function<double(double t, double x, double v)>;
using Generator =
    std::function<double(double t, double x, double y, std::span<const double> z, double v)>;
using Terminal = std::function<double(double x)>;

/// Coefficients of a controlled G-SDE / G-BSDE pair with scalar state (n = 1)
/// driven by a d-dimensional G-Brownian motion. Arrays indexed by Brownian
/// components are row-major (h and g are d x d).
struct ControlProblem {
    std::string name;
    std::size_t state_dim = 1;
    std::size_t brownian_dim = 1;

    Coefficient b;
    std::vector<Coefficient> h;
    std::vector<Coefficient> sigma;
    Generator f;
    std::vector<Generator> g;
    Terminal phi;
    std::string phi_label;

    std::vector<double> controls;
    double horizon = 1.0;
    double lipschitz = 1.0;
    double terminal_bound = std::numeric_limits<double>::infinity();

    // Box sampled by validate_problem.
    double sample_x_min = -10.0;
    double sample_x_max = 10.0;
    double sample_yz_range = 10.0;

    // d = 1 conveniences used by the lattice and PDE engines.
    double drift(double t, double x, double v) const { return b(t, x, v); }
    double qv_drift(double t, double x, double v) const { return h[0](t, x, v); }
    double vol(double t, double x, double v) const { return sigma[0](t, x, v); }
    double driver(double t, double x, double y, double z, double v) const {
        return f(t, x, y, std::span<const double>(&z, 1), v);
    }
    double qv_driver(double t, double x, double y, double z, double v) const {
        return g[0](t, x, y, std::span<const double>(&z, 1), v);
    }

    /// Throws unless n = 1 and d = 1, which every numerical engine requires.
    void require_scalar() const;
};

/// Uniform time x space grid plus the number of discretized volatility levels.
struct GridSpec {
    std::size_t t_steps = 1000;
    double t_start = 0.0;
    double t_end = 1.0;
    double x_min = -6.0;
    double x_max = 6.0;
    std::size_t x_steps = 240;
    std::size_t vol_levels = 5;

    double dt() const noexcept { return (t_end - t_start) / static_cast<double>(t_steps); }
    double dx() const noexcept { return (x_max - x_min) / static_cast<double>(x_steps); }
    std::size_t nodes() const noexcept { return x_steps + 1; }
    double t(std::size_t k) const noexcept { return t_start + static_cast<double>(k) * dt(); }
    double x(std::size_t i) const noexcept { return x_min + static_cast<double>(i) * dx(); }

    /// Index of the node closest to x (clamped to the grid).
    std::size_t nearest(double x) const noexcept;

    /// Gamma_disc: vol_levels equally spaced values including both endpoints.
    /// A degenerate set yields a single level.
    std::vector<double> levels(const UncertaintySet& u) const;

    /// Structural checks plus sigma_max_sq * dt <= dx^2.
    void validate(const UncertaintySet& u) const;
};

/// Halve dt and dx^2 (dx -> dx/sqrt(2)) keeping the domain center and roughly the
/// same half-width, with an even cell count so the center remains a node.
GridSpec refine(const GridSpec& grid);

/// Halve dt only.
GridSpec refine_time(const GridSpec& grid);

/// String-valued parameter map with typed accessors; every key must be consumed.
class Params {
public:
    Params() = default;
    Params(std::initializer_list<std::pair<const std::string, std::string>> init) : values_(init) {}
    explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);

    double number(const std::string& key, double fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    /// Throws unknown_name when a key outside `allowed` is present.
    void expect_only(std::initializer_list<std::string_view> allowed) const;

private:
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Payoffs

struct Payoff {
    std::string label;
    std::function<double(double)> fn;
    double lipschitz = 1.0;  // on the clamped function
    double bound = std::numeric_limits<double>::infinity();

    double operator()(double x) const { return fn(x); }
};

/// Named payoffs: x2, neg-x2, call, neg-abs, linear, const, clamp, tanh, cos.
/// `clamp_bound` (M) clamps to [-M, M] when finite; `param` is the constant for
/// "const" and the scale for "clamp"/"tanh" when no clamp is requested.
Payoff make_payoff(std::string_view name, double clamp_bound = std::numeric_limits<double>::infinity(),
                   double param = 0.0);

std::vector<std::string> payoff_names();

/// Samples a payoff on the grid nodes; throws non_finite on NaN/inf samples.
std::vector<double> sample_on_grid(const GridSpec& grid, const std::function<double(double)>& fn);

// ---------------------------------------------------------------------------
// Catalog and hypothesis validation

/// pure-gbm, drift-control, linear-generator, quadratic-cell, full-coupled.
ControlProblem catalog_problem(std::string_view name, const Params& params = {});
std::vector<std::string> catalog_names();

struct HypothesisCheck {
    std::string name;
    bool passed = true;
    double worst = 0.0;  // worst sampled ratio (Lipschitz checks) or discrepancy
    std::string detail;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;

    bool all_passed() const;
    const HypothesisCheck* find(std::string_view name) const;
};

ValidationReport validate_problem(const ControlProblem& p, std::size_t samples,
                                  std::uint64_t seed = 20240601);

}  // namespace gexp
