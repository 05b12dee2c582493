#pragma once

// G-Brownian motion as an adversarial-volatility trinomial chain on a shared
// spatial grid, plus forward Monte Carlo of controlled G-SDEs under explicit
// volatility scenarios.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gexp/model.hpp"

namespace gexp {

using Layer = std::vector<double>;

/// One-step move probabilities for increments {-dx, 0, +dx}.
struct Transition {
    double down = 0.0;
    double mid = 1.0;
    double up = 0.0;
};

/// Locally consistent kernel for an increment with mean `drift*dt` and variance
/// `diffusion*dt` (plus upwind numerical diffusion |drift|*dx*dt when drift != 0).
/// Throws cfl_violation when the middle probability would be negative.
Transition upwind_transition(double drift, double diffusion, double dt, double dx);

/// E[v(X_{k+1}) | X_k = x_i] under `p`. Boundary nodes read a ghost value
/// obtained by linear extrapolation, i.e. zero curvature at the edges.
inline double expect(const Transition& p, std::span<const double> v, std::size_t i) {
    const std::size_t n = v.size();
    const double c = v[i];
    const double lo = i == 0 ? 2.0 * c - v[1] : v[i - 1];
    const double hi = i + 1 == n ? 2.0 * c - v[n - 2] : v[i + 1];
    return c + p.down * (lo - c) + p.up * (hi - c);
}

class VolatilityLattice {
public:
    VolatilityLattice(GridSpec grid, UncertaintySet uncertainty);

    const GridSpec& grid() const noexcept { return grid_; }
    const UncertaintySet& uncertainty() const noexcept { return uncertainty_; }
    const std::vector<double>& levels() const noexcept { return levels_; }
    /// Pure G-Brownian kernel at level j: up = down = gamma*dt/(2 dx^2).
    const Transition& kernel(std::size_t j) const { return kernels_.at(j); }
    std::size_t nodes() const noexcept { return grid_.nodes(); }
    std::size_t steps() const noexcept { return grid_.t_steps; }

private:
    GridSpec grid_;
    UncertaintySet uncertainty_;
    std::vector<double> levels_;
    std::vector<Transition> kernels_;
};

/// Backward sup-recursion V_k(i) = max_gamma E_gamma[V_{k+1}](i) from `to_step`
/// (data `terminal`) down to `from_step`. Element 0 of the result is layer
/// `from_step`, the last element is the terminal layer.
std::vector<Layer> conditional_g_expectation(const VolatilityLattice& lattice, std::span<const double> terminal,
                                             std::size_t from_step, std::size_t to_step);

/// Value at (t_0, x = 0) of the sup-recursion from the final step to step 0.
double lattice_expectation(const VolatilityLattice& lattice, std::span<const double> terminal);

/// max_i |E_s[E_t[xi]] - E_s[xi]| for terminal data at the final step.
double tower_check(const VolatilityLattice& lattice, std::span<const double> terminal, std::size_t s_step,
                   std::size_t t_step);

// ---------------------------------------------------------------------------
// Scenarios and paths

/// Piecewise-constant volatility path, optionally in state-feedback form.
struct VolatilityScenario {
    std::string label;
    std::size_t steps = 0;
    std::vector<double> levels;                           // used when feedback is empty
    std::function<double(std::size_t, double)> feedback;  // gamma(k, x)

    double level(std::size_t k, double x) const { return feedback ? feedback(k, x) : levels[k]; }

    static VolatilityScenario constant(double gamma, std::size_t steps, std::string label = {});
    static VolatilityScenario piecewise(std::vector<double> levels, std::string label = {});
};

using FeedbackControl = std::function<double(std::size_t step, double x)>;

FeedbackControl constant_control(double v);

struct PathPoint {
    double t = 0.0;
    double x = 0.0;   // controlled state X
    double b = 0.0;   // driving G-Brownian motion B
    double qv = 0.0;  // quadratic variation <B>
};

struct PathBundle {
    std::vector<std::vector<PathPoint>> paths;
    std::vector<double> gammas;  // per (path, step) level, row-major
    std::string scenario_label;
    std::string control_label;
    std::uint64_t seed = 0;
    double dt = 0.0;
};

/// Euler scheme X += b dt + h gamma dt + sigma sqrt(gamma) dW, dW ~ N(0, dt),
/// with B and <B> accumulated alongside. Path j draws from a generator seeded
/// with seed + j, so results do not depend on evaluation order.
PathBundle simulate_gsde(const ControlProblem& p, const UncertaintySet& uncertainty,
                         const VolatilityScenario& scenario, const FeedbackControl& control, double x0,
                         std::size_t n_paths, std::uint64_t seed, std::string control_label = {});

using PathFunctional = std::function<double(std::span<const PathPoint>)>;

struct WorstCase {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t scenario = 0;
};

/// Max over scenarios of the Monte Carlo mean of `payoff`. Over a finite
/// scenario family this is a lower bound on the lattice G-expectation.
WorstCase worst_case_over_scenarios(const ControlProblem& p, const UncertaintySet& uncertainty,
                                    const PathFunctional& payoff, std::span<const VolatilityScenario> scenarios,
                                    const FeedbackControl& control, double x0, std::size_t n_paths,
                                    std::uint64_t seed);

}  // namespace gexp
