#include "gexp/lattice.hpp"

#include "gexp/gheat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gexp {

Transition upwind_transition(double drift, double diffusion, double dt, double dx) {
    if (!std::isfinite(drift) || !std::isfinite(diffusion)) {
        fail(ErrorCode::non_finite, "transition coefficients are not finite");
    }
    const double half_diff = 0.5 * diffusion * dt / (dx * dx);
    Transition p;
    p.up = half_diff + std::max(drift, 0.0) * dt / dx;
    p.down = half_diff + std::max(-drift, 0.0) * dt / dx;
    p.mid = 1.0 - p.up - p.down;
    if (p.mid < 0.0) {
        if (p.mid < -1e-12) {
            std::ostringstream os;
            os << "CFL violated: move probability " << p.up + p.down << " exceeds 1 (drift " << drift
               << ", diffusion " << diffusion << ")";
            fail(ErrorCode::cfl_violation, os.str());
        }
        p.mid = 0.0;
    }
    return p;
}

VolatilityLattice::VolatilityLattice(GridSpec grid, UncertaintySet uncertainty)
    : grid_(grid), uncertainty_(uncertainty) {
    if (uncertainty_.dimension != 1) fail(ErrorCode::precondition, "lattice supports d = 1 only");
    grid_.validate(uncertainty_);
    levels_ = grid_.levels(uncertainty_);
    kernels_.reserve(levels_.size());
    for (double gamma : levels_) kernels_.push_back(upwind_transition(0.0, gamma, grid_.dt(), grid_.dx()));
}

std::vector<Layer> conditional_g_expectation(const VolatilityLattice& lattice, std::span<const double> terminal,
                                             std::size_t from_step, std::size_t to_step) {
    if (terminal.size() != lattice.nodes()) fail(ErrorCode::size_mismatch, "terminal array does not match grid");
    if (from_step > to_step || to_step > lattice.steps()) {
        fail(ErrorCode::invalid_argument, "conditional expectation needs from_step <= to_step <= t_steps");
    }
    const std::size_t n = lattice.nodes();
    const std::size_t m = lattice.levels().size();
    std::vector<Layer> out(to_step - from_step + 1, Layer(n));
    out.back().assign(terminal.begin(), terminal.end());
    for (std::size_t k = to_step; k-- > from_step;) {
        const Layer& next = out[k + 1 - from_step];
        Layer& cur = out[k - from_step];
        for (std::size_t i = 0; i < n; ++i) {
            double best = expect(lattice.kernel(0), next, i);
            for (std::size_t j = 1; j < m; ++j) best = std::max(best, expect(lattice.kernel(j), next, i));
            cur[i] = best;
        }
    }
    return out;
}

double lattice_expectation(const VolatilityLattice& lattice, std::span<const double> terminal) {
    const auto layers = conditional_g_expectation(lattice, terminal, 0, lattice.steps());
    return interpolate(lattice.grid(), layers.front(), 0.0);
}

double tower_check(const VolatilityLattice& lattice, std::span<const double> terminal, std::size_t s_step,
                   std::size_t t_step) {
    if (s_step >= t_step) fail(ErrorCode::invalid_argument, "tower_check needs s_step < t_step");
    const std::size_t last = lattice.steps();
    const auto inner = conditional_g_expectation(lattice, terminal, t_step, last);
    const auto nested = conditional_g_expectation(lattice, inner.front(), s_step, t_step);
    const auto direct = conditional_g_expectation(lattice, terminal, s_step, last);
    double worst = 0.0;
    for (std::size_t i = 0; i < lattice.nodes(); ++i) {
        worst = std::max(worst, std::abs(nested.front()[i] - direct.front()[i]));
    }
    return worst;
}

VolatilityScenario VolatilityScenario::constant(double gamma, std::size_t steps, std::string label) {
    VolatilityScenario s;
    if (label.empty()) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "constant(%.12g)", gamma);
        label = buf;
    }
    s.label = std::move(label);
    s.steps = steps;
    s.levels.assign(steps, gamma);
    return s;
}

VolatilityScenario VolatilityScenario::piecewise(std::vector<double> levels, std::string label) {
    VolatilityScenario s;
    s.label = label.empty() ? "piecewise" : std::move(label);
    s.steps = levels.size();
    s.levels = std::move(levels);
    return s;
}

FeedbackControl constant_control(double v) {
    return [v](std::size_t, double) { return v; };
}

}  // namespace gexp
