#include "gexp/dpp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "bsde_step.hpp"
#include "parallel.hpp"

namespace gexp {

namespace {

Layer semigroup(const ControlProblem& p, double v, const VolatilityLattice& lattice, std::span<const double> eta,
                std::size_t from_step, std::size_t delta_steps, std::size_t threads) {
    const GridSpec& grid = lattice.grid();
    const BsdeOptions opt{};
    Layer next(eta.begin(), eta.end());
    Layer cur(next.size());
    for (std::size_t k = from_step + delta_steps; k-- > from_step;) {
        const double t = grid.t(k);
        detail::parallel_for(next.size(), threads, [&](std::size_t i) {
            cur[i] = detail::bsde_node_step(p, grid, lattice.levels(), t, i, v, next, opt).y;
        });
        std::swap(cur, next);
    }
    return next;
}

bool interior(std::size_t i, std::size_t n) { return i >= kInteriorMargin && i + kInteriorMargin < n; }

}  // namespace

FeedbackControl ValueField::feedback() const {
    auto g = std::make_shared<const GridSpec>(grid);
    auto idx = std::make_shared<const std::vector<std::uint16_t>>(control);
    auto vals = std::make_shared<const std::vector<double>>(controls);
    return [g, idx, vals](std::size_t k, double x) {
        const std::size_t kk = std::min(k, g->t_steps - 1);
        return (*vals)[(*idx)[kk * g->nodes() + g->nearest(x)]];
    };
}

double cost_functional(const ControlProblem& p, const FeedbackControl& control, const VolatilityLattice& lattice,
                       std::size_t t_step, std::size_t x_index) {
    const GridSpec& grid = lattice.grid();
    if (x_index >= grid.nodes() || t_step > grid.t_steps) fail(ErrorCode::invalid_argument, "root lies off the grid");
    const std::vector<double> terminal = sample_on_grid(grid, p.phi);
    const BsdeSolution sol = solve_gbsde(p, control, lattice, terminal, {}, t_step, p.phi_label);
    return sol.y[t_step][x_index];
}

Layer backward_semigroup_step(const ControlProblem& p, double v, const VolatilityLattice& lattice,
                              std::span<const double> eta, std::size_t from_step, std::size_t delta_steps) {
    p.require_scalar();
    if (eta.size() != lattice.nodes()) fail(ErrorCode::size_mismatch, "eta does not match the grid");
    if (from_step + delta_steps > lattice.steps()) {
        fail(ErrorCode::invalid_argument, "semigroup interval extends beyond the horizon");
    }
    return semigroup(p, v, lattice, eta, from_step, delta_steps, 1);
}

ValueField value_function(const ControlProblem& p, const VolatilityLattice& lattice, const DppOptions& options) {
    p.require_scalar();
    if (p.controls.empty()) fail(ErrorCode::invalid_argument, "control set is empty");
    if (p.controls.size() > 65535) fail(ErrorCode::invalid_argument, "control set too large");
    const GridSpec& grid = lattice.grid();
    const std::size_t n = grid.nodes();
    const std::size_t steps = grid.t_steps;

    ValueField field;
    field.grid = grid;
    field.controls = p.controls;
    field.source = FieldSource::dpp;
    field.problem = p.name;
    field.u.assign(steps + 1, Layer(n));
    field.u[steps] = sample_on_grid(grid, p.phi);
    field.control.assign(steps * n, 0);

    const BsdeOptions opt{};
    for (std::size_t k = steps; k-- > 0;) {
        const double t = grid.t(k);
        const Layer& next = field.u[k + 1];
        Layer& cur = field.u[k];
        detail::parallel_for(n, options.threads, [&](std::size_t i) {
            double best = 0.0;
            std::size_t arg = 0;
            for (std::size_t c = 0; c < p.controls.size(); ++c) {
                const double y = detail::bsde_node_step(p, grid, lattice.levels(), t, i, p.controls[c], next, opt).y;
                if (c == 0 || y > best) {
                    best = y;
                    arg = c;
                }
            }
            cur[i] = best;
            field.control[k * n + i] = static_cast<std::uint16_t>(arg);
        });
    }
    return field;
}

DppResidual dpp_consistency_check(const ControlProblem& p, const VolatilityLattice& lattice, const ValueField& field,
                                  std::span<const std::size_t> deltas, const DppOptions& options) {
    p.require_scalar();
    const GridSpec& grid = lattice.grid();
    if (field.grid.t_steps != grid.t_steps || field.nodes() != grid.nodes()) {
        fail(ErrorCode::size_mismatch, "field was not produced on this lattice");
    }
    const std::size_t n = grid.nodes();
    DppResidual out;
    for (std::size_t delta : deltas) {
        if (delta == 0 || delta > grid.t_steps) fail(ErrorCode::invalid_argument, "delta must lie in [1, t_steps]");
        double worst = 0.0;
        for (std::size_t k = 0; k + delta <= grid.t_steps; ++k) {
            Layer best;
            for (double v : p.controls) {
                Layer cand = semigroup(p, v, lattice, field.u[k + delta], k, delta, options.threads);
                if (best.empty()) {
                    best = std::move(cand);
                } else {
                    for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], cand[i]);
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (interior(i, n)) worst = std::max(worst, std::abs(best[i] - field.u[k][i]));
            }
        }
        out.deltas.push_back(delta);
        out.residuals.push_back(worst);
        out.max_residual = std::max(out.max_residual, worst);
    }
    return out;
}

RegularityReport regularity_report(const ValueField& field) {
    const GridSpec& grid = field.grid;
    const std::size_t n = grid.nodes();
    const double dx = grid.dx();
    const double sqrt_dt = std::sqrt(grid.dt());
    RegularityReport r;
    for (std::size_t k = 0; k < field.u.size(); ++k) {
        const Layer& u = field.u[k];
        for (std::size_t i = 0; i < n; ++i) {
            if (!interior(i, n)) continue;
            r.growth = std::max(r.growth, std::abs(u[i]) / (1.0 + std::abs(grid.x(i))));
            if (interior(i + 1, n)) r.lipschitz_x = std::max(r.lipschitz_x, std::abs(u[i + 1] - u[i]) / dx);
            if (k + 1 < field.u.size()) {
                r.holder_t = std::max(r.holder_t, std::abs(field.u[k + 1][i] - u[i]) / sqrt_dt);
            }
        }
    }
    return r;
}

}  // namespace gexp
