#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "gexp/gbsde.hpp"

namespace gexp::detail {

struct NodeStep {
    double y = 0.0;
    double z = 0.0;
    std::size_t star = 0;
};

// One backward G-BSDE step at node i of `next` (layer k+1) under control value
// v at time t = t_k. When `candidates` / `kernels` are non-empty they receive
// Y^gamma and the kernel for every level. Ties go to the smallest level index.
inline NodeStep bsde_node_step(const ControlProblem& p, const GridSpec& grid, std::span<const double> levels,
                               double t, std::size_t i, double v, std::span<const double> next,
                               const BsdeOptions& opt, std::span<double> candidates = {},
                               std::span<Transition> kernels = {}) {
    const double x = grid.x(i);
    const double dt = grid.dt();
    const double dx = grid.dx();
    const double drift = p.drift(t, x, v);
    const double qv_drift = p.qv_drift(t, x, v);
    const double vol = p.vol(t, x, v);

    const std::size_t n = next.size();
    const double c = next[i];
    const double lo = i == 0 ? 2.0 * c - next[1] : next[i - 1];
    const double hi = i + 1 == n ? 2.0 * c - next[n - 2] : next[i + 1];

    NodeStep best;
    for (std::size_t j = 0; j < levels.size(); ++j) {
        const double gamma = levels[j];
        const Transition tr = upwind_transition(drift + qv_drift * gamma, vol * vol * gamma, dt, dx);
        const double e = c + tr.down * (lo - c) + tr.up * (hi - c);

        // Z = sigma * Cov(Y, dX) / Var(dX); for the driftless unit-volatility
        // chain this is E[Y dB] / (gamma dt).
        const double mean_inc = (tr.up - tr.down) * dx;
        const double var = (tr.up + tr.down) * dx * dx - mean_inc * mean_inc;
        const double cov = dx * (tr.up * (hi - c) - tr.down * (lo - c)) - mean_inc * (e - c);
        const double z = var > 0.0 ? vol * cov / var : 0.0;

        double y = e + p.driver(t, x, e, z, v) * dt + p.qv_driver(t, x, e, z, v) * gamma * dt;
        if (opt.picard) {
            for (int it = 0; it < opt.picard_max_iter; ++it) {
                const double y_next =
                    e + p.driver(t, x, y, z, v) * dt + p.qv_driver(t, x, y, z, v) * gamma * dt;
                const double change = std::abs(y_next - y);
                y = y_next;
                if (change <= opt.picard_tol) break;
            }
        }
        if (!std::isfinite(y)) fail(ErrorCode::non_finite, "generator evaluation is not finite");
        if (!candidates.empty()) candidates[j] = y;
        if (!kernels.empty()) kernels[j] = tr;
        if (j == 0 || y > best.y) best = NodeStep{y, z, j};
    }
    return best;
}

}  // namespace gexp::detail
