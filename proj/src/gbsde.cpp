#include "gexp/gbsde.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bsde_step.hpp"
#include "parallel.hpp"

namespace gexp {

double BsdeSolution::widest_gap(std::size_t k, std::size_t i) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < level_count(); ++j) worst = std::min(worst, gap(k, i, j));
    return worst;
}

BsdeSolution solve_gbsde(const ControlProblem& p, const FeedbackControl& control, const VolatilityLattice& lattice,
                         std::span<const double> terminal, const BsdeOptions& options, std::size_t from_step,
                         std::string terminal_label) {
    p.require_scalar();
    const GridSpec& grid = lattice.grid();
    if (terminal.size() != grid.nodes()) fail(ErrorCode::size_mismatch, "terminal array does not match grid");
    if (from_step > grid.t_steps) fail(ErrorCode::invalid_argument, "from_step beyond the final step");
    for (double v : terminal) {
        if (!std::isfinite(v)) fail(ErrorCode::non_finite, "terminal data is not finite");
    }

    BsdeSolution sol;
    sol.grid = grid;
    sol.levels = lattice.levels();
    sol.terminal_label = std::move(terminal_label);
    sol.from_step = from_step;
    const std::size_t n = grid.nodes();
    const std::size_t m = sol.levels.size();
    const std::size_t steps = grid.t_steps;
    sol.y.assign(steps + 1, Layer{});
    sol.z.assign(steps, Layer{});
    sol.y[steps].assign(terminal.begin(), terminal.end());
    sol.star.assign(steps * n, 0);
    sol.gaps.assign(steps * n * m, 0.0);
    sol.transitions.assign(steps * n * m, Transition{});

    for (std::size_t k = steps; k-- > from_step;) {
        const double t = grid.t(k);
        const Layer& next = sol.y[k + 1];
        Layer& cur = sol.y[k];
        Layer& zk = sol.z[k];
        cur.assign(n, 0.0);
        zk.assign(n, 0.0);
        detail::parallel_for(n, options.threads, [&](std::size_t i) {
            const double v = control(k, grid.x(i));
            const std::size_t base = (k * n + i) * m;
            std::span<double> cand(sol.gaps.data() + base, m);
            std::span<Transition> kern(sol.transitions.data() + base, m);
            const detail::NodeStep step =
                detail::bsde_node_step(p, grid, sol.levels, t, i, v, next, options, cand, kern);
            cur[i] = step.y;
            zk[i] = step.z;
            sol.star[k * n + i] = static_cast<std::uint16_t>(step.star);
            for (double& c : cand) c -= step.y;
        });
    }
    return sol;
}

ComparisonReport comparison_check(const ControlProblem& p1, const ControlProblem& p2, const FeedbackControl& control,
                                  const VolatilityLattice& lattice, std::span<const double> terminal1,
                                  std::span<const double> terminal2, std::size_t samples, std::uint64_t seed) {
    p1.require_scalar();
    p2.require_scalar();
    if (terminal1.size() != terminal2.size()) fail(ErrorCode::size_mismatch, "terminal arrays differ in size");
    for (std::size_t i = 0; i < terminal1.size(); ++i) {
        if (terminal1[i] < terminal2[i]) fail(ErrorCode::precondition, "terminal ordering violated");
    }
    const GridSpec& grid = lattice.grid();
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double range = std::max(p1.sample_yz_range, p2.sample_yz_range);
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = uni(grid.t_start, grid.t_end);
        const double x = uni(grid.x_min, grid.x_max);
        const double y = uni(-range, range);
        const double z = uni(-range, range);
        const double v = control(static_cast<std::size_t>(uni(0.0, static_cast<double>(grid.t_steps))), x);
        if (p1.drift(t, x, v) != p2.drift(t, x, v) || p1.qv_drift(t, x, v) != p2.qv_drift(t, x, v) ||
            p1.vol(t, x, v) != p2.vol(t, x, v)) {
            fail(ErrorCode::precondition, "comparison requires identical forward coefficients");
        }
        if (p1.driver(t, x, y, z, v) < p2.driver(t, x, y, z, v)) fail(ErrorCode::precondition, "f1 >= f2 violated");
        if (p1.qv_driver(t, x, y, z, v) < p2.qv_driver(t, x, y, z, v)) {
            fail(ErrorCode::precondition, "g1 >= g2 violated");
        }
    }

    const BsdeSolution s1 = solve_gbsde(p1, control, lattice, terminal1);
    const BsdeSolution s2 = solve_gbsde(p2, control, lattice, terminal2);
    ComparisonReport report;
    report.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s1.y.size(); ++k) {
        for (std::size_t i = 0; i < s1.y[k].size(); ++i) {
            const double gap = s1.y[k][i] - s2.y[k][i];
            if (gap < report.min_gap) {
                report.min_gap = gap;
                report.step = k;
                report.node = i;
            }
        }
    }
    report.passed = report.min_gap >= -1e-12;
    return report;
}

KMartingaleReport k_martingale_check(const BsdeSolution& sol, const VolatilityLattice& lattice) {
    if (sol.nodes() != lattice.nodes() || sol.grid.t_steps != lattice.steps() ||
        sol.level_count() != lattice.levels().size()) {
        fail(ErrorCode::size_mismatch, "solution was not produced on this lattice");
    }
    KMartingaleReport report;
    report.k0 = sol.k0;
    report.max_increment = -std::numeric_limits<double>::infinity();
    const std::size_t n = sol.nodes();
    const std::size_t m = sol.level_count();

    // W_k(i) = max_gamma (Delta K_k(i, gamma) + E_gamma[W_{k+1}](i)), W_N = 0,
    // i.e. the conditional G-expectation of the remaining K increments.
    Layer w(n, 0.0);
    Layer w_prev(n, 0.0);
    for (std::size_t k = sol.grid.t_steps; k-- > sol.from_step;) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double inc = sol.gap(k, i, j);
                report.max_increment = std::max(report.max_increment, inc);
                const double cand = inc + expect(sol.transition(k, i, j), w, i);
                if (j == 0 || cand > best) best = cand;
            }
            w_prev[i] = best;
            report.martingale_residual = std::max(report.martingale_residual, std::abs(best));
        }
        std::swap(w, w_prev);
    }
    if (!std::isfinite(report.max_increment)) report.max_increment = 0.0;
    return report;
}

}  // namespace gexp
