#include "gexp/gheat.hpp"

#include <cmath>

namespace gexp {

HeatField solve_g_heat(const GFunction& g, const std::function<double(double)>& phi, double t_end,
                       const GridSpec& grid, std::string payoff_label) {
    if (g.uncertainty().dimension != 1) fail(ErrorCode::precondition, "G-heat solver supports d = 1 only");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) fail(ErrorCode::invalid_argument, "t_end must be positive");
    HeatField field;
    field.grid = grid;
    field.grid.t_start = 0.0;
    field.grid.t_end = t_end;
    field.grid.validate(g.uncertainty());
    field.payoff_label = std::move(payoff_label);

    const GridSpec& gr = field.grid;
    const std::size_t n = gr.nodes();
    const double dt = gr.dt();
    const double inv_dx2 = 1.0 / (gr.dx() * gr.dx());

    field.u.assign(gr.t_steps + 1, std::vector<double>(n));
    field.u[0] = sample_on_grid(gr, phi);
    for (std::size_t k = 0; k < gr.t_steps; ++k) {
        const auto& cur = field.u[k];
        auto& next = field.u[k + 1];
        next.front() = cur.front();
        next.back() = cur.back();
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double d2 = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) * inv_dx2;
            next[i] = cur[i] + dt * g(d2);
        }
    }
    return field;
}

double g_normal_expectation(const GFunction& g, const std::function<double(double)>& phi, const GridSpec& grid) {
    const HeatField field = solve_g_heat(g, phi, 1.0, grid);
    return interpolate(field.grid, field.u.back(), 0.0);
}

double interpolate(const GridSpec& grid, std::span<const double> layer, double x) {
    if (layer.size() != grid.nodes()) fail(ErrorCode::size_mismatch, "layer does not match grid");
    if (x < grid.x_min || x > grid.x_max) fail(ErrorCode::invalid_argument, "interpolation point outside grid");
    const double pos = (x - grid.x_min) / grid.dx();
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= grid.x_steps) i = grid.x_steps - 1;
    const double w = pos - static_cast<double>(i);
    if (w == 0.0) return layer[i];
    return (1.0 - w) * layer[i] + w * layer[i + 1];
}

}  // namespace gexp
