#pragma once

// Forward-in-time explicit solver for d_t u - G(D^2 u) = 0, u(0, .) = phi.
// This PDE clock runs forward from the initial payoff; every other solver in
// the library marches backward from a terminal condition.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gexp/model.hpp"

namespace gexp {

struct HeatField {
    GridSpec grid;                         // t_start = 0, t_end = PDE horizon
    std::vector<std::vector<double>> u;    // u[k][i] = u(t_k, x_i), k = 0..t_steps
    std::string payoff_label;
};

/// Explicit monotone marching with central second differences; boundary nodes
/// keep a zero second difference. Requires d = 1 and the CFL bound.
HeatField solve_g_heat(const GFunction& g, const std::function<double(double)>& phi, double t_end,
                       const GridSpec& grid, std::string payoff_label = {});

/// u(1, 0): the G-normal expectation E[phi(X)].
double g_normal_expectation(const GFunction& g, const std::function<double(double)>& phi, const GridSpec& grid);

/// Linear interpolation of a node layer at x; throws if x lies outside the grid.
double interpolate(const GridSpec& grid, std::span<const double> layer, double x);

}  // namespace gexp
