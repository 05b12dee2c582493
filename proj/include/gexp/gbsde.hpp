#pragma once

// Backward G-BSDE solver on the volatility lattice.
//
// At node (k, i) and for every level gamma the solver forms E_gamma[Y_{k+1}],
// the covariation estimate Z_gamma, and the candidate
//
//   Y^gamma = E_gamma[Y] + f(t, x, E_gamma[Y], Z_gamma, v) dt + g(...) gamma dt,
//
// then keeps Y_k = max_gamma Y^gamma. The per-level gaps Y^gamma - Y_k are the
// increments of the decreasing G-martingale K along a scenario that uses level
// gamma at this node; they vanish at the maximizing level.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gexp/lattice.hpp"
#include "gexp/model.hpp"

namespace gexp {

struct BsdeOptions {
    bool picard = false;  // iterate the y-argument of the generator to a fixed point
    int picard_max_iter = 5;
    double picard_tol = 1e-12;
    std::size_t threads = 1;
};

struct BsdeSolution {
    GridSpec grid;
    std::vector<double> levels;
    std::string terminal_label;
    std::size_t from_step = 0;  // first solved layer

    std::vector<Layer> y;  // k = 0..t_steps (layers below from_step are empty)
    std::vector<Layer> z;  // k = 0..t_steps-1
    std::vector<std::uint16_t> star;      // (k, i): maximizing level index
    std::vector<double> gaps;             // (k, i, j): Delta K_k(i, gamma_j) <= 0
    std::vector<Transition> transitions;  // (k, i, j): kernel used at the node
    double k0 = 0.0;                      // K_0, zero by construction

    std::size_t nodes() const noexcept { return grid.nodes(); }
    std::size_t level_count() const noexcept { return levels.size(); }
    double gap(std::size_t k, std::size_t i, std::size_t j) const {
        return gaps[(k * nodes() + i) * level_count() + j];
    }
    const Transition& transition(std::size_t k, std::size_t i, std::size_t j) const {
        return transitions[(k * nodes() + i) * level_count() + j];
    }
    std::size_t maximizer(std::size_t k, std::size_t i) const { return star[k * nodes() + i]; }
    /// Most negative per-level gap at a node: the spread between the best and
    /// the worst volatility level.
    double widest_gap(std::size_t k, std::size_t i) const;
};

/// Solves from the final step down to `from_step` with terminal data given on
/// the grid nodes.
BsdeSolution solve_gbsde(const ControlProblem& p, const FeedbackControl& control, const VolatilityLattice& lattice,
                         std::span<const double> terminal, const BsdeOptions& options = {},
                         std::size_t from_step = 0, std::string terminal_label = {});

struct ComparisonReport {
    double min_gap = 0.0;  // min over solved nodes and steps of Y1 - Y2
    std::size_t step = 0;
    std::size_t node = 0;
    bool passed = false;   // min_gap >= -1e-12
};

/// Solves both equations and reports the node-wise ordering. Throws
/// precondition when terminal1 >= terminal2, f1 >= f2, g1 >= g2 or the shared
/// diffusion coefficients are violated on sampled arguments.
ComparisonReport comparison_check(const ControlProblem& p1, const ControlProblem& p2, const FeedbackControl& control,
                                  const VolatilityLattice& lattice, std::span<const double> terminal1,
                                  std::span<const double> terminal2, std::size_t samples = 500,
                                  std::uint64_t seed = 7);

struct KMartingaleReport {
    double k0 = 0.0;
    double max_increment = 0.0;         // max over (k, i, gamma) of Delta K; must be <= 0
    double martingale_residual = 0.0;   // max_i |E_k[sum of future Delta K]|
};

/// Checks that K is nonincreasing along every level and that the lattice
/// conditional G-expectation of its future increments vanishes at every node.
KMartingaleReport k_martingale_check(const BsdeSolution& sol, const VolatilityLattice& lattice);

}  // namespace gexp
