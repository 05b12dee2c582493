#pragma once

// Value function of the controlled G-BSDE problem by backward dynamic
// programming over the finite control set, plus the DPP and regularity checks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gexp/gbsde.hpp"
#include "gexp/lattice.hpp"
#include "gexp/model.hpp"

namespace gexp {

enum class FieldSource { dpp, hjb };

struct ValueField {
    GridSpec grid;
    std::vector<Layer> u;                  // u[k][i], k = 0..t_steps
    std::vector<std::uint16_t> control;    // (k, i) -> argmax control index, k < t_steps
    std::vector<double> controls;          // control values indexed by `control`
    FieldSource source = FieldSource::dpp;
    std::string problem;

    std::size_t nodes() const noexcept { return grid.nodes(); }
    std::size_t control_index(std::size_t k, std::size_t i) const { return control[k * nodes() + i]; }
    double control_value(std::size_t k, std::size_t i) const { return controls[control_index(k, i)]; }

    /// The recorded argmax as a Markov feedback control (nearest node in x).
    FeedbackControl feedback() const;
};

/// Nodes at least this many cells from either boundary count as interior.
inline constexpr std::size_t kInteriorMargin = 3;

struct DppOptions {
    std::size_t threads = 1;
};

/// J(t_k, x_i; control): the G-BSDE value with terminal phi(X_T) rooted at
/// (t_step, x_index).
double cost_functional(const ControlProblem& p, const FeedbackControl& control, const VolatilityLattice& lattice,
                       std::size_t t_step, std::size_t x_index);

/// G_{t, t+delta}[eta] under the constant control v, with eta given at layer
/// from_step + delta_steps. Returns the layer at from_step.
Layer backward_semigroup_step(const ControlProblem& p, double v, const VolatilityLattice& lattice,
                              std::span<const double> eta, std::size_t from_step, std::size_t delta_steps);

/// u[N] = phi; u[k](i) = max_v of the one-step semigroup applied to u[k+1].
/// Ties go to the smallest control index.
ValueField value_function(const ControlProblem& p, const VolatilityLattice& lattice, const DppOptions& options = {});

struct DppResidual {
    std::vector<std::size_t> deltas;
    std::vector<double> residuals;  // per delta, max over interior nodes and steps
    double max_residual = 0.0;
};

/// For every delta (in steps), compares u(t, x) with the sup over constant
/// controls of G_{t, t+delta}[u(t + delta, .)] on interior nodes.
DppResidual dpp_consistency_check(const ControlProblem& p, const VolatilityLattice& lattice, const ValueField& field,
                                  std::span<const std::size_t> deltas, const DppOptions& options = {});

struct RegularityReport {
    double lipschitz_x = 0.0;  // max |u[k][i+1] - u[k][i]| / dx
    double holder_t = 0.0;     // max |u[k+1][i] - u[k][i]| / sqrt(dt)
    double growth = 0.0;       // max |u| / (1 + |x|)
};

/// Empirical moduli over interior nodes.
RegularityReport regularity_report(const ValueField& field);

}  // namespace gexp
