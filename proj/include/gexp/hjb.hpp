#pragma once

// The fully nonlinear operator
//
//   F(D^2u, Du, u, x, t) = max_v { G(H(v)) + b Du + f(t, x, u, sigma Du, v) },
//   H(v) = sigma^2 D^2u + 2 h Du + 2 g(t, x, u, sigma Du, v),
//
// an explicit monotone scheme for d_t u + F = 0, u(T) = phi, and the local
// machinery (F1, F2, F0, Y0) used to verify the viscosity property of the
// dynamic-programming value function.

#include <cstddef>
#include <functional>
#include <vector>

#include "gexp/dpp.hpp"
#include "gexp/model.hpp"

namespace gexp {

struct ProbeInputs {
    double t = 0.0;
    double x = 0.0;
    double u = 0.0;
    double du = 0.0;
    double d2u = 0.0;
};

/// H for the scalar case (a 1 x 1 matrix). Equals twice F2 at y = z = 0.
double assemble_H(const ControlProblem& p, double v, const ProbeInputs& in);

struct FValue {
    double value = 0.0;
    std::size_t control = 0;
};

FValue eval_F(const ControlProblem& p, const GFunction& g, const ProbeInputs& in);

struct HjbOptions {
    std::size_t threads = 1;
};

/// Backward marching u^k = u^{k+1} + dt F_h(u^{k+1}) with central second
/// differences and first differences upwinded per (control, volatility)
/// candidate. Throws cfl_violation when the scheme would not be monotone.
ValueField solve_hjb(const ControlProblem& p, const GFunction& g, const GridSpec& grid, const HjbOptions& options = {});

struct ViscosityResidual {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    std::vector<std::vector<double>> map;  // (u^{k+1} - u^k)/dt + F_h(u^{k+1}), zero off the interior
};

ViscosityResidual viscosity_residual(const ValueField& field, const ControlProblem& p, const GFunction& g);

// ---------------------------------------------------------------------------
// Local operators around a smooth test function

/// phi(t, x) = c0 + c1 (x - x0) + c2 (x - x0)^2 + ct (t - t0).
struct TestFunction {
    double t0 = 0.0;
    double x0 = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double ct = 0.0;

    double value(double t, double x) const { return c0 + c1 * (x - x0) + c2 * (x - x0) * (x - x0) + ct * (t - t0); }
    double dt(double, double) const { return ct; }
    double dx(double, double x) const { return c1 + 2.0 * c2 * (x - x0); }
    double dxx(double, double) const { return 2.0 * c2; }
};

double F1(const ControlProblem& p, const TestFunction& phi, double r, double x, double y, double z, double v);
double F2(const ControlProblem& p, const TestFunction& phi, double r, double x, double y, double z, double v);

/// max_v { F1 + 2 G(F2) }.
double eval_F0(const ControlProblem& p, const GFunction& g, const TestFunction& phi, double t, double x, double y,
               double z);

struct ControlRecord {
    double v = 0.0;
    double H = 0.0;
    double F1 = 0.0;
    double F2 = 0.0;
};

struct OperatorProbe {
    double t = 0.0;
    double x = 0.0;
    double phi = 0.0;
    double phi_t = 0.0;
    double phi_x = 0.0;
    double phi_xx = 0.0;
    std::vector<ControlRecord> controls;
    double F = 0.0;
    double F0 = 0.0;
};

OperatorProbe probe_operator(const ControlProblem& p, const GFunction& g, const TestFunction& phi, double t, double x);

/// Y0(t) for -dY0 = F0(s, x, Y0, 0) ds on [t, t + delta], Y0(t + delta) = 0,
/// by classical RK4 with `substeps` steps.
double local_ode_probe(const ControlProblem& p, const GFunction& g, const TestFunction& phi, double t, double x,
                       double delta, std::size_t substeps = 1000);

struct LocalComparison {
    double y1 = 0.0;        // local equation along the moving state
    double y2 = 0.0;        // same equation with coefficients frozen at x
    double semigroup = 0.0; // G_{t,t+delta}[phi(t+delta, X)] - phi(t, x)
};

/// Solves the two local equations on a lattice of `steps` steps over
/// [t, t + delta] under the constant control v.
LocalComparison local_comparison(const ControlProblem& p, const UncertaintySet& u, const TestFunction& phi,
                                 double t, double x, double delta, double v, std::size_t steps = 50,
                                 std::size_t levels = 5);

/// Least-squares slope of log(error) against log(h).
double loglog_slope(const std::vector<double>& h, const std::vector<double>& error);

}  // namespace gexp
