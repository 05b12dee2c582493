#include "gexp/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gexp/gbsde.hpp"
#include "parallel.hpp"

namespace gexp {

namespace {

// Half of H with explicit generator arguments: 1/2 sigma^2 D^2 + h D + g(y, z).
// Both H (y = u, z = sigma Du) and F2 (y + phi, z + sigma Dphi) go through here,
// so the factor 2 between them lives in exactly one place.
double half_H(const ControlProblem& p, double v, double t, double x, double du, double d2u, double y_arg,
              double z_arg) {
    const double s = p.vol(t, x, v);
    return 0.5 * s * s * d2u + du * p.qv_drift(t, x, v) + p.qv_driver(t, x, y_arg, z_arg, v);
}

void require_finite(std::initializer_list<double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) fail(ErrorCode::non_finite, std::string(what) + " received a non-finite input");
    }
}

struct NodeRate {
    double increment = 0.0;  // dt * F_h at the node
    std::size_t control = 0;
};

// dt * F_h at node i of `next` (time t). For each control the volatility
// candidates are the interval endpoints and, when it lies inside, the level
// where the effective drift b + h*gamma changes sign; the candidate value is
// piecewise linear in gamma with that single kink, so this is the exact sup.
NodeRate node_rate(const ControlProblem& p, const UncertaintySet& unc, const GridSpec& grid, double t,
                   std::size_t i, std::span<const double> next) {
    const double x = grid.x(i);
    const double dt = grid.dt();
    const double dx = grid.dx();
    const std::size_t n = next.size();
    const double c = next[i];
    const double lo = i == 0 ? 2.0 * c - next[1] : next[i - 1];
    const double hi = i + 1 == n ? 2.0 * c - next[n - 2] : next[i + 1];
    const double du = (hi - lo) / (2.0 * dx);

    NodeRate best;
    bool first = true;
    for (std::size_t a = 0; a < p.controls.size(); ++a) {
        const double v = p.controls[a];
        const double b = p.drift(t, x, v);
        const double h = p.qv_drift(t, x, v);
        const double s = p.vol(t, x, v);
        const double z = s * du;
        const double fv = p.driver(t, x, c, z, v);
        const double gv = p.qv_driver(t, x, c, z, v);
        double gammas[3] = {unc.sigma_min_sq, unc.sigma_max_sq, 0.0};
        std::size_t count = unc.degenerate() ? 1 : 2;
        if (h != 0.0) {
            const double kink = -b / h;
            if (kink > unc.sigma_min_sq && kink < unc.sigma_max_sq) gammas[count++] = kink;
        }
        for (std::size_t j = 0; j < count; ++j) {
            const double gamma = gammas[j];
            const Transition tr = upwind_transition(b + h * gamma, s * s * gamma, dt, dx);
            const double inc = tr.down * (lo - c) + tr.up * (hi - c) + fv * dt + gv * gamma * dt;
            if (!std::isfinite(inc)) fail(ErrorCode::non_finite, "HJB operator is not finite");
            if (first || inc > best.increment) {
                best = NodeRate{inc, a};
                first = false;
            }
        }
    }
    return best;
}

void check_scheme_cfl(const ControlProblem& p, const UncertaintySet& unc, const GridSpec& grid) {
    const double dt = grid.dt();
    const double dx = grid.dx();
    double worst = 0.0;
    for (double t : {grid.t_start, grid.t_end}) {
        for (std::size_t i = 0; i < grid.nodes(); ++i) {
            const double x = grid.x(i);
            for (double v : p.controls) {
                const double s = p.vol(t, x, v);
                const double b = p.drift(t, x, v);
                const double h = p.qv_drift(t, x, v);
                const double mu = std::max(std::abs(b + h * unc.sigma_min_sq), std::abs(b + h * unc.sigma_max_sq));
                worst = std::max(worst, dt * (unc.sigma_max_sq * s * s / (dx * dx) + mu / dx + p.lipschitz));
            }
        }
    }
    if (worst > 1.0) {
        std::ostringstream os;
        os << "HJB scheme CFL number " << worst << " exceeds 1";
        fail(ErrorCode::cfl_violation, os.str());
    }
}

}  // namespace

double assemble_H(const ControlProblem& p, double v, const ProbeInputs& in) {
    require_finite({in.t, in.x, in.u, in.du, in.d2u}, "assemble_H");
    const double z = p.vol(in.t, in.x, v) * in.du;
    return 2.0 * half_H(p, v, in.t, in.x, in.du, in.d2u, in.u, z);
}

FValue eval_F(const ControlProblem& p, const GFunction& g, const ProbeInputs& in) {
    p.require_scalar();
    FValue out;
    for (std::size_t a = 0; a < p.controls.size(); ++a) {
        const double v = p.controls[a];
        const double z = p.vol(in.t, in.x, v) * in.du;
        const double val =
            g(assemble_H(p, v, in)) + p.drift(in.t, in.x, v) * in.du + p.driver(in.t, in.x, in.u, z, v);
        if (a == 0 || val > out.value) out = FValue{val, a};
    }
    return out;
}

ValueField solve_hjb(const ControlProblem& p, const GFunction& g, const GridSpec& grid, const HjbOptions& options) {
    p.require_scalar();
    const UncertaintySet& unc = g.uncertainty();
    if (unc.dimension != 1) fail(ErrorCode::precondition, "HJB solver supports d = 1 only");
    if (p.controls.empty()) fail(ErrorCode::invalid_argument, "control set is empty");
    grid.validate(unc);
    check_scheme_cfl(p, unc, grid);

    const std::size_t n = grid.nodes();
    const std::size_t steps = grid.t_steps;
    ValueField field;
    field.grid = grid;
    field.controls = p.controls;
    field.source = FieldSource::hjb;
    field.problem = p.name;
    field.u.assign(steps + 1, Layer(n));
    field.u[steps] = sample_on_grid(grid, p.phi);
    field.control.assign(steps * n, 0);
    for (std::size_t k = steps; k-- > 0;) {
        const double t = grid.t(k);
        const Layer& next = field.u[k + 1];
        Layer& cur = field.u[k];
        detail::parallel_for(n, options.threads, [&](std::size_t i) {
            const NodeRate r = node_rate(p, unc, grid, t, i, next);
            cur[i] = next[i] + r.increment;
            field.control[k * n + i] = static_cast<std::uint16_t>(r.control);
        });
    }
    return field;
}

ViscosityResidual viscosity_residual(const ValueField& field, const ControlProblem& p, const GFunction& g) {
    p.require_scalar();
    const GridSpec& grid = field.grid;
    const std::size_t n = grid.nodes();
    const double dt = grid.dt();
    ViscosityResidual out;
    out.map.assign(grid.t_steps, std::vector<double>(n, 0.0));
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < grid.t_steps; ++k) {
        const Layer& next = field.u[k + 1];
        for (std::size_t i = kInteriorMargin; i + kInteriorMargin < n; ++i) {
            const NodeRate r = node_rate(p, g.uncertainty(), grid, grid.t(k), i, next);
            const double res = (next[i] - field.u[k][i] + r.increment) / dt;
            out.map[k][i] = res;
            out.max_abs = std::max(out.max_abs, std::abs(res));
            sum += std::abs(res);
            ++count;
        }
    }
    out.mean_abs = count ? sum / static_cast<double>(count) : 0.0;
    return out;
}

double F1(const ControlProblem& p, const TestFunction& phi, double r, double x, double y, double z, double v) {
    const double dphi = phi.dx(r, x);
    return phi.dt(r, x) + p.drift(r, x, v) * dphi +
           p.driver(r, x, y + phi.value(r, x), z + p.vol(r, x, v) * dphi, v);
}

double F2(const ControlProblem& p, const TestFunction& phi, double r, double x, double y, double z, double v) {
    const double dphi = phi.dx(r, x);
    return half_H(p, v, r, x, dphi, phi.dxx(r, x), y + phi.value(r, x), z + p.vol(r, x, v) * dphi);
}

double eval_F0(const ControlProblem& p, const GFunction& g, const TestFunction& phi, double t, double x, double y,
               double z) {
    p.require_scalar();
    double best = 0.0;
    for (std::size_t a = 0; a < p.controls.size(); ++a) {
        const double v = p.controls[a];
        const double val = F1(p, phi, t, x, y, z, v) + 2.0 * g(F2(p, phi, t, x, y, z, v));
        if (a == 0 || val > best) best = val;
    }
    return best;
}

OperatorProbe probe_operator(const ControlProblem& p, const GFunction& g, const TestFunction& phi, double t,
                             double x) {
    OperatorProbe probe;
    probe.t = t;
    probe.x = x;
    probe.phi = phi.value(t, x);
    probe.phi_t = phi.dt(t, x);
    probe.phi_x = phi.dx(t, x);
    probe.phi_xx = phi.dxx(t, x);
    const ProbeInputs in{t, x, probe.phi, probe.phi_x, probe.phi_xx};
    for (double v : p.controls) {
        probe.controls.push_back(
            ControlRecord{v, assemble_H(p, v, in), F1(p, phi, t, x, 0.0, 0.0, v), F2(p, phi, t, x, 0.0, 0.0, v)});
    }
    probe.F = eval_F(p, g, in).value;
    probe.F0 = eval_F0(p, g, phi, t, x, 0.0, 0.0);
    return probe;
}

double local_ode_probe(const ControlProblem& p, const GFunction& g, const TestFunction& phi, double t, double x,
                       double delta, std::size_t substeps) {
    if (!(delta >= 0.0) || substeps == 0) fail(ErrorCode::invalid_argument, "local_ode_probe needs delta >= 0");
    if (delta == 0.0) return 0.0;
    // Reversed clock tau = t + delta - s turns the terminal problem into dY/dtau = F0.
    auto rhs = [&](double tau, double y) { return eval_F0(p, g, phi, t + delta - tau, x, y, 0.0); };
    const double h = delta / static_cast<double>(substeps);
    double y = 0.0;
    for (std::size_t s = 0; s < substeps; ++s) {
        const double tau = static_cast<double>(s) * h;
        const double k1 = rhs(tau, y);
        const double k2 = rhs(tau + 0.5 * h, y + 0.5 * h * k1);
        const double k3 = rhs(tau + 0.5 * h, y + 0.5 * h * k2);
        const double k4 = rhs(tau + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

LocalComparison local_comparison(const ControlProblem& p, const UncertaintySet& u, const TestFunction& phi,
                                 double t, double x, double delta, double v, std::size_t steps, std::size_t levels) {
    p.require_scalar();
    if (!(delta > 0.0) || steps == 0) fail(ErrorCode::invalid_argument, "local comparison needs delta > 0");
    if (t + delta > p.horizon + 1e-12) fail(ErrorCode::invalid_argument, "delta extends beyond the horizon");

    double s_max = 1.0;
    for (int j = -20; j <= 20; ++j) s_max = std::max(s_max, std::abs(p.vol(t, x + 0.05 * j, v)));
    const double dt = delta / static_cast<double>(steps);
    const double dx = std::sqrt(u.sigma_max_sq * s_max * s_max * dt / 0.5);
    const std::size_t half = steps + 2;
    GridSpec grid;
    grid.t_steps = steps;
    grid.t_start = t;
    grid.t_end = t + delta;
    grid.x_min = x - static_cast<double>(half) * dx;
    grid.x_max = x + static_cast<double>(half) * dx;
    grid.x_steps = 2 * half;
    grid.vol_levels = levels;
    const VolatilityLattice lattice(grid, u);
    const FeedbackControl control = constant_control(v);

    ControlProblem moving = p;
    moving.f = [p, phi](double r, double xx, double y, std::span<const double> z, double vv) {
        return F1(p, phi, r, xx, y, z[0], vv);
    };
    moving.g = {[p, phi](double r, double xx, double y, std::span<const double> z, double vv) {
        return F2(p, phi, r, xx, y, z[0], vv);
    }};
    ControlProblem frozen = p;
    frozen.f = [p, phi, x](double r, double, double y, std::span<const double> z, double vv) {
        return F1(p, phi, r, x, y, z[0], vv);
    };
    frozen.g = {[p, phi, x](double r, double, double y, std::span<const double> z, double vv) {
        return F2(p, phi, r, x, y, z[0], vv);
    }};

    const std::vector<double> zero(grid.nodes(), 0.0);
    std::vector<double> terminal(grid.nodes());
    for (std::size_t i = 0; i < grid.nodes(); ++i) terminal[i] = phi.value(grid.t_end, grid.x(i));

    LocalComparison out;
    out.y1 = solve_gbsde(moving, control, lattice, zero).y[0][half];
    out.y2 = solve_gbsde(frozen, control, lattice, zero).y[0][half];
    out.semigroup = solve_gbsde(p, control, lattice, terminal).y[0][half] - phi.value(t, x);
    return out;
}

double loglog_slope(const std::vector<double>& h, const std::vector<double>& error) {
    if (h.size() != error.size() || h.size() < 2) fail(ErrorCode::invalid_argument, "slope fit needs >= 2 points");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0) || !(error[i] > 0.0)) fail(ErrorCode::invalid_argument, "slope fit needs positive data");
        const double lx = std::log(h[i]);
        const double ly = std::log(error[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(h.size());
    const double den = n * sxx - sx * sx;
    if (den == 0.0) fail(ErrorCode::invalid_argument, "slope fit needs distinct abscissae");
    return (n * sxy - sx * sy) / den;
}

}  // namespace gexp
