#include "gexp/gexp.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <new>
#include <string>
#include <variant>

#include "gexp/dpp.hpp"
#include "gexp/gbsde.hpp"
#include "gexp/gheat.hpp"
#include "gexp/hjb.hpp"
#include "gexp/io.hpp"
#include "gexp/lattice.hpp"

struct gexp_problem {
    gexp::ControlProblem problem;
};

struct gexp_field {
    std::variant<gexp::ValueField, gexp::HeatField> data;

    const gexp::GridSpec& grid() const {
        return std::visit([](const auto& f) -> const gexp::GridSpec& { return f.grid; }, data);
    }
    const std::vector<std::vector<double>>& layers() const {
        return std::visit([](const auto& f) -> const std::vector<std::vector<double>>& { return f.u; }, data);
    }
};

struct gexp_bsde {
    gexp::VolatilityLattice lattice;
    gexp::BsdeSolution solution;
};

struct gexp_paths {
    gexp::PathBundle bundle;
};

namespace {

thread_local std::string last_error;

gexp_status to_status(gexp::ErrorCode code) {
    switch (code) {
        case gexp::ErrorCode::invalid_argument: return GEXP_INVALID_ARGUMENT;
        case gexp::ErrorCode::non_symmetric: return GEXP_NON_SYMMETRIC;
        case gexp::ErrorCode::non_finite: return GEXP_NON_FINITE;
        case gexp::ErrorCode::cfl_violation: return GEXP_CFL_VIOLATION;
        case gexp::ErrorCode::unknown_name: return GEXP_UNKNOWN_NAME;
        case gexp::ErrorCode::size_mismatch: return GEXP_SIZE_MISMATCH;
        case gexp::ErrorCode::precondition: return GEXP_PRECONDITION;
        case gexp::ErrorCode::io: return GEXP_IO;
    }
    return GEXP_INTERNAL;
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
gexp_status guarded(Fn&& fn) {
    try {
        last_error.clear();
        fn();
        return GEXP_OK;
    } catch (const gexp::Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return GEXP_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return GEXP_INTERNAL;
    }
}

template <class T>
const T& deref(const T* p, const char* what) {
    if (!p) gexp::fail(gexp::ErrorCode::invalid_argument, std::string(what) + " is null");
    return *p;
}

template <class T>
T& out_ref(T* p, const char* what) {
    if (!p) gexp::fail(gexp::ErrorCode::invalid_argument, std::string(what) + " is null");
    return *p;
}

gexp::UncertaintySet to_cpp(const gexp_uncertainty* u) {
    const auto& r = deref(u, "uncertainty");
    return gexp::UncertaintySet::make(r.sigma_min_sq, r.sigma_max_sq, r.dimension);
}

gexp::GridSpec to_cpp(const gexp_grid* g) {
    const auto& r = deref(g, "grid");
    gexp::GridSpec out;
    out.t_steps = r.t_steps;
    out.t_start = r.t_start;
    out.t_end = r.t_end;
    out.x_min = r.x_min;
    out.x_max = r.x_max;
    out.x_steps = r.x_steps;
    out.vol_levels = r.vol_levels;
    return out;
}

gexp_grid to_c(const gexp::GridSpec& g) {
    return gexp_grid{g.t_steps, g.t_start, g.t_end, g.x_min, g.x_max, g.x_steps, g.vol_levels};
}

gexp::Payoff to_cpp(const gexp_payoff* p) {
    const auto& r = deref(p, "payoff");
    if (!r.name) gexp::fail(gexp::ErrorCode::invalid_argument, "payoff name is null");
    const double m = r.clamp > 0.0 ? r.clamp : std::numeric_limits<double>::infinity();
    return gexp::make_payoff(r.name, m, r.param);
}

std::string path_arg(const char* file) {
    if (!file) gexp::fail(gexp::ErrorCode::invalid_argument, "file path is null");
    return file;
}

gexp::TestFunction to_cpp(const gexp_test_function* t) {
    const auto& r = deref(t, "test function");
    return gexp::TestFunction{r.t0, r.x0, r.c0, r.c1, r.c2, r.ct};
}

const gexp::ValueField& value_field(const gexp_field* f) {
    const auto* v = std::get_if<gexp::ValueField>(&deref(f, "field").data);
    if (!v) gexp::fail(gexp::ErrorCode::precondition, "operation needs a value field");
    return *v;
}

}  // namespace

extern "C" {

const char* gexp_last_error(void) { return last_error.c_str(); }

const char* gexp_status_name(gexp_status status) {
    switch (status) {
        case GEXP_OK: return "ok";
        case GEXP_INVALID_ARGUMENT: return "invalid_argument";
        case GEXP_NON_SYMMETRIC: return "non_symmetric";
        case GEXP_NON_FINITE: return "non_finite";
        case GEXP_CFL_VIOLATION: return "cfl_violation";
        case GEXP_UNKNOWN_NAME: return "unknown_name";
        case GEXP_SIZE_MISMATCH: return "size_mismatch";
        case GEXP_PRECONDITION: return "precondition";
        case GEXP_IO: return "io";
        case GEXP_INTERNAL: return "internal";
    }
    return "unknown";
}

gexp_status gexp_eval_g(const gexp_uncertainty* u, const double* a, size_t len, double* out) {
    return guarded([&] {
        if (!a && len) gexp::fail(gexp::ErrorCode::invalid_argument, "matrix is null");
        const gexp::GFunction g(to_cpp(u));
        out_ref(out, "out") = gexp::eval_G(g, std::span<const double>(a, len));
    });
}

gexp_status gexp_grid_check(const gexp_uncertainty* u, const gexp_grid* grid) {
    return guarded([&] { to_cpp(grid).validate(to_cpp(u)); });
}

gexp_status gexp_grid_refine(const gexp_grid* in, gexp_grid* out) {
    return guarded([&] { out_ref(out, "out") = to_c(gexp::refine(to_cpp(in))); });
}

gexp_status gexp_grid_refine_time(const gexp_grid* in, gexp_grid* out) {
    return guarded([&] { out_ref(out, "out") = to_c(gexp::refine_time(to_cpp(in))); });
}

gexp_status gexp_problem_create(const char* name, const char* const* keys, const char* const* values, size_t count,
                                gexp_problem** out) {
    return guarded([&] {
        out_ref(out, "out") = nullptr;
        if (!name) gexp::fail(gexp::ErrorCode::invalid_argument, "problem name is null");
        if (count && (!keys || !values)) gexp::fail(gexp::ErrorCode::invalid_argument, "parameter arrays are null");
        gexp::Params params;
        for (size_t j = 0; j < count; ++j) {
            if (!keys[j] || !values[j]) gexp::fail(gexp::ErrorCode::invalid_argument, "parameter entry is null");
            params.set(keys[j], std::string(values[j]));
        }
        *out = new gexp_problem{gexp::catalog_problem(name, params)};
    });
}

void gexp_problem_destroy(gexp_problem* p) { delete p; }

gexp_status gexp_problem_controls(const gexp_problem* p, double* out, size_t capacity, size_t* count) {
    return guarded([&] {
        const auto& c = deref(p, "problem").problem.controls;
        out_ref(count, "count") = c.size();
        if (out) std::copy_n(c.begin(), std::min(capacity, c.size()), out);
    });
}

gexp_status gexp_problem_terminal(const gexp_problem* p, double x, double* out) {
    return guarded([&] { out_ref(out, "out") = deref(p, "problem").problem.phi(x); });
}

gexp_status gexp_problem_validate(const gexp_problem* p, size_t samples, uint64_t seed, gexp_check* checks,
                                  size_t capacity, size_t* count) {
    return guarded([&] {
        const gexp::ValidationReport report = gexp::validate_problem(deref(p, "problem").problem, samples, seed);
        out_ref(count, "count") = report.checks.size();
        for (size_t j = 0; checks && j < std::min(capacity, report.checks.size()); ++j) {
            const auto& c = report.checks[j];
            gexp_check rec{};
            std::strncpy(rec.name, c.name.c_str(), sizeof rec.name - 1);
            rec.passed = c.passed ? 1 : 0;
            rec.worst = c.worst;
            checks[j] = rec;
        }
    });
}

gexp_status gexp_gheat_solve(const gexp_uncertainty* u, const gexp_payoff* payoff, const gexp_grid* grid,
                             gexp_field** out) {
    return guarded([&] {
        out_ref(out, "out") = nullptr;
        const gexp::Payoff ph = to_cpp(payoff);
        const gexp::GridSpec g = to_cpp(grid);
        *out = new gexp_field{gexp::solve_g_heat(gexp::GFunction(to_cpp(u)), ph.fn, g.t_end - g.t_start, g, ph.label)};
    });
}

gexp_status gexp_gheat_value(const gexp_field* f, double x, double* out) {
    return guarded([&] {
        const auto& field = deref(f, "field");
        out_ref(out, "out") = gexp::interpolate(field.grid(), field.layers().back(), x);
    });
}

gexp_status gexp_lattice_expectation(const gexp_uncertainty* u, const gexp_grid* grid, const gexp_payoff* payoff,
                                     double* out) {
    return guarded([&] {
        const gexp::VolatilityLattice lattice(to_cpp(grid), to_cpp(u));
        const auto terminal = gexp::sample_on_grid(lattice.grid(), to_cpp(payoff).fn);
        out_ref(out, "out") = gexp::lattice_expectation(lattice, terminal);
    });
}

gexp_status gexp_simulate(const gexp_problem* p, const gexp_uncertainty* u, const double* levels, size_t steps,
                          double control, double x0, size_t n_paths, uint64_t seed, gexp_paths** out) {
    return guarded([&] {
        out_ref(out, "out") = nullptr;
        if (!levels && steps) gexp::fail(gexp::ErrorCode::invalid_argument, "levels are null");
        std::vector<double> lv(levels, levels + steps);
        const bool flat = !lv.empty() && std::all_of(lv.begin(), lv.end(), [&](double g) { return g == lv.front(); });
        const auto scenario = flat ? gexp::VolatilityScenario::constant(lv.front(), steps)
                                   : gexp::VolatilityScenario::piecewise(std::move(lv));
        auto bundle = gexp::simulate_gsde(deref(p, "problem").problem, to_cpp(u), scenario,
                                          gexp::constant_control(control), x0, n_paths, seed,
                                          "constant(" + gexp::format_number(control) + ")");
        *out = new gexp_paths{std::move(bundle)};
    });
}

void gexp_paths_destroy(gexp_paths* paths) { delete paths; }

gexp_status gexp_paths_terminal(const gexp_paths* paths, size_t path, double* x, double* b, double* qv) {
    return guarded([&] {
        const auto& all = deref(paths, "paths").bundle.paths;
        if (path >= all.size()) gexp::fail(gexp::ErrorCode::invalid_argument, "path index out of range");
        const gexp::PathPoint& pt = all[path].back();
        if (x) *x = pt.x;
        if (b) *b = pt.b;
        if (qv) *qv = pt.qv;
    });
}

gexp_status gexp_paths_write_csv(const gexp_paths* paths, const char* file) {
    return guarded([&] { gexp::write_paths_csv(path_arg(file), deref(paths, "paths").bundle); });
}

gexp_status gexp_worst_case(const gexp_problem* p, const gexp_uncertainty* u, size_t levels, size_t steps,
                            const gexp_payoff* payoff, double control, double x0, size_t n_paths, uint64_t seed,
                            double* value, double* std_error, size_t* scenario) {
    return guarded([&] {
        const gexp::UncertaintySet unc = to_cpp(u);
        gexp::GridSpec g;
        g.vol_levels = levels;
        std::vector<gexp::VolatilityScenario> scenarios;
        for (double gamma : g.levels(unc)) {
            scenarios.push_back(gexp::VolatilityScenario::constant(gamma, steps));
        }
        const auto fn = to_cpp(payoff).fn;
        const gexp::PathFunctional functional = [fn](std::span<const gexp::PathPoint> path) {
            return fn(path.back().x);
        };
        const gexp::WorstCase wc = gexp::worst_case_over_scenarios(deref(p, "problem").problem, unc, functional,
                                                                   scenarios, gexp::constant_control(control), x0,
                                                                   n_paths, seed);
        out_ref(value, "value") = wc.value;
        if (std_error) *std_error = wc.std_error;
        if (scenario) *scenario = wc.scenario;
    });
}

gexp_status gexp_bsde_solve(const gexp_problem* p, const gexp_uncertainty* u, const gexp_grid* grid, double control,
                            int picard, gexp_bsde** out) {
    return guarded([&] {
        out_ref(out, "out") = nullptr;
        const auto& problem = deref(p, "problem").problem;
        gexp::VolatilityLattice lattice(to_cpp(grid), to_cpp(u));
        const auto terminal = gexp::sample_on_grid(lattice.grid(), problem.phi);
        gexp::BsdeOptions opt;
        opt.picard = picard != 0;
        auto sol = gexp::solve_gbsde(problem, gexp::constant_control(control), lattice, terminal, opt, 0,
                                     problem.phi_label);
        *out = new gexp_bsde{std::move(lattice), std::move(sol)};
    });
}

void gexp_bsde_destroy(gexp_bsde* b) { delete b; }

gexp_status gexp_bsde_root(const gexp_bsde* b, double x, double* y) {
    return guarded([&] {
        const auto& sol = deref(b, "bsde").solution;
        out_ref(y, "y") = gexp::interpolate(sol.grid, sol.y[sol.from_step], x);
    });
}

gexp_status gexp_bsde_k_check(const gexp_bsde* b, double* k0, double* max_increment, double* residual) {
    return guarded([&] {
        const auto& h = deref(b, "bsde");
        const gexp::KMartingaleReport r = gexp::k_martingale_check(h.solution, h.lattice);
        if (k0) *k0 = r.k0;
        if (max_increment) *max_increment = r.max_increment;
        if (residual) *residual = r.martingale_residual;
    });
}

gexp_status gexp_bsde_write_csv(const gexp_bsde* b, const char* file) {
    return guarded([&] { gexp::write_bsde_csv(path_arg(file), deref(b, "bsde").solution); });
}

gexp_status gexp_value_function(const gexp_problem* p, const gexp_uncertainty* u, const gexp_grid* grid,
                                size_t threads, gexp_field** out) {
    return guarded([&] {
        out_ref(out, "out") = nullptr;
        const gexp::VolatilityLattice lattice(to_cpp(grid), to_cpp(u));
        *out = new gexp_field{gexp::value_function(deref(p, "problem").problem, lattice, {threads})};
    });
}

gexp_status gexp_hjb_solve(const gexp_problem* p, const gexp_uncertainty* u, const gexp_grid* grid, size_t threads,
                           gexp_field** out) {
    return guarded([&] {
        out_ref(out, "out") = nullptr;
        *out = new gexp_field{
            gexp::solve_hjb(deref(p, "problem").problem, gexp::GFunction(to_cpp(u)), to_cpp(grid), {threads})};
    });
}

void gexp_field_destroy(gexp_field* f) { delete f; }

gexp_status gexp_field_grid(const gexp_field* f, gexp_grid* out) {
    return guarded([&] { out_ref(out, "out") = to_c(deref(f, "field").grid()); });
}

gexp_status gexp_field_value(const gexp_field* f, size_t k, size_t i, double* out) {
    return guarded([&] {
        const auto& layers = deref(f, "field").layers();
        if (k >= layers.size() || i >= layers[k].size()) {
            gexp::fail(gexp::ErrorCode::invalid_argument, "field index out of range");
        }
        out_ref(out, "out") = layers[k][i];
    });
}

gexp_status gexp_field_interpolate(const gexp_field* f, size_t k, double x, double* out) {
    return guarded([&] {
        const auto& field = deref(f, "field");
        if (k >= field.layers().size()) gexp::fail(gexp::ErrorCode::invalid_argument, "layer index out of range");
        out_ref(out, "out") = gexp::interpolate(field.grid(), field.layers()[k], x);
    });
}

gexp_status gexp_field_write_csv(const gexp_field* f, const char* file) {
    return guarded([&] {
        const std::string path = path_arg(file);
        const auto& data = deref(f, "field").data;
        if (const auto* v = std::get_if<gexp::ValueField>(&data)) {
            gexp::write_field_csv(path, *v);
        } else {
            gexp::write_heat_csv(path, std::get<gexp::HeatField>(data));
        }
    });
}

gexp_status gexp_field_distance(const gexp_field* a, const gexp_field* b, size_t margin, double* out) {
    return guarded([&] {
        const auto& la = deref(a, "field").layers();
        const auto& lb = deref(b, "field").layers();
        if (la.size() != lb.size() || la.front().size() != lb.front().size()) {
            gexp::fail(gexp::ErrorCode::size_mismatch, "fields live on different grids");
        }
        double worst = 0.0;
        for (size_t k = 0; k < la.size(); ++k) {
            for (size_t i = margin; i + margin < la[k].size(); ++i) worst = std::max(worst, std::abs(la[k][i] - lb[k][i]));
        }
        out_ref(out, "out") = worst;
    });
}

gexp_status gexp_field_identical(const gexp_field* a, const gexp_field* b, int* out) {
    return guarded([&] {
        const auto& fa = value_field(a);
        const auto& fb = value_field(b);
        bool same = fa.control == fb.control && fa.u.size() == fb.u.size();
        for (size_t k = 0; same && k < fa.u.size(); ++k) {
            same = fa.u[k].size() == fb.u[k].size() &&
                   std::memcmp(fa.u[k].data(), fb.u[k].data(), fa.u[k].size() * sizeof(double)) == 0;
        }
        out_ref(out, "out") = same ? 1 : 0;
    });
}

gexp_status gexp_dpp_residual(const gexp_problem* p, const gexp_uncertainty* u, const gexp_field* f,
                              const size_t* deltas, size_t count, size_t threads, double* residuals) {
    return guarded([&] {
        const auto& field = value_field(f);
        if (!deltas && count) gexp::fail(gexp::ErrorCode::invalid_argument, "deltas are null");
        if (!residuals && count) gexp::fail(gexp::ErrorCode::invalid_argument, "residuals are null");
        const gexp::VolatilityLattice lattice(field.grid, to_cpp(u));
        const auto r = gexp::dpp_consistency_check(deref(p, "problem").problem, lattice, field,
                                                   std::span<const size_t>(deltas, count), {threads});
        std::copy(r.residuals.begin(), r.residuals.end(), residuals);
    });
}

gexp_status gexp_regularity_report(const gexp_field* f, gexp_regularity* out) {
    return guarded([&] {
        const gexp::RegularityReport r = gexp::regularity_report(value_field(f));
        out_ref(out, "out") = gexp_regularity{r.lipschitz_x, r.holder_t, r.growth};
    });
}

gexp_status gexp_viscosity_residual(const gexp_field* f, const gexp_problem* p, const gexp_uncertainty* u,
                                    double* max_abs, double* mean_abs) {
    return guarded([&] {
        const auto r = gexp::viscosity_residual(value_field(f), deref(p, "problem").problem,
                                                gexp::GFunction(to_cpp(u)));
        out_ref(max_abs, "max_abs") = r.max_abs;
        if (mean_abs) *mean_abs = r.mean_abs;
    });
}

gexp_status gexp_eval_F0(const gexp_problem* p, const gexp_uncertainty* u, const gexp_test_function* phi, double t,
                         double x, double y, double z, double* out) {
    return guarded([&] {
        out_ref(out, "out") =
            gexp::eval_F0(deref(p, "problem").problem, gexp::GFunction(to_cpp(u)), to_cpp(phi), t, x, y, z);
    });
}

gexp_status gexp_local_ode_probe(const gexp_problem* p, const gexp_uncertainty* u, const gexp_test_function* phi,
                                 double t, double x, double delta, double* out) {
    return guarded([&] {
        out_ref(out, "out") = gexp::local_ode_probe(deref(p, "problem").problem, gexp::GFunction(to_cpp(u)),
                                                    to_cpp(phi), t, x, delta);
    });
}

gexp_status gexp_local_comparison(const gexp_problem* p, const gexp_uncertainty* u, const gexp_test_function* phi,
                                  double t, double x, double delta, double control, size_t steps, size_t levels,
                                  double* y1, double* y2, double* semigroup) {
    return guarded([&] {
        const auto r = gexp::local_comparison(deref(p, "problem").problem, to_cpp(u), to_cpp(phi), t, x, delta,
                                              control, steps, levels);
        if (y1) *y1 = r.y1;
        if (y2) *y2 = r.y2;
        if (semigroup) *semigroup = r.semigroup;
    });
}

gexp_status gexp_loglog_slope(const double* h, const double* error, size_t count, double* out) {
    return guarded([&] {
        if ((!h || !error) && count) gexp::fail(gexp::ErrorCode::invalid_argument, "arrays are null");
        out_ref(out, "out") =
            gexp::loglog_slope(std::vector<double>(h, h + count), std::vector<double>(error, error + count));
    });
}

}  // extern "C"
