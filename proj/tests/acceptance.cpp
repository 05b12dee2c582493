// Acceptance run: one PASS/FAIL line per criterion at the published tolerances.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gexp/dpp.hpp"
#include "gexp/gbsde.hpp"
#include "gexp/gheat.hpp"
#include "gexp/hjb.hpp"
#include "gexp/lattice.hpp"
#include "oracles.hpp"

using namespace gexp;

namespace {

const UncertaintySet kSet = UncertaintySet::make(0.5, 1.0);

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<double> sample(const GridSpec& g, const std::function<double(double)>& f) {
    std::vector<double> out(g.nodes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(g.x(i));
    return out;
}

std::function<double(double)> random_smooth(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng), b = 2.0 * u(rng), c = u(rng), d = u(rng), e = 2.0 * u(rng), s = u(rng);
    return [=](double x) { return a * std::sin(b * x + c) + d * std::tanh(e * x) + s * std::exp(-x * x); };
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// A refinement shrinks the error by `ratio`, unless the refined error is
// already at roundoff level.
bool ratio_ok(double coarse, double fine, double ratio) { return fine <= 1e-12 || fine * ratio <= coarse; }

double interior_distance(const ValueField& a, const ValueField& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.u.size(); ++k)
        for (std::size_t i = kInteriorMargin; i + kInteriorMargin < a.nodes(); ++i)
            d = std::max(d, std::abs(a.u[k][i] - b.u[k][i]));
    return d;
}

Outcome moment_identities() {
    const auto start = std::chrono::steady_clock::now();
    const GFunction g(kSet);
    const GridSpec grid;
    const double up = g_normal_expectation(g, [](double x) { return x * x; }, grid);
    const double down = g_normal_expectation(g, [](double x) { return -x * x; }, grid);
    const double secs = seconds_since(start);
    const bool ok = std::abs(up - 1.0) <= 2e-2 && std::abs(down + 0.5) <= 2e-2 && secs < 5.0;
    return {ok, "E[x^2]=" + fmt("%.6f", up) + " -E[-x^2]=" + fmt("%.6f", -down) + " in " + fmt("%.2fs", secs)};
}

Outcome convex_concave() {
    const GFunction g(kSet);
    const GridSpec grid;
    const double call = g_normal_expectation(g, [](double x) { return std::max(x, 0.0); }, grid);
    const double nabs = g_normal_expectation(g, [](double x) { return -std::abs(x); }, grid);
    const double call_ref = oracle::normal_expectation([](double x) { return std::max(x, 0.0); }, 1.0);
    const double nabs_ref = oracle::normal_expectation([](double x) { return -std::abs(x); }, 0.5);
    const double e1 = std::abs(call - call_ref), e2 = std::abs(nabs - nabs_ref);
    return {e1 <= 5e-3 && e2 <= 5e-3, "call err " + fmt("%.2e", e1) + ", -|x| err " + fmt("%.2e", e2)};
}

Outcome lattice_pde() {
    const auto start = std::chrono::steady_clock::now();
    const VolatilityLattice lat(GridSpec{}, kSet);
    GridSpec oracle_grid;
    oracle_grid.t_steps = 4000;
    oracle_grid.x_steps = 480;
    const GFunction g(kSet);
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = random_smooth(rng);
        worst = std::max(worst, std::abs(lattice_expectation(lat, sample(lat.grid(), f)) -
                                         g_normal_expectation(g, f, oracle_grid)));
    }
    const double secs = seconds_since(start);
    return {worst <= 1e-2 && secs < 30.0, "max |lattice - pde| " + fmt("%.2e", worst) + " in " + fmt("%.1fs", secs)};
}

Outcome sublinear_axioms() {
    const VolatilityLattice lat(GridSpec{}, kSet);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lam(0.0, 5.0), shift(-2.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = sample(lat.grid(), random_smooth(rng));
        const auto y = sample(lat.grid(), random_smooth(rng));
        const double l = lam(rng), c = shift(rng);
        std::vector<double> sum(x.size()), bigger(x.size()), scaled(x.size()), moved(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            sum[i] = x[i] + y[i];
            bigger[i] = x[i] + std::abs(y[i]);
            scaled[i] = l * x[i];
            moved[i] = x[i] + c;
        }
        const double ex = lattice_expectation(lat, x), ey = lattice_expectation(lat, y);
        worst = std::max(worst, ex - lattice_expectation(lat, bigger));
        worst = std::max(worst, std::abs(lattice_expectation(lat, moved) - ex - c));
        worst = std::max(worst, lattice_expectation(lat, sum) - ex - ey);
        worst = std::max(worst, std::abs(lattice_expectation(lat, scaled) - l * ex));
    }
    return {worst <= 1e-10, "worst axiom violation " + fmt("%.2e", worst)};
}

Outcome bsde_exactness() {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const std::size_t root = lat.grid().nearest(0.0);
    auto p = catalog_problem("pure-gbm");
    p.f = [](double, double, double, std::span<const double>, double) { return 0.4; };
    const double yc = solve_gbsde(p, constant_control(0.0), lat, std::vector<double>(lat.nodes(), 0.0)).y[0][root];
    p.f = [](double, double, double y, std::span<const double>, double) { return 0.1 * y; };
    const double yl = solve_gbsde(p, constant_control(0.0), lat, std::vector<double>(lat.nodes(), 1.0)).y[0][root];
    const double e1 = std::abs(yc - 0.4), e2 = std::abs(yl - oracle::linear_ode(0.0, 0.1, 1.0, 1.0));
    return {e1 <= 1e-10 && e2 <= 1e-3, "f=c err " + fmt("%.2e", e1) + ", f=0.1y err " + fmt("%.2e", e2)};
}

Outcome comparison() {
    const VolatilityLattice lat(GridSpec{}, kSet);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 50; ++trial) {
        const double a = u(rng), by = 0.5 * u(rng), bz = 0.5 * u(rng), kq = 0.5 * u(rng);
        const double shift = std::abs(u(rng)), gshift = std::abs(u(rng)), s = u(rng), w = 2.0 * u(rng);
        auto p2 = catalog_problem("full-coupled");
        p2.f = [=](double, double x, double y, std::span<const double> z, double) {
            return a * std::cos(x) + by * std::clamp(y, -50.0, 50.0) + bz * std::clamp(z[0], -50.0, 50.0);
        };
        p2.g = {[=](double, double, double, std::span<const double> z, double) {
            return kq * std::clamp(z[0], -50.0, 50.0);
        }};
        auto p1 = p2;
        p1.f = [=](double t, double x, double y, std::span<const double> z, double v) {
            return p2.f(t, x, y, z, v) + shift;
        };
        p1.g = {[=](double t, double x, double y, std::span<const double> z, double v) {
            return p2.g[0](t, x, y, z, v) + gshift;
        }};
        const auto t2 = sample(lat.grid(), [=](double x) { return s * std::tanh(w * x); });
        const auto t1 = sample(lat.grid(), [=](double x) { return s * std::tanh(w * x) + std::exp(-x * x); });
        const double control = trial % 2 ? 1.0 : -1.0;
        worst = std::min(worst, comparison_check(p1, p2, constant_control(control), lat, t1, t2).min_gap);
    }
    return {worst >= -1e-12, "min node-wise Y1-Y2 " + fmt("%.3e", worst)};
}

Outcome k_properties() {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const auto p = catalog_problem("linear-generator");
    const auto sol = solve_gbsde(p, constant_control(0.0), lat, sample(lat.grid(), p.phi));
    const auto r = k_martingale_check(sol, lat);
    const bool ok = r.k0 == 0.0 && r.max_increment <= 1e-12 && r.martingale_residual <= 1e-10;
    return {ok, "K0=" + fmt("%g", r.k0) + " max dK " + fmt("%.2e", r.max_increment) + " martingale residual " +
                    fmt("%.2e", r.martingale_residual)};
}

Outcome dpp() {
    const auto p = catalog_problem("drift-control");
    const GridSpec base;
    const GridSpec half = refine_time(base);
    const VolatilityLattice lb(base, kSet), lh(half, kSet);
    const auto fb = value_function(p, lb);
    const auto fh = value_function(p, lh);
    const std::vector<std::size_t> db{1, 10}, dh{1, 20};
    const auto rb = dpp_consistency_check(p, lb, fb, db);
    const auto rh = dpp_consistency_check(p, lh, fh, dh);
    const bool ok = rb.residuals[0] <= 1e-12 && rh.residuals[0] <= 1e-12 && rb.residuals[1] <= 5e-3 &&
                    ratio_ok(rb.residuals[1], rh.residuals[1], 1.5);
    return {ok, "one-step " + fmt("%.2e", rb.residuals[0]) + ", 10-step " + fmt("%.2e", rb.residuals[1]) +
                    ", halved-dt " + fmt("%.2e", rh.residuals[1])};
}

Outcome hjb_agreement() {
    const GFunction g(kSet);
    bool ok = true;
    std::ostringstream detail;
    for (const auto& name : catalog_names()) {
        const auto start = std::chrono::steady_clock::now();
        const auto p = catalog_problem(name);
        double d[2];
        GridSpec grid;
        for (int level = 0; level < 2; ++level) {
            if (level) grid = refine(grid);
            d[level] = interior_distance(value_function(p, VolatilityLattice(grid, kSet)), solve_hjb(p, g, grid));
        }
        const double secs = seconds_since(start);
        const bool pass = d[0] <= 5e-2 && ratio_ok(d[0], d[1], 1.5) && secs < 120.0;
        ok = ok && pass;
        detail << name << " " << fmt("%.2e", d[0]) << "->" << fmt("%.2e", d[1]) << (pass ? "" : " (!)") << "; ";
    }
    return {ok, detail.str()};
}

Outcome regularity() {
    bool ok = true;
    double worst = 0.0;
    auto change = [](double a, double b) {
        if (a == 0.0 && b == 0.0) return 1.0;
        if (a == 0.0 || b == 0.0) return std::numeric_limits<double>::infinity();
        return std::max(a / b, b / a);
    };
    for (const auto& name : catalog_names()) {
        const auto p = catalog_problem(name);
        GridSpec grid;
        std::vector<RegularityReport> reps;
        for (int level = 0; level < 3; ++level) {
            if (level) grid = refine(grid);
            reps.push_back(regularity_report(value_function(p, VolatilityLattice(grid, kSet))));
        }
        for (std::size_t j = 1; j < reps.size(); ++j) {
            const double c = std::max(change(reps[j - 1].lipschitz_x, reps[j].lipschitz_x),
                                      change(reps[j - 1].holder_t, reps[j].holder_t));
            worst = std::max(worst, c);
            ok = ok && c <= 2.0;
        }
    }
    return {ok, "largest modulus change per refinement " + fmt("%.3f", worst)};
}

Outcome local_rate() {
    const auto p = catalog_problem("full-coupled");
    const TestFunction phi{0.5, 0.0, 0.2, 0.5, 0.3, 0.1};
    const double control = p.controls[p.controls.size() / 2];
    std::vector<double> deltas{0.02, 0.01, 0.005, 0.0025}, errs;
    for (double d : deltas) {
        const auto lc = local_comparison(p, kSet, phi, 0.5, 0.0, d, control);
        errs.push_back(std::abs(lc.y1 - lc.y2));
    }
    const double slope = loglog_slope(deltas, errs);
    return {slope >= 1.4, "fitted slope " + fmt("%.3f", slope)};
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "gexp_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path config = root / "config.ini";
    std::ofstream(config) << "[problem]\nname = full-coupled\n[run]\npaths = 200\n";
    bool same = true;
    for (const char* cmd : {"simulate", "value"}) {
        for (const char* run : {"a", "b"}) {
            const std::string line = std::string("\"") + GEXP_TOOL_PATH + "\" " + cmd + " --config \"" +
                                     config.string() + "\" --seed 5 --out \"" + (root / cmd / run).string() +
                                     "\" 2>/dev/null";
            if (std::system(line.c_str()) != 0) return {false, std::string("cli run failed: ") + cmd};
        }
        for (const char* file : {"paths.csv", "field.csv"}) {
            const fs::path a = root / cmd / "a" / file, b = root / cmd / "b" / file;
            if (fs::exists(a)) same = same && fs::exists(b) && slurp(a) == slurp(b);
        }
    }
    const auto p = catalog_problem("full-coupled");
    const VolatilityLattice lat(GridSpec{}, kSet);
    DppOptions four;
    four.threads = 4;
    const auto f1 = value_function(p, lat);
    const auto f4 = value_function(p, lat, four);
    const bool bits = f1.u == f4.u && f1.control == f4.control;
    fs::remove_all(root);
    return {same && bits, std::string("csv reruns ") + (same ? "identical" : "differ") + ", threads 1 vs 4 " +
                              (bits ? "bit-identical" : "differ")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"G-moment identities", moment_identities},
        {"convex/concave reduction", convex_concave},
        {"lattice-PDE agreement", lattice_pde},
        {"sublinear axioms", sublinear_axioms},
        {"G-BSDE exactness", bsde_exactness},
        {"comparison", comparison},
        {"K properties", k_properties},
        {"dynamic programming", dpp},
        {"HJB/DPP agreement", hjb_agreement},
        {"regularity", regularity},
        {"local rate", local_rate},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t j = 0; j < criteria.size(); ++j) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[j].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.passed) ++failures;
        std::printf("%s %2zu %-26s %s [%.1fs]\n", o.passed ? "PASS" : "FAIL", j + 1, criteria[j].first,
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
