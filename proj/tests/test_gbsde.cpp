#include <doctest.h>

#include <cmath>
#include <random>

#include "gexp/gbsde.hpp"
#include "oracles.hpp"

using namespace gexp;

namespace {

const UncertaintySet kSet = UncertaintySet::make(0.5, 1.0);

GridSpec small_grid() {
    GridSpec g;
    g.t_steps = 200;
    g.t_end = 0.5;
    g.x_min = -4.0;
    g.x_max = 4.0;
    g.x_steps = 80;
    return g;
}

std::vector<double> sample(const GridSpec& g, const std::function<double(double)>& f) {
    std::vector<double> out(g.nodes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(g.x(i));
    return out;
}

ControlProblem with_generator(Generator f) {
    auto p = catalog_problem("pure-gbm");
    p.f = std::move(f);
    return p;
}

}  // namespace

TEST_CASE("zero generator reduces to the conditional expectation") {
    const VolatilityLattice lat(small_grid(), kSet);
    const auto terminal = sample(lat.grid(), [](double x) { return std::sin(x) + 0.1 * x * x; });
    const auto sol = solve_gbsde(catalog_problem("pure-gbm"), constant_control(0.0), lat, terminal);
    const auto layers = conditional_g_expectation(lat, terminal, 0, lat.steps());
    for (std::size_t k = 0; k <= lat.steps(); ++k)
        for (std::size_t i = 0; i < lat.nodes(); ++i) CHECK(std::abs(sol.y[k][i] - layers[k][i]) <= 1e-12);
    for (std::size_t k = 0; k < lat.steps(); ++k)
        for (std::size_t i = 0; i < lat.nodes(); ++i) CHECK(sol.gap(k, i, sol.maximizer(k, i)) == 0.0);
    CHECK(sol.k0 == 0.0);
}

TEST_CASE("constant generator integrates exactly") {
    const VolatilityLattice lat(small_grid(), kSet);
    const auto p = with_generator([](double, double, double, std::span<const double>, double) { return 0.3; });
    const auto sol = solve_gbsde(p, constant_control(0.0), lat, std::vector<double>(lat.nodes(), 0.0));
    for (std::size_t k = 0; k <= lat.steps(); ++k) {
        const double expected = 0.3 * (lat.grid().t_end - lat.grid().t(k));
        for (std::size_t i = 0; i < lat.nodes(); ++i) CHECK(std::abs(sol.y[k][i] - expected) <= 1e-10);
    }
    for (const auto& layer : sol.z)
        for (double z : layer) CHECK(std::abs(z) <= 1e-10);
}

TEST_CASE("linear generator follows the ODE") {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const auto p = with_generator([](double, double, double y, std::span<const double>, double) { return 0.1 * y; });
    const auto ones = std::vector<double>(lat.nodes(), 1.0);
    const auto sol = solve_gbsde(p, constant_control(0.0), lat, ones);
    const std::size_t root = lat.grid().nearest(0.0);
    CHECK(std::abs(sol.y[0][root] - oracle::linear_ode(0.0, 0.1, 1.0, 1.0)) <= 1e-3);

    BsdeOptions picard;
    picard.picard = true;
    const auto iter = solve_gbsde(p, constant_control(0.0), lat, ones, picard);
    CHECK(std::abs(iter.y[0][root] - std::exp(0.1)) <= 1e-3);
}

TEST_CASE("comparison examples") {
    const VolatilityLattice lat(small_grid(), kSet);
    const auto& g = lat.grid();
    const auto base = sample(g, [](double x) { return std::tanh(x); });
    auto shifted = base;
    for (double& v : shifted) v += 1.0;
    const auto p = catalog_problem("linear-generator");
    const auto r = comparison_check(p, p, constant_control(0.0), lat, shifted, base);
    CHECK(r.passed);
    CHECK(r.min_gap >= 0.0);

    const auto p1 = with_generator([](double, double, double, std::span<const double>, double) { return 0.5; });
    const auto p2 = catalog_problem("pure-gbm");
    const auto zeros = std::vector<double>(g.nodes(), 0.0);
    const auto r2 = comparison_check(p1, p2, constant_control(0.0), lat, zeros, zeros);
    CHECK(r2.min_gap == doctest::Approx(0.0).epsilon(1e-10));
    const auto y1 = solve_gbsde(p1, constant_control(0.0), lat, zeros);
    CHECK(std::abs(y1.y[0][g.nearest(0.0)] - 0.5 * g.t_end) <= 1e-10);

    try {
        comparison_check(p2, p1, constant_control(0.0), lat, zeros, zeros);
        FAIL("expected precondition failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::precondition);
    }
}

TEST_CASE("randomized ordered instances stay ordered") {
    GridSpec g = small_grid();
    g.t_steps = 100;
    g.t_end = 0.25;
    const VolatilityLattice lat(g, kSet);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = u(rng), by = 0.5 * u(rng), bz = 0.5 * u(rng), kq = 0.5 * u(rng);
        const double shift = std::abs(u(rng)), gshift = std::abs(u(rng));
        const double s = u(rng), w = 2.0 * u(rng);
        auto p2 = catalog_problem("pure-gbm");
        p2.f = [=](double, double x, double y, std::span<const double> z, double) {
            return a * std::sin(x) + by * std::clamp(y, -10.0, 10.0) + bz * std::clamp(z[0], -10.0, 10.0);
        };
        p2.g = {[=](double, double, double, std::span<const double> z, double) {
            return kq * std::clamp(z[0], -10.0, 10.0);
        }};
        auto p1 = p2;
        p1.f = [=](double t, double x, double y, std::span<const double> z, double v) { return p2.f(t, x, y, z, v) + shift; };
        p1.g = {[=](double t, double x, double y, std::span<const double> z, double v) {
            return p2.g[0](t, x, y, z, v) + gshift;
        }};
        const auto t2 = sample(g, [=](double x) { return s * std::tanh(w * x); });
        const auto t1 = sample(g, [=](double x) { return s * std::tanh(w * x) + 0.5 * (1.0 + std::cos(3.0 * x)); });
        const auto r = comparison_check(p1, p2, constant_control(0.0), lat, t1, t2);
        CHECK(r.min_gap >= -1e-12);
        CHECK(r.passed);
    }
}

TEST_CASE("K is flat along the optimizer and nonincreasing elsewhere") {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const auto p = catalog_problem("linear-generator");
    const auto terminal = sample(lat.grid(), p.phi);
    const auto sol = solve_gbsde(p, constant_control(0.0), lat, terminal);
    const auto report = k_martingale_check(sol, lat);
    CHECK(report.k0 == 0.0);
    CHECK(report.max_increment <= 1e-12);
    CHECK(report.martingale_residual <= 1e-10);

    const auto trivial = solve_gbsde(catalog_problem("pure-gbm"), constant_control(0.0), lat,
                                     std::vector<double>(lat.nodes(), 1.0));
    const auto tr = k_martingale_check(trivial, lat);
    CHECK(tr.max_increment <= 1e-12);
    CHECK(tr.martingale_residual <= 1e-12);
}

TEST_CASE("degenerate set has no K") {
    const VolatilityLattice lat(small_grid(), UncertaintySet::make(0.8, 0.8));
    const auto p = catalog_problem("full-coupled");
    const auto sol = solve_gbsde(p, constant_control(0.0), lat, sample(lat.grid(), p.phi));
    for (double gap : sol.gaps) CHECK(gap == 0.0);
    CHECK(sol.levels.size() == 1);
}

TEST_CASE("Z vanishes at the root for symmetric data") {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const auto p = catalog_problem("pure-gbm", Params{{"payoff", "x2"}, {"M", "9"}});
    const auto sol = solve_gbsde(p, constant_control(0.0), lat, sample(lat.grid(), p.phi));
    CHECK(std::abs(sol.z[0][lat.grid().nearest(0.0)]) <= 1e-10);
}

TEST_CASE("homogeneity and stability for linear generators") {
    const VolatilityLattice lat(small_grid(), kSet);
    const auto p = catalog_problem("linear-generator", Params{{"c0", "0"}, {"c1", "0.2"}});
    const auto& g = lat.grid();
    const auto t1 = sample(g, [](double x) { return std::max(0.0, 1.0 - x * x) + 0.3 * x; });
    auto t2 = t1;
    for (double& v : t2) v *= 2.0;
    const std::size_t root = g.nearest(0.0);
    const double y1 = solve_gbsde(p, constant_control(0.0), lat, t1).y[0][root];
    const double y2 = solve_gbsde(p, constant_control(0.0), lat, t2).y[0][root];
    CHECK(std::abs(y2 - 2.0 * y1) <= 0.05 * std::abs(2.0 * y1));

    const double eps = 1e-3;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-eps, eps);
    auto t3 = t1;
    for (double& v : t3) v += u(rng);
    const double y3 = solve_gbsde(p, constant_control(0.0), lat, t3).y[0][root];
    CHECK(std::abs(y3 - y1) <= std::exp(p.lipschitz * g.t_end) * eps + 1e-8);
}

TEST_CASE("thread count does not change the solution") {
    const VolatilityLattice lat(small_grid(), kSet);
    const auto p = catalog_problem("full-coupled");
    const auto terminal = sample(lat.grid(), p.phi);
    BsdeOptions one, four;
    four.threads = 4;
    const auto a = solve_gbsde(p, constant_control(0.5), lat, terminal, one);
    const auto b = solve_gbsde(p, constant_control(0.5), lat, terminal, four);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
    CHECK(a.gaps == b.gaps);
}

TEST_CASE("input validation") {
    const VolatilityLattice lat(small_grid(), kSet);
    const auto p = catalog_problem("pure-gbm");
    CHECK_THROWS_AS(solve_gbsde(p, constant_control(0.0), lat, std::vector<double>(5, 0.0)), Error);
    auto bad = std::vector<double>(lat.nodes(), 0.0);
    bad[3] = NAN;
    CHECK_THROWS_AS(solve_gbsde(p, constant_control(0.0), lat, bad), Error);
}
