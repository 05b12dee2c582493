#include <doctest.h>

#include <cmath>
#include <random>

#include "gexp/gheat.hpp"
#include "gexp/lattice.hpp"
#include "oracles.hpp"

using namespace gexp;

namespace {

const UncertaintySet kSet = UncertaintySet::make(0.5, 1.0);

std::vector<double> sample(const GridSpec& g, const std::function<double(double)>& f) {
    std::vector<double> out(g.nodes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(g.x(i));
    return out;
}

std::function<double(double)> random_payoff(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng), b = 2.0 * u(rng), c = u(rng), d = u(rng), e = u(rng);
    return [=](double x) { return a * std::sin(b * x + c) + d * std::tanh(e * x); };
}

GridSpec short_grid() {
    GridSpec g;
    g.t_steps = 100;
    g.t_end = 0.1;
    g.x_min = -2.0;
    g.x_max = 2.0;
    g.x_steps = 80;
    return g;
}

}  // namespace

TEST_CASE("kernels are consistent and sum to one") {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const double dt = lat.grid().dt(), dx = lat.grid().dx();
    for (std::size_t j = 0; j < lat.levels().size(); ++j) {
        const auto& k = lat.kernel(j);
        CHECK(k.up == k.down);
        CHECK(k.up + k.mid + k.down == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(k.mid >= 0.0);
        CHECK((k.up + k.down) * dx * dx == doctest::Approx(lat.levels()[j] * dt).epsilon(1e-13));
    }
    const Transition t = upwind_transition(0.5, 1.0, 1e-3, 0.05);
    CHECK((t.up - t.down) * 0.05 == doctest::Approx(0.5e-3).epsilon(1e-13));
    CHECK_THROWS_AS(upwind_transition(0.0, 1.0, 1.0, 0.05), Error);
}

TEST_CASE("root values") {
    const VolatilityLattice lat(GridSpec{}, kSet);
    const auto& g = lat.grid();
    CHECK(std::abs(lattice_expectation(lat, sample(g, [](double x) { return x * x; })) - 1.0) <= 1e-2);
    CHECK(std::abs(lattice_expectation(lat, sample(g, [](double x) { return x; }))) <= 1e-12);
    const auto layers = conditional_g_expectation(lat, sample(g, [](double) { return -1.25; }), 0, g.t_steps);
    REQUIRE(layers.size() == g.t_steps + 1);
    for (const auto& layer : layers)
        for (double v : layer) CHECK(v == -1.25);
    CHECK_THROWS_AS(conditional_g_expectation(lat, std::vector<double>(3, 0.0), 0, g.t_steps), Error);
}

TEST_CASE("tower property holds exactly") {
    const VolatilityLattice lat(short_grid(), kSet);
    std::mt19937_64 rng(3);
    const auto f = random_payoff(rng);
    CHECK(tower_check(lat, sample(lat.grid(), f), 0, 40) <= 1e-12);
    CHECK(tower_check(lat, sample(lat.grid(), [](double x) { return x * x; }), 0, 50) <= 1e-12);

    const VolatilityLattice classical(short_grid(), UncertaintySet::make(0.8, 0.8));
    CHECK(tower_check(classical, sample(classical.grid(), f), 10, 70) <= 1e-12);
}

TEST_CASE("sup recursion matches a dense-matrix chain") {
    GridSpec g = short_grid();
    g.t_steps = 20;
    g.t_end = 0.02;
    g.x_steps = 40;
    const VolatilityLattice lat(g, kSet);
    std::mt19937_64 rng(4);
    const auto terminal = sample(g, random_payoff(rng));
    const auto layers = conditional_g_expectation(lat, terminal, 0, g.t_steps);
    const auto dense = oracle::dense_chain(terminal, lat.levels(), g.dt(), g.dx(), static_cast<int>(g.t_steps));
    for (std::size_t i = 0; i < dense.size(); ++i) CHECK(layers.front()[i] == doctest::Approx(dense[i]).epsilon(1e-12));
}

TEST_CASE("lattice functional satisfies the sublinear axioms") {
    const VolatilityLattice lat(short_grid(), kSet);
    const auto& g = lat.grid();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> lam(0.0, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = sample(g, random_payoff(rng));
        const auto y = sample(g, random_payoff(rng));
        std::vector<double> sum(x.size()), bigger(x.size()), scaled(x.size()), shifted(x.size());
        const double l = lam(rng);
        for (std::size_t i = 0; i < x.size(); ++i) {
            sum[i] = x[i] + y[i];
            bigger[i] = x[i] + std::abs(y[i]);
            scaled[i] = l * x[i];
            shifted[i] = x[i] + 0.7;
        }
        const double ex = lattice_expectation(lat, x), ey = lattice_expectation(lat, y);
        CHECK(lattice_expectation(lat, bigger) >= ex - 1e-10);
        CHECK(std::abs(lattice_expectation(lat, shifted) - ex - 0.7) <= 1e-10);
        CHECK(lattice_expectation(lat, sum) <= ex + ey + 1e-10);
        CHECK(std::abs(lattice_expectation(lat, scaled) - l * ex) <= 1e-10);
    }
}

TEST_CASE("degenerate set is additive") {
    const VolatilityLattice lat(short_grid(), UncertaintySet::make(0.6, 0.6));
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = sample(lat.grid(), random_payoff(rng));
        const auto y = sample(lat.grid(), random_payoff(rng));
        std::vector<double> sum(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) sum[i] = x[i] + y[i];
        CHECK(std::abs(lattice_expectation(lat, sum) - lattice_expectation(lat, x) - lattice_expectation(lat, y)) <=
              1e-10);
    }
}

TEST_CASE("lattice agrees with the g-heat solver on smooth payoffs") {
    GridSpec fine;
    fine.t_steps = 4000;
    fine.x_steps = 480;
    const VolatilityLattice lat(GridSpec{}, kSet);
    const GFunction g(kSet);
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 3; ++trial) {
        const auto f = random_payoff(rng);
        CHECK(std::abs(lattice_expectation(lat, sample(lat.grid(), f)) - g_normal_expectation(g, f, fine)) <= 1e-2);
    }
}

// ---------------------------------------------------------------------------
// Path simulation

TEST_CASE("frozen and deterministic dynamics") {
    auto p = catalog_problem("pure-gbm", Params{{"sigma", "0"}});
    const auto sc = VolatilityScenario::constant(1.0, 100);
    const auto frozen = simulate_gsde(p, kSet, sc, constant_control(0.0), 2.0, 5, 1);
    for (const auto& path : frozen.paths)
        for (const auto& pt : path) CHECK(pt.x == 2.0);

    p.b = [](double, double, double) { return 1.0; };
    const auto moving = simulate_gsde(p, kSet, sc, constant_control(0.0), 0.0, 3, 1);
    for (const auto& path : moving.paths) CHECK(path.back().x == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quadratic variation increments are exact") {
    const auto p = catalog_problem("pure-gbm");
    std::vector<double> lv(200);
    for (std::size_t k = 0; k < lv.size(); ++k) lv[k] = k % 3 == 0 ? 0.5 : 1.0;
    const auto sc = VolatilityScenario::piecewise(lv);
    const auto bundle = simulate_gsde(p, kSet, sc, constant_control(0.0), 0.0, 4, 17);
    for (const auto& path : bundle.paths) {
        for (std::size_t k = 0; k + 1 < path.size(); ++k) CHECK(path[k + 1].qv == path[k].qv + lv[k] * bundle.dt);
    }
    CHECK_THROWS_AS(simulate_gsde(p, kSet, VolatilityScenario::constant(2.0, 10), constant_control(0.0), 0.0, 1, 1),
                    Error);
}

TEST_CASE("simulation is reproducible from the seed") {
    const auto p = catalog_problem("pure-gbm");
    const auto sc = VolatilityScenario::constant(0.75, 50);
    const auto a = simulate_gsde(p, kSet, sc, constant_control(0.0), 0.3, 20, 99);
    const auto b = simulate_gsde(p, kSet, sc, constant_control(0.0), 0.3, 20, 99);
    for (std::size_t j = 0; j < a.paths.size(); ++j)
        for (std::size_t k = 0; k < a.paths[j].size(); ++k) CHECK(a.paths[j][k].x == b.paths[j][k].x);
}

TEST_CASE("short-time moment bound has a stable constant") {
    const auto p = catalog_problem("pure-gbm");
    auto fitted = [&](std::size_t steps) {
        const double delta = 0.02 * static_cast<double>(steps) / 40.0;
        auto sc = VolatilityScenario::constant(1.0, steps);
        auto q = p;
        q.horizon = delta;
        const auto bundle = simulate_gsde(q, kSet, sc, constant_control(0.0), 0.5, 10000, 3);
        double mean = 0.0;
        for (const auto& path : bundle.paths) {
            double sup = 0.0;
            for (const auto& pt : path) sup = std::max(sup, (pt.x - 0.5) * (pt.x - 0.5));
            mean += sup;
        }
        mean /= static_cast<double>(bundle.paths.size());
        return mean / ((1.0 + 0.25) * delta);
    };
    const double c1 = fitted(40);
    const double c2 = fitted(20);
    CHECK(c1 > 0.0);
    CHECK(c2 / c1 == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("Monte Carlo worst case versus the lattice") {
    const auto p = catalog_problem("pure-gbm");
    const std::vector<VolatilityScenario> scen{VolatilityScenario::constant(0.5, 200),
                                               VolatilityScenario::constant(1.0, 200)};
    auto terminal_sq = [](std::span<const PathPoint> path) { return path.back().x * path.back().x; };
    const auto convex = worst_case_over_scenarios(p, kSet, terminal_sq, scen, constant_control(0.0), 0.0, 20000, 5);
    CHECK(std::abs(convex.value - 1.0) <= 2.0 * convex.std_error + 1e-3);
    CHECK(convex.scenario == 1);

    auto neg = [](std::span<const PathPoint> path) { return -path.back().x * path.back().x; };
    const auto concave = worst_case_over_scenarios(p, kSet, neg, scen, constant_control(0.0), 0.0, 20000, 5);
    CHECK(std::abs(concave.value + 0.5) <= 2.0 * concave.std_error + 1e-3);
    CHECK(concave.scenario == 0);

    auto constant = [](std::span<const PathPoint>) { return 4.0; };
    CHECK(worst_case_over_scenarios(p, kSet, constant, scen, constant_control(0.0), 0.0, 10, 5).value == 4.0);

    const VolatilityLattice lat(GridSpec{}, kSet);
    const double lattice = lattice_expectation(lat, sample(lat.grid(), [](double x) { return x * x; }));
    CHECK(convex.value <= lattice + 2.0 * convex.std_error + 1e-2);
}
