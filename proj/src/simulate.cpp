#include <cmath>
#include <random>
#include <sstream>

#include "gexp/lattice.hpp"

namespace gexp {

namespace {

void check_level(const UncertaintySet& u, double gamma, std::size_t k) {
    if (!(gamma >= u.sigma_min_sq && gamma <= u.sigma_max_sq)) {
        std::ostringstream os;
        os << "scenario level " << gamma << " at step " << k << " lies outside [" << u.sigma_min_sq << ", "
           << u.sigma_max_sq << "]";
        fail(ErrorCode::invalid_argument, os.str());
    }
}

// Simulates one path into `out` (size steps + 1) and records the levels used.
void simulate_path(const ControlProblem& p, const UncertaintySet& u, const VolatilityScenario& scenario,
                   const FeedbackControl& control, double x0, std::uint64_t path_seed, double dt,
                   std::span<PathPoint> out, std::span<double> gammas) {
    std::mt19937_64 rng(path_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sqrt_dt = std::sqrt(dt);
    PathPoint cur{0.0, x0, 0.0, 0.0};
    out[0] = cur;
    for (std::size_t k = 0; k < scenario.steps; ++k) {
        const double gamma = scenario.level(k, cur.x);
        check_level(u, gamma, k);
        const double v = control(k, cur.x);
        const double dw = sqrt_dt * normal(rng);
        const double drift = p.drift(cur.t, cur.x, v);
        const double qv_drift = p.qv_drift(cur.t, cur.x, v);
        const double vol = p.vol(cur.t, cur.x, v);
        if (!std::isfinite(drift) || !std::isfinite(qv_drift) || !std::isfinite(vol)) {
            fail(ErrorCode::non_finite, "coefficient evaluation is not finite");
        }
        const double db = std::sqrt(gamma) * dw;
        cur.x += drift * dt + qv_drift * gamma * dt + vol * db;
        cur.b += db;
        cur.qv += gamma * dt;
        cur.t = static_cast<double>(k + 1) * dt;
        out[k + 1] = cur;
        gammas[k] = gamma;
    }
}

}  // namespace

PathBundle simulate_gsde(const ControlProblem& p, const UncertaintySet& uncertainty,
                         const VolatilityScenario& scenario, const FeedbackControl& control, double x0,
                         std::size_t n_paths, std::uint64_t seed, std::string control_label) {
    p.require_scalar();
    if (scenario.steps == 0) fail(ErrorCode::invalid_argument, "scenario has no steps");
    if (!scenario.feedback && scenario.levels.size() != scenario.steps) {
        fail(ErrorCode::size_mismatch, "scenario level count does not match its step count");
    }
    PathBundle bundle;
    bundle.scenario_label = scenario.label;
    bundle.control_label = std::move(control_label);
    bundle.seed = seed;
    bundle.dt = p.horizon / static_cast<double>(scenario.steps);
    bundle.paths.assign(n_paths, std::vector<PathPoint>(scenario.steps + 1));
    bundle.gammas.assign(n_paths * scenario.steps, 0.0);
    for (std::size_t j = 0; j < n_paths; ++j) {
        simulate_path(p, uncertainty, scenario, control, x0, seed + j, bundle.dt, bundle.paths[j],
                      std::span<double>(bundle.gammas).subspan(j * scenario.steps, scenario.steps));
    }
    return bundle;
}

WorstCase worst_case_over_scenarios(const ControlProblem& p, const UncertaintySet& uncertainty,
                                    const PathFunctional& payoff, std::span<const VolatilityScenario> scenarios,
                                    const FeedbackControl& control, double x0, std::size_t n_paths,
                                    std::uint64_t seed) {
    p.require_scalar();
    if (scenarios.empty()) fail(ErrorCode::invalid_argument, "scenario list is empty");
    if (n_paths < 2) fail(ErrorCode::invalid_argument, "worst case needs at least two paths");
    WorstCase best;
    bool first = true;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const VolatilityScenario& sc = scenarios[s];
        if (sc.steps == 0) fail(ErrorCode::invalid_argument, "scenario has no steps");
        const double dt = p.horizon / static_cast<double>(sc.steps);
        std::vector<PathPoint> path(sc.steps + 1);
        std::vector<double> gammas(sc.steps);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t j = 0; j < n_paths; ++j) {
            simulate_path(p, uncertainty, sc, control, x0, seed + j, dt, path, gammas);
            const double value = payoff(path);
            sum += value;
            sum_sq += value * value;
        }
        const double n = static_cast<double>(n_paths);
        const double mean = sum / n;
        const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
        if (first || mean > best.value) {
            best = WorstCase{mean, std::sqrt(var / n), s};
            first = false;
        }
    }
    return best;
}

}  // namespace gexp
