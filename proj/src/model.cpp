#include "gexp/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gexp {

UncertaintySet UncertaintySet::make(double lo, double hi, std::size_t d) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        fail(ErrorCode::non_finite, "uncertainty bounds must be finite");
    }
    if (!(lo > 0.0) || lo > hi) {
        std::ostringstream os;
        os << "uncertainty set requires 0 < sigma_min_sq <= sigma_max_sq, got [" << lo << ", " << hi
           << "]";
        fail(ErrorCode::invalid_argument, os.str());
    }
    if (d == 0) fail(ErrorCode::invalid_argument, "Brownian dimension must be positive");
    return UncertaintySet{lo, hi, d};
}

double GFunction::operator()(std::span<const double> a) const {
    const std::size_t d = u_.dimension;
    if (a.size() != d * d) fail(ErrorCode::size_mismatch, "G argument must be d x d");
    if (d == 1) return (*this)(a[0]);
    Eigen::MatrixXd m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = a[i * d + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    double pos = 0.0;
    double neg = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lambda = es.eigenvalues()[i];
        if (lambda > 0.0)
            pos += lambda;
        else
            neg -= lambda;
    }
    return 0.5 * (u_.sigma_max_sq * pos - u_.sigma_min_sq * neg);
}

double eval_G(const GFunction& g, std::span<const double> a) {
    const std::size_t d = g.uncertainty().dimension;
    if (a.size() != d * d) fail(ErrorCode::size_mismatch, "G argument must be d x d");
    for (double v : a) {
        if (!std::isfinite(v)) fail(ErrorCode::non_finite, "G argument has non-finite entries");
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (std::abs(a[i * d + j] - a[j * d + i]) > 1e-12) {
                fail(ErrorCode::non_symmetric, "G argument is not symmetric");
            }
        }
    }
    return g(a);
}

void ControlProblem::require_scalar() const {
    if (state_dim != 1 || brownian_dim != 1) {
        fail(ErrorCode::precondition, "numerical engines require n = 1 and d = 1 (problem '" + name + "')");
    }
    if (!b || h.size() != 1 || sigma.size() != 1 || !f || g.size() != 1 || !phi) {
        fail(ErrorCode::invalid_argument, "problem '" + name + "' has missing coefficients");
    }
    if (controls.empty()) fail(ErrorCode::invalid_argument, "control set is empty");
}

std::size_t GridSpec::nearest(double x) const noexcept {
    const double r = std::round((x - x_min) / dx());
    if (!(r > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(r), x_steps);
}

std::vector<double> GridSpec::levels(const UncertaintySet& u) const {
    if (u.degenerate()) return {u.sigma_min_sq};
    if (vol_levels < 2) fail(ErrorCode::invalid_argument, "a non-degenerate set needs at least 2 volatility levels");
    std::vector<double> out(vol_levels);
    const double span = u.sigma_max_sq - u.sigma_min_sq;
    for (std::size_t j = 0; j < vol_levels; ++j) {
        out[j] = u.sigma_min_sq + span * static_cast<double>(j) / static_cast<double>(vol_levels - 1);
    }
    out.back() = u.sigma_max_sq;
    return out;
}

void GridSpec::validate(const UncertaintySet& u) const {
    if (t_steps == 0 || x_steps < 2) fail(ErrorCode::invalid_argument, "grid needs t_steps >= 1 and x_steps >= 2");
    if (!(t_end > t_start)) fail(ErrorCode::invalid_argument, "grid time interval is empty");
    if (!(x_max > x_min)) fail(ErrorCode::invalid_argument, "grid space interval is empty");
    if (u.sigma_max_sq * dt() > dx() * dx() * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "CFL violated: sigma_max_sq*dt = " << u.sigma_max_sq * dt() << " > dx^2 = " << dx() * dx();
        fail(ErrorCode::cfl_violation, os.str());
    }
}

GridSpec refine(const GridSpec& grid) {
    GridSpec out = grid;
    out.t_steps = grid.t_steps * 2;
    const double dx = grid.dx() / std::sqrt(2.0);
    const double center = 0.5 * (grid.x_min + grid.x_max);
    const double half = 0.5 * (grid.x_max - grid.x_min);
    const auto cells = static_cast<std::size_t>(std::llround(half / dx));
    out.x_min = center - static_cast<double>(cells) * dx;
    out.x_max = center + static_cast<double>(cells) * dx;
    out.x_steps = 2 * cells;
    return out;
}

GridSpec refine_time(const GridSpec& grid) {
    GridSpec out = grid;
    out.t_steps = grid.t_steps * 2;
    return out;
}

void Params::set(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    values_[key] = os.str();
}

double Params::number(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::invalid_argument, "parameter '" + key + "' is not a number: '" + it->second + "'");
    }
}

std::string Params::text(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

void Params::expect_only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, value] : values_) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            fail(ErrorCode::unknown_name, "unknown parameter '" + key + "'");
        }
    }
}

std::vector<double> sample_on_grid(const GridSpec& grid, const std::function<double(double)>& fn) {
    std::vector<double> out(grid.nodes());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fn(grid.x(i));
        if (!std::isfinite(out[i])) fail(ErrorCode::non_finite, "payoff sample is not finite");
    }
    return out;
}

}  // namespace gexp
