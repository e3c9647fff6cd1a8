#include "pvopf/inverter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "pvopf/errors.hpp"

namespace pvopf {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Region in (P, w) coordinates with w = |Q| >= 0.
bool pw_feasible(const OperatingRegion& r, double p, double w) {
    const double tol = 1e-12 * std::max(1.0, r.s_rated);
    if (!std::isfinite(p) || !std::isfinite(w)) return false;
    if (p < r.p_min - tol || p > r.p_av + tol || w < -tol) return false;
    if (p * p + w * w > r.s_rated * r.s_rated * (1.0 + 1e-12) + tol) return false;
    if (r.cone_active() && w > std::tan(r.theta) * p + tol) return false;
    return true;
}

// Minimizer of a (p - p0)^2 + c (w - q0)^2 over the disk p^2 + w^2 <= S^2,
// assuming the unconstrained point lies outside it. Solves the secular
// equation for the multiplier by bisection.
std::array<double, 2> disk_minimizer(double a, double c, double p0, double q0, double s) {
    auto point = [&](double mu) { return std::array<double, 2>{a * p0 / (a + mu), c * q0 / (c + mu)}; };
    auto excess = [&](double mu) {
        auto x = point(mu);
        return x[0] * x[0] + x[1] * x[1] - s * s;
    };
    double lo = 0.0, hi = std::max(a, c);
    while (excess(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    auto x = point(hi);
    // Snap onto the circle to remove the bisection residue.
    const double r = std::hypot(x[0], x[1]);
    if (r > 0.0) {
        x[0] *= s / r;
        x[1] *= s / r;
    }
    return x;
}

// Exact minimizer of a (p - p0)^2 + c (w - q0)^2 over the region in (P, w).
std::array<double, 2> solve_pw(const OperatingRegion& r, double a, double c, double p0, double q0) {
    std::array<double, 2> best{r.p_av, 0.0};
    double best_f = std::numeric_limits<double>::infinity();
    auto consider = [&](double p, double w) {
        if (!pw_feasible(r, p, w)) return;
        const double f = a * (p - p0) * (p - p0) + c * (w - q0) * (w - q0);
        if (f < best_f) {
            best_f = f;
            best = {p, w};
        }
    };
    const double s = r.s_rated;
    const bool cone = r.cone_active();
    const double t = cone ? std::tan(r.theta) : 0.0;

    consider(p0, q0);
    // Single active constraint.
    consider(r.p_min, q0);
    consider(r.p_av, q0);
    consider(p0, 0.0);
    if (cone) {
        const double p = (a * p0 + c * t * q0) / (a + c * t * t);
        consider(p, t * p);
    }
    if (p0 * p0 + q0 * q0 > s * s) {
        const auto x = disk_minimizer(a, c, p0, q0, s);
        consider(x[0], x[1]);
    }
    // Vertices.
    for (double p : {r.p_min, r.p_av}) {
        consider(p, 0.0);
        if (cone) consider(p, t * p);
        if (s * s >= p * p) consider(p, std::sqrt(s * s - p * p));
    }
    consider(s, 0.0);
    consider(0.0, 0.0);
    if (cone) consider(s * std::cos(r.theta), s * std::sin(r.theta));

    if (!std::isfinite(best_f)) throw ConfigError("operating region is empty");
    return best;
}

}  // namespace

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::reactive_only: return "c1";
        case Strategy::curtail_only: return "c2";
        case Strategy::full: return "c3";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "c1" || s == "reactive_only") return Strategy::reactive_only;
    if (s == "c2" || s == "curtail_only") return Strategy::curtail_only;
    if (s == "c3" || s == "full") return Strategy::full;
    throw ConfigError("unknown inverter strategy '" + s + "'");
}

OperatingRegion OperatingRegion::make(Strategy strategy, double s_rated, double p_av, double p_min, double theta) {
    OperatingRegion r{p_min, p_av, s_rated, theta, strategy};
    if (strategy == Strategy::reactive_only) r.p_min = p_av;
    if (strategy == Strategy::curtail_only) r.theta = 0.0;
    if (!std::isfinite(r.s_rated) || !std::isfinite(r.p_av) || !std::isfinite(r.p_min) || !std::isfinite(r.theta))
        throw ConfigError("operating region has non-finite parameters");
    if (!(r.s_rated > 0.0)) throw ConfigError("rated apparent power must be positive");
    if (!(0.0 <= r.p_min && r.p_min <= r.p_av && r.p_av <= r.s_rated))
        throw ConfigError("operating region requires 0 <= p_min <= p_av <= s_rated");
    if (!(0.0 <= r.theta && r.theta <= kHalfPi + 1e-12)) throw ConfigError("theta must lie in [0, pi/2]");
    r.theta = std::min(r.theta, kHalfPi);
    return r;
}

OperatingRegion OperatingRegion::with_p_av(double new_p_av) const {
    return make(strategy, s_rated, new_p_av, strategy == Strategy::reactive_only ? new_p_av : p_min, theta);
}

bool OperatingRegion::cone_active() const { return theta < kHalfPi; }

double OperatingRegion::q_max_at(double p) const {
    double q = std::sqrt(std::max(0.0, s_rated * s_rated - p * p));
    if (cone_active()) q = std::min(q, std::tan(theta) * p);
    return std::max(q, 0.0);
}

bool region_contains(const OperatingRegion& r, PQ u, double tol) {
    if (u.p < r.p_min - tol || u.p > r.p_av + tol) return false;
    if (u.p * u.p + u.q * u.q > r.s_rated * r.s_rated + tol) return false;
    if (r.cone_active() && std::abs(u.q) > std::tan(r.theta) * u.p + tol) return false;
    return true;
}

void CostParams::validate() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d))
        throw ConfigError("cost coefficients must be finite");
    if (b < 0.0 || d < 0.0) throw ConfigError("cost coefficients b and d must be non-negative");
    if (!(a > 0.0) || !(c > 0.0)) throw ConfigError("cost coefficients a and c must be positive");
}

double cost_eval(const CostParams& k, const OperatingRegion& r, PQ u) {
    const double curt = r.p_av - u.p;
    return k.a * curt * curt + k.b * curt + k.c * u.q * u.q + k.d * std::abs(u.q);
}

PQ cost_gradient(const CostParams& k, const OperatingRegion& r, PQ u) {
    return {-2.0 * k.a * (r.p_av - u.p) - k.b, 2.0 * k.c * u.q + k.d * sign_of(u.q)};
}

PQ setpoint_update(const OperatingRegion& r, const CostParams& k, PQ lambda) {
    k.validate();
    // Completing the square: G - lambda^T u = a (P - p0)^2 + c (|Q| - q0)^2 + const
    // with Q carrying the sign of lambda_Q.
    const double p0 = r.p_av + (k.b + lambda.p) / (2.0 * k.a);
    const double q0 = (std::abs(lambda.q) - k.d) / (2.0 * k.c);
    const double sq = sign_of(lambda.q);
    switch (r.strategy) {
        case Strategy::reactive_only: {
            const double w = std::clamp(q0, 0.0, r.q_max_at(r.p_av));
            return {r.p_av, sq * w};
        }
        case Strategy::curtail_only:
            return {std::clamp(p0, r.p_min, r.p_av), 0.0};
        case Strategy::full: {
            const auto x = solve_pw(r, k.a, k.c, p0, q0);
            return {x[0], sq * x[1]};
        }
    }
    return {};
}

PQ project_onto_region(const OperatingRegion& r, PQ u) {
    const auto x = solve_pw(r, 1.0, 1.0, u.p, std::abs(u.q));
    return {x[0], sign_of(u.q) * x[1]};
}

double lipschitz_constant(const CostParams& k) { return 1.0 / (2.0 * std::min(k.a, k.c)); }

InverterDynamics step_dynamics(const InverterDynamics& dyn, PQ u, double dt) {
    if (!(dt > 0.0)) throw ContractViolation("step_dynamics: dt must be positive");
    const double e = std::exp(-dt / dyn.tau);
    InverterDynamics out = dyn;
    out.state = {u.p + (dyn.state.p - u.p) * e, u.q + (dyn.state.q - u.q) * e};
    return out;
}

}  // namespace pvopf
