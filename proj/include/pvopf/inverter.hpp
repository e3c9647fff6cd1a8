#pragma once

#include <string>

#include "pvopf/types.hpp"

namespace pvopf {

/// c1: reactive power only, c2: curtailment only, c3: both.
enum class Strategy { reactive_only, curtail_only, full };

const char* to_string(Strategy s);
/// Accepts "c1"/"c2"/"c3" and the long names.
Strategy strategy_from_string(const std::string& s);

/// Feasible set of one inverter in the (P, Q) plane, all quantities in pu:
/// p_min <= P <= p_av, P^2 + Q^2 <= s_rated^2, |Q| <= tan(theta) P.
/// theta == pi/2 disables the power-factor cone.
struct OperatingRegion {
    double p_min = 0.0;
    double p_av = 0.0;
    double s_rated = 0.0;
    double theta = 0.0;
    Strategy strategy = Strategy::full;

    /// Normalizes the strategy-implied fields (c1 pins p_min to p_av, c2 sets
    /// theta to 0) and validates. Throws ConfigError.
    static OperatingRegion make(Strategy strategy, double s_rated, double p_av, double p_min, double theta);

    /// Same region with a new available power; re-validated.
    OperatingRegion with_p_av(double p_av) const;

    bool cone_active() const;
    /// Largest |Q| admissible at real power p (assumes p inside [p_min, p_av]).
    double q_max_at(double p) const;
};

bool region_contains(const OperatingRegion& region, PQ u, double tol = 1e-9);

/// G(P, Q) = a (Pav - P)^2 + b (Pav - P) + c Q^2 + d |Q|
struct CostParams {
    double a = 1.0;
    double b = 0.0;
    double c = 1.0;
    double d = 0.0;

    /// Throws ConfigError unless all coefficients are finite and non-negative
    /// with a > 0 and c > 0.
    void validate() const;
};

double cost_eval(const CostParams& cost, const OperatingRegion& region, PQ u);
/// Gradient of G at u; at Q == 0 the |Q| term contributes 0.
PQ cost_gradient(const CostParams& cost, const OperatingRegion& region, PQ u);

/// argmin over the region of G(u) - lambda^T u.
PQ setpoint_update(const OperatingRegion& region, const CostParams& cost, PQ lambda);

/// Euclidean projection of u onto the region.
PQ project_onto_region(const OperatingRegion& region, PQ u);

/// Lipschitz constant of lambda -> setpoint_update(region, cost, lambda).
double lipschitz_constant(const CostParams& cost);

/// First-order output-power dynamics, one channel each for P and Q.
struct InverterDynamics {
    double tau = 1.0;  // seconds
    PQ state;
};

/// Exact update for an input held at u over dt seconds: x <- u + (x - u) exp(-dt / tau).
InverterDynamics step_dynamics(const InverterDynamics& dyn, PQ u, double dt);

inline PQ sample_output(const InverterDynamics& dyn) { return dyn.state; }

}  // namespace pvopf
