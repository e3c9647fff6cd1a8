#pragma once

#include <optional>
#include <vector>

#include "pvopf/problem.hpp"

namespace pvopf {

enum class StepRule { diminishing, constant };

struct DualGradientOptions {
    StepRule rule = StepRule::constant;
    /// Constant rule: the step itself. Diminishing rule: c0 in c0 / sqrt(k).
    double step = 1.0;
    int max_iter = 20000;
    /// Stop once the balance residual ||h(V) - u + d|| is at most tol.
    double tol = 1e-7;
    /// Constant rule only: halve the step whenever the residual grows, down
    /// to step * min_step_ratio. Increases below `noise_floor` are ignored.
    bool halve_on_increase = true;
    double min_step_ratio = 1.0 / 1024.0;
    double noise_floor = 1e-7;
    SdpOptions sdp = [] {
        SdpOptions o;
        o.tol = 1e-10;
        o.max_iter = 50000;
        return o;
    }();
    std::optional<std::vector<PQ>> lambda0;
    /// Defaults to u(lambda0) when lambda0 is given, otherwise to the
    /// projection of the origin onto each region.
    std::optional<std::vector<PQ>> u0;
    bool keep_trace = true;
};

struct DualIterate {
    std::vector<PQ> lambda;
    std::vector<PQ> u;
    std::vector<PQ> h;
    double residual = 0.0;
    double step = 0.0;
};

struct DualGradientResult {
    std::vector<DualIterate> trace;  // trace[k] holds lambda[k], u[k], h(V[k])
    std::vector<PQ> lambda;
    std::vector<PQ> u;
    HermitianMatrix V;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    int degraded_solves = 0;
};

/// Plain dual gradient with commanded setpoints: lambda[k+1] = lambda[k] +
/// alpha_{k+1} (h(V[k]) - u[k] + d), then u[k+1] and V[k+1] from lambda[k+1].
DualGradientResult synchronous_dual_gradient(const OpfInstance& inst, const DualGradientOptions& options);

struct CentralSolution {
    HermitianMatrix V;
    std::vector<PQ> u;
    std::vector<PQ> lambda;
    double objective = 0.0;
    bool rank1 = false;
    double eig_ratio = 0.0;
    CVector v;
    double feasibility = 0.0;
    double balance = 0.0;
    int iterations = 0;
    /// Constraint qualification report; multiplicity of lambda is flagged when it fails.
    CqReport cq;
};

/// Jointly optimal (V, u) of the relaxed problem, by the dual method run to a
/// tight balance residual. Throws NumericalError with the residual trace when
/// the budget is exhausted, InfeasibleError when the voltage set is empty.
CentralSolution solve_central_opf(const OpfInstance& inst, DualGradientOptions options = {});

/// Exhaustive grid minimizer of G(u) - lambda^T u over the region.
PQ brute_force_projection(const OperatingRegion& region, const CostParams& cost, PQ lambda, double resolution);

}  // namespace pvopf
