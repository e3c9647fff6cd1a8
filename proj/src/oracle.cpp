#include "pvopf/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pvopf/errors.hpp"

namespace pvopf {

namespace {

std::vector<PQ> setpoints(const OpfInstance& inst, const std::vector<PQ>& lambda) {
    std::vector<PQ> u;
    u.reserve(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i)
        u.push_back(setpoint_update(inst.sites[i].region, inst.sites[i].cost, lambda[i]));
    return u;
}

}  // namespace

DualGradientResult synchronous_dual_gradient(const OpfInstance& inst, const DualGradientOptions& opt) {
    const std::size_t nd = inst.n_inverters();
    std::vector<PQ> lambda = opt.lambda0.value_or(std::vector<PQ>(nd));
    if (lambda.size() != nd) throw ContractViolation("synchronous_dual_gradient: lambda0 has the wrong size");
    std::vector<PQ> u;
    if (opt.u0) {
        u = *opt.u0;
    } else if (opt.lambda0) {
        u = setpoints(inst, lambda);
    } else {
        for (const auto& s : inst.sites) u.push_back(project_onto_region(s.region, {0.0, 0.0}));
    }
    if (u.size() != nd) throw ContractViolation("synchronous_dual_gradient: u0 has the wrong size");

    VSubproblemSolver solver(inst.set, inst.objective, opt.sdp);
    DualGradientResult res;
    auto solve_v = [&](const std::vector<PQ>& lam) {
        SdpSolution s = solver.solve(dual_term(inst, lam));
        if (s.status == SdpStatus::infeasible)
            throw InfeasibleError(0, s.residual, "voltage feasible set is empty (residual " + std::to_string(s.residual) + ")");
        if (!s.converged) ++res.degraded_solves;
        return s.V;
    };
    HermitianMatrix v = solve_v(lambda);

    double alpha = opt.step;
    double prev_residual = std::numeric_limits<double>::infinity();
    int k = 0;
    for (;; ++k) {
        const std::vector<PQ> r = balance_residuals(inst, v, u);
        const double rn = stacked_norm(r);
        if (opt.keep_trace) res.trace.push_back({lambda, u, h_at_inverters(inst, v), rn, 0.0});
        if (rn <= opt.tol) {
            res.converged = true;
            break;
        }
        if (k >= opt.max_iter) break;
        double a = 0.0;
        if (opt.rule == StepRule::constant) {
            if (opt.halve_on_increase && rn > prev_residual && rn > opt.noise_floor)
                alpha = std::max(0.5 * alpha, opt.step * opt.min_step_ratio);
            a = alpha;
        } else {
            a = opt.step / std::sqrt(static_cast<double>(k + 1));
        }
        prev_residual = rn;
        for (std::size_t i = 0; i < nd; ++i) lambda[i] = lambda[i] + a * r[i];
        if (opt.keep_trace) res.trace.back().step = a;
        u = setpoints(inst, lambda);
        v = solve_v(lambda);
    }
    res.iterations = k;
    res.lambda = lambda;
    res.u = u;
    res.V = v;
    res.residual = stacked_norm(balance_residuals(inst, v, u));
    return res;
}

CentralSolution solve_central_opf(const OpfInstance& inst, DualGradientOptions options) {
    options.rule = StepRule::constant;
    DualGradientResult r = synchronous_dual_gradient(inst, options);
    if (!r.converged) {
        std::ostringstream msg;
        msg << "central OPF did not converge in " << r.iterations << " iterations; residual trace:";
        const std::size_t n = r.trace.size();
        for (std::size_t j = n > 10 ? n - 10 : 0; j < n; ++j) msg << ' ' << r.trace[j].residual;
        throw NumericalError(msg.str());
    }
    CentralSolution c;
    c.V = r.V;
    c.u = r.u;
    c.lambda = r.lambda;
    c.iterations = r.iterations;
    c.objective = opf_objective(inst, r.V, r.u);
    c.balance = r.residual;
    c.feasibility = feasibility_residual(r.V, inst.set);
    const Rank1Result r1 = rank1_extract(r.V, 1e-6);
    c.rank1 = r1.is_rank1;
    c.eig_ratio = r1.eig_ratio;
    c.v = r1.v;
    c.cq = check_constraint_qualification(inst.model, inst.mats);
    return c;
}

PQ brute_force_projection(const OperatingRegion& region, const CostParams& cost, PQ lambda, double resolution) {
    if (!(resolution > 0.0)) throw ContractViolation("brute_force_projection: resolution must be positive");
    const double s = region.s_rated;
    const auto np = static_cast<long>(std::ceil((region.p_av - region.p_min) / resolution));
    const auto nq = static_cast<long>(std::ceil(s / resolution));
    auto f = [&](PQ u) { return cost_eval(cost, region, u) - lambda.p * u.p - lambda.q * u.q; };
    PQ best{region.p_av, 0.0};
    double best_f = std::numeric_limits<double>::infinity();
    auto consider = [&](PQ u) {
        if (!region_contains(region, u, 1e-12)) return;
        const double v = f(u);
        if (v < best_f) {
            best_f = v;
            best = u;
        }
    };
    for (long i = 0; i <= np; ++i) {
        const double p = std::min(region.p_min + static_cast<double>(i) * resolution, region.p_av);
        for (long j = -nq; j <= nq; ++j) consider({p, static_cast<double>(j) * resolution});
        // Boundary of the admissible Q range at this P, which the lattice can miss.
        const double qm = region.q_max_at(p);
        consider({p, qm});
        consider({p, -qm});
        consider({p, 0.0});
    }
    return best;
}

}  // namespace pvopf
