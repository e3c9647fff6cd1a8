#include "pvopf/problem.hpp"

#include <algorithm>

#include "pvopf/errors.hpp"

namespace pvopf {

namespace {

void check_sites(const FeederModel& model, const std::vector<InverterSite>& sites) {
    std::vector<int> count(model.size(), 0);
    for (const auto& s : sites) {
        if (s.bus < 0 || s.bus >= model.size())
            throw ConfigError("inverter " + std::to_string(s.id) + " references unknown bus " + std::to_string(s.bus));
        if (model.buses()[s.bus].cls != BusClass::inverter)
            throw ConfigError("inverter " + std::to_string(s.id) + " sits on bus " + std::to_string(s.bus) +
                              ", which is not an inverter bus");
        s.cost.validate();
        ++count[s.bus];
    }
    for (BusId b : model.buses_of(BusClass::inverter))
        if (count[b] != 1)
            throw ConfigError("inverter bus " + std::to_string(b) + " must carry exactly one inverter (found " +
                              std::to_string(count[b]) + ")");
}

}  // namespace

OpfInstance OpfInstance::make(FeederModel model, std::vector<InverterSite> sites, double h_quad, double h_lin,
                              bool losses_objective, bool fix_slack) {
    const CMatrix y = build_admittance(model);
    const auto mats = injection_matrices(y);
    ObjectiveSpec obj = losses_objective ? ObjectiveSpec::losses(mats, h_quad, h_lin)
                                         : ObjectiveSpec::substation(mats, h_quad, h_lin);
    return make_with_objective(std::move(model), std::move(sites), std::move(obj), fix_slack);
}

OpfInstance OpfInstance::make_with_objective(FeederModel model, std::vector<InverterSite> sites,
                                             ObjectiveSpec objective, bool fix_slack) {
    check_sites(model, sites);
    if (objective.quad < 0.0) throw ConfigError("objective quadratic weight must be non-negative");
    OpfInstance inst;
    inst.y = build_admittance(model);
    inst.mats = injection_matrices(inst.y);
    inst.set = VFeasibleSet::from_feeder(model, inst.mats, fix_slack);
    inst.model = std::move(model);
    inst.sites = std::move(sites);
    inst.objective = std::move(objective);
    return inst;
}

HermitianMatrix dual_term(const OpfInstance& inst, const std::vector<PQ>& lambda) {
    if (lambda.size() != inst.sites.size()) throw ContractViolation("dual_term: one multiplier pair per inverter");
    HermitianMatrix d(inst.model.size());
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        const auto& m = inst.mats[inst.sites[i].bus];
        d += lambda[i].p * m.phi;
        d += lambda[i].q * m.psi;
    }
    return d;
}

std::vector<PQ> h_at_inverters(const OpfInstance& inst, const HermitianMatrix& v) {
    std::vector<PQ> h;
    h.reserve(inst.sites.size());
    for (const auto& s : inst.sites) h.push_back(h_of_V(inst.mats[s.bus], v));
    return h;
}

std::vector<PQ> balance_residuals(const OpfInstance& inst, const HermitianMatrix& v, const std::vector<PQ>& u) {
    if (u.size() != inst.sites.size()) throw ContractViolation("balance_residuals: one setpoint per inverter");
    std::vector<PQ> r = h_at_inverters(inst, v);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = r[i] - u[i] + inst.site_load(i);
    return r;
}

double opf_objective(const OpfInstance& inst, const HermitianMatrix& v, const std::vector<PQ>& u) {
    double f = inst.objective.eval(v);
    for (std::size_t i = 0; i < u.size(); ++i) f += cost_eval(inst.sites[i].cost, inst.sites[i].region, u[i]);
    return f;
}

}  // namespace pvopf
