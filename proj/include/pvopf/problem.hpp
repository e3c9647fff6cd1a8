#pragma once

#include <vector>

#include "pvopf/feeder.hpp"
#include "pvopf/inverter.hpp"
#include "pvopf/sdp_engine.hpp"

namespace pvopf {

/// One controllable inverter attached to a feeder bus.
struct InverterSite {
    int id = 0;
    BusId bus = 0;
    OperatingRegion region;
    CostParams cost;
};

/// Everything needed to state the relaxed OPF for one set of exogenous
/// conditions (available powers and loads).
struct OpfInstance {
    FeederModel model;
    CMatrix y;
    std::vector<InjectionEntry> mats;
    std::vector<InverterSite> sites;
    VFeasibleSet set;
    ObjectiveSpec objective;

    /// Builds Y, the injection matrices and the feasible set. Throws
    /// ConfigError unless every inverter bus carries exactly one site and
    /// every site sits on an inverter bus.
    static OpfInstance make(FeederModel model, std::vector<InverterSite> sites, double h_quad, double h_lin,
                            bool losses_objective = false, bool fix_slack = true);

    /// Same structure with a different objective matrix (H = quad Tr(A V)^2 + lin Tr(A V)).
    static OpfInstance make_with_objective(FeederModel model, std::vector<InverterSite> sites,
                                           ObjectiveSpec objective, bool fix_slack = true);

    std::size_t n_inverters() const { return sites.size(); }
    /// Load d_i at the bus of site i, in pu.
    PQ site_load(std::size_t i) const { return model.load_pu(sites[i].bus); }
};

/// sum_i lambda_P,i Phi_{b(i)} + lambda_Q,i Psi_{b(i)}
HermitianMatrix dual_term(const OpfInstance& inst, const std::vector<PQ>& lambda);

/// h_i(V) at every inverter bus.
std::vector<PQ> h_at_inverters(const OpfInstance& inst, const HermitianMatrix& v);

/// Stacked h_i(V) - u_i + d_i.
std::vector<PQ> balance_residuals(const OpfInstance& inst, const HermitianMatrix& v, const std::vector<PQ>& u);

/// sum_i G_i(u_i) + H(V)
double opf_objective(const OpfInstance& inst, const HermitianMatrix& v, const std::vector<PQ>& u);

}  // namespace pvopf
