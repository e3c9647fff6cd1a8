#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pvopf/feeder.hpp"
#include "pvopf/hermitian.hpp"

namespace pvopf {

/// lo <= Tr(A V) <= hi; an equality when lo == hi.
struct LinearConstraint {
    HermitianMatrix a;
    double lo = 0.0;
    double hi = 0.0;
    std::string label;

    bool is_equality() const { return lo == hi; }
};

/// Spectrahedral set of voltage matrices: V PSD plus linear trace constraints.
struct VFeasibleSet {
    Eigen::Index n = 0;
    std::vector<LinearConstraint> rows;

    /// Voltage box at every bus, |V_0|^2 fixed at the substation (unless
    /// fix_slack is false, in which case bus 0 keeps only its box), and the
    /// load equalities at passive buses.
    static VFeasibleSet from_feeder(const FeederModel& model, const std::vector<InjectionEntry>& mats,
                                    bool fix_slack = true);
};

/// H(V) = quad * Tr(A V)^2 + lin * Tr(A V), quad >= 0.
struct ObjectiveSpec {
    HermitianMatrix a;
    double quad = 0.0;
    double lin = 0.0;

    static ObjectiveSpec none(Eigen::Index n);
    /// Cost on the power drawn from the substation, Tr(Phi_0 V).
    static ObjectiveSpec substation(const std::vector<InjectionEntry>& mats, double quad, double lin);
    /// Cost on total network losses, the sum of all injections.
    static ObjectiveSpec losses(const std::vector<InjectionEntry>& mats, double quad, double lin);

    double eval(const HermitianMatrix& v) const;
};

struct SdpOptions {
    double tol = 1e-7;
    int max_iter = 20000;
    double rho = 1.0;
    double sigma = 1e-6;
    double relaxation = 1.6;
    bool adaptive_rho = true;
    int adapt_interval = 25;
    /// Run the cone projection through the real symmetric embedding.
    bool real_embedding = false;
    int stall_window = 500;
    double stall_improvement = 1e-12;
    double stall_floor = 1e-4;
    bool record_history = false;
    /// When set, one line `iter,objective,residual` per iteration.
    std::ostream* trace = nullptr;
};

enum class SdpStatus { converged, max_iter, infeasible };

const char* to_string(SdpStatus s);

struct SdpIterate {
    int iter = 0;
    double objective = 0.0;
    double residual = 0.0;
    /// Fixed-point residual of the splitting iteration; non-increasing while rho is fixed.
    double merit = 0.0;
    double rho = 0.0;
};

struct SdpSolution {
    HermitianMatrix V;
    double objective = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    SdpStatus status = SdpStatus::max_iter;
    std::vector<SdpIterate> history;
};

/// Nearest PSD matrix in Frobenius norm. Throws NumericalError if the
/// eigensolver fails.
HermitianMatrix project_psd(const HermitianMatrix& a);
/// Same projection computed on the real symmetric embedding.
HermitianMatrix project_psd_embedded(const HermitianMatrix& a);

/// Largest violation among: negative eigenvalues, voltage bounds, equalities.
double feasibility_residual(const HermitianMatrix& v, const VFeasibleSet& set);

struct Rank1Result {
    CVector v;
    bool is_rank1 = false;
    double eig_ratio = 0.0;
};

/// Leading eigenpair scaled to sqrt(lambda_1) q_1, rotated so v_0 is real
/// and non-negative. Throws ContractViolation when lambda_1 <= 0.
Rank1Result rank1_extract(const HermitianMatrix& v, double ratio_tol = 1e-6);

/// Warm-started solver for argmin_{V in set} H(V) + Tr(D V), where D is the
/// dual term sum_i lambda_P,i Phi_i + lambda_Q,i Psi_i. The constraint data
/// is factored once; successive solves only change D.
class VSubproblemSolver {
public:
    VSubproblemSolver(VFeasibleSet set, ObjectiveSpec objective, SdpOptions options = {});

    SdpSolution solve(const HermitianMatrix& dual_term);

    const VFeasibleSet& set() const { return set_; }
    const ObjectiveSpec& objective() const { return objective_; }
    const SdpOptions& options() const { return options_; }
    void set_tolerance(double tol) { options_.tol = tol; }
    /// Forget the warm start.
    void reset();
    /// Replace the constraint bounds (same constraint matrices, e.g. after a
    /// load change) while keeping the warm start.
    void update_bounds(const VFeasibleSet& set);

private:
    void factor();
    Eigen::VectorXd solve_kkt(const Eigen::VectorXd& rhs) const;
    Eigen::VectorXd project_cone(const Eigen::VectorXd& x) const;

    VFeasibleSet set_;
    ObjectiveSpec objective_;
    SdpOptions options_;

    Eigen::Index nv_ = 0;         // n^2
    Eigen::MatrixXd a_;           // normalized constraint rows, m x nv
    Eigen::VectorXd row_scale_;   // original row norms
    Eigen::VectorXd lo_, hi_;     // normalized bounds
    std::vector<bool> eq_;
    Eigen::VectorXd a_h_;         // svec of the objective matrix

    double rho_ = 1.0;
    Eigen::VectorXd rho_lin_;
    Eigen::MatrixXd u_;           // low-rank part of the KKT matrix (columns)
    Eigen::LLT<Eigen::MatrixXd> small_;
    double shift_ = 0.0;

    Eigen::VectorXd x_, z_lin_, z_psd_, y_lin_, y_psd_;
};

/// Cold-start convenience wrapper.
SdpSolution solve_v_subproblem(const VFeasibleSet& set, const ObjectiveSpec& objective,
                               const HermitianMatrix& dual_term, const SdpOptions& options = {});

}  // namespace pvopf
