#include "pvopf/sdp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "pvopf/errors.hpp"

namespace pvopf {

const char* to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::converged: return "converged";
        case SdpStatus::max_iter: return "max_iter";
        case SdpStatus::infeasible: return "infeasible";
    }
    return "?";
}

VFeasibleSet VFeasibleSet::from_feeder(const FeederModel& model, const std::vector<InjectionEntry>& mats,
                                       bool fix_slack) {
    VFeasibleSet s;
    s.n = model.size();
    const BaseValues& b = model.base();
    const double lo = b.vmin_pu * b.vmin_pu, hi = b.vmax_pu * b.vmax_pu;
    for (const Bus& bus : model.buses()) {
        const auto& m = mats.at(bus.id);
        const std::string id = std::to_string(bus.id);
        if (bus.id == 0 && fix_slack) {
            const double v0 = b.v0_pu * b.v0_pu;
            s.rows.push_back({m.ups, v0, v0, "slack|V0|^2"});
        } else {
            s.rows.push_back({m.ups, lo, hi, "vbox" + id});
        }
    }
    for (const Bus& bus : model.buses()) {
        if (bus.cls != BusClass::passive) continue;
        const auto& m = mats.at(bus.id);
        const PQ d = model.load_pu(bus.id);
        const std::string id = std::to_string(bus.id);
        s.rows.push_back({m.phi, -d.p, -d.p, "pbal" + id});
        s.rows.push_back({m.psi, -d.q, -d.q, "qbal" + id});
    }
    return s;
}

ObjectiveSpec ObjectiveSpec::none(Eigen::Index n) { return {HermitianMatrix(n), 0.0, 0.0}; }

ObjectiveSpec ObjectiveSpec::substation(const std::vector<InjectionEntry>& mats, double quad, double lin) {
    return {mats.at(0).phi, quad, lin};
}

ObjectiveSpec ObjectiveSpec::losses(const std::vector<InjectionEntry>& mats, double quad, double lin) {
    HermitianMatrix a(mats.at(0).phi.dim());
    for (const auto& m : mats) a += m.phi;
    return {a, quad, lin};
}

double ObjectiveSpec::eval(const HermitianMatrix& v) const {
    const double t = a.trace_product(v);
    return quad * t * t + lin * t;
}

HermitianMatrix project_psd(const HermitianMatrix& a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a.matrix());
    if (es.info() != Eigen::Success)
        throw NumericalError("project_psd: eigensolver did not converge (n=" + std::to_string(a.dim()) + ")");
    const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
    return HermitianMatrix::symmetrize(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint());
}

HermitianMatrix project_psd_embedded(const HermitianMatrix& a) {
    const Eigen::MatrixXd e = real_embedding(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
    if (es.info() != Eigen::Success)
        throw NumericalError("project_psd_embedded: eigensolver did not converge (n=" + std::to_string(a.dim()) + ")");
    const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
    return from_real_embedding(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

double feasibility_residual(const HermitianMatrix& v, const VFeasibleSet& set) {
    if (v.dim() != set.n) throw ContractViolation("feasibility_residual: dimension mismatch");
    double r = 0.0;
    if (v.dim() > 0) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(v.matrix(), Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw NumericalError("feasibility_residual: eigensolver failed");
        r = std::max(r, -es.eigenvalues().minCoeff());
    }
    for (const auto& row : set.rows) {
        const double t = row.a.trace_product(v);
        r = std::max({r, row.lo - t, t - row.hi});
    }
    return r;
}

Rank1Result rank1_extract(const HermitianMatrix& v, double ratio_tol) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(v.matrix());
    if (es.info() != Eigen::Success) throw NumericalError("rank1_extract: eigensolver failed");
    const Eigen::Index n = v.dim();
    const double l1 = n > 0 ? es.eigenvalues()(n - 1) : 0.0;
    if (!(l1 > 0.0)) throw ContractViolation("rank1_extract: leading eigenvalue is not positive");
    Rank1Result r;
    CVector q = es.eigenvectors().col(n - 1);
    if (std::abs(q(0)) > 0.0) q *= std::conj(q(0)) / std::abs(q(0));
    q(0) = std::abs(q(0));
    r.v = std::sqrt(l1) * q;
    const double l2 = n > 1 ? std::max(0.0, es.eigenvalues()(n - 2)) : 0.0;
    r.eig_ratio = l2 / l1;
    r.is_rank1 = r.eig_ratio <= ratio_tol;
    return r;
}

VSubproblemSolver::VSubproblemSolver(VFeasibleSet set, ObjectiveSpec objective, SdpOptions options)
    : set_(std::move(set)), objective_(std::move(objective)), options_(options) {
    if (objective_.quad < 0.0) throw ConfigError("objective quadratic weight must be non-negative");
    if (objective_.a.dim() != set_.n) throw ContractViolation("VSubproblemSolver: objective dimension mismatch");
    if (!(options_.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
    const Eigen::Index n = set_.n;
    nv_ = n * n;
    const Eigen::Index m = static_cast<Eigen::Index>(set_.rows.size());
    a_.resize(m, nv_);
    row_scale_.resize(m);
    lo_.resize(m);
    hi_.resize(m);
    eq_.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& row = set_.rows[j];
        if (row.a.dim() != n) throw ContractViolation("VSubproblemSolver: constraint dimension mismatch");
        if (!(row.lo <= row.hi)) throw ConfigError("constraint '" + row.label + "' has lo > hi");
        const Eigen::VectorXd s = svec(row.a);
        const double nrm = s.norm();
        if (nrm == 0.0) throw ConfigError("constraint '" + row.label + "' has a zero matrix");
        a_.row(j) = s.transpose() / nrm;
        row_scale_(j) = nrm;
        lo_(j) = row.lo / nrm;
        hi_(j) = row.hi / nrm;
        eq_[j] = row.is_equality();
    }
    a_h_ = svec(objective_.a);
    rho_ = options_.rho;
    reset();
    factor();
}

void VSubproblemSolver::reset() {
    x_ = Eigen::VectorXd::Zero(nv_);
    z_psd_ = Eigen::VectorXd::Zero(nv_);
    y_psd_ = Eigen::VectorXd::Zero(nv_);
    z_lin_ = Eigen::VectorXd::Zero(a_.rows());
    y_lin_ = Eigen::VectorXd::Zero(a_.rows());
}

void VSubproblemSolver::update_bounds(const VFeasibleSet& set) {
    if (set.n != set_.n || set.rows.size() != set_.rows.size())
        throw ContractViolation("update_bounds: constraint structure changed");
    bool pattern_changed = false;
    for (std::size_t j = 0; j < set.rows.size(); ++j) {
        if (!(set.rows[j].a == set_.rows[j].a)) throw ContractViolation("update_bounds: constraint matrix changed");
        if (!(set.rows[j].lo <= set.rows[j].hi)) throw ConfigError("constraint '" + set.rows[j].label + "' has lo > hi");
        const auto idx = static_cast<Eigen::Index>(j);
        lo_(idx) = set.rows[j].lo / row_scale_(idx);
        hi_(idx) = set.rows[j].hi / row_scale_(idx);
        if (eq_[j] != set.rows[j].is_equality()) pattern_changed = true;
        eq_[j] = set.rows[j].is_equality();
    }
    set_ = set;
    if (pattern_changed) factor();
}

void VSubproblemSolver::factor() {
    const Eigen::Index m = a_.rows();
    rho_lin_.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) rho_lin_(j) = eq_[j] ? 1e3 * rho_ : rho_;
    const bool has_quad = objective_.quad > 0.0;
    const Eigen::Index r = m + (has_quad ? 1 : 0);
    // KKT matrix: shift I + U W U^T with U = [A^T, a_H], W = diag(rho_lin, 2 quad).
    shift_ = options_.sigma + rho_;
    u_.resize(nv_, r);
    Eigen::VectorXd w(r);
    u_.leftCols(m) = a_.transpose();
    w.head(m) = rho_lin_;
    if (has_quad) {
        u_.col(m) = a_h_;
        w(m) = 2.0 * objective_.quad;
    }
    if (r == 0) return;
    Eigen::MatrixXd k = u_.transpose() * u_;
    k.diagonal() += (shift_ * w.cwiseInverse());
    small_.compute(k);
    if (small_.info() != Eigen::Success) throw NumericalError("VSubproblemSolver: KKT factorization failed");
}

Eigen::VectorXd VSubproblemSolver::solve_kkt(const Eigen::VectorXd& rhs) const {
    if (u_.cols() == 0) return rhs / shift_;
    return (rhs - u_ * small_.solve(u_.transpose() * rhs)) / shift_;
}

Eigen::VectorXd VSubproblemSolver::project_cone(const Eigen::VectorXd& x) const {
    const HermitianMatrix m = smat(x, set_.n);
    return svec(options_.real_embedding ? project_psd_embedded(m) : project_psd(m));
}

SdpSolution VSubproblemSolver::solve(const HermitianMatrix& dual_term) {
    if (dual_term.dim() != set_.n) throw ContractViolation("VSubproblemSolver::solve: dual term dimension mismatch");
    const Eigen::VectorXd q = svec(dual_term);
    const Eigen::VectorXd c = objective_.lin * a_h_ + q;
    const double quad2 = 2.0 * objective_.quad;
    const double alpha = options_.relaxation;
    const double sigma = options_.sigma;
    const double tol = options_.tol;

    SdpSolution sol;
    auto objective_at = [&](const Eigen::VectorXd& v) {
        const double t = a_h_.dot(v);
        return objective_.quad * t * t + c.dot(v);
    };

    std::vector<double> best;
    best.reserve(std::min(options_.max_iter, 1 << 16));
    double best_so_far = std::numeric_limits<double>::infinity();

    int it = 0;
    for (it = 1; it <= options_.max_iter; ++it) {
        const Eigen::VectorXd x_old = x_;
        const Eigen::VectorXd w_lin_old = z_lin_ + y_lin_.cwiseQuotient(rho_lin_);
        const Eigen::VectorXd w_psd_old = z_psd_ + y_psd_ / rho_;
        const Eigen::VectorXd y_lin_old = y_lin_, y_psd_old = y_psd_;

        Eigen::VectorXd rhs = sigma * x_ - c + (rho_ * z_psd_ - y_psd_);
        if (a_.rows() > 0) rhs += a_.transpose() * (rho_lin_.cwiseProduct(z_lin_) - y_lin_);
        const Eigen::VectorXd xt = solve_kkt(rhs);
        const Eigen::VectorXd zt_lin = a_ * xt;

        x_ = alpha * xt + (1.0 - alpha) * x_;
        const Eigen::VectorXd zh_lin = alpha * zt_lin + (1.0 - alpha) * z_lin_;
        const Eigen::VectorXd zh_psd = alpha * xt + (1.0 - alpha) * z_psd_;

        z_lin_ = (zh_lin + y_lin_.cwiseQuotient(rho_lin_)).cwiseMax(lo_).cwiseMin(hi_);
        z_psd_ = project_cone(zh_psd + y_psd_ / rho_);
        y_lin_ += rho_lin_.cwiseProduct(zh_lin - z_lin_);
        y_psd_ += rho_ * (zh_psd - z_psd_);

        // Residuals in the scaled problem.
        const Eigen::VectorXd ax = a_ * x_;
        double r_prim = (x_ - z_psd_).lpNorm<Eigen::Infinity>();
        if (a_.rows() > 0) r_prim = std::max(r_prim, (ax - z_lin_).lpNorm<Eigen::Infinity>());
        const Eigen::VectorXd px = quad2 * a_h_.dot(x_) * a_h_;
        Eigen::VectorXd aty = y_psd_;
        if (a_.rows() > 0) aty += a_.transpose() * y_lin_;
        const double r_dual = (px + c + aty).lpNorm<Eigen::Infinity>();

        auto inf = [](const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; };
        const double sc_prim = std::max({inf(ax), inf(x_), inf(z_lin_), inf(z_psd_)});
        const double sc_dual = std::max({inf(px), inf(aty), inf(c)});
        const double eps_prim = tol + tol * sc_prim;
        const double eps_dual = tol + tol * sc_dual;

        const Eigen::VectorXd w_lin = z_lin_ + y_lin_.cwiseQuotient(rho_lin_);
        const Eigen::VectorXd w_psd = z_psd_ + y_psd_ / rho_;
        const double merit = std::sqrt(sigma * (x_ - x_old).squaredNorm() +
                                       (w_lin - w_lin_old).cwiseAbs2().dot(rho_lin_) +
                                       rho_ * (w_psd - w_psd_old).squaredNorm());

        if (options_.record_history || options_.trace) {
            const double obj = objective_at(z_psd_);
            if (options_.record_history) sol.history.push_back({it, obj, r_prim, merit, rho_});
            if (options_.trace) *options_.trace << it << ',' << obj << ',' << r_prim << '\n';
        }

        if (r_prim <= eps_prim && r_dual <= eps_dual) {
            const HermitianMatrix v = smat(z_psd_, set_.n);
            if (feasibility_residual(v, set_) <= tol) {
                sol.status = SdpStatus::converged;
                break;
            }
        }

        // Infeasibility: stalled primal residual, or a primal certificate in the dual increments.
        best_so_far = std::min(best_so_far, r_prim);
        best.push_back(best_so_far);
        const int w = options_.stall_window;
        if (static_cast<int>(best.size()) > w && best_so_far > options_.stall_floor &&
            best[best.size() - 1 - w] - best_so_far < options_.stall_improvement) {
            sol.status = SdpStatus::infeasible;
            break;
        }
        if (it % options_.adapt_interval == 0) {
            const Eigen::VectorXd dy_lin = y_lin_ - y_lin_old, dy_psd = y_psd_ - y_psd_old;
            const double dy = std::max(inf(dy_lin), inf(dy_psd));
            if (dy > 0.0) {
                const double eps = 1e-6 * dy;
                Eigen::VectorXd atdy = dy_psd;
                if (a_.rows() > 0) atdy += a_.transpose() * dy_lin;
                const double support = hi_.dot(dy_lin.cwiseMax(0.0)) + lo_.dot(dy_lin.cwiseMin(0.0));
                if (inf(atdy) <= eps && support < -eps) {
                    Eigen::SelfAdjointEigenSolver<CMatrix> es(smat(dy_psd, set_.n).matrix(), Eigen::EigenvaluesOnly);
                    if (es.eigenvalues().maxCoeff() <= eps) {
                        sol.status = SdpStatus::infeasible;
                        break;
                    }
                }
            }
            if (options_.adaptive_rho) {
                const double num = r_prim / std::max(sc_prim, 1.0);
                const double den = r_dual / std::max(sc_dual, 1.0);
                if (num > 0.0 && den > 0.0) {
                    const double rho_new = std::clamp(rho_ * std::sqrt(num / den), 1e-6, 1e6);
                    if (rho_new > 5.0 * rho_ || rho_new < 0.2 * rho_) {
                        // Keep the unscaled multipliers; only the penalty changes.
                        rho_ = rho_new;
                        factor();
                    }
                }
            }
        }
    }
    sol.iterations = std::min(it, options_.max_iter);
    sol.V = smat(z_psd_, set_.n);
    sol.residual = feasibility_residual(sol.V, set_);
    sol.objective = objective_.eval(sol.V) + dual_term.trace_product(sol.V);
    sol.converged = sol.status == SdpStatus::converged;
    return sol;
}

SdpSolution solve_v_subproblem(const VFeasibleSet& set, const ObjectiveSpec& objective,
                               const HermitianMatrix& dual_term, const SdpOptions& options) {
    VSubproblemSolver solver(set, objective, options);
    return solver.solve(dual_term);
}

}  // namespace pvopf
