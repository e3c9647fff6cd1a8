#include "pvopf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "pvopf/errors.hpp"

namespace pvopf {

namespace {

constexpr double kTimeEps = 1e-9;

bool relative_change(double a, double b, double threshold) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / scale > threshold;
}

bool conditions_changed(const Interval& a, const Interval& b, double threshold) {
    if (relative_change(a.load_scale, b.load_scale, threshold)) return true;
    for (std::size_t i = 0; i < a.p_av_kw.size(); ++i)
        if (relative_change(a.p_av_kw[i], b.p_av_kw[i], threshold)) return true;
    return false;
}

bool same(const PQ& a, const PQ& b) { return a.p == b.p && a.q == b.q; }

bool same(const std::vector<PQ>& a, const std::vector<PQ>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const PQ& x, const PQ& y) { return same(x, y); });
}

}  // namespace

void Scenario::validate() const {
    if (!(dt_over_tau > 0.0) || !std::isfinite(dt_over_tau)) throw ConfigError("dt_over_tau must be positive");
    if (!(tau_ref_s > 0.0) || !std::isfinite(tau_ref_s)) throw ConfigError("tau_ref_s must be positive");
    if (ticks < 1) throw ConfigError("ticks must be at least 1");
    if (!(converge_tol > 0.0)) throw ConfigError("converge_tol must be positive");
    if (!(controller.c0 > 0.0)) throw ConfigError("controller c0 must be positive");
    if (controller.M < 1) throw ConfigError("controller M must be at least 1");
    if (!(controller.g_tilde >= 0.0)) throw ConfigError("controller g_tilde must be non-negative");
    if (!(controller.restart_threshold >= 0.0)) throw ConfigError("restart_threshold must be non-negative");
    if (!(sdp.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (objective.quad < 0.0) throw ConfigError("objective quad must be non-negative");

    std::set<int> ids;
    for (const auto& inv : inverters) {
        const std::string tag = "inverter " + std::to_string(inv.id);
        if (!ids.insert(inv.id).second) throw ConfigError("duplicate " + tag);
        if (!(inv.s_kva > 0.0)) throw ConfigError(tag + ": s_kva must be positive");
        if (!(inv.tau_s > 0.0)) throw ConfigError(tag + ": tau_s must be positive");
        if (!(inv.theta_deg >= 0.0 && inv.theta_deg <= 90.0)) throw ConfigError(tag + ": theta_deg must lie in [0, 90]");
        inv.cost.validate();
    }

    if (intervals.empty()) throw ConfigError("scenario has no intervals");
    if (std::abs(intervals.front().t_start) > kTimeEps) throw ConfigError("first interval must start at t = 0");
    for (std::size_t j = 0; j < intervals.size(); ++j) {
        const Interval& iv = intervals[j];
        const std::string tag = "interval " + std::to_string(j);
        if (!(iv.t_end > iv.t_start)) throw ConfigError(tag + ": t_end must exceed t_start");
        if (j > 0 && std::abs(iv.t_start - intervals[j - 1].t_end) > kTimeEps)
            throw ConfigError(tag + ": intervals must be contiguous and non-overlapping");
        if (iv.p_av_kw.size() != inverters.size())
            throw ConfigError(tag + ": expected " + std::to_string(inverters.size()) + " p_av values");
        if (!(iv.load_scale >= 0.0) || !std::isfinite(iv.load_scale)) throw ConfigError(tag + ": bad load_scale");
        for (std::size_t i = 0; i < inverters.size(); ++i) {
            const double p = iv.p_av_kw[i];
            if (!(p >= 0.0 && p <= inverters[i].s_kva))
                throw ConfigError(tag + ": p_av of inverter " + std::to_string(inverters[i].id) + " must lie in [0, s_kva]");
            if (inverters[i].strategy != Strategy::reactive_only && p < inverters[i].p_min_kw)
                throw ConfigError(tag + ": p_av of inverter " + std::to_string(inverters[i].id) + " is below p_min");
        }
    }
    if (static_cast<double>(ticks - 1) * dt_over_tau >= intervals.back().t_end - kTimeEps)
        throw ConfigError("ticks extend beyond the last interval");
    for (std::size_t j = 0; j < intervals.size(); ++j) (void)instance(j);
}

std::size_t Scenario::interval_at(long k) const {
    const double t = static_cast<double>(k) * dt_over_tau;
    for (std::size_t j = 0; j < intervals.size(); ++j)
        if (t < intervals[j].t_end - kTimeEps) return j;
    return intervals.size() - 1;
}

OpfInstance Scenario::instance(std::size_t j) const {
    const Interval& iv = intervals.at(j);
    const double sb = feeder.base().s_kva;
    std::vector<InverterSite> sites;
    for (std::size_t i = 0; i < inverters.size(); ++i) {
        const InverterSpec& s = inverters[i];
        const OperatingRegion r = OperatingRegion::make(s.strategy, s.s_kva / sb, iv.p_av_kw[i] / sb, s.p_min_kw / sb,
                                                        s.theta_deg * std::numbers::pi / 180.0);
        sites.push_back({s.id, s.node, r, s.cost});
    }
    FeederModel m = feeder.with_load_scale(iv.load_scale);
    const CMatrix y = build_admittance(m);
    const auto mats = injection_matrices(y);
    ObjectiveSpec obj = ObjectiveSpec::none(m.size());
    if (objective.kind == ObjectiveKind::substation) obj = ObjectiveSpec::substation(mats, objective.quad, objective.lin);
    if (objective.kind == ObjectiveKind::losses) obj = ObjectiveSpec::losses(mats, objective.quad, objective.lin);
    return OpfInstance::make_with_objective(std::move(m), std::move(sites), std::move(obj));
}

bool operator==(const TrajectoryLog& a, const TrajectoryLog& b) {
    if (a.inverter_ids != b.inverter_ids || a.restarts != b.restarts || a.converged != b.converged ||
        a.rank1 != b.rank1 || !(a.final_V == b.final_V) || !same(a.final_u, b.final_u) ||
        !same(a.final_y, b.final_y) || !same(a.final_lambda, b.final_lambda))
        return false;
    if (a.ticks.size() != b.ticks.size() || a.epochs.size() != b.epochs.size() ||
        a.messages.size() != b.messages.size())
        return false;
    for (std::size_t k = 0; k < a.ticks.size(); ++k) {
        const TickRecord &x = a.ticks[k], &y = b.ticks[k];
        if (x.k != y.k || x.t_over_tau != y.t_over_tau || x.epoch != y.epoch || x.is_epoch != y.is_epoch ||
            x.interval != y.interval || x.alpha != y.alpha || x.eps_bound != y.eps_bound ||
            x.tracking_error != y.tracking_error || x.residual_norm != y.residual_norm ||
            x.v_feasibility != y.v_feasibility || x.inv.size() != y.inv.size())
            return false;
        for (std::size_t i = 0; i < x.inv.size(); ++i)
            if (!same(x.inv[i].y, y.inv[i].y) || !same(x.inv[i].u, y.inv[i].u) ||
                !same(x.inv[i].lambda, y.inv[i].lambda) || x.inv[i].resid != y.inv[i].resid)
                return false;
    }
    for (std::size_t e = 0; e < a.epochs.size(); ++e) {
        const EpochRecord &x = a.epochs[e], &y = b.epochs[e];
        if (x.launch_tick != y.launch_tick || x.visible_tick != y.visible_tick || x.iterations != y.iterations ||
            x.converged != y.converged || x.degraded != y.degraded || x.residual != y.residual ||
            x.objective != y.objective || x.rank1 != y.rank1 || x.eig_ratio != y.eig_ratio)
            return false;
    }
    for (std::size_t m = 0; m < a.messages.size(); ++m) {
        const Message &x = a.messages[m], &y = b.messages[m];
        if (x.tick != y.tick || x.direction != y.direction || x.inverter_id != y.inverter_id || x.kind != y.kind ||
            !same(x.payload, y.payload))
            return false;
    }
    return true;
}

InverterTickOutput inverter_tick(InverterAgent& a, std::optional<PQ> received_h, long k,
                                 const StepsizeSchedule& schedule, const AsyncSchedule& async, double dt_s) {
    InverterTickOutput out;
    out.y = sample_output(a.dyn);
    if (received_h) a.h = *received_h;
    out.alpha = stepsize(schedule, k + 1);
    out.resid = (a.h - out.y + a.d).norm();
    a.lambda = dual_ascent(a.lambda, a.h, out.y, a.d, out.alpha);
    a.u = setpoint_update(a.region, a.cost, a.lambda);
    if (epoch_of(k, async) == k)
        out.reply = Message{k, Direction::inverter_to_dso, a.id, PayloadKind::lambda, a.lambda};
    a.dyn = step_dynamics(a.dyn, a.u, dt_s);
    return out;
}

DsoAgent::DsoAgent(const OpfInstance& inst, SdpOptions options, long M, bool concurrent)
    : inst_(inst),
      solver_(std::make_unique<VSubproblemSolver>(inst.set, inst.objective, options)),
      M_(M),
      concurrent_(concurrent) {
    if (M < 1) throw ConfigError("M must be at least 1");
}

DsoAgent::~DsoAgent() {
    if (pending_ && pending_->result.valid()) pending_->result.wait();
}

void DsoAgent::initialize() {
    SdpSolution s = solver_->solve(dual_term(inst_, std::vector<PQ>(inst_.n_inverters())));
    if (s.status == SdpStatus::infeasible)
        throw InfeasibleError(0, s.residual, "voltage feasible set is empty at the initial solve (residual " +
                                                 std::to_string(s.residual) + ")");
    visible_ = s.V;
    EpochRecord e;
    e.iterations = s.iterations;
    e.converged = s.converged;
    e.degraded = !s.converged;
    e.residual = s.residual;
    e.objective = s.objective;
    const Rank1Result r1 = rank1_extract(s.V, 1e-6);
    e.rank1 = r1.is_rank1;
    e.eig_ratio = r1.eig_ratio;
    epochs_.push_back(e);
}

void DsoAgent::retire(long k, bool force) {
    if (!pending_) return;
    if (!force && pending_->launch_tick + M_ > k) return;
    SdpSolution s = pending_->result.get();
    const long launched = pending_->launch_tick;
    pending_.reset();
    if (s.status == SdpStatus::infeasible)
        throw InfeasibleError(launched, s.residual, "voltage feasible set is empty at the epoch launched on tick " +
                                                        std::to_string(launched) + " (residual " +
                                                        std::to_string(s.residual) + ")");
    EpochRecord e;
    e.launch_tick = launched;
    e.visible_tick = launched + M_;
    e.iterations = s.iterations;
    e.converged = s.converged;
    e.degraded = !s.converged;
    e.residual = s.residual;
    e.objective = s.objective;
    if (s.V.trace() > 0.0) {
        const Rank1Result r1 = rank1_extract(s.V, 1e-6);
        e.rank1 = r1.is_rank1;
        e.eig_ratio = r1.eig_ratio;
    }
    // A non-converged solve leaves the previous V in place.
    if (s.converged) visible_ = s.V;
    epochs_.push_back(e);
}

std::vector<PQ> DsoAgent::broadcast(long k) {
    if (epoch_of(k, AsyncSchedule{M_}) != k) throw ContractViolation("DsoAgent::broadcast: not an epoch tick");
    retire(k, false);
    return h_at_inverters(inst_, visible_);
}

void DsoAgent::launch(const std::vector<PQ>& lambda, long k) {
    if (pending_) retire(k, true);
    const HermitianMatrix d = dual_term(inst_, lambda);
    VSubproblemSolver* solver = solver_.get();
    auto policy = concurrent_ ? std::launch::async : std::launch::deferred;
    pending_ = Pending{k, std::async(policy, [solver, d] { return solver->solve(d); })};
}

void DsoAgent::update_conditions(const OpfInstance& inst) {
    // The in-flight solve keeps the data it was launched with.
    if (pending_) pending_->result.wait();
    solver_->update_bounds(inst.set);
    inst_ = inst;
}

void dso_tick(DsoAgent& dso, const std::vector<Message>& lambda_messages, long k, long M) {
    if (epoch_of(k, AsyncSchedule{M}) != k) throw ContractViolation("dso_tick: k is not an epoch tick");
    std::vector<PQ> lambda;
    lambda.reserve(lambda_messages.size());
    for (const Message& m : lambda_messages) {
        if (m.kind != PayloadKind::lambda || m.direction != Direction::inverter_to_dso)
            throw ContractViolation("dso_tick: expected multiplier messages");
        lambda.push_back(m.payload);
    }
    dso.launch(lambda, k);
}

TrajectoryLog run_closed_loop(const Scenario& sc) {
    sc.validate();
    const std::size_t nd = sc.inverters.size();
    std::size_t current = 0;
    OpfInstance inst = sc.instance(0);

    std::vector<InverterAgent> agents(nd);
    TrajectoryLog log;
    ConvergenceConstants consts;
    consts.G_tilde = sc.controller.g_tilde;
    for (std::size_t i = 0; i < nd; ++i) {
        InverterAgent& a = agents[i];
        a.id = inst.sites[i].id;
        a.bus = inst.sites[i].bus;
        a.region = inst.sites[i].region;
        a.cost = inst.sites[i].cost;
        a.d = inst.site_load(i);
        a.u = project_onto_region(a.region, {0.0, 0.0});
        a.dyn = InverterDynamics{sc.inverters[i].tau_s, a.u};
        consts.L = std::max(consts.L, lipschitz_constant(a.cost));
        log.inverter_ids.push_back(a.id);
    }

    const AsyncSchedule async{sc.controller.M};
    StepsizeSchedule schedule{sc.controller.c0, 0};
    AlphaHistory alpha_hist{0, {0.0}};  // no step precedes tick 0
    DsoAgent dso(inst, sc.sdp, sc.controller.M, sc.concurrent_dso);
    dso.initialize();

    const double dt_s = sc.dt_seconds();
    log.ticks.reserve(static_cast<std::size_t>(sc.ticks));
    for (long k = 0; k < sc.ticks; ++k) {
        const std::size_t iv = sc.interval_at(k);
        if (iv != current) {
            const bool changed = conditions_changed(sc.intervals[current], sc.intervals[iv], sc.controller.restart_threshold);
            inst = sc.instance(iv);
            for (std::size_t i = 0; i < nd; ++i) {
                agents[i].region = inst.sites[i].region;
                agents[i].d = inst.site_load(i);
            }
            dso.update_conditions(inst);
            if (changed) {
                schedule = restart_on_change(schedule, k, true);
                log.restarts.push_back(k);
            }
            current = iv;
        }

        TickRecord rec;
        rec.k = k;
        rec.t_over_tau = static_cast<double>(k) * sc.dt_over_tau;
        rec.epoch = epoch_of(k, async);
        rec.is_epoch = rec.epoch == k;
        rec.interval = iv;
        rec.alpha = alpha_hist.at(k);
        rec.v_feasibility = feasibility_residual(dso.visible_V(), dso.set());

        std::vector<std::optional<PQ>> received(nd);
        if (rec.is_epoch) {
            const std::vector<PQ> h = dso.broadcast(k);
            for (std::size_t i = 0; i < nd; ++i) {
                received[i] = h[i];
                log.messages.push_back({k, Direction::dso_to_inverter, agents[i].id, PayloadKind::h_of_V, h[i]});
            }
        }

        std::vector<Message> replies;
        std::vector<PQ> ys(nd), us_held(nd);
        double resid2 = 0.0, alpha_next = stepsize(schedule, k + 1);
        rec.inv.resize(nd);
        for (std::size_t i = 0; i < nd; ++i) {
            InverterAgent& a = agents[i];
            us_held[i] = a.u;
            rec.inv[i].u = a.u;
            rec.inv[i].lambda = a.lambda;
            const InverterTickOutput out = inverter_tick(a, received[i], k, schedule, async, dt_s);
            ys[i] = out.y;
            rec.inv[i].y = out.y;
            rec.inv[i].resid = out.resid;
            resid2 += out.resid * out.resid;
            alpha_next = out.alpha;
            if (out.reply) {
                replies.push_back(*out.reply);
                log.messages.push_back(*out.reply);
            }
        }
        if (rec.is_epoch) dso_tick(dso, replies, k, sc.controller.M);

        rec.residual_norm = std::sqrt(resid2);
        rec.tracking_error = tracking_error(ys, us_held);
        consts.observe(rec.residual_norm);
        rec.eps_bound = epsilon_bound(consts, alpha_hist, k, sc.controller.M);
        alpha_hist.push(alpha_next);
        log.ticks.push_back(std::move(rec));
    }

    log.epochs = dso.epochs();
    log.final_V = dso.visible_V();
    for (const auto& a : agents) {
        log.final_u.push_back(a.u);
        log.final_y.push_back(sample_output(a.dyn));
        log.final_lambda.push_back(a.lambda);
    }
    if (log.final_V.trace() > 0.0) log.rank1 = rank1_extract(log.final_V, 1e-6).is_rank1;
    const TickRecord& last = log.ticks.back();
    log.converged = last.tracking_error <= sc.converge_tol && last.residual_norm <= sc.converge_tol;
    return log;
}

}  // namespace pvopf
