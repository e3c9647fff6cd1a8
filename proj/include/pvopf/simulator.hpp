#pragma once

#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pvopf/controller.hpp"
#include "pvopf/problem.hpp"

namespace pvopf {

/// One inverter as written in a scenario, in engineering units.
struct InverterSpec {
    int id = 0;
    BusId node = 0;
    double s_kva = 0.0;
    Strategy strategy = Strategy::full;
    double theta_deg = 90.0;
    double p_min_kw = 0.0;
    CostParams cost;  // applied to pu quantities
    double tau_s = 1.0;
};

/// Exogenous conditions over [t_start, t_end), times in units of tau_ref.
struct Interval {
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<double> p_av_kw;  // one per inverter, in scenario order
    double load_scale = 1.0;
};

struct ControllerParams {
    double c0 = 1.0;
    long M = 1;
    double g_tilde = 1.0;
    double restart_threshold = 1e-6;
};

enum class ObjectiveKind { none, substation, losses };

struct ObjectiveParams {
    ObjectiveKind kind = ObjectiveKind::substation;
    double quad = 0.0;
    double lin = 0.0;
};

struct Scenario {
    FeederModel feeder;
    std::vector<InverterSpec> inverters;
    ControllerParams controller;
    ObjectiveParams objective;
    std::vector<Interval> intervals;
    double dt_over_tau = 1.0;  // tick length in units of tau_ref
    double tau_ref_s = 1.0;
    long ticks = 0;
    /// Final tracking error and balance residual must both fall below this
    /// for the run to count as converged.
    double converge_tol = 1e-4;
    SdpOptions sdp;
    /// Run each DSO solve on a worker thread; the log is identical either way.
    bool concurrent_dso = false;

    /// Throws ConfigError on any inconsistency (intervals not contiguous,
    /// p_av above rating, inverter/bus mismatch, non-positive tick length, ...).
    void validate() const;
    /// Index of the interval containing tick k.
    std::size_t interval_at(long k) const;
    /// Relaxed OPF for the conditions of one interval.
    OpfInstance instance(std::size_t interval) const;
    double dt_seconds() const { return dt_over_tau * tau_ref_s; }
};

enum class Direction { dso_to_inverter, inverter_to_dso };
enum class PayloadKind { h_of_V, lambda };

struct Message {
    long tick = 0;
    Direction direction = Direction::dso_to_inverter;
    int inverter_id = 0;
    PayloadKind kind = PayloadKind::h_of_V;
    PQ payload;
};

/// y[t_k], the setpoint u[t_k] held over the preceding tick, and lambda[t_k]
/// before this tick's dual step.
struct InverterRecord {
    PQ y, u, lambda;
    double resid = 0.0;  // ||h_i(V) - y_i + d_i||
};

struct TickRecord {
    long k = 0;
    double t_over_tau = 0.0;
    long epoch = 0;       // c(k)
    bool is_epoch = false;
    std::size_t interval = 0;
    double alpha = 0.0;      // alpha_k, the step that produced lambda[t_k]; 0 at k = 0
    double eps_bound = 0.0;  // bound on epsilon[t_k]
    double tracking_error = 0.0;
    double residual_norm = 0.0;
    double v_feasibility = 0.0;
    std::vector<InverterRecord> inv;
};

struct EpochRecord {
    long launch_tick = 0;
    long visible_tick = 0;
    int iterations = 0;
    bool converged = false;
    bool degraded = false;
    double residual = 0.0;
    double objective = 0.0;
    bool rank1 = false;
    double eig_ratio = 0.0;
};

struct TrajectoryLog {
    std::vector<int> inverter_ids;
    std::vector<TickRecord> ticks;
    std::vector<EpochRecord> epochs;
    std::vector<Message> messages;
    std::vector<long> restarts;
    bool converged = false;
    bool rank1 = false;
    HermitianMatrix final_V;
    std::vector<PQ> final_u;
    std::vector<PQ> final_y;
    std::vector<PQ> final_lambda;
};

bool operator==(const TrajectoryLog& a, const TrajectoryLog& b);

/// State owned by one inverter.
struct InverterAgent {
    int id = 0;
    BusId bus = 0;
    OperatingRegion region;
    CostParams cost;
    InverterDynamics dyn;
    PQ d;          // local load, pu
    PQ lambda;
    PQ u;
    PQ h;          // most recent h_i(V) received from the DSO
};

struct InverterTickOutput {
    PQ y;
    double alpha = 0.0;
    double resid = 0.0;
    std::optional<Message> reply;
};

/// Sample y, absorb a fresh h_i(V) if one arrived, dual ascent with
/// alpha_{k+1}, setpoint update, λ reply on epoch ticks, then hold the new
/// setpoint over one tick of length dt_s.
InverterTickOutput inverter_tick(InverterAgent& agent, std::optional<PQ> received_h, long k,
                                 const StepsizeSchedule& schedule, const AsyncSchedule& async, double dt_s);

/// The DSO side: a warm-started V solver with M-tick result latency.
class DsoAgent {
public:
    DsoAgent(const OpfInstance& inst, SdpOptions options, long M, bool concurrent);
    ~DsoAgent();

    /// Initial V from lambda = 0, visible from tick 0.
    void initialize();
    /// Makes any solve launched M ticks ago visible, then returns h_i of the
    /// visible V for every inverter. Only valid when c(k) == k.
    std::vector<PQ> broadcast(long k);
    /// Starts a solve from the multipliers received at tick k.
    void launch(const std::vector<PQ>& lambda, long k);
    /// Replaces the load data; applies to solves launched afterwards.
    void update_conditions(const OpfInstance& inst);

    const HermitianMatrix& visible_V() const { return visible_; }
    const VFeasibleSet& set() const { return inst_.set; }
    std::vector<EpochRecord>& epochs() { return epochs_; }

private:
    struct Pending {
        long launch_tick = 0;
        std::future<SdpSolution> result;
    };
    void retire(long k, bool force);

    OpfInstance inst_;
    std::unique_ptr<VSubproblemSolver> solver_;
    long M_ = 1;
    bool concurrent_ = false;
    HermitianMatrix visible_;
    std::optional<Pending> pending_;
    std::vector<EpochRecord> epochs_;
};

/// dso_tick for an epoch tick: launches the solve from the received λ
/// messages. Throws ContractViolation when k is not an epoch tick.
void dso_tick(DsoAgent& dso, const std::vector<Message>& lambda_messages, long k, long M);

/// Executes the scenario. Throws InfeasibleError when an epoch solve finds the
/// voltage set empty.
TrajectoryLog run_closed_loop(const Scenario& scenario);

}  // namespace pvopf
