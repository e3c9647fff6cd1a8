#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "pvopf/oracle.hpp"
#include "pvopf/simulator.hpp"

namespace pvopf {

/// Feeder text format:
///   #base s_kva,v_kv,v0_pu,vmin_pu,vmax_pu
///   [buses]  id,class,p_load_kw,q_load_kvar
///   [lines]  from,to,r_ohm,x_ohm,b_total_us
/// Other lines starting with '#' are comments; a header row per section is optional.
FeederModel parse_feeder(std::istream& in, const std::string& source = "<feeder>");
FeederModel load_feeder(const std::string& path);
void write_feeder(std::ostream& out, const FeederModel& model);

/// INI-style scenario with sections [scenario], [controller], [objective],
/// [inverters] (CSV rows) and [intervals] (CSV rows, p_av values separated by ';').
/// A relative feeder path is resolved against the scenario's directory unless
/// `feeder_override` is given.
Scenario load_scenario(const std::string& path, const std::optional<std::string>& feeder_override = std::nullopt);
Scenario parse_scenario(std::istream& in, const std::string& source, const std::string& base_dir,
                        const std::optional<std::string>& feeder_override = std::nullopt);

/// tick,t_over_tau,inv_id,P_y,Q_y,P_u,Q_u,lam_P,lam_Q,alpha,eps_bound,epoch,resid
void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);

/// First tick of each interval after which the tracking error stays below
/// tol until the interval ends; -1 when never.
std::vector<long> interval_convergence_ticks(const TrajectoryLog& log, std::size_t n_intervals, double tol);

/// Deterministic JSON summary of a run, with deviation columns when an
/// oracle solution is supplied.
std::string emit_summary(const TrajectoryLog& log, const Scenario& scenario,
                         const std::optional<CentralSolution>& oracle = std::nullopt);

struct RunConfig {
    std::string scenario_path;
    std::optional<std::string> feeder_path;
    std::string out_dir = ".";
    int verbosity = 0;
    std::optional<double> tol_sdp;
    std::optional<long> m;
    std::optional<long> ticks;
    bool compare_oracle = false;
    bool trace_solver = false;
    std::uint64_t seed = 0;  // reserved for randomized tests; the control path never reads it

    /// Throws ConfigError when paths are missing or overrides are not positive.
    void validate() const;
};

enum ExitCode : int { kExitConverged = 0, kExitFailure = 1, kExitConfig = 2, kExitInfeasible = 3, kExitBudget = 4 };

/// Loads, runs and writes trajectory.csv and summary.json into out_dir.
/// Diagnostics go to `err`. Returns one of ExitCode.
int run(const RunConfig& config, std::ostream& err);

}  // namespace pvopf
