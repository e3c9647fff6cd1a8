#include <iostream>

#include <CLI11.hpp>

#include "pvopf/io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop PV inverter OPF tracking simulator"};
    pvopf::RunConfig cfg;
    std::string feeder;
    double tol_sdp = 0.0;
    long m = 0, ticks = 0;
    app.add_option("--scenario", cfg.scenario_path, "Scenario file")->required();
    app.add_option("--feeder", feeder, "Feeder file, overrides the one named in the scenario");
    app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
    auto* tol_opt = app.add_option("--tol-sdp", tol_sdp, "SDP solver tolerance");
    auto* m_opt = app.add_option("--m", m, "Override the epoch length M");
    auto* ticks_opt = app.add_option("--ticks", ticks, "Override the number of ticks");
    app.add_flag("--compare-oracle", cfg.compare_oracle, "Compare final setpoints with the centralized solution");
    app.add_flag("--trace-solver", cfg.trace_solver, "Write solver_trace.csv with every SDP iteration");
    app.add_flag("-v,--verbose", cfg.verbosity, "Print a run summary to stderr");
    app.add_option("--seed", cfg.seed, "Seed for randomized test generators (unused by the control path)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pvopf::kExitConfig;
    }
    if (!feeder.empty()) cfg.feeder_path = feeder;
    if (*tol_opt) cfg.tol_sdp = tol_sdp;
    if (*m_opt) cfg.m = m;
    if (*ticks_opt) cfg.ticks = ticks;
    return pvopf::run(cfg, std::cerr);
}
