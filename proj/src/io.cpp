#include "pvopf/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pvopf/errors.hpp"

namespace pvopf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

struct Cursor {
    std::string source;
    int line = 0;

    double num(const std::string& s, const std::string& field) const {
        double v = 0.0;
        if (!parse_double(s, v)) throw ParseError(source, line, "field '" + field + "': not a number: '" + s + "'");
        return v;
    }
    long integer(const std::string& s, const std::string& field) const {
        const double v = num(s, field);
        if (v != std::floor(v)) throw ParseError(source, line, "field '" + field + "': not an integer: '" + s + "'");
        return static_cast<long>(v);
    }
    void expect_fields(const std::vector<std::string>& f, std::size_t n, const std::string& what) const {
        if (f.size() != n)
            throw ParseError(source, line, what + ": expected " + std::to_string(n) + " fields, got " + std::to_string(f.size()));
    }
};

bool looks_like_header(const std::vector<std::string>& f) {
    double v = 0.0;
    return !f.empty() && !parse_double(f[0], v);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

FeederModel parse_feeder(std::istream& in, const std::string& source) {
    Cursor cur{source, 0};
    std::optional<BaseValues> base;
    std::vector<Bus> buses;
    std::vector<LineSpec> lines;
    std::string section;
    bool header_allowed = false;
    std::string raw;
    while (std::getline(in, raw)) {
        ++cur.line;
        const std::string s = trim(raw);
        if (s.empty()) continue;
        if (s.rfind("#base", 0) == 0) {
            const auto f = split(trim(s.substr(5)), ',');
            cur.expect_fields(f, 5, "#base");
            base = BaseValues{cur.num(f[0], "s_kva"), cur.num(f[1], "v_kv"), cur.num(f[2], "v0_pu"),
                              cur.num(f[3], "vmin_pu"), cur.num(f[4], "vmax_pu")};
            continue;
        }
        if (s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError(source, cur.line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "buses" && section != "lines")
                throw ParseError(source, cur.line, "unknown section [" + section + "]");
            header_allowed = true;
            continue;
        }
        const auto f = split(s, ',');
        if (header_allowed && looks_like_header(f)) {
            header_allowed = false;
            continue;
        }
        header_allowed = false;
        if (section == "buses") {
            cur.expect_fields(f, 4, "bus row");
            Bus b;
            b.id = static_cast<BusId>(cur.integer(f[0], "id"));
            try {
                b.cls = bus_class_from_string(f[1]);
            } catch (const ModelError& e) {
                throw ParseError(source, cur.line, std::string("field 'class': ") + e.what());
            }
            b.p_load_kw = cur.num(f[2], "p_load_kw");
            b.q_load_kvar = cur.num(f[3], "q_load_kvar");
            buses.push_back(b);
        } else if (section == "lines") {
            cur.expect_fields(f, 5, "line row");
            LineSpec l;
            l.from = static_cast<BusId>(cur.integer(f[0], "from"));
            l.to = static_cast<BusId>(cur.integer(f[1], "to"));
            l.z_ohm = {cur.num(f[2], "r_ohm"), cur.num(f[3], "x_ohm")};
            l.b_total_us = cur.num(f[4], "b_total_us");
            lines.push_back(l);
        } else {
            throw ParseError(source, cur.line, "data outside of a section");
        }
    }
    if (!base) throw ParseError(source, cur.line, "missing '#base' header");
    try {
        return FeederModel::create(*base, std::move(buses), std::move(lines));
    } catch (const ModelError& e) {
        throw ModelError(source + ": " + e.what());
    }
}

FeederModel load_feeder(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open feeder file '" + path + "'");
    return parse_feeder(in, path);
}

void write_feeder(std::ostream& out, const FeederModel& m) {
    const BaseValues& b = m.base();
    out << "#base " << fmt(b.s_kva) << ',' << fmt(b.v_kv) << ',' << fmt(b.v0_pu) << ',' << fmt(b.vmin_pu) << ','
        << fmt(b.vmax_pu) << '\n';
    out << "[buses]\nid,class,p_load_kw,q_load_kvar\n";
    for (const Bus& bus : m.buses())
        out << bus.id << ',' << to_string(bus.cls) << ',' << fmt(bus.p_load_kw) << ',' << fmt(bus.q_load_kvar) << '\n';
    out << "[lines]\nfrom,to,r_ohm,x_ohm,b_total_us\n";
    for (const LineSpec& l : m.lines())
        out << l.from << ',' << l.to << ',' << fmt(l.z_ohm.real()) << ',' << fmt(l.z_ohm.imag()) << ','
            << fmt(l.b_total_us) << '\n';
}

Scenario parse_scenario(std::istream& in, const std::string& source, const std::string& base_dir,
                        const std::optional<std::string>& feeder_override) {
    Cursor cur{source, 0};
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> kv;
    std::vector<std::pair<std::vector<std::string>, int>> inv_rows, interval_rows;
    std::string section;
    bool header_allowed = false;
    std::string raw;
    while (std::getline(in, raw)) {
        ++cur.line;
        std::string s = trim(raw);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError(source, cur.line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            static const std::set<std::string> known{"scenario", "controller", "objective", "inverters", "intervals"};
            if (!known.count(section)) throw ParseError(source, cur.line, "unknown section [" + section + "]");
            header_allowed = true;
            continue;
        }
        if (section == "inverters" || section == "intervals") {
            const auto f = split(s, ',');
            if (header_allowed && looks_like_header(f)) {
                header_allowed = false;
                continue;
            }
            header_allowed = false;
            (section == "inverters" ? inv_rows : interval_rows).push_back({f, cur.line});
            continue;
        }
        if (section.empty()) throw ParseError(source, cur.line, "data outside of a section");
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(source, cur.line, "expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        if (kv[section].count(key)) throw ParseError(source, cur.line, "duplicate key '" + key + "'");
        kv[section][key] = {trim(s.substr(eq + 1)), cur.line};
    }

    static const std::map<std::string, std::set<std::string>> allowed{
        {"scenario",
         {"feeder", "ticks", "dt_over_tau", "tau_ref_s", "converge_tol", "vmin_pu", "vmax_pu", "sdp_tol", "sdp_max_iter",
          "concurrent_dso"}},
        {"controller", {"c0", "M", "g_tilde", "restart_threshold"}},
        {"objective", {"kind", "quad", "lin"}}};
    for (const auto& [sec, entries] : kv)
        for (const auto& [key, val] : entries)
            if (!allowed.at(sec).count(key)) throw ParseError(source, val.second, "unknown key '" + key + "' in [" + sec + "]");

    auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::pair<std::string, int>> {
        auto s = kv.find(sec);
        if (s == kv.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        return k->second;
    };
    auto number = [&](const std::string& sec, const std::string& key, double def) {
        auto v = get(sec, key);
        if (!v) return def;
        Cursor c{source, v->second};
        return c.num(v->first, key);
    };

    Scenario sc;
    std::string feeder_path;
    if (feeder_override) {
        feeder_path = *feeder_override;
    } else {
        auto f = get("scenario", "feeder");
        if (!f) throw ConfigError(source + ": [scenario] feeder is required");
        feeder_path = f->first;
        if (std::filesystem::path(feeder_path).is_relative())
            feeder_path = (std::filesystem::path(base_dir) / feeder_path).string();
    }
    FeederModel feeder = load_feeder(feeder_path);
    const auto vmin = get("scenario", "vmin_pu");
    const auto vmax = get("scenario", "vmax_pu");
    if (vmin || vmax)
        feeder = feeder.with_voltage_limits(number("scenario", "vmin_pu", feeder.base().vmin_pu),
                                            number("scenario", "vmax_pu", feeder.base().vmax_pu));
    sc.feeder = std::move(feeder);
    sc.dt_over_tau = number("scenario", "dt_over_tau", 1.0);
    sc.tau_ref_s = number("scenario", "tau_ref_s", 1.0);
    sc.converge_tol = number("scenario", "converge_tol", 1e-4);
    sc.sdp.tol = number("scenario", "sdp_tol", sc.sdp.tol);
    sc.sdp.max_iter = static_cast<int>(number("scenario", "sdp_max_iter", sc.sdp.max_iter));
    sc.concurrent_dso = number("scenario", "concurrent_dso", 0.0) != 0.0;
    sc.controller.c0 = number("controller", "c0", 1.0);
    sc.controller.M = static_cast<long>(number("controller", "M", 1.0));
    sc.controller.g_tilde = number("controller", "g_tilde", 1.0);
    sc.controller.restart_threshold = number("controller", "restart_threshold", 1e-6);
    if (auto k = get("objective", "kind")) {
        if (k->first == "none") sc.objective.kind = ObjectiveKind::none;
        else if (k->first == "substation") sc.objective.kind = ObjectiveKind::substation;
        else if (k->first == "losses") sc.objective.kind = ObjectiveKind::losses;
        else throw ParseError(source, k->second, "objective kind must be none, substation or losses");
    }
    sc.objective.quad = number("objective", "quad", 0.0);
    sc.objective.lin = number("objective", "lin", 0.0);

    for (const auto& [f, line] : inv_rows) {
        Cursor c{source, line};
        c.expect_fields(f, 11, "inverter row");
        InverterSpec s;
        s.id = static_cast<int>(c.integer(f[0], "id"));
        s.node = static_cast<BusId>(c.integer(f[1], "node"));
        s.s_kva = c.num(f[2], "s_kva");
        try {
            s.strategy = strategy_from_string(f[3]);
        } catch (const ConfigError& e) {
            throw ParseError(source, line, std::string("field 'strategy': ") + e.what());
        }
        s.theta_deg = c.num(f[4], "theta_deg");
        s.p_min_kw = c.num(f[5], "p_min_kw");
        s.cost = {c.num(f[6], "a"), c.num(f[7], "b"), c.num(f[8], "c"), c.num(f[9], "d")};
        s.tau_s = c.num(f[10], "tau_s");
        sc.inverters.push_back(s);
    }
    for (const auto& [f, line] : interval_rows) {
        Cursor c{source, line};
        c.expect_fields(f, 4, "interval row");
        Interval iv;
        iv.t_start = c.num(f[0], "t_start");
        iv.t_end = c.num(f[1], "t_end");
        if (!f[2].empty())
            for (const auto& p : split(f[2], ';')) iv.p_av_kw.push_back(c.num(p, "p_av_kw"));
        iv.load_scale = c.num(f[3], "load_scale");
        sc.intervals.push_back(iv);
    }
    if (auto t = get("scenario", "ticks")) {
        Cursor c{source, t->second};
        sc.ticks = c.integer(t->first, "ticks");
    } else if (!sc.intervals.empty()) {
        sc.ticks = static_cast<long>(std::ceil(sc.intervals.back().t_end / sc.dt_over_tau - 1e-9));
    }
    return sc;
}

Scenario load_scenario(const std::string& path, const std::optional<std::string>& feeder_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_scenario(in, path, dir.empty() ? "." : dir, feeder_override);
}

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
    out << "tick,t_over_tau,inv_id,P_y,Q_y,P_u,Q_u,lam_P,lam_Q,alpha,eps_bound,epoch,resid\n";
    for (const TickRecord& r : log.ticks) {
        for (std::size_t i = 0; i < r.inv.size(); ++i) {
            const InverterRecord& v = r.inv[i];
            out << r.k << ',' << fmt(r.t_over_tau) << ',' << log.inverter_ids[i] << ',' << fmt(v.y.p) << ','
                << fmt(v.y.q) << ',' << fmt(v.u.p) << ',' << fmt(v.u.q) << ',' << fmt(v.lambda.p) << ','
                << fmt(v.lambda.q) << ',' << fmt(r.alpha) << ',' << fmt(r.eps_bound) << ',' << r.epoch << ','
                << fmt(v.resid) << '\n';
        }
    }
}

std::vector<long> interval_convergence_ticks(const TrajectoryLog& log, std::size_t n_intervals, double tol) {
    std::vector<long> out(n_intervals, -1);
    std::vector<bool> seen(n_intervals, false);
    // Scan backwards: the answer is the start of the final run of ticks below tol.
    for (auto it = log.ticks.rbegin(); it != log.ticks.rend(); ++it) {
        const std::size_t j = it->interval;
        if (j >= n_intervals) continue;
        const bool ok = it->tracking_error < tol;
        if (!seen[j]) {
            seen[j] = true;
            out[j] = ok ? it->k : -1;
            if (!ok) continue;
        }
        if (out[j] >= 0 && out[j] == it->k + 1 && ok) out[j] = it->k;
    }
    return out;
}

std::string emit_summary(const TrajectoryLog& log, const Scenario& sc, const std::optional<CentralSolution>& oracle) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["converged"] = log.converged;
    j["ticks"] = log.ticks.size();
    j["restarts"] = log.restarts;

    ordered_json setpoints = ordered_json::array();
    double max_dev = 0.0;
    for (std::size_t i = 0; i < log.inverter_ids.size(); ++i) {
        ordered_json row;
        row["inv_id"] = log.inverter_ids[i];
        row["P_u"] = log.final_u[i].p;
        row["Q_u"] = log.final_u[i].q;
        row["P_y"] = log.final_y[i].p;
        row["Q_y"] = log.final_y[i].q;
        row["lam_P"] = log.final_lambda[i].p;
        row["lam_Q"] = log.final_lambda[i].q;
        if (oracle) {
            const PQ s = oracle->u[i];
            const double dev = std::max(std::abs(log.final_u[i].p - s.p), std::abs(log.final_u[i].q - s.q));
            row["P_opt"] = s.p;
            row["Q_opt"] = s.q;
            row["max_abs_dev"] = dev;
            max_dev = std::max(max_dev, dev);
        }
        setpoints.push_back(row);
    }
    j["setpoints"] = setpoints;

    const double tol = 1e-3;
    j["interval_convergence_tol"] = tol;
    j["interval_convergence_ticks"] = interval_convergence_ticks(log, sc.intervals.size(), tol);

    ordered_json feas;
    feas["final_rank1"] = log.rank1;
    feas["final_v_feasibility"] = log.ticks.empty() ? 0.0 : log.ticks.back().v_feasibility;
    std::size_t degraded = 0;
    std::vector<bool> rank1;
    for (const auto& e : log.epochs) {
        degraded += e.degraded ? 1 : 0;
        rank1.push_back(e.rank1);
    }
    feas["epochs"] = log.epochs.size();
    feas["degraded_epochs"] = degraded;
    feas["epoch_rank1"] = rank1;
    j["feasibility"] = feas;

    double eps_tail = 0.0;
    const std::size_t n = log.ticks.size();
    for (std::size_t k = n - n / 4; k < n; ++k) eps_tail = std::max(eps_tail, log.ticks[k].eps_bound);
    j["max_eps_bound_tail"] = eps_tail;
    if (!log.ticks.empty()) {
        j["final_tracking_error"] = log.ticks.back().tracking_error;
        j["final_residual"] = log.ticks.back().residual_norm;
    }
    if (oracle) {
        ordered_json o;
        o["objective"] = oracle->objective;
        o["rank1"] = oracle->rank1;
        o["balance"] = oracle->balance;
        o["max_abs_dev"] = max_dev;
        j["oracle"] = o;
    }
    return j.dump(2) + "\n";
}

void RunConfig::validate() const {
    if (scenario_path.empty()) throw ConfigError("a scenario file is required");
    if (!std::filesystem::exists(scenario_path)) throw ConfigError("scenario file '" + scenario_path + "' does not exist");
    if (feeder_path && !std::filesystem::exists(*feeder_path))
        throw ConfigError("feeder file '" + *feeder_path + "' does not exist");
    if (tol_sdp && !(*tol_sdp > 0.0)) throw ConfigError("--tol-sdp must be positive");
    if (m && *m < 1) throw ConfigError("--m must be at least 1");
    if (ticks && *ticks < 1) throw ConfigError("--ticks must be at least 1");
}

int run(const RunConfig& cfg, std::ostream& err) {
    Scenario sc;
    try {
        cfg.validate();
        sc = load_scenario(cfg.scenario_path, cfg.feeder_path);
        if (cfg.tol_sdp) sc.sdp.tol = *cfg.tol_sdp;
        if (cfg.m) sc.controller.M = *cfg.m;
        if (cfg.ticks) sc.ticks = *cfg.ticks;
        sc.validate();
        std::filesystem::create_directories(cfg.out_dir);
    } catch (const ParseError& e) {
        err << "cli: parse error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ModelError& e) {
        err << "feeder: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "cli: " << e.what() << '\n';
        return kExitConfig;
    }

    const std::filesystem::path out(cfg.out_dir);
    std::ofstream trace;
    if (cfg.trace_solver) {
        trace.open(out / "solver_trace.csv");
        trace << "iter,objective,residual\n";
        trace.precision(17);
        sc.sdp.trace = &trace;
    }

    TrajectoryLog log;
    try {
        log = run_closed_loop(sc);
    } catch (const InfeasibleError& e) {
        err << "sdp_engine: infeasible at epoch " << e.epoch() << " (residual " << e.residual() << "): " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const Error& e) {
        err << "simulator: " << e.what() << '\n';
        return kExitFailure;
    }

    std::optional<CentralSolution> oracle;
    if (cfg.compare_oracle) {
        try {
            oracle = solve_central_opf(sc.instance(sc.interval_at(sc.ticks - 1)));
        } catch (const InfeasibleError& e) {
            err << "oracle: infeasible: " << e.what() << '\n';
            return kExitInfeasible;
        } catch (const Error& e) {
            err << "oracle: " << e.what() << '\n';
            return kExitFailure;
        }
    }

    {
        std::ofstream csv(out / "trajectory.csv");
        write_trajectory_csv(csv, log);
        std::ofstream sum(out / "summary.json");
        sum << emit_summary(log, sc, oracle);
        if (!csv || !sum) {
            err << "cli: failed to write outputs to '" << cfg.out_dir << "'\n";
            return kExitFailure;
        }
    }
    if (cfg.verbosity > 0)
        err << "run: " << log.ticks.size() << " ticks, " << log.epochs.size() << " epochs, "
            << (log.converged ? "converged" : "not converged") << '\n';
    return log.converged ? kExitConverged : kExitBudget;
}

}  // namespace pvopf
