#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pvopf/hermitian.hpp"
#include "pvopf/types.hpp"

namespace pvopf {

using BusId = int;

enum class BusClass { substation, inverter, passive };

const char* to_string(BusClass c);
BusClass bus_class_from_string(const std::string& s);

struct Bus {
    BusId id = 0;
    BusClass cls = BusClass::passive;
    double p_load_kw = 0.0;
    double q_load_kvar = 0.0;
};

/// Pi-model line. The total shunt susceptance is split half per terminal.
struct LineSpec {
    BusId from = 0;
    BusId to = 0;
    std::complex<double> z_ohm;  // series impedance R + jX
    double b_total_us = 0.0;     // total shunt susceptance, microsiemens
};

struct BaseValues {
    double s_kva = 100.0;
    double v_kv = 0.4;
    double v0_pu = 1.0;
    double vmin_pu = 0.95;
    double vmax_pu = 1.05;

    double z_base_ohm() const { return v_kv * v_kv * 1e3 / s_kva; }
};

/// Validated single-phase-equivalent radial or meshed network.
/// Buses are stored by id, so buses()[i].id == i. Immutable after creation.
class FeederModel {
public:
    /// Throws ModelError naming the violated invariant: duplicate or
    /// non-contiguous ids, missing or extra substation, bad line endpoints,
    /// zero impedance, non-finite loads, disconnected graph, bad bounds.
    static FeederModel create(BaseValues base, std::vector<Bus> buses, std::vector<LineSpec> lines);

    const BaseValues& base() const { return base_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<LineSpec>& lines() const { return lines_; }

    /// N + 1
    int size() const { return static_cast<int>(buses_.size()); }
    /// Load demand d_i in pu.
    PQ load_pu(BusId i) const;
    std::vector<BusId> buses_of(BusClass c) const;
    bool is_radial() const { return static_cast<int>(lines_.size()) == size() - 1; }

    /// Copy with voltage limits replaced. Throws ConfigError unless
    /// 0 < vmin < vmax and v0 lies within the new limits.
    FeederModel with_voltage_limits(double vmin_pu, double vmax_pu) const;
    /// Copy with every load multiplied by `scale`.
    FeederModel with_load_scale(double scale) const;

    friend bool operator==(const FeederModel&, const FeederModel&);

private:
    BaseValues base_;
    std::vector<Bus> buses_;
    std::vector<LineSpec> lines_;
};

bool operator==(const Bus& a, const Bus& b);
bool operator==(const LineSpec& a, const LineSpec& b);
bool operator==(const BaseValues& a, const BaseValues& b);

/// Nodal admittance matrix in pu. Complex symmetric (not Hermitian).
CMatrix build_admittance(const FeederModel& model);

struct InjectionEntry {
    HermitianMatrix phi;
    HermitianMatrix psi;
    HermitianMatrix ups;
};

/// Phi_i, Psi_i, Ups_i for bus i of the given admittance matrix.
InjectionEntry injection_matrices(const CMatrix& y, BusId i);
/// The entries for every bus, indexed by id.
std::vector<InjectionEntry> injection_matrices(const CMatrix& y);

/// (Tr(Phi_i V), Tr(Psi_i V)): net injection at bus i in pu.
PQ h_of_V(const InjectionEntry& mats, const HermitianMatrix& v);
/// Checked variant for raw matrices; throws ContractViolation when v is not Hermitian.
PQ h_of_V(const InjectionEntry& mats, const CMatrix& v);

/// Gradient rows of h_i(V) - u_i + d_i with respect to [svec(V); u], two rows
/// per inverter bus, in the order of `inverter_buses`.
Eigen::MatrixXd constraint_jacobian(const std::vector<InjectionEntry>& mats,
                                    const std::vector<BusId>& inverter_buses);

/// Rank from a column-pivoting QR with a relative threshold.
int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

struct CqReport {
    bool holds = false;
    int rank = 0;
    int required = 0;
};

CqReport check_constraint_qualification(const Eigen::MatrixXd& jacobian, int n_inverters);
CqReport check_constraint_qualification(const FeederModel& model,
                                        const std::vector<InjectionEntry>& mats);

}  // namespace pvopf
