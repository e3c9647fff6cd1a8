#include "pvopf/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pvopf/errors.hpp"

namespace pvopf {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

void check_bounds(const BaseValues& b) {
    if (!(b.s_kva > 0.0) || !(b.v_kv > 0.0) || !std::isfinite(b.s_kva) || !std::isfinite(b.v_kv))
        throw ModelError("base values must be positive and finite");
    if (!(b.vmin_pu > 0.0 && b.vmin_pu < b.vmax_pu) || !std::isfinite(b.vmax_pu))
        throw ModelError("voltage limits must satisfy 0 < vmin < vmax");
    if (!(b.v0_pu >= b.vmin_pu && b.v0_pu <= b.vmax_pu))
        throw ModelError("substation voltage lies outside the voltage limits");
}

}  // namespace

const char* to_string(BusClass c) {
    switch (c) {
        case BusClass::substation: return "substation";
        case BusClass::inverter: return "inverter";
        case BusClass::passive: return "passive";
    }
    return "?";
}

BusClass bus_class_from_string(const std::string& s) {
    if (s == "substation" || s == "slack") return BusClass::substation;
    if (s == "inverter") return BusClass::inverter;
    if (s == "passive") return BusClass::passive;
    throw ModelError("unknown bus class '" + s + "'");
}

FeederModel FeederModel::create(BaseValues base, std::vector<Bus> buses, std::vector<LineSpec> lines) {
    check_bounds(base);
    const int n = static_cast<int>(buses.size());
    if (n == 0) throw ModelError("feeder has no buses");

    std::vector<int> seen(n, 0);
    for (const Bus& b : buses) {
        if (b.id < 0 || b.id >= n)
            throw ModelError("bus id " + std::to_string(b.id) + " outside 0.." + std::to_string(n - 1));
        if (seen[b.id]++) throw ModelError("duplicate bus id " + std::to_string(b.id));
        if (!std::isfinite(b.p_load_kw) || !std::isfinite(b.q_load_kvar))
            throw ModelError("non-finite load at bus " + std::to_string(b.id));
    }
    std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    if (buses[0].cls != BusClass::substation) throw ModelError("bus 0 must be the substation");
    for (int i = 1; i < n; ++i)
        if (buses[i].cls == BusClass::substation)
            throw ModelError("bus " + std::to_string(i) + " is a second substation");

    UnionFind uf(n);
    for (const LineSpec& l : lines) {
        const std::string tag = "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
        if (l.from < 0 || l.from >= n || l.to < 0 || l.to >= n)
            throw ModelError(tag + " references an unknown bus");
        if (l.from == l.to) throw ModelError(tag + " connects a bus to itself");
        if (!std::isfinite(l.z_ohm.real()) || !std::isfinite(l.z_ohm.imag()) || !std::isfinite(l.b_total_us))
            throw ModelError(tag + " has non-finite parameters");
        if (std::abs(l.z_ohm) == 0.0) throw ModelError(tag + " has zero series impedance");
        uf.unite(l.from, l.to);
    }
    for (int i = 1; i < n; ++i)
        if (uf.find(i) != uf.find(0))
            throw ModelError("feeder is disconnected: bus " + std::to_string(i) + " is not reachable from bus 0");

    FeederModel m;
    m.base_ = base;
    m.buses_ = std::move(buses);
    m.lines_ = std::move(lines);
    return m;
}

PQ FeederModel::load_pu(BusId i) const {
    const Bus& b = buses_.at(i);
    return {b.p_load_kw / base_.s_kva, b.q_load_kvar / base_.s_kva};
}

std::vector<BusId> FeederModel::buses_of(BusClass c) const {
    std::vector<BusId> out;
    for (const Bus& b : buses_)
        if (b.cls == c) out.push_back(b.id);
    return out;
}

FeederModel FeederModel::with_voltage_limits(double vmin_pu, double vmax_pu) const {
    if (!(vmin_pu > 0.0 && vmin_pu < vmax_pu))
        throw ConfigError("voltage limits must satisfy 0 < vmin < vmax (got vmin=" + std::to_string(vmin_pu) +
                          ", vmax=" + std::to_string(vmax_pu) + ")");
    if (!(base_.v0_pu >= vmin_pu && base_.v0_pu <= vmax_pu))
        throw ConfigError("substation voltage lies outside the overridden voltage limits");
    FeederModel m = *this;
    m.base_.vmin_pu = vmin_pu;
    m.base_.vmax_pu = vmax_pu;
    return m;
}

FeederModel FeederModel::with_load_scale(double scale) const {
    if (!std::isfinite(scale)) throw ConfigError("load scale must be finite");
    FeederModel m = *this;
    for (Bus& b : m.buses_) {
        b.p_load_kw *= scale;
        b.q_load_kvar *= scale;
    }
    return m;
}

bool operator==(const Bus& a, const Bus& b) {
    return a.id == b.id && a.cls == b.cls && a.p_load_kw == b.p_load_kw && a.q_load_kvar == b.q_load_kvar;
}

bool operator==(const LineSpec& a, const LineSpec& b) {
    return a.from == b.from && a.to == b.to && a.z_ohm == b.z_ohm && a.b_total_us == b.b_total_us;
}

bool operator==(const BaseValues& a, const BaseValues& b) {
    return a.s_kva == b.s_kva && a.v_kv == b.v_kv && a.v0_pu == b.v0_pu && a.vmin_pu == b.vmin_pu &&
           a.vmax_pu == b.vmax_pu;
}

bool operator==(const FeederModel& a, const FeederModel& b) {
    return a.base_ == b.base_ && a.buses_ == b.buses_ && a.lines_ == b.lines_;
}

CMatrix build_admittance(const FeederModel& model) {
    const int n = model.size();
    const double zb = model.base().z_base_ohm();
    CMatrix y = CMatrix::Zero(n, n);
    for (const LineSpec& l : model.lines()) {
        const cplx ys = zb / l.z_ohm;
        const cplx ysh_half(0.0, 0.5 * l.b_total_us * 1e-6 * zb);
        y(l.from, l.from) += ys + ysh_half;
        y(l.to, l.to) += ys + ysh_half;
        y(l.from, l.to) -= ys;
        y(l.to, l.from) -= ys;
    }
    return y;
}

InjectionEntry injection_matrices(const CMatrix& y, BusId i) {
    const Eigen::Index n = y.rows();
    if (y.cols() != n) throw ContractViolation("injection_matrices: Y is not square");
    if (i < 0 || i >= n) throw ContractViolation("injection_matrices: bus index " + std::to_string(i) + " out of range");
    CMatrix yi = CMatrix::Zero(n, n);
    yi.row(i) = y.row(i);
    const cplx j(0.0, 1.0);
    return {HermitianMatrix::symmetrize(0.5 * (yi + yi.adjoint())),
            HermitianMatrix::symmetrize(0.5 * j * (yi - yi.adjoint())),
            HermitianMatrix::unit(i, n)};
}

std::vector<InjectionEntry> injection_matrices(const CMatrix& y) {
    std::vector<InjectionEntry> out;
    out.reserve(y.rows());
    for (Eigen::Index i = 0; i < y.rows(); ++i) out.push_back(injection_matrices(y, static_cast<BusId>(i)));
    return out;
}

PQ h_of_V(const InjectionEntry& mats, const HermitianMatrix& v) {
    if (v.dim() != mats.phi.dim()) throw ContractViolation("h_of_V: dimension mismatch");
    return {mats.phi.trace_product(v), mats.psi.trace_product(v)};
}

PQ h_of_V(const InjectionEntry& mats, const CMatrix& v) {
    return h_of_V(mats, HermitianMatrix::checked(v, 1e-10));
}

Eigen::MatrixXd constraint_jacobian(const std::vector<InjectionEntry>& mats, const std::vector<BusId>& inverter_buses) {
    if (mats.empty()) return Eigen::MatrixXd(0, 0);
    const Eigen::Index nv = mats[0].phi.dim() * mats[0].phi.dim();
    const Eigen::Index nd = static_cast<Eigen::Index>(inverter_buses.size());
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * nd, nv + 2 * nd);
    for (Eigen::Index r = 0; r < nd; ++r) {
        const InjectionEntry& e = mats.at(inverter_buses[r]);
        j.block(2 * r, 0, 1, nv) = svec(e.phi).transpose();
        j.block(2 * r + 1, 0, 1, nv) = svec(e.psi).transpose();
        j(2 * r, nv + 2 * r) = -1.0;
        j(2 * r + 1, nv + 2 * r + 1) = -1.0;
    }
    return j;
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(rel_tol);
    return static_cast<int>(qr.rank());
}

CqReport check_constraint_qualification(const Eigen::MatrixXd& jacobian, int n_inverters) {
    CqReport r;
    r.required = 2 * n_inverters;
    r.rank = numerical_rank(jacobian);
    r.holds = r.rank == r.required && jacobian.rows() == r.required;
    return r;
}

CqReport check_constraint_qualification(const FeederModel& model, const std::vector<InjectionEntry>& mats) {
    const auto inv = model.buses_of(BusClass::inverter);
    return check_constraint_qualification(constraint_jacobian(mats, inv), static_cast<int>(inv.size()));
}

}  // namespace pvopf
