#pragma once

#include <complex>
#include <random>
#include <string>
#include <vector>

#include "pvopf/feeder.hpp"
#include "pvopf/hermitian.hpp"

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(PVOPF_DATA_DIR) + "/" + name; }

inline pvopf::CMatrix random_hermitian(std::mt19937& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    pvopf::CMatrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = {g(rng), g(rng)};
    return (m + m.adjoint()) / 2.0;
}

inline pvopf::CVector random_vector(std::mt19937& rng, Eigen::Index n, double lo = 0.9, double hi = 1.1,
                                    double max_angle = 0.2) {
    std::uniform_real_distribution<double> mag(lo, hi), ang(-max_angle, max_angle);
    pvopf::CVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(mag(rng), ang(rng));
    return v;
}

/// Random tree feeder: bus k > 0 attaches to a uniformly chosen earlier bus.
inline pvopf::FeederModel random_tree(std::mt19937& rng, int n_buses, bool with_shunt) {
    using namespace pvopf;
    std::uniform_real_distribution<double> r(0.02, 0.2), b(0.0, 50.0), load(0.0, 30.0);
    std::vector<Bus> buses{{0, BusClass::substation, 0.0, 0.0}};
    std::vector<LineSpec> lines;
    for (int k = 1; k < n_buses; ++k) {
        buses.push_back({k, k % 2 ? BusClass::inverter : BusClass::passive, load(rng), load(rng) / 3.0});
        std::uniform_int_distribution<int> parent(0, k - 1);
        lines.push_back({parent(rng), k, {r(rng), r(rng)}, with_shunt ? b(rng) : 0.0});
    }
    return FeederModel::create(BaseValues{}, buses, lines);
}

/// S_i = V_i conj((Y v)_i), straight from the nodal equations.
inline pvopf::CVector complex_injections(const pvopf::CMatrix& y, const pvopf::CVector& v) {
    const pvopf::CVector i = y * v;
    return v.cwiseProduct(i.conjugate());
}

/// Two-bus power flow: slack voltage v0, constant-power injection s1 at bus 1,
/// solved by fixed-point iteration on v1 = v0 + conj(s1 / v1) / y.
inline std::complex<double> two_bus_flow(std::complex<double> y, std::complex<double> v0, std::complex<double> s1,
                                         bool* ok = nullptr) {
    std::complex<double> v1 = v0;
    for (int it = 0; it < 500; ++it) {
        const std::complex<double> next = v0 + std::conj(s1 / v1) / y;
        if (std::abs(next - v1) < 1e-15) {
            if (ok) *ok = true;
            return next;
        }
        v1 = next;
    }
    if (ok) *ok = std::abs(v0 + std::conj(s1 / v1) / y - v1) < 1e-12;
    return v1;
}

}  // namespace fixtures
