#pragma once

#include <cmath>
#include <span>

namespace pvopf {

/// A (real, reactive) pair. Used for powers in pu and for the matching
/// pair of Lagrange multipliers.
struct PQ {
    double p = 0.0;
    double q = 0.0;

    friend PQ operator+(PQ a, PQ b) { return {a.p + b.p, a.q + b.q}; }
    friend PQ operator-(PQ a, PQ b) { return {a.p - b.p, a.q - b.q}; }
    friend PQ operator*(double s, PQ a) { return {s * a.p, s * a.q}; }
    friend bool operator==(PQ a, PQ b) = default;

    double norm() const { return std::hypot(p, q); }
};

/// Euclidean norm of the stacked vector [v_1; ...; v_n].
inline double stacked_norm(std::span<const PQ> v) {
    double s = 0.0;
    for (const PQ& x : v) s += x.p * x.p + x.q * x.q;
    return std::sqrt(s);
}

}  // namespace pvopf
