#include "pvopf/controller.hpp"

#include <cmath>
#include <string>

#include "pvopf/errors.hpp"

namespace pvopf {

PQ dual_ascent(PQ lambda, PQ h, PQ y, PQ d, double alpha) {
    if (!(alpha >= 0.0)) throw ContractViolation("dual_ascent: alpha must be non-negative");
    return {lambda.p + alpha * (h.p - y.p + d.p), lambda.q + alpha * (h.q - y.q + d.q)};
}

double stepsize(const StepsizeSchedule& s, long k) {
    if (k <= s.n)
        throw ContractViolation("stepsize: k=" + std::to_string(k) + " must exceed the restart index " +
                                std::to_string(s.n));
    return s.c0 / std::sqrt(static_cast<double>(k - s.n));
}

StepsizeSchedule restart_on_change(StepsizeSchedule s, long k, bool changed) {
    if (changed) s.n = k;
    return s;
}

long epoch_of(long k, const AsyncSchedule& s) {
    if (k < 0) throw ContractViolation("epoch_of: k must be non-negative");
    if (s.M < 1) throw ContractViolation("epoch_of: M must be at least 1");
    return s.M * (k / s.M);
}

double epsilon_bound(const ConvergenceConstants& consts, const AlphaHistory& alpha, long k, long M) {
    const long ck = epoch_of(k, AsyncSchedule{M});
    if (!alpha.covers(k))
        throw ContractViolation("epsilon_bound: no stepsize recorded for k=" + std::to_string(k));
    double sum = 0.0;
    for (long j = ck + 1; j <= k; ++j) {
        if (!alpha.covers(j))
            throw ContractViolation("epsilon_bound: no stepsize recorded for j=" + std::to_string(j));
        sum += alpha.at(j);
    }
    const double g2 = consts.G * consts.G;
    return 2.0 * alpha.at(k) * consts.G_tilde * g2 + 2.0 * g2 * sum;
}

double tracking_error(std::span<const PQ> y, std::span<const PQ> u) {
    if (y.size() != u.size()) throw ContractViolation("tracking_error: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const PQ e = y[i] - u[i];
        s += e.p * e.p + e.q * e.q;
    }
    return std::sqrt(s);
}

}  // namespace pvopf
