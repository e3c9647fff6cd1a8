#pragma once

#include <span>
#include <vector>

#include "pvopf/types.hpp"

namespace pvopf {

/// lambda + alpha (h - y + d), driven by the measured output y.
PQ dual_ascent(PQ lambda, PQ h, PQ y, PQ d, double alpha);

/// alpha_k = c0 / sqrt(k - n) for k > n; n is the last restart tick.
struct StepsizeSchedule {
    double c0 = 1.0;
    long n = 0;
};

/// Throws ContractViolation when k <= schedule.n.
double stepsize(const StepsizeSchedule& schedule, long k);

StepsizeSchedule restart_on_change(StepsizeSchedule schedule, long k, bool changed);

/// The DSO refreshes V every M ticks.
struct AsyncSchedule {
    long M = 1;
};

/// c(k) = M floor(k / M). Throws ContractViolation for k < 0 or M < 1.
long epoch_of(long k, const AsyncSchedule& schedule);

struct ConvergenceConstants {
    double G = 0.0;        // running max of observed residual norms
    double G_tilde = 1.0;  // configured bound on the dual variables' excursion
    double L = 0.0;        // Lipschitz constant of the setpoint map

    void observe(double residual_norm) {
        if (residual_norm > G) G = residual_norm;
    }
};

/// Stepsizes indexed by tick: alpha_history[j] is alpha_j for j >= first.
struct AlphaHistory {
    long first = 1;
    std::vector<double> values;

    void push(double a) { values.push_back(a); }
    bool covers(long j) const { return j >= first && j < first + static_cast<long>(values.size()); }
    double at(long j) const { return values[static_cast<std::size_t>(j - first)]; }
};

/// 2 alpha_k G~ G^2 + 2 G^2 sum_{j=c(k)+1..k} alpha_j. Throws ContractViolation
/// when the history does not cover c(k)+1..k.
double epsilon_bound(const ConvergenceConstants& consts, const AlphaHistory& alpha, long k, long M);

/// || y - u ||_2 over the stacked vector.
double tracking_error(std::span<const PQ> y, std::span<const PQ> u);

}  // namespace pvopf
