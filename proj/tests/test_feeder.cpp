#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "pvopf/errors.hpp"
#include "pvopf/feeder.hpp"

using namespace pvopf;

namespace {

// Z_base = 0.4^2 * 1e3 / 100 = 1.6 ohm with the default base values.
constexpr double kZb = 1.6;

FeederModel two_bus(std::complex<double> y_pu, double b_total_pu = 0.0, BusClass cls = BusClass::inverter) {
    const std::complex<double> z_ohm = kZb / y_pu;
    const double b_us = b_total_pu / kZb * 1e6;
    return FeederModel::create(BaseValues{}, {{0, BusClass::substation, 0, 0}, {1, cls, 0, 0}},
                               {{0, 1, z_ohm, b_us}});
}

// Gaussian elimination with partial pivoting, independent of the QR used by the library.
int gauss_rank(Eigen::MatrixXd m, double tol = 1e-9) {
    int rank = 0;
    for (Eigen::Index c = 0; c < m.cols() && rank < m.rows(); ++c) {
        Eigen::Index piv = rank;
        for (Eigen::Index r = rank; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > std::abs(m(piv, c))) piv = r;
        if (std::abs(m(piv, c)) < tol) continue;
        m.row(piv).swap(m.row(rank));
        for (Eigen::Index r = rank + 1; r < m.rows(); ++r) m.row(r) -= m(r, c) / m(rank, c) * m.row(rank);
        ++rank;
    }
    return rank;
}

}  // namespace

TEST_CASE("two-bus admittance follows the pi-model stamp") {
    const CMatrix y = build_admittance(two_bus({1.0, -2.0}));
    CHECK(std::abs(y(0, 0) - cplx(1, -2)) < 1e-12);
    CHECK(std::abs(y(1, 1) - cplx(1, -2)) < 1e-12);
    CHECK(std::abs(y(0, 1) - cplx(-1, 2)) < 1e-12);
    CHECK(std::abs(y(1, 0) - cplx(-1, 2)) < 1e-12);
}

TEST_CASE("total line shunt is split half per terminal") {
    // A total shunt of j0.04 pu adds j0.02 at each end: -j2 + j0.02 = -j1.98.
    const CMatrix y = build_admittance(two_bus({1.0, -2.0}, 0.04));
    CHECK(std::abs(y(0, 0) - cplx(1, -1.98)) < 1e-12);
    CHECK(std::abs(y(1, 1) - cplx(1, -1.98)) < 1e-12);
    CHECK(std::abs(y(0, 1) - cplx(-1, 2)) < 1e-12);
}

TEST_CASE("admittance matches an incidence-matrix construction") {
    std::mt19937 rng(3);
    for (int t = 0; t < 10; ++t) {
        const FeederModel m = fixtures::random_tree(rng, 3 + t % 4, true);
        const int n = m.size();
        const auto& lines = m.lines();
        const Eigen::Index nl = static_cast<Eigen::Index>(lines.size());
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nl, n);
        CVector ys(nl);
        CVector shunt = CVector::Zero(n);
        for (Eigen::Index l = 0; l < nl; ++l) {
            a(l, lines[l].from) = 1.0;
            a(l, lines[l].to) = -1.0;
            ys(l) = kZb / lines[l].z_ohm;
            const cplx half(0.0, lines[l].b_total_us * 1e-6 * kZb / 2.0);
            shunt(lines[l].from) += half;
            shunt(lines[l].to) += half;
        }
        const CMatrix expected = a.transpose().cast<cplx>() * ys.asDiagonal() * a.cast<cplx>() +
                                 CMatrix(shunt.asDiagonal());
        CHECK((build_admittance(m) - expected).norm() < 1e-10);
    }
}

TEST_CASE("rows of a shunt-free admittance sum to zero") {
    std::mt19937 rng(4);
    for (int t = 0; t < 10; ++t) {
        const CMatrix y = build_admittance(fixtures::random_tree(rng, 6, false));
        CHECK(y.rowwise().sum().norm() < 1e-10);
        CHECK((y - y.transpose()).norm() < 1e-12);
    }
}

TEST_CASE("model validation names the violated invariant") {
    const BaseValues base;
    SUBCASE("disconnected graph") {
        CHECK_THROWS_WITH_AS(
            FeederModel::create(base, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, 1, 0}, {2, BusClass::passive, 1, 0}},
                                {{0, 1, {0.1, 0.1}, 0}}),
            doctest::Contains("disconnected"), ModelError);
    }
    SUBCASE("zero impedance") {
        CHECK_THROWS_AS(FeederModel::create(base, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, 1, 0}},
                                            {{0, 1, {0.0, 0.0}, 0}}),
                        ModelError);
    }
    SUBCASE("self loop") {
        CHECK_THROWS_AS(FeederModel::create(base, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, 1, 0}},
                                            {{0, 1, {0.1, 0.1}, 0}, {1, 1, {0.1, 0.1}, 0}}),
                        ModelError);
    }
    SUBCASE("duplicate id") {
        CHECK_THROWS_WITH_AS(
            FeederModel::create(base, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, 1, 0}, {1, BusClass::passive, 1, 0}},
                                {{0, 1, {0.1, 0.1}, 0}}),
            doctest::Contains("duplicate bus id 1"), ModelError);
    }
    SUBCASE("non-finite load") {
        CHECK_THROWS_AS(FeederModel::create(base, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, INFINITY, 0}},
                                            {{0, 1, {0.1, 0.1}, 0}}),
                        ModelError);
    }
    SUBCASE("voltage bounds") {
        BaseValues bad;
        bad.vmin_pu = 1.05;
        bad.vmax_pu = 0.95;
        CHECK_THROWS_AS(FeederModel::create(bad, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, 1, 0}},
                                            {{0, 1, {0.1, 0.1}, 0}}),
                        ModelError);
        CHECK_THROWS_AS(two_bus({1, -2}).with_voltage_limits(1.05, 0.95), ConfigError);
    }
}

TEST_CASE("injection matrices are Hermitian and Ups is a unit selector") {
    std::mt19937 rng(8);
    const CMatrix y = build_admittance(fixtures::random_tree(rng, 6, true));
    const auto mats = injection_matrices(y);
    for (int i = 0; i < 6; ++i) {
        CHECK(hermitian_defect(mats[i].phi.matrix()) <= 1e-12);
        CHECK(hermitian_defect(mats[i].psi.matrix()) <= 1e-12);
        CHECK(hermitian_defect(mats[i].ups.matrix()) <= 1e-12);
        CHECK(mats[i].ups.matrix().cwiseAbs().sum() == 1.0);
        CHECK(mats[i].ups(i, i) == cplx(1.0, 0.0));
    }
    CHECK_THROWS_AS(injection_matrices(y, 6), ContractViolation);
    CHECK_THROWS_AS(injection_matrices(y, -1), ContractViolation);
}

TEST_CASE("flat voltage profile gives zero injection") {
    const CMatrix y = build_admittance(two_bus({1.0, -2.0}));
    CVector v(2);
    v << 1.0, 1.0;
    const auto vv = HermitianMatrix::outer(v);
    for (int i = 0; i < 2; ++i) {
        const PQ h = h_of_V(injection_matrices(y, i), vv);
        CHECK(std::abs(h.p) < 1e-14);
        CHECK(std::abs(h.q) < 1e-14);
    }
}

TEST_CASE("h_of_V matches a scalar power-flow evaluation on two buses") {
    const cplx ys(1.0, -2.0);
    const CMatrix y = build_admittance(two_bus(ys));
    const cplx v0 = 1.0, v1 = std::polar(0.98, -0.05);
    CVector v(2);
    v << v0, v1;
    // S_1 = V_1 conj(I_1) with I_1 = y (V_1 - V_0).
    const cplx s1 = v1 * std::conj(ys * (v1 - v0));
    const PQ h = h_of_V(injection_matrices(y, 1), HermitianMatrix::outer(v));
    CHECK(h.p == doctest::Approx(s1.real()).epsilon(1e-13));
    CHECK(h.q == doctest::Approx(s1.imag()).epsilon(1e-13));
}

TEST_CASE("power-flow identity on random rank-one matrices") {
    std::mt19937 rng(21);
    int checked = 0;
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + t % 5;
        const FeederModel m = fixtures::random_tree(rng, n, t % 2 == 0);
        const CMatrix y = build_admittance(m);
        const auto mats = injection_matrices(y);
        const CVector v = fixtures::random_vector(rng, n);
        const CVector s = fixtures::complex_injections(y, v);
        const auto vv = HermitianMatrix::outer(v);
        for (int i = 0; i < n; ++i) {
            const PQ h = h_of_V(mats[i], vv);
            CHECK(std::abs(h.p - s(i).real()) <= 1e-9);
            CHECK(std::abs(h.q - s(i).imag()) <= 1e-9);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("h_of_V is linear over convex combinations") {
    std::mt19937 rng(13);
    const CMatrix y = build_admittance(fixtures::random_tree(rng, 5, true));
    const auto mats = injection_matrices(y);
    const auto v1 = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 5));
    const auto v2 = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 5));
    const double a = 0.3;
    const auto mix = a * v1 + (1.0 - a) * v2;
    for (int i = 0; i < 5; ++i) {
        const PQ lhs = h_of_V(mats[i], mix);
        const PQ rhs = a * h_of_V(mats[i], v1) + (1.0 - a) * h_of_V(mats[i], v2);
        CHECK(lhs.p == doctest::Approx(rhs.p).epsilon(1e-12));
        CHECK(lhs.q == doctest::Approx(rhs.q).epsilon(1e-12));
    }
}

TEST_CASE("h_of_V rejects a non-Hermitian matrix") {
    const CMatrix y = build_admittance(two_bus({1.0, -2.0}));
    CMatrix bad = CMatrix::Identity(2, 2);
    bad(0, 1) = 0.5;
    CHECK_THROWS_AS(h_of_V(injection_matrices(y, 1), bad), ContractViolation);
}

TEST_CASE("constraint qualification") {
    SUBCASE("two buses with one inverter has rank 2") {
        const FeederModel m = two_bus({1.0, -2.0});
        const CqReport r = check_constraint_qualification(m, injection_matrices(build_admittance(m)));
        CHECK(r.holds);
        CHECK(r.rank == 2);
        CHECK(r.required == 2);
    }
    SUBCASE("random feeders always satisfy it") {
        std::mt19937 rng(17);
        for (int t = 0; t < 10; ++t) {
            const FeederModel m = fixtures::random_tree(rng, 3 + t % 4, true);
            const auto inv = m.buses_of(BusClass::inverter);
            const CqReport r = check_constraint_qualification(m, injection_matrices(build_admittance(m)));
            CHECK(r.holds);
            CHECK(r.rank == 2 * static_cast<int>(inv.size()));
        }
    }
    SUBCASE("zeroed u-block with a duplicated row fails") {
        const FeederModel m = two_bus({1.0, -2.0});
        const auto mats = injection_matrices(build_admittance(m));
        Eigen::MatrixXd j = constraint_jacobian(mats, {1});
        const Eigen::Index nv = j.cols() - 2;
        j.rightCols(2).setZero();
        j.row(1) = j.row(0);
        CHECK(gauss_rank(j) == 1);
        const CqReport r = check_constraint_qualification(j, 1);
        CHECK_FALSE(r.holds);
        CHECK(r.rank == 1);
        CHECK(nv == 4);
    }
}

TEST_CASE("model queries") {
    const FeederModel m = FeederModel::create(
        BaseValues{}, {{0, BusClass::substation, 0, 0}, {1, BusClass::passive, 30, 10}, {2, BusClass::inverter, 5, 2}},
        {{0, 1, {0.06, 0.045}, 0}, {1, 2, {0.09, 0.06}, 0}});
    CHECK(m.size() == 3);
    CHECK(m.is_radial());
    CHECK(m.load_pu(1).p == doctest::Approx(0.3));
    CHECK(m.load_pu(1).q == doctest::Approx(0.1));
    CHECK(m.buses_of(BusClass::inverter) == std::vector<BusId>{2});
    const FeederModel scaled = m.with_load_scale(1.2);
    CHECK(scaled.load_pu(2).p == doctest::Approx(0.06));
    CHECK_FALSE(scaled == m);
    CHECK(m.with_load_scale(1.0) == m);
}
