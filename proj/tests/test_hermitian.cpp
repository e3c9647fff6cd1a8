#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "pvopf/errors.hpp"
#include "pvopf/hermitian.hpp"

using namespace pvopf;

TEST_CASE("symmetrize produces an exactly Hermitian matrix with a real diagonal") {
    std::mt19937 rng(11);
    CMatrix m = fixtures::random_hermitian(rng, 4);
    m(0, 1) += cplx(1e-3, 2e-3);
    m(2, 2) += cplx(0.0, 0.5);
    const HermitianMatrix h = HermitianMatrix::symmetrize(m);
    CHECK(hermitian_defect(h.matrix()) == 0.0);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(h(i, i).imag() == 0.0);
}

TEST_CASE("checked rejects non-Hermitian and non-square input") {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(HermitianMatrix::checked(m), ContractViolation);
    CHECK_THROWS_AS(HermitianMatrix::symmetrize(CMatrix::Zero(2, 3)), ContractViolation);
    CMatrix nan = CMatrix::Zero(2, 2);
    nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(HermitianMatrix::symmetrize(nan), ContractViolation);
}

TEST_CASE("trace_product equals the complex trace of the product") {
    std::mt19937 rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto a = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 5));
        const auto b = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 5));
        const cplx direct = (a.matrix() * b.matrix()).trace();
        CHECK(a.trace_product(b) == doctest::Approx(direct.real()).epsilon(1e-12));
        CHECK(std::abs(direct.imag()) < 1e-12);
    }
}

TEST_CASE("svec is an isometry and smat inverts it") {
    std::mt19937 rng(7);
    for (int t = 0; t < 20; ++t) {
        const auto a = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 4));
        const auto b = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 4));
        CHECK(svec(a).dot(svec(b)) == doctest::Approx(a.trace_product(b)).epsilon(1e-12));
        CHECK((smat(svec(a), 4).matrix() - a.matrix()).norm() < 1e-13);
    }
    CHECK(svec(HermitianMatrix(3)).size() == 9);
}

TEST_CASE("real embedding halves traces and duplicates the spectrum") {
    std::mt19937 rng(9);
    const auto a = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 3));
    const auto b = HermitianMatrix::symmetrize(fixtures::random_hermitian(rng, 3));
    const Eigen::MatrixXd ea = real_embedding(a), eb = real_embedding(b);
    CHECK((ea - ea.transpose()).norm() == 0.0);
    CHECK((ea * eb).trace() / 2.0 == doctest::Approx(a.trace_product(b)).epsilon(1e-12));

    Eigen::SelfAdjointEigenSolver<CMatrix> ec(a.matrix());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(ea);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(er.eigenvalues()(2 * i) == doctest::Approx(ec.eigenvalues()(i)).epsilon(1e-10));
        CHECK(er.eigenvalues()(2 * i + 1) == doctest::Approx(ec.eigenvalues()(i)).epsilon(1e-10));
    }
    CHECK((from_real_embedding(ea).matrix() - a.matrix()).norm() < 1e-14);
}

TEST_CASE("arithmetic keeps the Hermitian invariant") {
    const auto i3 = HermitianMatrix::identity(3);
    const auto e1 = HermitianMatrix::unit(1, 3);
    const auto s = 2.0 * i3 - e1;
    CHECK(s.trace() == doctest::Approx(5.0));
    CHECK(s(1, 1) == cplx(1.0, 0.0));
    CVector v(2);
    v << cplx(1.0, 0.0), cplx(0.0, 2.0);
    const auto o = HermitianMatrix::outer(v);
    CHECK(o(0, 1) == cplx(0.0, -2.0));
    CHECK(o.trace() == doctest::Approx(5.0));
}
