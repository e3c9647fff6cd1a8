#include "pvopf/hermitian.hpp"

#include <algorithm>
#include <cmath>

#include "pvopf/errors.hpp"

namespace pvopf {

HermitianMatrix::HermitianMatrix(Eigen::Index n) : m_(CMatrix::Zero(n, n)) {}

HermitianMatrix HermitianMatrix::symmetrize(const CMatrix& m) {
    if (m.rows() != m.cols()) throw ContractViolation("HermitianMatrix: matrix is not square");
    if (!m.allFinite()) throw ContractViolation("HermitianMatrix: non-finite entry");
    HermitianMatrix h;
    h.m_ = 0.5 * (m + m.adjoint());
    for (Eigen::Index i = 0; i < h.m_.rows(); ++i) h.m_(i, i) = h.m_(i, i).real();
    return h;
}

HermitianMatrix HermitianMatrix::checked(const CMatrix& m, double tol) {
    if (m.rows() != m.cols()) throw ContractViolation("HermitianMatrix: matrix is not square");
    const double defect = hermitian_defect(m);
    if (!(defect <= tol * std::max(1.0, m.norm())))
        throw ContractViolation("HermitianMatrix: input is not Hermitian (defect " +
                                std::to_string(defect) + ")");
    return symmetrize(m);
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index n) {
    HermitianMatrix h;
    h.m_ = CMatrix::Identity(n, n);
    return h;
}

HermitianMatrix HermitianMatrix::outer(const CVector& v) {
    return symmetrize(v * v.adjoint());
}

HermitianMatrix HermitianMatrix::unit(Eigen::Index i, Eigen::Index n) {
    HermitianMatrix h(n);
    h.m_(i, i) = 1.0;
    return h;
}

double HermitianMatrix::trace_product(const HermitianMatrix& other) const {
    // Tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
    return (m_.array() * other.m_.conjugate().array()).sum().real();
}

HermitianMatrix& HermitianMatrix::operator+=(const HermitianMatrix& o) {
    m_ += o.m_;
    return *this;
}

HermitianMatrix& HermitianMatrix::operator-=(const HermitianMatrix& o) {
    m_ -= o.m_;
    return *this;
}

HermitianMatrix& HermitianMatrix::operator*=(double s) {
    m_ *= s;
    return *this;
}

double hermitian_defect(const CMatrix& m) { return (m - m.adjoint()).norm(); }

Eigen::VectorXd svec(const HermitianMatrix& a) {
    const Eigen::Index n = a.dim();
    const double r2 = std::sqrt(2.0);
    Eigen::VectorXd x(n * n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) x(k++) = a(i, i).real();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            x(k++) = r2 * a(i, j).real();
            x(k++) = r2 * a(i, j).imag();
        }
    return x;
}

HermitianMatrix smat(const Eigen::VectorXd& x, Eigen::Index n) {
    if (x.size() != n * n) throw ContractViolation("smat: length is not n^2");
    const double s = 1.0 / std::sqrt(2.0);
    CMatrix m(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = x(k++);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const cplx v(s * x(k), s * x(k + 1));
            k += 2;
            m(i, j) = v;
            m(j, i) = std::conj(v);
        }
    return HermitianMatrix::symmetrize(m);
}

Eigen::MatrixXd real_embedding(const HermitianMatrix& z) {
    const Eigen::Index n = z.dim();
    Eigen::MatrixXd e(2 * n, 2 * n);
    const Eigen::MatrixXd re = z.matrix().real();
    const Eigen::MatrixXd im = z.matrix().imag();
    e << re, -im, im, re;
    return e;
}

HermitianMatrix from_real_embedding(const Eigen::MatrixXd& e) {
    if (e.rows() != e.cols() || e.rows() % 2 != 0)
        throw ContractViolation("from_real_embedding: expected a 2n x 2n matrix");
    const Eigen::Index n = e.rows() / 2;
    // Average the two copies so that a slightly inconsistent input maps to the
    // nearest embedded matrix.
    const Eigen::MatrixXd re = 0.5 * (e.topLeftCorner(n, n) + e.bottomRightCorner(n, n));
    const Eigen::MatrixXd im = 0.5 * (e.bottomLeftCorner(n, n) - e.topRightCorner(n, n));
    CMatrix m(n, n);
    m.real() = re;
    m.imag() = im;
    return HermitianMatrix::symmetrize(m);
}

}  // namespace pvopf
