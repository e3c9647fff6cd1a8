#pragma once

#include <complex>

#include <Eigen/Dense>

namespace pvopf {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Dense complex Hermitian matrix. Conjugate symmetry is enforced on
/// construction, so every instance satisfies A == A^H exactly.
class HermitianMatrix {
public:
    HermitianMatrix() = default;

    /// Zero matrix of dimension n.
    explicit HermitianMatrix(Eigen::Index n);

    /// Symmetrizes (m + m^H) / 2. Throws ContractViolation if m is not square
    /// or has non-finite entries.
    static HermitianMatrix symmetrize(const CMatrix& m);

    /// Like symmetrize, but first checks that m is Hermitian to within
    /// tol * max(1, |m|_F); throws ContractViolation otherwise.
    static HermitianMatrix checked(const CMatrix& m, double tol = 1e-9);

    static HermitianMatrix identity(Eigen::Index n);
    static HermitianMatrix outer(const CVector& v);
    /// e_i e_i^T
    static HermitianMatrix unit(Eigen::Index i, Eigen::Index n);

    Eigen::Index dim() const { return m_.rows(); }
    const CMatrix& matrix() const { return m_; }
    cplx operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

    /// Tr(A B) for Hermitian A, B; always real.
    double trace_product(const HermitianMatrix& other) const;
    double trace() const { return m_.trace().real(); }
    double frobenius_norm() const { return m_.norm(); }

    HermitianMatrix& operator+=(const HermitianMatrix& o);
    HermitianMatrix& operator-=(const HermitianMatrix& o);
    HermitianMatrix& operator*=(double s);

    friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
    friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
    friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }
    friend bool operator==(const HermitianMatrix& a, const HermitianMatrix& b) { return a.m_ == b.m_; }

private:
    CMatrix m_;
};

/// |m - m^H|_F
double hermitian_defect(const CMatrix& m);

/// Isometric real coordinates of an n x n Hermitian matrix (length n^2):
/// the n diagonal entries, then sqrt(2) Re and sqrt(2) Im of each strictly
/// upper entry in row-major order. <svec A, svec B> = Tr(A B).
Eigen::VectorXd svec(const HermitianMatrix& a);
HermitianMatrix smat(const Eigen::VectorXd& x, Eigen::Index n);

/// Real symmetric embedding [[Re Z, -Im Z], [Im Z, Re Z]]. Traces double
/// under the embedding, so Tr(A B) = Tr(emb(A) emb(B)) / 2.
Eigen::MatrixXd real_embedding(const HermitianMatrix& z);
HermitianMatrix from_real_embedding(const Eigen::MatrixXd& e);

}  // namespace pvopf
