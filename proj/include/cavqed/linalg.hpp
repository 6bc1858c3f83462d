#pragma once

#include <complex>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace cavqed {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Column-stacking vectorization: vec(A X B) = (B^T kron A) vec(X).
inline CVector vectorize(const CMatrix& m)
{
    return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unvectorize(const CVector& v, Eigen::Index d)
{
    if (v.size() != d * d) throw std::invalid_argument("unvectorize: size mismatch");
    return Eigen::Map<const CMatrix>(v.data(), d, d);
}

inline bool all_finite(const CMatrix& m)
{
    return m.allFinite();
}

inline double max_abs(const CMatrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Complex Schur factorization A = U T U^H kept for repeated shifted solves
/// and Lyapunov equations.
class SchurSolver {
public:
    explicit SchurSolver(const CMatrix& a) : n_(a.rows())
    {
        Eigen::ComplexSchur<CMatrix> schur(a);
        if (schur.info() != Eigen::Success)
            throw NumericsError("schur", "complex Schur decomposition did not converge");
        u_ = schur.matrixU();
        t_ = schur.matrixT();
        scale_ = std::max(max_abs(t_), 1e-300);
    }

    Eigen::Index size() const { return n_; }
    const CMatrix& u() const { return u_; }
    const CMatrix& t() const { return t_; }

    /// Solves (z I - T) y = b in the Schur basis (upper triangular).
    CVector shifted_solve_schur(cplx z, const CVector& b) const
    {
        CVector y = b;
        for (Eigen::Index i = n_ - 1; i >= 0; --i) {
            cplx s = y(i);
            for (Eigen::Index k = i + 1; k < n_; ++k) s += t_(i, k) * y(k);
            cplx d = z - t_(i, i);
            if (std::abs(d) <= 1e-14 * scale_)
                throw NumericsError("singular_resolvent", "resolvent evaluated at an eigenvalue");
            y(i) = s / d;
        }
        return y;
    }

    /// Solves y^T (z I - T) = b^T, i.e. (z I - T)^T y = b (lower triangular).
    CVector shifted_solve_schur_transpose(cplx z, const CVector& b) const
    {
        CVector y = b;
        for (Eigen::Index i = 0; i < n_; ++i) {
            cplx s = y(i);
            for (Eigen::Index k = 0; k < i; ++k) s += t_(k, i) * y(k);
            cplx d = z - t_(i, i);
            if (std::abs(d) <= 1e-14 * scale_)
                throw NumericsError("singular_resolvent", "resolvent evaluated at an eigenvalue");
            y(i) = s / d;
        }
        return y;
    }

    /// Solves A^H X + X A = -Q (Bartels-Stewart on the Schur form).
    CMatrix lyapunov(const CMatrix& q) const
    {
        CMatrix c = u_.adjoint() * q * u_;
        CMatrix y(n_, n_);
        // Column j: (T^H + T_jj) y_j = -c_j - sum_{k<j} y_k T_kj
        for (Eigen::Index j = 0; j < n_; ++j) {
            CVector rhs = -c.col(j);
            for (Eigen::Index k = 0; k < j; ++k) rhs -= y.col(k) * t_(k, j);
            const cplx tjj = t_(j, j);
            for (Eigen::Index i = 0; i < n_; ++i) {
                cplx s = rhs(i);
                for (Eigen::Index k = 0; k < i; ++k) s -= std::conj(t_(k, i)) * y(k, j);
                cplx d = std::conj(t_(i, i)) + tjj;
                if (std::abs(d) <= 1e-14 * scale_)
                    throw NumericsError("singular_lyapunov",
                                        "Lyapunov operator is singular (non-decaying mode)");
                y(i, j) = s / d;
            }
        }
        return u_ * y * u_.adjoint();
    }

private:
    Eigen::Index n_;
    CMatrix u_;
    CMatrix t_;
    double scale_ = 1.0;
};

} // namespace cavqed
