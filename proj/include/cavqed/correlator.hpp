#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "dynamics.hpp"
#include "linalg.hpp"

namespace cavqed {

/// Exact time and frequency integrals of a Lindblad flow that relaxes to a
/// unique steady state.
///
/// Works with the deflated generator Lt = L - s vec(rho_ss) vec(1)^T, whose
/// spectrum is that of L with the zero eigenvalue moved to -s. Integrals of
/// decaying quantities over [0, inf) then become resolvent and Lyapunov
/// solves with Lt; no eigenvectors are formed.
class SteadyStateResolvent {
public:
    explicit SteadyStateResolvent(const Superoperator& l)
        : space_(l.space()),
          rho_ss_(steady_state_of(l)),
          shift_(std::max(l.scale(), 1e-300)),
          lt_(deflate(l)),
          lu_(lt_),
          schur_(lt_)
    {
    }

    const HilbertSpace& space() const { return space_; }
    const DensityOperator& steady_state() const { return rho_ss_; }
    /// Schur form of the deflated generator.
    const SchurSolver& schur() const { return schur_; }

    /// Throws unless <A>_ss = 0 and B rho_ss = 0, the conditions under which
    /// <A(t + tau) B(t)> decays in both arguments.
    void check_decaying(const Operator& a, const Operator& b) const
    {
        require_same_space(space_, a.space(), "SteadyStateResolvent");
        require_same_space(space_, b.space(), "SteadyStateResolvent");
        const double tol = 1e-9;
        const double na = std::max(max_abs(a.matrix()), 1e-300);
        const double nb = std::max(max_abs(b.matrix()), 1e-300);
        if (std::abs((a.matrix() * rho_ss_.matrix()).trace()) > tol * na ||
            max_abs(b.matrix() * rho_ss_.matrix()) > tol * nb)
            throw NumericsError("non_decaying_correlator", "correlator does not vanish in the steady state");
    }

    /// Int_0^inf (<A>(t) - <A>_ss) dt for the flow started from rho0.
    cplx integrated_expectation(const Operator& a, const CMatrix& rho0) const
    {
        require_same_space(space_, a.space(), "integrated_expectation");
        const CVector r = vectorize(rho0);
        const CVector x = -lu_.solve(r) - vectorize(rho_ss_.matrix()) * (rho0.trace() / shift_);
        return vectorize(a.matrix().transpose()).transpose() * x;
    }

    cplx integrated_expectation(const Operator& a, const DensityOperator& rho0) const
    {
        return integrated_expectation(a, rho0.matrix());
    }

    /// Int_0^inf dt Int_0^inf dtau |<A(t + tau) B(t)>|^2.
    double correlator_norm(const Operator& a, const Operator& b, const DensityOperator& rho0) const
    {
        check_decaying(a, b);
        const int d = space_.dim();
        const CVector u = vectorize(a.matrix().transpose());
        const CMatrix m = Eigen::kroneckerProduct(CMatrix::Identity(d, d), b.matrix()).eval();
        const CMatrix p1 = schur_.lyapunov(u.conjugate() * u.transpose());
        const CMatrix p2 = schur_.lyapunov(m.adjoint() * p1 * m);
        const CVector r = vectorize(rho0.matrix());
        const cplx j = r.adjoint() * p2 * r;
        return j.real();
    }

    /// Half-plane transform T(w, v) = Int_{t1 >= t2} e^{-i w t1} e^{i v t2} <A(t1) B(t2)>
    /// on a uniform axis. Returns the full matrix T(w_k, v_l).
    CMatrix half_plane_transform(const Operator& a, const Operator& b, const DensityOperator& rho0,
                                 const std::vector<double>& omega) const
    {
        check_decaying(a, b);
        const auto n = static_cast<Eigen::Index>(omega.size());
        if (n == 0) return CMatrix(0, 0);
        const double h = n > 1 ? omega[1] - omega[0] : 0.0;
        if (n > 1) {
            for (Eigen::Index k = 1; k < n; ++k) {
                const double expect = omega[0] + h * static_cast<double>(k);
                if (std::abs(omega[static_cast<std::size_t>(k)] - expect) > 1e-9 * std::abs(h) * static_cast<double>(n))
                    throw std::invalid_argument("half_plane_transform: frequency axis is not uniform");
            }
        }
        const int d = space_.dim();
        const Eigen::Index m = static_cast<Eigen::Index>(d) * d;
        const CMatrix& u = schur_.u();
        const CVector ut = u.transpose() * vectorize(a.matrix().transpose());
        const CMatrix mt = u.adjoint() * Eigen::kroneckerProduct(CMatrix::Identity(d, d), b.matrix()).eval() * u;
        const CVector r0 = u.adjoint() * vectorize(rho0.matrix());
        const cplx I(0.0, 1.0);

        // rows: u^T (i w - Lt)^{-1} in the Schur basis
        CMatrix rows(n, m);
        for (Eigen::Index k = 0; k < n; ++k)
            rows.row(k) = schur_.shifted_solve_schur_transpose(I * omega[static_cast<std::size_t>(k)], ut).transpose();
        // cols: M (i W - Lt)^{-1} rho0 for W = (k - l) h
        CMatrix cols(m, 2 * n - 1);
        for (Eigen::Index q = 0; q < 2 * n - 1; ++q) {
            const double big_w = h * static_cast<double>(q - (n - 1));
            cols.col(q) = mt * schur_.shifted_solve_schur(I * big_w, r0);
        }
        CMatrix t(n, n);
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index l = 0; l < n; ++l) t(k, l) = (rows.row(k) * cols.col(k - l + n - 1)).value();
        return t;
    }

    /// Diagonal of the half-plane transform, T(w, w).
    CVector half_plane_diagonal(const Operator& a, const Operator& b, const DensityOperator& rho0,
                                const std::vector<double>& omega) const
    {
        check_decaying(a, b);
        const int d = space_.dim();
        const CMatrix& u = schur_.u();
        const CVector ut = u.transpose() * vectorize(a.matrix().transpose());
        const CMatrix mt = u.adjoint() * Eigen::kroneckerProduct(CMatrix::Identity(d, d), b.matrix()).eval() * u;
        const CVector col = mt * schur_.shifted_solve_schur(cplx(0.0, 0.0), u.adjoint() * vectorize(rho0.matrix()));
        CVector out(static_cast<Eigen::Index>(omega.size()));
        for (std::size_t k = 0; k < omega.size(); ++k) {
            const CVector row = schur_.shifted_solve_schur_transpose(cplx(0.0, omega[k]), ut);
            out(static_cast<Eigen::Index>(k)) = row.transpose() * col;
        }
        return out;
    }

private:
    static DensityOperator steady_state_of(const Superoperator& l)
    {
        const int d = l.space().dim();
        Eigen::BDCSVD<CMatrix> svd(l.matrix(), Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const Eigen::Index m = sv.size();
        const double smax = sv(0);
        if (!(smax > 0.0)) throw NumericsError("nonunique_steady_state", "Liouvillian is zero");
        if (m >= 2 && sv(m - 2) <= 1e-11 * smax)
            throw NumericsError("nonunique_steady_state",
                                "steady state is not unique (degenerate null space of the Liouvillian)");
        if (sv(m - 1) > 1e-9 * smax)
            throw NumericsError("no_steady_state", "Liouvillian has no null vector");
        CMatrix rho = unvectorize(svd.matrixV().col(m - 1), d);
        rho = 0.5 * (rho + rho.adjoint()).eval();
        const cplx tr = rho.trace();
        if (std::abs(tr) < 1e-12) throw NumericsError("no_steady_state", "null vector of L is traceless");
        rho /= tr;
        return {l.space(), rho, DensityOperator::Unchecked{}};
    }

    CMatrix deflate(const Superoperator& l) const
    {
        const int d = space_.dim();
        const CVector id = vectorize(CMatrix::Identity(d, d));
        return l.matrix() - shift_ * vectorize(rho_ss_.matrix()) * id.transpose();
    }

    HilbertSpace space_;
    DensityOperator rho_ss_;
    double shift_;
    CMatrix lt_;
    Eigen::PartialPivLU<CMatrix> lu_;
    SchurSolver schur_;
};

/// Smallest T (doubling from the generator's fastest time scale) such that
/// Int_T^inf <loss> dt < tol * Int_0^inf <loss> dt.
inline double adaptive_t_max(const Superoperator& l, const DensityOperator& rho0, const Operator& loss,
                             double tol = 1e-6)
{
    SteadyStateResolvent res(l);
    const double total = res.integrated_expectation(loss, rho0).real();
    if (!(total > 0.0)) throw NumericsError("no_emission", "adaptive_t_max: no excitation leaves the system");
    double t = 1.0 / l.scale();
    for (int it = 0; it < 200; ++it) {
        const CVector v = propagator(l, t) * vectorize(rho0.matrix());
        const double tail = res.integrated_expectation(loss, unvectorize(v, l.space().dim())).real();
        if (tail < tol * total) return t;
        t *= 2.0;
    }
    throw NumericsError("t_max", "adaptive_t_max: tail did not decay");
}

} // namespace cavqed
