#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "errors.hpp"
#include "linalg.hpp"

namespace cavqed {

/// Tensor-product space |s0> (x) |s1> (x) ... ; subsystem 0 is the most
/// significant index.
class HilbertSpace {
public:
    static constexpr int max_dimension = 64;

    HilbertSpace() : HilbertSpace(std::vector<int>{1}) {}

    explicit HilbertSpace(std::vector<int> dims) : dims_(std::move(dims))
    {
        if (dims_.empty()) throw std::invalid_argument("HilbertSpace: no subsystems");
        long total = 1;
        for (int d : dims_) {
            if (d < 1) throw std::invalid_argument("HilbertSpace: subsystem dimension < 1");
            total *= d;
            if (total > max_dimension)
                throw std::invalid_argument("HilbertSpace: total dimension exceeds " +
                                            std::to_string(max_dimension));
        }
        dim_ = static_cast<int>(total);
    }

    const std::vector<int>& dims() const { return dims_; }
    int dim() const { return dim_; }
    int subsystems() const { return static_cast<int>(dims_.size()); }

    /// Flat index of the product state |levels[0], levels[1], ...>.
    int index(const std::vector<int>& levels) const
    {
        if (levels.size() != dims_.size())
            throw std::invalid_argument("HilbertSpace::index: wrong number of levels");
        int idx = 0;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            if (levels[k] < 0 || levels[k] >= dims_[k])
                throw std::invalid_argument("HilbertSpace::index: level out of range");
            idx = idx * dims_[k] + levels[k];
        }
        return idx;
    }

    bool operator==(const HilbertSpace& o) const { return dims_ == o.dims_; }
    bool operator!=(const HilbertSpace& o) const { return !(*this == o); }

private:
    std::vector<int> dims_;
    int dim_ = 1;
};

inline void require_same_space(const HilbertSpace& a, const HilbertSpace& b, const char* where)
{
    if (a != b) throw std::invalid_argument(std::string(where) + ": Hilbert space mismatch");
}

class Operator {
public:
    Operator(HilbertSpace space, CMatrix matrix) : space_(std::move(space)), m_(std::move(matrix))
    {
        if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
            throw std::invalid_argument("Operator: matrix dimension does not match space");
    }

    static Operator zero(const HilbertSpace& s)
    {
        return {s, CMatrix::Zero(s.dim(), s.dim())};
    }

    static Operator identity(const HilbertSpace& s)
    {
        return {s, CMatrix::Identity(s.dim(), s.dim())};
    }

    /// Lifts a local operator on one subsystem to the full space.
    static Operator embed(const HilbertSpace& s, int subsystem, const CMatrix& local)
    {
        if (subsystem < 0 || subsystem >= s.subsystems())
            throw std::invalid_argument("Operator::embed: subsystem out of range");
        const int d = s.dims()[subsystem];
        if (local.rows() != d || local.cols() != d)
            throw std::invalid_argument("Operator::embed: local operator has wrong dimension");
        CMatrix full = CMatrix::Identity(1, 1);
        for (int k = 0; k < s.subsystems(); ++k) {
            CMatrix f = (k == subsystem) ? local : CMatrix::Identity(s.dims()[k], s.dims()[k]);
            CMatrix next = Eigen::kroneckerProduct(full, f).eval();
            full = std::move(next);
        }
        return {s, full};
    }

    /// Bosonic annihilation operator truncated to the subsystem dimension.
    static Operator annihilation(const HilbertSpace& s, int subsystem)
    {
        const int d = s.dims().at(subsystem);
        CMatrix a = CMatrix::Zero(d, d);
        for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
        return embed(s, subsystem, a);
    }

    /// |to><from| on one subsystem.
    static Operator transition(const HilbertSpace& s, int subsystem, int to, int from)
    {
        const int d = s.dims().at(subsystem);
        if (to < 0 || to >= d || from < 0 || from >= d)
            throw std::invalid_argument("Operator::transition: level out of range");
        CMatrix m = CMatrix::Zero(d, d);
        m(to, from) = 1.0;
        return embed(s, subsystem, m);
    }

    const HilbertSpace& space() const { return space_; }
    const CMatrix& matrix() const { return m_; }

    Operator adjoint() const { return {space_, m_.adjoint()}; }

    double hermiticity_error() const { return max_abs(m_ - m_.adjoint()); }

    friend Operator operator+(const Operator& a, const Operator& b)
    {
        require_same_space(a.space_, b.space_, "Operator+");
        return {a.space_, a.m_ + b.m_};
    }
    friend Operator operator-(const Operator& a, const Operator& b)
    {
        require_same_space(a.space_, b.space_, "Operator-");
        return {a.space_, a.m_ - b.m_};
    }
    friend Operator operator*(const Operator& a, const Operator& b)
    {
        require_same_space(a.space_, b.space_, "Operator*");
        return {a.space_, a.m_ * b.m_};
    }
    friend Operator operator*(cplx s, const Operator& a) { return {a.space_, s * a.m_}; }
    friend Operator operator*(double s, const Operator& a) { return {a.space_, s * a.m_}; }

private:
    HilbertSpace space_;
    CMatrix m_;
};

struct CollapseChannel {
    double rate = 0.0; ///< rad/s
    Operator op;

    CollapseChannel(double r, Operator o) : rate(r), op(std::move(o))
    {
        if (!(rate >= 0.0) || !std::isfinite(rate))
            throw std::invalid_argument("CollapseChannel: rate must be finite and >= 0");
    }
};

class DensityOperator {
public:
    struct Unchecked {};

    DensityOperator(HilbertSpace space, CMatrix m) : DensityOperator(std::move(space), std::move(m), Unchecked{})
    {
        validate();
    }

    DensityOperator(HilbertSpace space, CMatrix m, Unchecked) : space_(std::move(space)), m_(std::move(m))
    {
        if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
            throw std::invalid_argument("DensityOperator: matrix dimension does not match space");
    }

    static DensityOperator pure(const HilbertSpace& s, const std::vector<int>& levels)
    {
        CMatrix m = CMatrix::Zero(s.dim(), s.dim());
        const int i = s.index(levels);
        m(i, i) = 1.0;
        return {s, m};
    }

    const HilbertSpace& space() const { return space_; }
    const CMatrix& matrix() const { return m_; }

    double hermiticity_error() const { return max_abs(m_ - m_.adjoint()); }
    double trace_error() const { return std::abs(m_.trace() - cplx(1.0, 0.0)); }
    double min_eigenvalue() const
    {
        CMatrix h = 0.5 * (m_ + m_.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Throws std::invalid_argument unless Hermitian (1e-10), unit trace
    /// (1e-10) and positive semidefinite (-1e-8).
    void validate() const
    {
        if (!m_.allFinite()) throw std::invalid_argument("DensityOperator: non-finite entries");
        if (hermiticity_error() > 1e-10) throw std::invalid_argument("DensityOperator: not Hermitian");
        if (trace_error() > 1e-10) throw std::invalid_argument("DensityOperator: trace != 1");
        if (min_eigenvalue() < -1e-8) throw std::invalid_argument("DensityOperator: negative eigenvalue");
    }

private:
    HilbertSpace space_;
    CMatrix m_;
};

class Superoperator {
public:
    Superoperator(HilbertSpace space, CMatrix m) : space_(std::move(space)), m_(std::move(m))
    {
        const int d2 = space_.dim() * space_.dim();
        if (m_.rows() != d2 || m_.cols() != d2)
            throw std::invalid_argument("Superoperator: matrix dimension does not match space");
    }

    const HilbertSpace& space() const { return space_; }
    const CMatrix& matrix() const { return m_; }

    /// Largest |L_ij|, used as the natural rate scale of the generator.
    double scale() const { return max_abs(m_); }

private:
    HilbertSpace space_;
    CMatrix m_;
};

/// Generator of d rho/dt = -i[H, rho] + sum_k r_k (O rho O^+ - {O^+ O, rho}/2),
/// column-stacked.
inline Superoperator build_liouvillian(const Operator& h, const std::vector<CollapseChannel>& channels)
{
    const HilbertSpace& s = h.space();
    for (const auto& c : channels) require_same_space(s, c.op.space(), "build_liouvillian");
    const CMatrix& hm = h.matrix();
    if (!hm.allFinite()) throw std::invalid_argument("build_liouvillian: non-finite Hamiltonian");
    const double herm = h.hermiticity_error();
    if (herm > 1e-10 * std::max(1.0, max_abs(hm)))
        throw std::invalid_argument("build_liouvillian: Hamiltonian is not Hermitian");

    const int d = s.dim();
    const CMatrix id = CMatrix::Identity(d, d);
    const cplx mi(0.0, -1.0);
    CMatrix l = mi * (Eigen::kroneckerProduct(id, hm).eval() - Eigen::kroneckerProduct(hm.transpose(), id).eval());
    for (const auto& c : channels) {
        if (c.rate == 0.0) continue;
        const CMatrix& o = c.op.matrix();
        const CMatrix ndag = o.adjoint() * o;
        l += c.rate * (Eigen::kroneckerProduct(o.conjugate(), o).eval() -
                       0.5 * Eigen::kroneckerProduct(id, ndag).eval() -
                       0.5 * Eigen::kroneckerProduct(ndag.transpose(), id).eval());
    }
    return {s, l};
}

inline CMatrix propagator(const Superoperator& l, double t)
{
    CMatrix p = (l.matrix() * t).exp();
    if (!p.allFinite())
        throw NumericsError("propagation", "propagator non-finite at t = " + std::to_string(t) + " s");
    return p;
}

/// rho(t) = exp(L t) rho0.
inline DensityOperator evolve(const Superoperator& l, const DensityOperator& rho0, double t)
{
    require_same_space(l.space(), rho0.space(), "evolve");
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("evolve: t must be finite and >= 0");
    if (t == 0.0) return rho0;
    const CVector v = propagator(l, t) * vectorize(rho0.matrix());
    if (!v.allFinite())
        throw NumericsError("propagation", "state non-finite at t = " + std::to_string(t) + " s");
    return {rho0.space(), unvectorize(v, rho0.space().dim()), DensityOperator::Unchecked{}};
}

inline cplx expectation(const Operator& a, const DensityOperator& rho)
{
    require_same_space(a.space(), rho.space(), "expectation");
    return (a.matrix() * rho.matrix()).trace();
}

/// Uniform axis t_k = k * step, k = 0..count-1.
inline std::vector<double> uniform_axis(double step, int count)
{
    if (!(step > 0.0) || count < 1) throw std::invalid_argument("uniform_axis: step > 0 and count >= 1 required");
    std::vector<double> ax(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) ax[static_cast<std::size_t>(k)] = step * k;
    return ax;
}

/// Returns the step of a uniform axis starting at 0; throws otherwise.
inline double uniform_step(const std::vector<double>& axis, const char* name)
{
    if (axis.empty()) throw std::invalid_argument(std::string(name) + ": empty axis");
    if (axis.front() != 0.0) throw std::invalid_argument(std::string(name) + ": axis must start at 0");
    if (axis.size() == 1) return 0.0;
    const double h = axis[1] - axis[0];
    if (!(h > 0.0)) throw std::invalid_argument(std::string(name) + ": axis must be strictly increasing");
    for (std::size_t k = 1; k < axis.size(); ++k) {
        if (std::abs(axis[k] - h * static_cast<double>(k)) > 1e-9 * h * static_cast<double>(k))
            throw std::invalid_argument(std::string(name) + ": axis is not uniform");
    }
    return h;
}

struct CorrelatorGrid {
    std::vector<double> t_axis;   ///< s
    std::vector<double> tau_axis; ///< s
    CMatrix values;               ///< values(i, j) = <A(t_i + tau_j) B(t_i)>
};

/// <A(t + tau) B(t)> = Tr[A exp(L tau)(B rho(t))] by the quantum regression theorem.
inline CorrelatorGrid two_time_correlator(const Superoperator& l, const DensityOperator& rho0, const Operator& a,
                                          const Operator& b, const std::vector<double>& t_axis,
                                          const std::vector<double>& tau_axis)
{
    const HilbertSpace& s = l.space();
    require_same_space(s, rho0.space(), "two_time_correlator");
    require_same_space(s, a.space(), "two_time_correlator");
    require_same_space(s, b.space(), "two_time_correlator");
    const double dt = uniform_step(t_axis, "two_time_correlator t_axis");
    const double dtau = uniform_step(tau_axis, "two_time_correlator tau_axis");
    const int d = s.dim();
    const auto nt = static_cast<Eigen::Index>(t_axis.size());
    const auto ntau = static_cast<Eigen::Index>(tau_axis.size());

    // Columns: vec(B rho(t_i))
    const CMatrix bsup = Eigen::kroneckerProduct(CMatrix::Identity(d, d), b.matrix()).eval();
    CMatrix x(d * d, nt);
    CVector rho = vectorize(rho0.matrix());
    const CMatrix pt = nt > 1 ? propagator(l, dt) : CMatrix::Identity(d * d, d * d);
    for (Eigen::Index i = 0; i < nt; ++i) {
        if (i > 0) rho = pt * rho;
        x.col(i) = bsup * rho;
    }

    // Rows: vec(A^T)^T exp(L tau_j), so Tr[A Y] = row . vec(Y)
    CMatrix w(ntau, d * d);
    CVector u = vectorize(a.matrix().transpose());
    const CMatrix ptau_t = ntau > 1 ? CMatrix(propagator(l, dtau).transpose()) : CMatrix::Identity(d * d, d * d);
    for (Eigen::Index j = 0; j < ntau; ++j) {
        if (j > 0) u = ptau_t * u;
        w.row(j) = u.transpose();
    }

    CorrelatorGrid g{t_axis, tau_axis, (w * x).transpose()};
    if (!g.values.allFinite()) throw NumericsError("propagation", "two_time_correlator: non-finite values");
    return g;
}

} // namespace cavqed
