#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "errors.hpp"
#include "linalg.hpp"
#include "units.hpp"

namespace cavqed {

struct Resonance {
    double frequency = 0.0;  ///< Hz
    double q = 0.0;
    cplx amplitude = 0.0;
    double decay_rate = 0.0; ///< 1/s, field amplitude: pi f / Q
};

using ResonanceSet = std::vector<Resonance>;

/// s(k dt) = sum_j A_j exp(-i 2pi f_j k dt - pi f_j k dt / Q_j)
inline CVector synthesize(const ResonanceSet& modes, double dt, Eigen::Index samples)
{
    CVector s = CVector::Zero(samples);
    for (const auto& m : modes) {
        const cplx z = std::exp(cplx(-m.decay_rate * dt, -units::two_pi * m.frequency * dt));
        cplx p = m.amplitude;
        for (Eigen::Index k = 0; k < samples; ++k, p *= z) s(k) += p;
    }
    return s;
}

/// Matrix-pencil fit of a uniformly sampled ringdown. Keeps decaying
/// modes with f > 0 whose |A| exceeds noise_floor * max|A|, sorted by
/// |A| descending. Fewer modes than requested is a normal outcome.
inline ResonanceSet harmonic_inversion(const CVector& signal, double dt, int max_modes, double noise_floor = 1e-6)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("harmonic_inversion: dt must be > 0");
    if (max_modes < 1) throw std::invalid_argument("harmonic_inversion: max_modes must be >= 1");
    const Eigen::Index n = signal.size();
    if (n < 4 * max_modes) throw std::invalid_argument("harmonic_inversion: need at least 4 * max_modes samples");
    if (!signal.allFinite()) throw std::invalid_argument("harmonic_inversion: non-finite samples");
    if (signal.cwiseAbs().maxCoeff() == 0.0) return {};

    const Eigen::Index pencil = std::min<Eigen::Index>(n / 2, 512);
    const Eigen::Index rows = n - pencil;
    CMatrix y(rows, pencil + 1);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j <= pencil; ++j) y(i, j) = signal(i + j);

    Eigen::BDCSVD<CMatrix> svd(y, Eigen::ComputeThinV);
    const RVector& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-10 * sv(0)) ++rank;
    const Eigen::Index m = std::min<Eigen::Index>(rank, max_modes);
    if (m == 0) return {};

    // rows of y are combinations of (1, z, ..., z^L): shift invariance lives in conj(V)
    const CMatrix w = svd.matrixV().leftCols(m).conjugate();
    const CMatrix w1 = w.topRows(pencil);
    const CMatrix w2 = w.bottomRows(pencil);
    const CMatrix pencil_op = w1.completeOrthogonalDecomposition().solve(w2);
    Eigen::ComplexEigenSolver<CMatrix> es(pencil_op, false);
    if (es.info() != Eigen::Success) throw NumericsError("harminv", "harmonic_inversion: eigen-decomposition failed");
    const CVector z = es.eigenvalues();

    CMatrix vander(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        cplx p = 1.0;
        for (Eigen::Index k = 0; k < n; ++k, p *= z(j)) vander(k, j) = p;
    }
    const CVector amp = vander.colPivHouseholderQr().solve(signal);

    ResonanceSet out;
    double top = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) top = std::max(top, std::abs(amp(j)));
    for (Eigen::Index j = 0; j < m; ++j) {
        const double f = -std::arg(z(j)) / (units::two_pi * dt);
        const double decay = -std::log(std::abs(z(j))) / dt;
        if (!(f > 0.0) || !(decay > 0.0) || !std::isfinite(decay)) continue;
        if (std::abs(amp(j)) < noise_floor * top) continue;
        out.push_back({f, units::pi * f / decay, amp(j), decay});
    }
    std::sort(out.begin(), out.end(),
              [](const Resonance& a, const Resonance& b) { return std::abs(a.amplitude) > std::abs(b.amplitude); });
    return out;
}

} // namespace cavqed
