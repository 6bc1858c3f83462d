#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "models.hpp"
#include "units.hpp"

namespace cavqed {

using Vec3 = std::array<double, 3>;
using CVec3 = std::array<cplx, 3>;

/// Rectilinear sampling of eps(r) and E(r). Samples are stored row-major
/// with z fastest: index = (i * ny + j) * nz + k.
struct FieldGrid {
    std::array<std::vector<double>, 3> axes; ///< metres
    std::vector<double> epsilon;
    std::vector<CVec3> e_field;

    std::size_t nx() const { return axes[0].size(); }
    std::size_t ny() const { return axes[1].size(); }
    std::size_t nz() const { return axes[2].size(); }
    std::size_t size() const { return nx() * ny() * nz(); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * ny() + j) * nz() + k; }

    double energy_density(std::size_t n) const
    {
        const auto& e = e_field[n];
        return epsilon[n] * (std::norm(e[0]) + std::norm(e[1]) + std::norm(e[2]));
    }

    void validate() const
    {
        for (int d = 0; d < 3; ++d) {
            const auto& ax = axes[static_cast<std::size_t>(d)];
            if (ax.size() < 2) throw std::invalid_argument("FieldGrid: every axis needs at least two samples");
            for (std::size_t k = 0; k < ax.size(); ++k) {
                if (!std::isfinite(ax[k])) throw std::invalid_argument("FieldGrid: non-finite coordinate");
                if (k > 0 && !(ax[k] > ax[k - 1]))
                    throw std::invalid_argument("FieldGrid: axis " + std::to_string(d) + " not strictly increasing");
            }
        }
        if (epsilon.size() != size() || e_field.size() != size())
            throw std::invalid_argument("FieldGrid: sample count does not match axes");
        bool any = false;
        for (std::size_t n = 0; n < size(); ++n) {
            if (!(epsilon[n] >= 1.0) || !std::isfinite(epsilon[n]))
                throw std::invalid_argument("FieldGrid: epsilon must be >= 1 (sample " + std::to_string(n) + ")");
            for (const auto& c : e_field[n]) {
                if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                    throw std::invalid_argument("FieldGrid: non-finite field (sample " + std::to_string(n) + ")");
                if (c != cplx(0.0)) any = true;
            }
        }
        if (!any) throw std::invalid_argument("FieldGrid: field is zero everywhere");
    }
};

namespace detail {

inline std::vector<double> trapezoid(const std::vector<double>& x)
{
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        const double h = 0.5 * (x[k + 1] - x[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    return w;
}

/// Bracketing cell and fractional offset of `v` on `ax`.
inline std::pair<std::size_t, double> locate(const std::vector<double>& ax, double v)
{
    if (!(v >= ax.front() && v <= ax.back())) throw std::out_of_range("position outside the field grid");
    auto it = std::upper_bound(ax.begin(), ax.end(), v);
    std::size_t i = it == ax.begin() ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
    i = std::min(i, ax.size() - 2);
    return {i, (v - ax[i]) / (ax[i + 1] - ax[i])};
}

} // namespace detail

inline std::size_t peak_index(const FieldGrid& grid)
{
    std::size_t best = 0;
    double top = -1.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const double u = grid.energy_density(n);
        if (u > top) {
            top = u;
            best = n;
        }
    }
    return best;
}

inline Vec3 grid_position(const FieldGrid& grid, std::size_t n)
{
    const std::size_t k = n % grid.nz();
    const std::size_t j = (n / grid.nz()) % grid.ny();
    const std::size_t i = n / (grid.nz() * grid.ny());
    return {grid.axes[0][i], grid.axes[1][j], grid.axes[2][k]};
}

/// V_m = Int eps|E|^2 dV / max(eps|E|^2), trapezoidal on the grid. m^3.
inline double mode_volume(const FieldGrid& grid)
{
    grid.validate();
    const auto wx = detail::trapezoid(grid.axes[0]);
    const auto wy = detail::trapezoid(grid.axes[1]);
    const auto wz = detail::trapezoid(grid.axes[2]);
    double acc = 0.0, top = 0.0;
    for (std::size_t i = 0; i < grid.nx(); ++i)
        for (std::size_t j = 0; j < grid.ny(); ++j) {
            double row = 0.0;
            for (std::size_t k = 0; k < grid.nz(); ++k) {
                const double u = grid.energy_density(grid.index(i, j, k));
                row += wz[k] * u;
                top = std::max(top, u);
            }
            acc += wx[i] * wy[j] * row;
        }
    return acc / top;
}

/// Trilinear interpolation of the complex field.
inline CVec3 interpolate_field(const FieldGrid& grid, const Vec3& r)
{
    const auto [i, fx] = detail::locate(grid.axes[0], r[0]);
    const auto [j, fy] = detail::locate(grid.axes[1], r[1]);
    const auto [k, fz] = detail::locate(grid.axes[2], r[2]);
    CVec3 out{};
    for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
            for (int dk = 0; dk < 2; ++dk) {
                const double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                if (w == 0.0) continue;
                const auto& e = grid.e_field[grid.index(i + di, j + dj, k + dk)];
                for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(c)] += w * e[static_cast<std::size_t>(c)];
            }
    return out;
}

struct CouplingGeometry {
    double f_r = 1.0;
    double eta = 1.0;
    double v_m = 0.0;     ///< m^3
    double v_m_eff = 0.0; ///< v_m / f_r^2, +inf when f_r = 0
};

/// Spatial factor f(r) = |e_c^* . E(r)| / |E(r_peak)| with e_c the field
/// polarisation at the energy-density maximum, and dipole overlap
/// eta = |d . e_c| for a real unit dipole d.
inline CouplingGeometry field_structure(const FieldGrid& grid, const Vec3& r, const Vec3& dipole_axis)
{
    const double v_m = mode_volume(grid);
    const double dn = std::sqrt(dipole_axis[0] * dipole_axis[0] + dipole_axis[1] * dipole_axis[1] +
                                dipole_axis[2] * dipole_axis[2]);
    if (!(dn > 0.0) || !std::isfinite(dn)) throw std::invalid_argument("field_structure: dipole axis must be non-zero");
    const auto& ep = grid.e_field[peak_index(grid)];
    const double norm_peak = std::sqrt(std::norm(ep[0]) + std::norm(ep[1]) + std::norm(ep[2]));
    const CVec3 er = interpolate_field(grid, r);
    cplx proj = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        const cplx ec = ep[c] / norm_peak;
        proj += std::conj(ec) * er[c];
        dot += dipole_axis[c] / dn * ec;
    }
    CouplingGeometry out;
    out.v_m = v_m;
    out.f_r = std::min(1.0, std::abs(proj) / norm_peak);
    out.eta = std::min(1.0, std::abs(dot));
    out.v_m_eff = out.f_r > 0.0 ? v_m / (out.f_r * out.f_r) : std::numeric_limits<double>::infinity();
    return out;
}

/// Cavity described by its relative mode volume (units of (lambda_c/n)^3)
/// and quality factor.
struct CavityParams {
    double v_m_rel = 0.0;
    double q = 0.0;
    double omega_c = 0.0; ///< rad/s
    double n = 1.0;

    void validate() const
    {
        if (!(v_m_rel > 0.0) || !std::isfinite(v_m_rel)) throw std::invalid_argument("CavityParams: v_m_rel must be > 0");
        if (!(q >= 1.0) || !std::isfinite(q)) throw std::invalid_argument("CavityParams: q must be >= 1");
        if (!(omega_c > 0.0) || !std::isfinite(omega_c)) throw std::invalid_argument("CavityParams: omega_c must be > 0");
        if (!(n >= 1.0) || !std::isfinite(n)) throw std::invalid_argument("CavityParams: n must be >= 1");
    }

    double kappa() const { return omega_c / q; }
    double wavelength() const { return units::wavelength_from_omega(omega_c); }
    double mode_volume() const
    {
        const double l = wavelength() / n;
        return v_m_rel * l * l * l;
    }
};

/// g = eta f sqrt(3 pi c^3 gamma_c / (2 w0^2 n^3 V_m)), gamma_c the coupling
/// rate of the emitter. Weak-coupling limit 4g^2/(kappa gamma_c) equals
/// (3/4pi^2)(lambda/n)^3 Q/V_m.
inline double coupling_from_geometry(const CavityParams& cav, const EmitterParams& em, const CouplingGeometry& geom = {})
{
    cav.validate();
    em.validate();
    const double v = cav.mode_volume();
    if (!(v > 0.0)) throw std::invalid_argument("coupling_from_geometry: zero mode volume");
    const double c = units::c;
    const double g0 = std::sqrt(3.0 * units::pi * c * c * c * em.coupling_rate() /
                                (2.0 * em.omega0 * em.omega0 * cav.n * cav.n * cav.n * v));
    return geom.eta * geom.f_r * g0;
}

/// 4 g^2 / (kappa gamma_c)
inline double purcell_factor(const CavityParams& cav, const EmitterParams& em, double g)
{
    return 4.0 * g * g / (cav.kappa() * em.coupling_rate());
}

struct SampledSpectrum {
    std::vector<double> omega; ///< rad/s, increasing
    std::vector<double> power;
};

struct PurcellSpectrum {
    std::vector<double> omega;
    std::vector<double> f_p;
    std::size_t excluded = 0; ///< overlap samples dropped for a zero reference
};

inline double interpolate_linear(const std::vector<double>& x, const std::vector<double>& y, double v)
{
    auto it = std::upper_bound(x.begin(), x.end(), v);
    if (it == x.end()) return y.back();
    if (it == x.begin()) return y.front();
    const auto k = static_cast<std::size_t>(it - x.begin());
    const double t = (v - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + t * (y[k] - y[k - 1]);
}

/// F_P = P_wg / P_0 on the samples of p_wg that fall inside p_0's range.
inline PurcellSpectrum purcell_enhancement(const SampledSpectrum& p_wg, const SampledSpectrum& p_0)
{
    for (const auto* s : {&p_wg, &p_0}) {
        if (s->omega.size() < 2 || s->omega.size() != s->power.size())
            throw std::invalid_argument("purcell_enhancement: spectra need >= 2 matching samples");
        for (std::size_t k = 1; k < s->omega.size(); ++k)
            if (!(s->omega[k] > s->omega[k - 1]))
                throw std::invalid_argument("purcell_enhancement: frequency axis not increasing");
    }
    const double lo = std::max(p_wg.omega.front(), p_0.omega.front());
    const double hi = std::min(p_wg.omega.back(), p_0.omega.back());
    if (!(lo <= hi)) throw std::invalid_argument("purcell_enhancement: spectra do not overlap");
    PurcellSpectrum out;
    for (std::size_t k = 0; k < p_wg.omega.size(); ++k) {
        const double w = p_wg.omega[k];
        if (w < lo || w > hi) continue;
        const double ref = interpolate_linear(p_0.omega, p_0.power, w);
        if (!(ref > 0.0)) {
            ++out.excluded;
            continue;
        }
        out.omega.push_back(w);
        out.f_p.push_back(p_wg.power[k] / ref);
    }
    return out;
}

} // namespace cavqed
