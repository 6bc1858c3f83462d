#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "correlator.hpp"
#include "dynamics.hpp"
#include "filters.hpp"
#include "models.hpp"
#include "units.hpp"

namespace cavqed {

/// S(w, v) = kappa Int Int e^{-i w t1} e^{i v t2} <a^+(t1) a(t2)> dt1 dt2 on a
/// shared uniform axis. values(k, l) = S(omega[k], omega[l]).
struct TwoColourSpectrum {
    std::vector<double> omega; ///< rad/s
    CMatrix values;

    double step() const { return omega.size() > 1 ? omega[1] - omega[0] : 0.0; }

    RVector diagonal() const
    {
        RVector d(values.rows());
        for (Eigen::Index k = 0; k < values.rows(); ++k) d(k) = values(k, k).real();
        return d;
    }

    double hermiticity_error() const
    {
        const double scale = std::max(max_abs(values), 1e-300);
        return max_abs(values - values.adjoint()) / scale;
    }
};

struct FigureOfMerit {
    double i_zpl = 0.0;
    double f_zpl = 0.0;
    double f_sb = 0.0;
    double i_total = 0.0;
    double beta = 1.0;
    /// External filter narrower than the cavity-enhanced emission rate; the
    /// incoherent-sideband assumption likely underestimates I there.
    bool tight_filter = false;
};

/// Symmetric uniform axis of `points` samples on [center - half_width, center + half_width].
inline std::vector<double> frequency_axis(double half_width, int points, double center = 0.0)
{
    if (!(half_width > 0.0) || points < 2) throw std::invalid_argument("frequency_axis: half_width > 0, points >= 2");
    std::vector<double> ax(static_cast<std::size_t>(points));
    const double h = 2.0 * half_width / (points - 1);
    for (int k = 0; k < points; ++k) ax[static_cast<std::size_t>(k)] = center - half_width + h * k;
    return ax;
}

/// +-multiplier * rate_scale around 0 with `points` samples.
inline std::vector<double> default_frequency_axis(const EmitterCavityModel& m, double multiplier = 10.0,
                                                  int points = 2048)
{
    return frequency_axis(multiplier * m.rate_scale, points);
}

inline std::vector<double> trapezoid_weights(std::size_t n, double h)
{
    std::vector<double> w(n, h);
    if (n == 1) w[0] = 0.0;
    if (n >= 2) w.front() = w.back() = 0.5 * h;
    return w;
}

/// Spectrum from a sampled correlator (A = a^+, B = a) by trapezoidal
/// quadrature; the t2 > t1 half is the conjugate of the computed half.
/// Correlator values beyond the tau window are taken as zero. Throws
/// NumericsError("nyquist") if the axis or rate_hint exceed pi/dt.
inline TwoColourSpectrum two_colour_spectrum(const CorrelatorGrid& g, double kappa, const std::vector<double>& omega,
                                             double rate_hint = 0.0)
{
    if (!(kappa > 0.0)) throw std::invalid_argument("two_colour_spectrum: kappa must be > 0");
    const double dt = uniform_step(g.t_axis, "two_colour_spectrum t_axis");
    const double dtau = uniform_step(g.tau_axis, "two_colour_spectrum tau_axis");
    const auto nt = static_cast<Eigen::Index>(g.t_axis.size());
    const auto ntau = static_cast<Eigen::Index>(g.tau_axis.size());
    if (g.values.rows() != nt || g.values.cols() != ntau)
        throw std::invalid_argument("two_colour_spectrum: correlator shape does not match its axes");
    if (nt < 2) throw std::invalid_argument("two_colour_spectrum: need at least two time samples");
    if (ntau > 1 && std::abs(dtau - dt) > 1e-9 * dt)
        throw std::invalid_argument("two_colour_spectrum: t and tau steps must agree");
    const double nyquist = units::pi / dt;
    double wmax = 0.0;
    for (double w : omega) wmax = std::max(wmax, std::abs(w));
    if (wmax > nyquist * (1.0 + 1e-12) || rate_hint >= nyquist)
        throw NumericsError("nyquist", "two_colour_spectrum: time grid too coarse for the frequency window");

    CMatrix c = CMatrix::Zero(nt, nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const Eigen::Index lag = i - j;
            if (lag >= ntau) continue;
            c(i, j) = g.values(j, lag);
            if (lag > 0) c(j, i) = std::conj(c(i, j));
        }
    }
    const auto wts = trapezoid_weights(static_cast<std::size_t>(nt), dt);
    const auto nw = static_cast<Eigen::Index>(omega.size());
    CMatrix e(nw, nt);
    for (Eigen::Index k = 0; k < nw; ++k)
        for (Eigen::Index i = 0; i < nt; ++i)
            e(k, i) = wts[static_cast<std::size_t>(i)] *
                      std::polar(1.0, -omega[static_cast<std::size_t>(k)] * g.t_axis[static_cast<std::size_t>(i)]);
    CMatrix s = kappa * (e * c * e.adjoint());
    if (!s.allFinite()) throw NumericsError("two_colour_spectrum: non-finite spectrum");
    return {omega, std::move(s)};
}

/// (1/2pi) Int S(w, w) dw
inline double zpl_power(const TwoColourSpectrum& s)
{
    const auto w = trapezoid_weights(s.omega.size(), s.step());
    double acc = 0.0;
    for (Eigen::Index k = 0; k < s.values.rows(); ++k) acc += w[static_cast<std::size_t>(k)] * s.values(k, k).real();
    return acc / units::two_pi;
}

/// Int Int |S|^2 dw dv / (2 pi F_ZPL)^2
inline double zpl_indistinguishability(const TwoColourSpectrum& s)
{
    const double f = zpl_power(s);
    if (!(f > 1e-9)) throw NumericsError("vanishing_zpl_power", "zpl_indistinguishability: ZPL power vanishes");
    const auto w = trapezoid_weights(s.omega.size(), s.step());
    double acc = 0.0;
    for (Eigen::Index l = 0; l < s.values.cols(); ++l) {
        double col = 0.0;
        for (Eigen::Index k = 0; k < s.values.rows(); ++k) col += w[static_cast<std::size_t>(k)] * std::norm(s.values(k, l));
        acc += w[static_cast<std::size_t>(l)] * col;
    }
    return acc / (units::two_pi * f * units::two_pi * f);
}

/// S_f(w, v) = h(w) h(v)^* S(w, v)
inline TwoColourSpectrum filter_spectrum(const TwoColourSpectrum& s, const FilterSpec& f)
{
    TwoColourSpectrum out = s;
    const auto n = static_cast<Eigen::Index>(s.omega.size());
    CVector h(n);
    for (Eigen::Index k = 0; k < n; ++k) h(k) = f.amplitude(s.omega[static_cast<std::size_t>(k)]);
    out.values = h.asDiagonal() * s.values * h.conjugate().asDiagonal();
    return out;
}

namespace detail {

/// Int of prod_j a_j^2 / ((w - c_j)^2 + a_j^2) dw by residues in the upper
/// half plane; nullopt when two poles nearly coincide.
inline std::optional<double> lorentzian_product_integral(const std::vector<std::pair<double, double>>& f)
{
    std::vector<cplx> p;
    for (const auto& [c, a] : f) p.emplace_back(c, a);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            if (std::abs(p[i] - p[j]) < 1e-4 * (f[i].second + f[j].second)) return std::nullopt;
    cplx acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        cplx r = f[i].second / cplx(0.0, 2.0);
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (j == i) continue;
            const double a = f[j].second;
            r *= a * a / ((p[i] - f[j].first) * (p[i] - f[j].first) + a * a);
        }
        acc += r;
    }
    return (cplx(0.0, units::two_pi) * acc).real();
}

/// Same integral for one sideband component by adaptive quadrature.
inline double sideband_component_quadrature(const SidebandComponent& c, const std::vector<FilterSpec>& chain)
{
    using boost::math::quadrature::gauss_kronrod;
    // w = c + (G/2) tan(phi) maps the Lorentzian onto a flat density on (-pi/2, pi/2)
    const double hw = 0.5 * c.width;
    auto f = [&](double phi) { return chain_transmission(chain, c.center + hw * std::tan(phi)); };
    // decade-spaced cuts around every filter centre keep each panel smooth
    std::vector<double> cuts{-units::pi / 2, units::pi / 2, 0.0};
    for (const auto& flt : chain) {
        const double x0 = (flt.center - c.center) / hw;
        cuts.push_back(std::atan(x0));
        for (double off = 0.05 * flt.kappa / hw; off < 1e9; off *= 10.0) {
            cuts.push_back(std::atan(x0 - off));
            cuts.push_back(std::atan(x0 + off));
        }
    }
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (cuts[k + 1] - cuts[k] <= 1e-15) continue;
        acc += gauss_kronrod<double, 31>::integrate(f, cuts[k], cuts[k + 1], 12, 1e-13);
    }
    return c.weight * acc / units::pi;
}

} // namespace detail

/// Int |h_1|^2 ... |h_n|^2 S0_SB(w) dw
inline double sideband_power(const SidebandModel& model, const std::vector<FilterSpec>& chain)
{
    double total = 0.0;
    for (const auto& c : model.components) {
        std::vector<std::pair<double, double>> f{{c.center, 0.5 * c.width}};
        for (const auto& flt : chain) f.emplace_back(flt.center, 0.5 * flt.kappa);
        const auto exact = detail::lorentzian_product_integral(f);
        total += exact ? c.weight * *exact / (units::pi * 0.5 * c.width) : detail::sideband_component_quadrature(c, chain);
    }
    return total;
}

inline double sideband_power(const SidebandModel& model, const FilterSpec& cavity_filter)
{
    return sideband_power(model, std::vector<FilterSpec>{cavity_filter});
}

/// I_ZPL (F_ZPL / (F_ZPL + F_SB))^2
inline double total_indistinguishability(double i_zpl, double f_zpl, double f_sb)
{
    if (!(f_zpl + f_sb > 0.0)) throw NumericsError("zero_power", "total_indistinguishability: zero total power");
    const double r = f_zpl / (f_zpl + f_sb);
    return i_zpl * r * r;
}

/// Eq.-5 combination with Debye-Waller weighting of the ZPL photon number.
inline FigureOfMerit combine(double i_zpl, double f_zpl, double f_sb, double debye_waller)
{
    FigureOfMerit m;
    m.i_zpl = i_zpl;
    m.f_zpl = f_zpl;
    m.f_sb = f_sb;
    m.i_total = total_indistinguishability(i_zpl, debye_waller * f_zpl, f_sb);
    m.beta = 1.0;
    return m;
}

/// Figures of merit from a sampled spectrum without an external filter.
inline FigureOfMerit figure_of_merit(const TwoColourSpectrum& s, const SidebandModel& sb, const FilterSpec& cavity)
{
    return combine(zpl_indistinguishability(s), zpl_power(s), sideband_power(sb, cavity), sb.debye_waller());
}

/// Filtered figures of merit from a sampled spectrum. beta compares the
/// Debye-Waller weighted filtered and unfiltered powers.
inline FigureOfMerit apply_external_filter(const TwoColourSpectrum& s, const SidebandModel& sb, const FilterSpec& cavity,
                                           const FilterSpec& external)
{
    const double dw = sb.debye_waller();
    const double f0 = zpl_power(s);
    const double sb0 = sideband_power(sb, cavity);
    const TwoColourSpectrum sf = filter_spectrum(s, external);
    FigureOfMerit m = combine(zpl_indistinguishability(sf), zpl_power(sf),
                              sideband_power(sb, std::vector<FilterSpec>{cavity, external}), dw);
    m.beta = (dw * m.f_zpl + m.f_sb) / (dw * f0 + sb0);
    return m;
}

struct ZplFigures {
    double f_zpl = 0.0;
    double i_zpl = 0.0;
};

/// Exact F_ZPL = k Int <e^+ e> dt and I_ZPL = k^2 Int Int |<e^+(t1) e(t2)>|^2 / F_ZPL^2
/// for the model's emission port e, from the time-domain integrals.
inline ZplFigures zpl_figures(const EmitterCavityModel& m)
{
    const SteadyStateResolvent res(m.liouvillian());
    const Operator& e = m.emission_operator;
    const Operator ed = e.adjoint();
    const double k = m.emission_rate;
    const double f = k * res.integrated_expectation(ed * e, m.initial_state).real();
    if (!(f > 1e-9)) throw NumericsError("vanishing_zpl_power", "ZPL photon number vanishes");
    const double j = res.correlator_norm(ed, e, m.initial_state);
    return {f, k * k * 2.0 * j / (f * f)};
}

/// Exact two-colour spectrum of the model's emission port on a uniform axis.
inline TwoColourSpectrum exact_two_colour_spectrum(const EmitterCavityModel& m, const std::vector<double>& omega)
{
    const SteadyStateResolvent res(m.liouvillian());
    const Operator& e = m.emission_operator;
    const CMatrix t = res.half_plane_transform(e.adjoint(), e, m.initial_state, omega);
    return {omega, m.emission_rate * (t + t.adjoint())};
}

/// Exact S(w, w) of the model's emission port.
inline RVector exact_diagonal_spectrum(const EmitterCavityModel& m, const std::vector<double>& omega)
{
    const SteadyStateResolvent res(m.liouvillian());
    const Operator& e = m.emission_operator;
    return 2.0 * m.emission_rate * res.half_plane_diagonal(e.adjoint(), e, m.initial_state, omega).real();
}

/// Pointwise exact S(w, v) of a model's emission port.
class SpectrumEvaluator {
public:
    explicit SpectrumEvaluator(const EmitterCavityModel& m) : res_(m.liouvillian()), kappa_(m.emission_rate)
    {
        const Operator& e = m.emission_operator;
        res_.check_decaying(e.adjoint(), e);
        const int d = m.space.dim();
        const CMatrix& u = res_.schur().u();
        ut_ = u.transpose() * vectorize(e.adjoint().matrix().transpose());
        mt_ = u.adjoint() * Eigen::kroneckerProduct(CMatrix::Identity(d, d), e.matrix()).eval() * u;
        r0_ = u.adjoint() * vectorize(m.initial_state.matrix());
    }

    /// u^T (i w - Lt)^{-1}, Schur basis
    CVector row(double w) const { return res_.schur().shifted_solve_schur_transpose(cplx(0.0, w), ut_); }
    /// M (i W - Lt)^{-1} rho0, Schur basis
    CVector col(double big_w) const { return mt_ * res_.schur().shifted_solve_schur(cplx(0.0, big_w), r0_); }

    cplx half(const CVector& row_w, double w, double v) const { return kappa_ * (row_w.transpose() * col(w - v)).value(); }

    cplx operator()(double w, double v) const { return half(row(w), w, v) + std::conj(half(row(v), v, w)); }

    double diagonal(double w) const { return 2.0 * kappa_ * (row(w).transpose() * col(0.0)).value().real(); }

private:
    SteadyStateResolvent res_;
    double kappa_;
    CVector ut_;
    CMatrix mt_;
    CVector r0_;
};

/// F_ZPL and I_ZPL from the frequency-domain integrals (1/2pi) Int S(w, w) dw and
/// Int Int |S|^2 dw dv / (2 pi F)^2, evaluated by adaptive quadrature of the
/// exact spectrum over the whole plane (w = scale * tan(phi)).
inline ZplFigures zpl_figures_frequency_domain(const EmitterCavityModel& m, double tol = 1e-9)
{
    using boost::math::quadrature::gauss_kronrod;
    const SpectrumEvaluator spec(m);
    const double s = m.rate_scale;
    const double h = units::pi / 2;
    std::vector<double> cuts{-h, -std::atan(1.0), 0.0, std::atan(1.0), h};
    auto integrate = [&](auto&& f) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
            acc += gauss_kronrod<double, 31>::integrate(f, cuts[k], cuts[k + 1], 25, tol);
        return acc;
    };
    auto jac = [&](double phi) { const double c = std::cos(phi); return s / (c * c); };

    const double f = integrate([&](double phi) { return spec.diagonal(s * std::tan(phi)) * jac(phi); }) / units::two_pi;
    if (!(f > 1e-9)) throw NumericsError("vanishing_zpl_power", "ZPL photon number vanishes");
    const double n2 = integrate([&](double phi) {
        const double w = s * std::tan(phi);
        const CVector rw = spec.row(w);
        const double inner = integrate([&](double psi) {
            const double v = s * std::tan(psi);
            const cplx val = spec.half(rw, w, v) + std::conj(spec.half(spec.row(v), v, w));
            return std::norm(val) * jac(psi);
        });
        return inner * jac(phi);
    });
    return {f, n2 / (units::two_pi * f * units::two_pi * f)};
}

/// Unfiltered figures of merit of an emitter-cavity model.
inline FigureOfMerit evaluate(const EmitterCavityModel& m, const SidebandModel& sb, const FilterSpec& cavity)
{
    const ZplFigures z = zpl_figures(m);
    return combine(z.i_zpl, z.f_zpl, sideband_power(sb, cavity), sb.debye_waller());
}

/// Figures of merit behind an external filter; the ZPL part is simulated
/// with the filter as a cascaded cavity. Filter centres are relative to the
/// ZPL, which sits at `zpl_offset` in the model's rotating frame.
/// `emission_rate` (cavity-enhanced decay rate) sets the tight-filter flag.
inline FigureOfMerit evaluate_filtered(const EmitterCavityModel& m, const SidebandModel& sb, const FilterSpec& cavity,
                                       const FilterSpec& external, double emission_rate = 0.0,
                                       double zpl_offset = 0.0)
{
    const double dw = sb.debye_waller();
    const ZplFigures z0 = zpl_figures(m);
    const double sb0 = sideband_power(sb, cavity);
    const ZplFigures zf = zpl_figures(with_output_filter(m, FilterSpec(external.kappa, external.center + zpl_offset)));
    FigureOfMerit r = combine(zf.i_zpl, zf.f_zpl, sideband_power(sb, std::vector<FilterSpec>{cavity, external}), dw);
    r.beta = (dw * r.f_zpl + r.f_sb) / (dw * z0.f_zpl + sb0);
    r.tight_filter = external.kappa < emission_rate;
    return r;
}

/// Indices of strict local maxima of a sampled curve above `rel_floor` times its maximum.
inline std::vector<Eigen::Index> local_maxima(const RVector& y, double rel_floor = 1e-3)
{
    std::vector<Eigen::Index> out;
    if (y.size() < 3) return out;
    const double top = y.maxCoeff();
    for (Eigen::Index k = 1; k + 1 < y.size(); ++k)
        if (y(k) > y(k - 1) && y(k) >= y(k + 1) && y(k) > rel_floor * top) out.push_back(k);
    return out;
}

/// Full width at half maximum of the global peak, linearly interpolated.
inline double full_width_half_maximum(const std::vector<double>& x, const RVector& y)
{
    Eigen::Index imax = 0;
    const double top = y.maxCoeff(&imax);
    const double half = 0.5 * top;
    Eigen::Index lo = imax, hi = imax;
    while (lo > 0 && y(lo) > half) --lo;
    while (hi + 1 < y.size() && y(hi) > half) ++hi;
    if (y(lo) > half || y(hi) > half) throw NumericsError("fwhm", "peak not resolved inside the window");
    auto cross = [&](Eigen::Index a, Eigen::Index b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        return x[ua] + (half - y(a)) * (x[ub] - x[ua]) / (y(b) - y(a));
    };
    return cross(hi - 1, hi) - cross(lo, lo + 1);
}

} // namespace cavqed
