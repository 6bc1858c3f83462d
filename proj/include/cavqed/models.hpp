#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "filters.hpp"
#include "units.hpp"

namespace cavqed {

struct EmitterParams {
    double gamma = 0.0;        ///< spontaneous decay, rad/s
    double gamma_star = 0.0;   ///< pure dephasing, rad/s
    double debye_waller = 1.0; ///< ZPL fraction of the emission
    double omega0 = 0.0;       ///< ZPL transition, rad/s
    /// Fraction of gamma that feeds the cavity-coupled dipole in the
    /// Purcell mapping; defaults to debye_waller when unset.
    std::optional<double> coupling_fraction;

    void validate() const
    {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("EmitterParams: gamma must be > 0");
        if (!(gamma_star >= 0.0) || !std::isfinite(gamma_star))
            throw std::invalid_argument("EmitterParams: gamma_star must be >= 0");
        if (!(debye_waller > 0.0 && debye_waller <= 1.0))
            throw std::invalid_argument("EmitterParams: debye_waller must lie in (0, 1]");
        if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw std::invalid_argument("EmitterParams: omega0 must be > 0");
        if (coupling_fraction && !(*coupling_fraction > 0.0 && *coupling_fraction <= 1.0))
            throw std::invalid_argument("EmitterParams: coupling_fraction must lie in (0, 1]");
    }

    /// Radiative rate entering the emitter-cavity coupling g.
    double coupling_rate() const { return gamma * coupling_fraction.value_or(debye_waller); }
};

/// Cavity parameters as seen by the emitter: coupling g, linewidth kappa and
/// emitter-minus-cavity detuning, all rad/s.
struct CavityCoupling {
    double g = 0.0;
    double kappa = 0.0;
    double detuning = 0.0;
};

struct EmitterCavityModel {
    HilbertSpace space;
    Operator hamiltonian;
    std::vector<CollapseChannel> channels;
    DensityOperator initial_state;
    Operator emission_operator;  ///< output mode (a, or sigma for a bare emitter)
    double emission_rate = 0.0;  ///< rate of the emission port, rad/s
    std::size_t emission_channel = 0;
    Operator loss_operator;      ///< sum of rate * O^+ O over excitation-removing channels
    double rate_scale = 0.0;     ///< max(g, kappa, gamma*, Delta, ...) for default windows

    Superoperator liouvillian() const { return build_liouvillian(hamiltonian, channels); }
};

/// D_W^2 gamma / (gamma + gamma*)
inline double bare_indistinguishability(const EmitterParams& p)
{
    p.validate();
    return p.debye_waller * p.debye_waller * p.gamma / (p.gamma + p.gamma_star);
}

/// Dephased two-level emitter radiating through its own gamma port (no cavity).
inline EmitterCavityModel build_bare_emitter_model(const EmitterParams& em, double detuning = 0.0)
{
    em.validate();
    const HilbertSpace s({2});
    const Operator sm = Operator::transition(s, 0, 0, 1);
    const Operator n = sm.adjoint() * sm;
    std::vector<CollapseChannel> ch{{em.gamma, sm}, {em.gamma_star, n}};
    return EmitterCavityModel{s,
                              detuning * n,
                              ch,
                              DensityOperator::pure(s, {1}),
                              sm,
                              em.gamma,
                              0,
                              em.gamma * n,
                              std::max({em.gamma, em.gamma_star, std::abs(detuning)})};
}

/// Two-level emitter in a one-sided single-mode cavity:
/// H = detuning s^+s + g (s^+ a + s a^+), channels (gamma, s), (gamma*, s^+s),
/// (kappa, a), rho0 = |e,0><e,0|. Levels: 0 = g, 1 = e.
inline EmitterCavityModel build_two_level_model(const EmitterParams& em, const CavityCoupling& cav,
                                                int photon_cutoff = 1)
{
    em.validate();
    if (!(cav.g >= 0.0) || !std::isfinite(cav.g)) throw std::invalid_argument("build_two_level_model: g must be >= 0");
    if (!(cav.kappa > 0.0) || !std::isfinite(cav.kappa))
        throw std::invalid_argument("build_two_level_model: kappa must be > 0");
    if (photon_cutoff < 1) throw std::invalid_argument("build_two_level_model: photon cutoff must be >= 1");
    const HilbertSpace s({2, photon_cutoff + 1});
    const Operator sm = Operator::transition(s, 0, 0, 1);
    const Operator a = Operator::annihilation(s, 1);
    const Operator n = sm.adjoint() * sm;
    const Operator h = cav.detuning * n + cav.g * (sm.adjoint() * a + sm * a.adjoint());
    std::vector<CollapseChannel> ch{{em.gamma, sm}, {em.gamma_star, n}, {cav.kappa, a}};
    return EmitterCavityModel{s,
                              h,
                              ch,
                              DensityOperator::pure(s, {1, 0}),
                              a,
                              cav.kappa,
                              2,
                              em.gamma * n + cav.kappa * (a.adjoint() * a),
                              std::max({cav.g, cav.kappa, em.gamma_star, em.gamma, std::abs(cav.detuning)})};
}

enum class ExcitedLevel { x, y };

/// Which frame the three-level Hamiltonian uses: the cavity is resonant with
/// e_x, with e_y, or sits midway between them.
enum class CavityResonance { x, y, midpoint };

enum class InitialPopulation { theta, x, y };

struct ThreeLevelParams {
    EmitterParams base;          ///< gamma used for both dipoles; gamma_star is not part of this model
    double delta = 0.0;          ///< excited-state splitting, rad/s
    double gamma_star_xy = 0.0;  ///< downhill polarisation relaxation, rad/s
    double temperature = 300.0;  ///< K
    double theta = 0.0;          ///< cavity-dipole orientation, rad
    ExcitedLevel upper = ExcitedLevel::x;
    CavityResonance resonance = CavityResonance::y;
    InitialPopulation initial = InitialPopulation::theta;

    void validate() const
    {
        base.validate();
        if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("ThreeLevelParams: delta must be >= 0");
        if (!(gamma_star_xy >= 0.0) || !std::isfinite(gamma_star_xy))
            throw std::invalid_argument("ThreeLevelParams: gamma_star_xy must be >= 0");
        if (!(temperature > 0.0) || !std::isfinite(temperature))
            throw std::invalid_argument("ThreeLevelParams: temperature must be > 0");
        if (!(theta >= 0.0 && theta <= units::pi / 2 + 1e-12))
            throw std::invalid_argument("ThreeLevelParams: theta must lie in [0, pi/2]");
    }

    /// exp(-hbar Delta / k_B T)
    double detailed_balance() const { return std::exp(-units::hbar * delta / (units::k_B * temperature)); }
};

/// Three-level emitter {g, e_x, e_y} (levels 0, 1, 2) coupled through
/// s_m = sin(theta) s_x + cos(theta) s_y. Downhill relaxation upper->lower at
/// gamma*_xy, uphill at exp(-hbar Delta/kT) gamma*_xy.
inline EmitterCavityModel build_three_level_model(const ThreeLevelParams& p, const CavityCoupling& cav,
                                                  int photon_cutoff = 1)
{
    p.validate();
    if (!(cav.g >= 0.0) || !std::isfinite(cav.g)) throw std::invalid_argument("build_three_level_model: g must be >= 0");
    if (!(cav.kappa > 0.0) || !std::isfinite(cav.kappa))
        throw std::invalid_argument("build_three_level_model: kappa must be > 0");
    if (photon_cutoff < 1) throw std::invalid_argument("build_three_level_model: photon cutoff must be >= 1");
    const HilbertSpace s({3, photon_cutoff + 1});
    const int lx = 1, ly = 2;
    const Operator sx = Operator::transition(s, 0, 0, lx);
    const Operator sy = Operator::transition(s, 0, 0, ly);
    const Operator px = sx.adjoint() * sx;
    const Operator py = sy.adjoint() * sy;
    const Operator a = Operator::annihilation(s, 1);
    const Operator sm = std::sin(p.theta) * sx + std::cos(p.theta) * sy;

    const int up = p.upper == ExcitedLevel::x ? lx : ly;
    const int low = p.upper == ExcitedLevel::x ? ly : lx;
    double ex = 0.0, ey = 0.0;
    const double e_up = p.resonance == CavityResonance::midpoint ? 0.5 * p.delta
                        : ((p.resonance == CavityResonance::x) == (up == lx)) ? 0.0
                                                                              : p.delta;
    const double e_low = e_up - p.delta;
    (up == lx ? ex : ey) = e_up;
    (up == lx ? ey : ex) = e_low;

    const Operator h = (ex + cav.detuning) * px + (ey + cav.detuning) * py + cav.g * (sm.adjoint() * a + sm * a.adjoint());
    const Operator down = Operator::transition(s, 0, low, up);
    const Operator upward = Operator::transition(s, 0, up, low);
    std::vector<CollapseChannel> ch{{p.base.gamma, sx},
                                    {p.base.gamma, sy},
                                    {p.gamma_star_xy, down},
                                    {p.detailed_balance() * p.gamma_star_xy, upward},
                                    {cav.kappa, a}};

    double wx = 0.0, wy = 0.0;
    switch (p.initial) {
    case InitialPopulation::theta:
        wx = std::sin(p.theta);
        wy = std::cos(p.theta);
        break;
    case InitialPopulation::x: wx = 1.0; break;
    case InitialPopulation::y: wy = 1.0; break;
    }
    CMatrix rho = CMatrix::Zero(s.dim(), s.dim());
    rho(s.index({lx, 0}), s.index({lx, 0})) = wx / (wx + wy);
    rho(s.index({ly, 0}), s.index({ly, 0})) = wy / (wx + wy);

    return EmitterCavityModel{s,
                              h,
                              ch,
                              DensityOperator(s, rho),
                              a,
                              cav.kappa,
                              4,
                              p.base.gamma * (px + py) + cav.kappa * (a.adjoint() * a),
                              std::max({cav.g, cav.kappa, p.delta, p.gamma_star_xy, p.base.gamma,
                                        std::abs(cav.detuning)})};
}

/// Appends a single-mode filter cavity b driven by the model's output port
/// (cascaded-system coupling). The filter has total width f.kappa split evenly
/// between its input and transmitted output, so the transmitted power
/// spectrum is |h_f(w)|^2 times the source spectrum. The new emission port is
/// the transmitted output (rate f.kappa / 2).
inline EmitterCavityModel with_output_filter(const EmitterCavityModel& m, const FilterSpec& f, int filter_cutoff = 1)
{
    f.validate();
    if (filter_cutoff < 1) throw std::invalid_argument("with_output_filter: cutoff must be >= 1");
    std::vector<int> dims = m.space.dims();
    dims.push_back(filter_cutoff + 1);
    const HilbertSpace s(dims);
    const int nf = filter_cutoff + 1;
    const CMatrix idf = CMatrix::Identity(nf, nf);
    auto lift = [&](const Operator& o) {
        return Operator(s, Eigen::kroneckerProduct(o.matrix(), idf).eval());
    };
    const Operator b = Operator::annihilation(s, s.subsystems() - 1);
    const Operator a = lift(m.emission_operator);
    const double k = m.emission_rate;
    const double k1 = 0.5 * f.kappa;
    const double k2 = 0.5 * f.kappa;

    Operator h = lift(m.hamiltonian) + f.center * (b.adjoint() * b) +
                 cplx(0.0, 0.5 * std::sqrt(k * k1)) * (a.adjoint() * b - b.adjoint() * a);
    std::vector<CollapseChannel> ch;
    for (std::size_t i = 0; i < m.channels.size(); ++i) {
        if (i == m.emission_channel) continue;
        ch.emplace_back(m.channels[i].rate, lift(m.channels[i].op));
    }
    const Operator reflected = std::sqrt(k) * a + std::sqrt(k1) * b;
    ch.emplace_back(1.0, reflected);
    ch.emplace_back(k2, b);
    const std::size_t port = ch.size() - 1;

    CMatrix vac = CMatrix::Zero(nf, nf);
    vac(0, 0) = 1.0;
    const DensityOperator rho0(s, Eigen::kroneckerProduct(m.initial_state.matrix(), vac).eval());
    const Operator loss = lift(m.loss_operator) - k * (a.adjoint() * a) + reflected.adjoint() * reflected +
                          k2 * (b.adjoint() * b);
    return EmitterCavityModel{s,       h,    ch,  rho0, b, k2, port, loss,
                              std::max({m.rate_scale, f.kappa, std::abs(f.center)})};
}

struct SidebandComponent {
    double center = 0.0; ///< rad/s, offset from the ZPL
    double width = 0.0;  ///< FWHM, rad/s
    double weight = 0.0;
};

/// Incoherent phonon sideband as a sum of Lorentzians whose weights sum to
/// 1 - D_W.
struct SidebandModel {
    std::vector<SidebandComponent> components;

    double total_weight() const
    {
        double w = 0.0;
        for (const auto& c : components) w += c.weight;
        return w;
    }

    double debye_waller() const { return 1.0 - total_weight(); }

    void validate() const
    {
        for (const auto& c : components) {
            if (!(c.weight > 0.0) || !std::isfinite(c.weight))
                throw std::invalid_argument("SidebandModel: weights must be > 0");
            if (!(c.width > 0.0) || !std::isfinite(c.width))
                throw std::invalid_argument("SidebandModel: widths must be > 0");
            if (!std::isfinite(c.center)) throw std::invalid_argument("SidebandModel: centers must be finite");
        }
        const double w = total_weight();
        if (!(w < 1.0)) throw std::invalid_argument("SidebandModel: total weight must be < 1");
    }

    /// Rescales relative weights so they sum to 1 - debye_waller.
    static SidebandModel normalized(std::vector<SidebandComponent> comps, double debye_waller)
    {
        if (!(debye_waller > 0.0 && debye_waller <= 1.0))
            throw std::invalid_argument("SidebandModel: debye_waller must lie in (0, 1]");
        SidebandModel m{std::move(comps)};
        if (debye_waller == 1.0) {
            m.components.clear();
            return m;
        }
        const double w = m.total_weight();
        if (!(w > 0.0)) throw std::invalid_argument("SidebandModel: weights must be > 0");
        for (auto& c : m.components) c.weight *= (1.0 - debye_waller) / w;
        m.validate();
        return m;
    }
};

/// S0_SB(w) = sum_i w_i (G_i / 2pi) / ((w - w_i)^2 + (G_i / 2)^2), per rad/s.
inline double sideband_spectrum(const SidebandModel& m, double omega)
{
    double s = 0.0;
    for (const auto& c : m.components) {
        const double hw = 0.5 * c.width;
        const double x = omega - c.center;
        s += c.weight * (c.width / units::two_pi) / (x * x + hw * hw);
    }
    return s;
}

} // namespace cavqed
