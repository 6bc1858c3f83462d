#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "linalg.hpp"

namespace cavqed {

/// Lorentzian (single-mode Fabry-Perot) filter of full width kappa centred at
/// `center`, both in rad/s.
struct FilterSpec {
    double kappa = 0.0;
    double center = 0.0;

    FilterSpec() = default;
    FilterSpec(double k, double c = 0.0) : kappa(k), center(c) { validate(); }

    void validate() const
    {
        if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("FilterSpec: kappa must be > 0");
        if (!std::isfinite(center)) throw std::invalid_argument("FilterSpec: center must be finite");
    }

    /// h(w) = i(k/2) / (i(w - c) - k/2)
    cplx amplitude(double omega) const
    {
        const double hk = 0.5 * kappa;
        return cplx(0.0, hk) / cplx(-hk, omega - center);
    }

    /// |h(w)|^2 = (k/2)^2 / ((w - c)^2 + (k/2)^2)
    double transmission(double omega) const
    {
        const double hk = 0.5 * kappa;
        const double x = omega - center;
        return hk * hk / (x * x + hk * hk);
    }
};

/// Product of the power transmissions of a chain of filters.
inline double chain_transmission(const std::vector<FilterSpec>& chain, double omega)
{
    double t = 1.0;
    for (const auto& f : chain) t *= f.transmission(omega);
    return t;
}

} // namespace cavqed
