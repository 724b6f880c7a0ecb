#include "qsteer/evolution.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qsteer {

ControlAxis ControlAxis::from_azimuth(double phi) { return {std::sin(phi), std::cos(phi)}; }

double ControlAxis::azimuth() const {
    double phi = std::atan2(cx, cy);
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    return phi;
}

void ControlAxis::validate() const {
    if (cx == 0.0 && cy == 0.0) throw std::invalid_argument("control axis must be non-zero");
    if (std::abs(cx * cx + cy * cy - 1.0) > 1e-12) {
        throw std::invalid_argument("control axis must satisfy cx^2 + cy^2 = 1");
    }
}

DensityMatrix evolve_adiabatic(const DensityMatrix& rho0, double g, double pulse_area) {
    rho0.validate();
    const double c = std::cos(pulse_area);
    const double s = std::sin(pulse_area);
    const double damp = std::exp(-g);
    const cplx i{0.0, 1.0};
    const cplx coh = rho0.r12 - rho0.r21;
    const cplx pop = rho0.r22 - rho0.r11;

    DensityMatrix out;
    out.r11 = rho0.r11 * c * c + rho0.r22 * s * s - i * coh * damp * c * s;
    out.r22 = rho0.r22 * c * c + rho0.r11 * s * s + i * coh * damp * c * s;
    out.r12 = rho0.r12 * damp * c * c + rho0.r21 * damp * s * s + i * pop * c * s;
    out.r21 = rho0.r21 * damp * c * c + rho0.r12 * damp * s * s - i * pop * c * s;
    return out;
}

DensityMatrix evolve_thermal(const DensityMatrix& rho0, double g, double pulse_area,
                             const ControlAxis& axis) {
    rho0.validate();
    const double a = 2.0 * axis.cx * pulse_area;
    const double b = 2.0 * axis.cy * pulse_area;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cb = std::cos(b), sb = std::sin(b);
    const double e1 = std::exp(-g);
    const double e2 = std::exp(-2.0 * g);
    const cplx i{0.0, 1.0};

    const double d = (rho0.r11 - rho0.r22).real();
    const double re12 = rho0.r12.real(), im12 = rho0.r12.imag();
    const double re21 = rho0.r21.real(), im21 = rho0.r21.imag();

    // Im{rho12(0)} enters the populations without a factor i and the
    // coherences with one; this is what conjugation by exp(i C_x I sigma_x)
    // produces at g = 0.
    const double pop_shift = 0.5 * d * e2 * ca * cb - re12 * e2 * ca * sb + im12 * e1 * sa;

    DensityMatrix out;
    out.r11 = 0.5 + pop_shift;
    out.r22 = 0.5 - pop_shift;
    out.r12 = (re12 * cb + i * im12 * ca) * e1 + i * re12 * sa * sb * e2 +
              0.5 * d * (e1 * sb - i * e2 * sa * cb);
    out.r21 = (re21 * cb + i * im21 * ca) * e1 - i * re21 * sa * sb * e2 +
              0.5 * d * (e1 * sb + i * e2 * sa * cb);
    return out;
}

DensityMatrix evolve(Regime regime, const DensityMatrix& rho0, double g, double pulse_area,
                     const ControlAxis& axis) {
    return regime == Regime::adiabatic ? evolve_adiabatic(rho0, g, pulse_area)
                                       : evolve_thermal(rho0, g, pulse_area, axis);
}

}  // namespace qsteer
