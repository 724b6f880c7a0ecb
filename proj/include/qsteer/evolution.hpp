// evolution.hpp
// First-order closed-form maps of the reduced density matrix for one
// accumulated pulse area I under a known decoherence value g. Both g and I
// are cumulative from the start of the current control cycle.

#pragma once

#include "qsteer/decoherence.hpp"
#include "qsteer/state.hpp"

namespace qsteer {

// Coefficients of sigma_x, sigma_y in the interaction-picture control
// Hamiltonian, normalised to cx^2 + cy^2 = 1. (cx, cy) = (sin phi, cos phi)
// rotates states within the plane S_phi.
struct ControlAxis {
    double cx = 0.0;
    double cy = 1.0;

    static ControlAxis sigma_x() { return {1.0, 0.0}; }
    static ControlAxis sigma_y() { return {0.0, 1.0}; }
    static ControlAxis from_azimuth(double phi);

    double azimuth() const;  // phi with (cx, cy) = (sin phi, cos phi), in [0, 2 pi)
    void validate() const;
};

// Phase decay under a sigma_x control (C_x = 1, C_y = 0).
DensityMatrix evolve_adiabatic(const DensityMatrix& rho0, double g, double pulse_area);

// Population relaxation under a control along `axis`; rotation arguments are
// 2 C_x I and 2 C_y I.
DensityMatrix evolve_thermal(const DensityMatrix& rho0, double g, double pulse_area,
                             const ControlAxis& axis);

// Dispatch on the regime. The adiabatic map ignores `axis` (it is sigma_x by
// construction); callers validate the pairing.
DensityMatrix evolve(Regime regime, const DensityMatrix& rho0, double g, double pulse_area,
                     const ControlAxis& axis);

}  // namespace qsteer
