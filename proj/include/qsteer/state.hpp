// state.hpp
// Reduced qubit states: density matrix, Bloch vector, pure-state angles,
// and the fidelity/purity metrics shared by the open-loop and feedback code.
//
// Basis: |1> is the ground state (Bloch z = -1), |2> the excited state
// (z = +1). Matrix elements r_ij = <i|rho|j>. The Pauli operators form a
// right-handed set with sigma = |1><2| the lowering operator:
//   sigma_x = sigma + sigma^dag, sigma_y = i(sigma - sigma^dag),
//   sigma_z = |2><2| - |1><1|,
// so that rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2 gives
//   x = 2 Re r12,  y = 2 Im r12,  z = r22 - r11.

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace qsteer {

using cplx = std::complex<double>;

class InvalidState : public std::runtime_error {
public:
    explicit InvalidState(const std::string& what) : std::runtime_error(what) {}
};

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double radius() const;
};

// Pure state on the great circle of the plane S_phi, i.e. the plane
// x sin(phi) + y cos(phi) = 0 that contains the z axis. phi = 0 is the
// x-z plane, phi = pi/2 the y-z plane. theta is the polar angle from the
// excited state, so theta = 0 is |2> and theta = pi is |1>.
struct PureStateAngle {
    double theta = 0.0;
    double phi = 0.0;

    // theta wrapped into [-pi, pi], phi into [0, 2 pi).
    PureStateAngle normalized() const;
};

struct DensityMatrix {
    cplx r11{1.0, 0.0};
    cplx r12{0.0, 0.0};
    cplx r21{0.0, 0.0};
    cplx r22{0.0, 0.0};

    static DensityMatrix ground();
    static DensityMatrix excited();
    static DensityMatrix maximally_mixed();

    cplx trace() const { return r11 + r22; }

    // Smallest eigenvalue of the Hermitian part.
    double min_eigenvalue() const;

    // Throws InvalidState when trace, Hermiticity or positivity are violated
    // beyond the shared tolerances (1e-12, 1e-12, -1e-9).
    void validate() const;
    bool is_valid() const;
};

inline constexpr double kTraceTol = 1e-12;
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPositivityTol = -1e-9;
inline constexpr double kBlochRadiusTol = 1e-9;

BlochVector to_bloch(const DensityMatrix& rho);
DensityMatrix from_bloch(const BlochVector& v);

// Unit Bloch vector of the pure state |theta, phi>:
// (sin(theta) cos(phi), -sin(theta) sin(phi), cos(theta)).
BlochVector bloch_direction(const PureStateAngle& angle);

// |theta, phi> = cos(theta/2)|2> + e^{-i phi} sin(theta/2)|1>, global phase
// dropped.
DensityMatrix pure_state(const PureStateAngle& angle);

// <target|rho|target>.
double fidelity(const DensityMatrix& rho, const PureStateAngle& target);
double fidelity(const BlochVector& v, const PureStateAngle& target);

// Bloch radius; 1 for pure states, 0 for the maximally mixed state.
double purity(const DensityMatrix& rho);

double wrap_angle(double a);  // into [-pi, pi]

}  // namespace qsteer
