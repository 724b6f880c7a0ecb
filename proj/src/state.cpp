#include "qsteer/state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qsteer {

double BlochVector::radius() const { return std::sqrt(x * x + y * y + z * z); }

double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    if (a >= -pi && a <= pi) return a;
    a = std::remainder(a, 2.0 * pi);
    return a;
}

PureStateAngle PureStateAngle::normalized() const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double p = std::fmod(phi, two_pi);
    if (p < 0.0) p += two_pi;
    if (p >= two_pi) p = 0.0;
    return {wrap_angle(theta), p};
}

DensityMatrix DensityMatrix::ground() { return {{1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}; }

DensityMatrix DensityMatrix::excited() { return {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}; }

DensityMatrix DensityMatrix::maximally_mixed() {
    return {{0.5, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {0.5, 0.0}};
}

double DensityMatrix::min_eigenvalue() const {
    const double a = r11.real();
    const double d = r22.real();
    const cplx off = 0.5 * (r12 + std::conj(r21));
    const double half_gap = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(off));
    return 0.5 * (a + d) - half_gap;
}

void DensityMatrix::validate() const {
    std::ostringstream msg;
    const cplx tr = trace();
    if (std::abs(tr - 1.0) > kTraceTol) {
        msg << "trace " << tr.real() << "+" << tr.imag() << "i differs from 1";
        throw InvalidState(msg.str());
    }
    if (std::abs(r21 - std::conj(r12)) > kHermitianTol || std::abs(r11.imag()) > kHermitianTol ||
        std::abs(r22.imag()) > kHermitianTol) {
        throw InvalidState("density matrix is not Hermitian");
    }
    const double lmin = min_eigenvalue();
    if (lmin < kPositivityTol) {
        msg << "negative eigenvalue " << lmin;
        throw InvalidState(msg.str());
    }
}

bool DensityMatrix::is_valid() const {
    try {
        validate();
    } catch (const InvalidState&) {
        return false;
    }
    return true;
}

BlochVector to_bloch(const DensityMatrix& rho) {
    rho.validate();
    return {2.0 * rho.r12.real(), 2.0 * rho.r12.imag(), (rho.r22 - rho.r11).real()};
}

DensityMatrix from_bloch(const BlochVector& v) {
    if (v.radius() > 1.0 + kBlochRadiusTol) {
        std::ostringstream msg;
        msg << "Bloch radius " << v.radius() << " exceeds 1";
        throw InvalidState(msg.str());
    }
    const cplx r12{0.5 * v.x, 0.5 * v.y};
    return {{0.5 * (1.0 - v.z), 0.0}, r12, std::conj(r12), {0.5 * (1.0 + v.z), 0.0}};
}

BlochVector bloch_direction(const PureStateAngle& angle) {
    const double s = std::sin(angle.theta);
    return {s * std::cos(angle.phi), -s * std::sin(angle.phi), std::cos(angle.theta)};
}

DensityMatrix pure_state(const PureStateAngle& angle) {
    const double c = std::cos(0.5 * angle.theta);
    const double s = std::sin(0.5 * angle.theta);
    // amplitudes a1 = e^{-i phi} s on |1>, a2 = c on |2>
    const cplx a1 = std::polar(s, -angle.phi);
    const cplx a2{c, 0.0};
    const cplx r12 = a1 * std::conj(a2);
    return {{std::norm(a1), 0.0}, r12, std::conj(r12), {std::norm(a2), 0.0}};
}

double fidelity(const BlochVector& v, const PureStateAngle& target) {
    const BlochVector n = bloch_direction(target);
    return 0.5 * (1.0 + v.x * n.x + v.y * n.y + v.z * n.z);
}

double fidelity(const DensityMatrix& rho, const PureStateAngle& target) {
    const cplx a1 = std::polar(std::sin(0.5 * target.theta), -target.phi);
    const cplx a2{std::cos(0.5 * target.theta), 0.0};
    // <psi|rho|psi> with psi = (a1, a2)
    const cplx f = std::conj(a1) * (rho.r11 * a1 + rho.r12 * a2) +
                   std::conj(a2) * (rho.r21 * a1 + rho.r22 * a2);
    return f.real();
}

double purity(const DensityMatrix& rho) { return to_bloch(rho).radius(); }

}  // namespace qsteer
