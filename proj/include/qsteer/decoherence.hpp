// decoherence.hpp
// Adiabatic and thermal decoherence functions g(tau) of the spin-boson model
// after the boson modes are traced out, plus their tabulation on a uniform
// time grid.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qsteer {

enum class Regime { adiabatic, thermal };

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);

class QuadratureFailure : public std::runtime_error {
public:
    explicit QuadratureFailure(const std::string& what) : std::runtime_error(what) {}
};

// All frequencies in Rabi-normalised units.
struct SpectralConfig {
    double coupling_gamma = 1e-6;  // prefactor of both integrals (absorbs epsilon)
    double beta0 = 1.0;            // inverse temperature
    double omega_c = 5.0;          // exponential cutoff
    double omega_12 = 10.0;        // transition frequency (thermal only)
    double spectral_exponent = 1.0;  // s in G(omega) = omega^s exp(-omega/omega_c)

    void validate() const;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // absolute error estimate
    std::size_t evaluations = 0;
};

struct QuadratureOptions {
    double rel_tol = 1e-10;
    std::size_t max_panels = 400000;
};

// gamma * int_0^inf G(w) (1 - cos(w tau)) coth(beta0 w / 2) dw
QuadratureResult integrate_adiabatic(double tau, const SpectralConfig& cfg,
                                     const QuadratureOptions& opts = {});
// gamma * int_0^inf [1 - cos((w12 - w) tau)] / (w12 - w)^2 w^3 coth(beta0 w / 2)
//         exp(-w / omega_c) dw
QuadratureResult integrate_thermal(double tau, const SpectralConfig& cfg,
                                   const QuadratureOptions& opts = {});

double g_adiabatic(double tau, const SpectralConfig& cfg);
double g_thermal(double tau, const SpectralConfig& cfg);
double g_value(Regime regime, double tau, const SpectralConfig& cfg);

// Integrands without the coupling prefactor, exposed for independent checks.
double adiabatic_integrand(double w, double tau, const SpectralConfig& cfg);
double thermal_integrand(double w, double tau, const SpectralConfig& cfg);

// Upper integration limit; the exponential cutoff leaves < 1e-20 beyond it.
double omega_max(const SpectralConfig& cfg);

struct DecoherenceCurve {
    double dt = 0.0;
    std::vector<double> values;  // values[k] = g(k dt)

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t k) const { return values[k]; }
};

DecoherenceCurve tabulate(Regime regime, const SpectralConfig& cfg, double dt, std::size_t n);

// "tau,g" CSV, 17 significant digits. A leading '#' line names the units.
void write_curve_csv(std::ostream& os, const DecoherenceCurve& curve);

}  // namespace qsteer
