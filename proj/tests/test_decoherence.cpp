#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qsteer/decoherence.hpp"

using namespace qsteer;

namespace {

// Brute-force trapezoid rule on [0, 60 omega_c] with 10^6 panels. The
// integrands are written out again here rather than taken from the library.
double trapezoid_adiabatic(double tau, const SpectralConfig& c) {
    const double top = 60.0 * c.omega_c;
    const int n = 1000000;
    const double h = top / n;
    double sum = 0.0;  // f(0) = 0
    for (int k = 1; k <= n; ++k) {
        const double w = k * h;
        const double f = std::pow(w, c.spectral_exponent) * std::exp(-w / c.omega_c) *
                         (1.0 - std::cos(w * tau)) / std::tanh(c.beta0 * w / 2.0);
        sum += (k == n ? 0.5 : 1.0) * f;
    }
    return c.coupling_gamma * h * sum;
}

double trapezoid_thermal(double tau, const SpectralConfig& c) {
    const double top = 60.0 * c.omega_c;
    const int n = 1000000;
    const double h = top / n;
    double sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        const double w = k * h;
        const double u = c.omega_12 - w;
        // series limit of (1 - cos(u tau)) / u^2 near the removable point
        const double kernel = std::abs(u * tau) < 1e-4
                                  ? tau * tau / 2.0 * (1.0 - u * u * tau * tau / 12.0)
                                  : (1.0 - std::cos(u * tau)) / (u * u);
        const double f = kernel * w * w * w / std::tanh(c.beta0 * w / 2.0) * std::exp(-w / c.omega_c);
        sum += (k == n ? 0.5 : 1.0) * f;
    }
    return c.coupling_gamma * h * sum;
}

SpectralConfig adiabatic_case() {
    SpectralConfig c;
    c.coupling_gamma = 0.25;
    c.beta0 = 1.0;
    c.omega_c = 5.0;
    return c;
}

SpectralConfig thermal_case() {
    SpectralConfig c;
    c.coupling_gamma = 0.01;
    c.beta0 = 1.0;
    c.omega_12 = 10.0;
    c.omega_c = 5.0;
    return c;
}

}  // namespace

TEST_CASE("g vanishes at tau = 0 and for zero coupling") {
    SpectralConfig c;
    CHECK(g_adiabatic(0.0, c) == 0.0);
    CHECK(g_thermal(0.0, c) == 0.0);
    c.coupling_gamma = 0.0;
    CHECK(g_adiabatic(1.3, c) == 0.0);
    CHECK(g_thermal(1.3, c) == 0.0);
}

TEST_CASE("adiabatic value against the trapezoid oracle") {
    const SpectralConfig c = adiabatic_case();
    const double oracle = trapezoid_adiabatic(1.0, c);
    const double got = g_adiabatic(1.0, c);
    CHECK(std::abs(got - oracle) / oracle < 1e-6);
    // 30-digit reference (independent adaptive quadrature, frozen)
    CHECK(std::abs(got - 6.850344521186807151) / 6.850344521186807151 < 1e-9);
}

TEST_CASE("thermal value against the trapezoid oracle") {
    const SpectralConfig c = thermal_case();
    const double oracle = trapezoid_thermal(0.5, c);
    const double got = g_thermal(0.5, c);
    CHECK(std::abs(got - oracle) / oracle < 1e-6);
    CHECK(std::abs(got - 1.7053166747563355882) / 1.7053166747563355882 < 1e-9);
}

TEST_CASE("default curve at the end of one cycle") {
    // reference values for dt = 1e-3, eight steps, default spectral settings
    const SpectralConfig c;
    CHECK(std::abs(g_thermal(0.008, c) / 1.2007983576366057514e-7 - 1.0) < 1e-9);
    CHECK(std::abs(g_adiabatic(0.008, c) / 1.1988838087284423945e-7 - 1.0) < 1e-9);
}

TEST_CASE("thermal integrand at the removable singularity") {
    const SpectralConfig c = thermal_case();
    const double tau = 0.7;
    const double at = thermal_integrand(c.omega_12, tau, c);
    const double w = c.omega_12;
    const double limit = tau * tau / 2.0 * w * w * w / std::tanh(c.beta0 * w / 2.0) * std::exp(-w / c.omega_c);
    CHECK(at == doctest::Approx(limit).epsilon(1e-12));
    CHECK(thermal_integrand(c.omega_12 + 1e-9, tau, c) == doctest::Approx(limit).epsilon(1e-9));
    CHECK(std::isfinite(adiabatic_integrand(1e-12, tau, c)));
    CHECK(adiabatic_integrand(0.0, tau, c) == 0.0);
}

TEST_CASE("non-negativity and temperature ordering over random draws") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        SpectralConfig c;
        c.coupling_gamma = 0.01 + u(rng);
        c.beta0 = 0.2 + 3.0 * u(rng);
        c.omega_c = 1.0 + 9.0 * u(rng);
        c.omega_12 = 1.0 + 19.0 * u(rng);
        const double tau = 5.0 * u(rng);
        const double ga = g_adiabatic(tau, c);
        const double gt = g_thermal(tau, c);
        CHECK(ga >= 0.0);
        CHECK(gt >= 0.0);
        SpectralConfig cold = c;
        cold.beta0 *= 10.0;
        if (tau > 0.0) CHECK(g_thermal(tau, cold) < gt);
    }
}

TEST_CASE("tightening the tolerance stays inside the error estimate") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        SpectralConfig c;
        c.coupling_gamma = 0.5 * u(rng) + 0.01;
        c.beta0 = 0.5 + 2.0 * u(rng);
        c.omega_c = 2.0 + 6.0 * u(rng);
        c.omega_12 = 2.0 + 10.0 * u(rng);
        const double tau = 0.05 + 3.0 * u(rng);
        QuadratureOptions loose;
        loose.rel_tol = 1e-8;
        QuadratureOptions tight;
        tight.rel_tol = 0.5e-8;
        for (bool thermal : {false, true}) {
            const QuadratureResult a = thermal ? integrate_thermal(tau, c, loose) : integrate_adiabatic(tau, c, loose);
            const QuadratureResult b = thermal ? integrate_thermal(tau, c, tight) : integrate_adiabatic(tau, c, tight);
            CHECK(std::abs(a.value - b.value) <= a.error + 1e-300);
            CHECK(a.error <= 1e-8 * std::abs(a.value) + 1e-300);
        }
    }
}

TEST_CASE("evaluation budget exhaustion is reported") {
    QuadratureOptions tiny;
    tiny.max_panels = 2;
    tiny.rel_tol = 1e-15;
    CHECK_THROWS_AS(integrate_thermal(50.0, thermal_case(), tiny), QuadratureFailure);
}

TEST_CASE("tabulation") {
    const SpectralConfig c = thermal_case();
    const DecoherenceCurve one = tabulate(Regime::thermal, c, 0.1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == 0.0);

    const DecoherenceCurve curve = tabulate(Regime::adiabatic, c, 0.1, 10);
    REQUIRE(curve.size() == 10);
    for (std::size_t k = 0; k < curve.size(); ++k) {
        CHECK(curve[k] == g_adiabatic(0.1 * static_cast<double>(k), c));
        CHECK(curve[k] >= 0.0);
    }
    CHECK_THROWS(tabulate(Regime::thermal, c, 0.0, 3));
    CHECK_THROWS(tabulate(Regime::thermal, c, 0.1, 0));
}

TEST_CASE("curve CSV") {
    std::ostringstream os;
    write_curve_csv(os, tabulate(Regime::thermal, SpectralConfig{}, 1e-3, 1));
    std::string first, header, row;
    std::istringstream is(os.str());
    std::getline(is, first);
    std::getline(is, header);
    std::getline(is, row);
    CHECK(first.rfind("# units", 0) == 0);
    CHECK(header == "tau,g");
    CHECK(row == "0,0");
}

TEST_CASE("regime names") {
    CHECK(regime_from_string("adiabatic") == Regime::adiabatic);
    CHECK(to_string(Regime::thermal) == "thermal");
    CHECK_THROWS(regime_from_string("hot"));
}

TEST_CASE("spectral validation") {
    SpectralConfig c;
    c.beta0 = 0.0;
    CHECK_THROWS(c.validate());
    c = SpectralConfig{};
    c.coupling_gamma = -1.0;
    CHECK_THROWS(c.validate());
}
