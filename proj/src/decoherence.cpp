#include "qsteer/decoherence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>

namespace qsteer {

std::string_view to_string(Regime r) { return r == Regime::adiabatic ? "adiabatic" : "thermal"; }

Regime regime_from_string(std::string_view s) {
    if (s == "adiabatic") return Regime::adiabatic;
    if (s == "thermal") return Regime::thermal;
    throw std::invalid_argument("unknown regime '" + std::string(s) + "' (adiabatic|thermal)");
}

void SpectralConfig::validate() const {
    if (!(coupling_gamma >= 0.0)) throw std::invalid_argument("coupling_gamma must be >= 0");
    if (!(beta0 > 0.0)) throw std::invalid_argument("beta0 must be > 0");
    if (!(omega_c > 0.0)) throw std::invalid_argument("omega_c must be > 0");
    if (!(omega_12 > 0.0)) throw std::invalid_argument("omega_12 must be > 0");
    if (!std::isfinite(spectral_exponent)) throw std::invalid_argument("spectral_exponent must be finite");
}

double omega_max(const SpectralConfig& cfg) { return 60.0 * cfg.omega_c; }

namespace {

constexpr double kSmallOmega = 1e-8;

// 2 sin^2(x/2) == 1 - cos(x) without cancellation
double one_minus_cos(double x) {
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s;
}

double coth(double x) { return 1.0 / std::tanh(x); }

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <typename F>
Panel gauss_kronrod(const F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(centre);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(centre - dx) + f(centre + dx);
        kronrod += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

template <typename F>
QuadratureResult adaptive(const F& f, std::vector<double> breaks, const QuadratureOptions& opts) {
    std::priority_queue<Panel> heap;
    double total = 0.0;
    double error = 0.0;
    std::size_t evals = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        Panel p = gauss_kronrod(f, breaks[i], breaks[i + 1]);
        evals += 15;
        total += p.value;
        error += p.error;
        heap.push(p);
    }
    while (error > opts.rel_tol * std::abs(total) && error > 1e-300) {
        if (heap.size() >= opts.max_panels) {
            std::ostringstream msg;
            msg << "adaptive quadrature exhausted " << opts.max_panels
                << " panels (estimate " << total << ", error " << error << ")";
            throw QuadratureFailure(msg.str());
        }
        const Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const Panel left = gauss_kronrod(f, worst.a, mid);
        const Panel right = gauss_kronrod(f, mid, worst.b);
        evals += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed the drift of the running update
    total = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    return {total, error, evals};
}

std::vector<double> initial_breaks(double tau, double upper, double extra_break) {
    // Panels no wider than one oscillation period of cos(w tau) and no wider
    // than the cutoff scale.
    double width = upper / 16.0;
    if (tau > 0.0) width = std::min(width, 2.0 * std::numbers::pi / tau);
    const auto n = static_cast<std::size_t>(std::ceil(upper / width));
    std::vector<double> breaks;
    breaks.reserve(n + 2);
    for (std::size_t i = 0; i <= n; ++i) breaks.push_back(upper * static_cast<double>(i) / n);
    if (extra_break > 0.0 && extra_break < upper) {
        breaks.push_back(extra_break);
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    }
    return breaks;
}

}  // namespace

double adiabatic_integrand(double w, double tau, const SpectralConfig& cfg) {
    const double s = cfg.spectral_exponent;
    if (w < kSmallOmega) {
        // (1 - cos w tau) coth(beta0 w / 2) -> w tau^2 / beta0 (1 + O(w^2))
        return std::pow(w, s) * w * tau * tau / cfg.beta0;
    }
    return std::pow(w, s) * std::exp(-w / cfg.omega_c) * one_minus_cos(w * tau) *
           coth(0.5 * cfg.beta0 * w);
}

double thermal_integrand(double w, double tau, const SpectralConfig& cfg) {
    const double u = cfg.omega_12 - w;
    double kernel;
    const double ut = u * tau;
    if (std::abs(ut) < 1e-4) {
        // [1 - cos(u tau)] / u^2 -> tau^2 / 2 (1 - (u tau)^2 / 12)
        kernel = 0.5 * tau * tau * (1.0 - ut * ut / 12.0);
    } else {
        kernel = one_minus_cos(ut) / (u * u);
    }
    if (w < kSmallOmega) {
        // w^3 coth(beta0 w / 2) -> 2 w^2 / beta0
        return kernel * 2.0 * w * w / cfg.beta0;
    }
    return kernel * w * w * w * coth(0.5 * cfg.beta0 * w) * std::exp(-w / cfg.omega_c);
}

QuadratureResult integrate_adiabatic(double tau, const SpectralConfig& cfg,
                                     const QuadratureOptions& opts) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    cfg.validate();
    if (tau == 0.0 || cfg.coupling_gamma == 0.0) return {};
    auto f = [&](double w) { return adiabatic_integrand(w, tau, cfg); };
    QuadratureResult r = adaptive(f, initial_breaks(tau, omega_max(cfg), 0.0), opts);
    r.value *= cfg.coupling_gamma;
    r.error *= cfg.coupling_gamma;
    return r;
}

QuadratureResult integrate_thermal(double tau, const SpectralConfig& cfg,
                                   const QuadratureOptions& opts) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    cfg.validate();
    if (tau == 0.0 || cfg.coupling_gamma == 0.0) return {};
    auto f = [&](double w) { return thermal_integrand(w, tau, cfg); };
    QuadratureResult r = adaptive(f, initial_breaks(tau, omega_max(cfg), cfg.omega_12), opts);
    r.value *= cfg.coupling_gamma;
    r.error *= cfg.coupling_gamma;
    return r;
}

double g_adiabatic(double tau, const SpectralConfig& cfg) {
    return integrate_adiabatic(tau, cfg).value;
}

double g_thermal(double tau, const SpectralConfig& cfg) { return integrate_thermal(tau, cfg).value; }

double g_value(Regime regime, double tau, const SpectralConfig& cfg) {
    return regime == Regime::adiabatic ? g_adiabatic(tau, cfg) : g_thermal(tau, cfg);
}

DecoherenceCurve tabulate(Regime regime, const SpectralConfig& cfg, double dt, std::size_t n) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (n < 1) throw std::invalid_argument("curve needs at least one point");
    DecoherenceCurve curve{dt, std::vector<double>(n, 0.0)};
    for (std::size_t k = 1; k < n; ++k) {
        curve.values[k] = std::max(0.0, g_value(regime, static_cast<double>(k) * dt, cfg));
    }
    return curve;
}

void write_curve_csv(std::ostream& os, const DecoherenceCurve& curve) {
    os << "# units: Rabi-normalised time tau = Omega_F t; g dimensionless\n";
    os << "tau,g\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < curve.size(); ++k) {
        os << static_cast<double>(k) * curve.dt << ',' << curve.values[k] << '\n';
    }
}

}  // namespace qsteer
