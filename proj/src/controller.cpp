#include "qsteer/controller.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace qsteer {

std::string_view label(Component c) {
    switch (c) {
        case Component::r11R: return "11R";
        case Component::r11I: return "11I";
        case Component::r12R: return "12R";
        case Component::r12I: return "12I";
        case Component::r21R: return "21R";
        case Component::r21I: return "21I";
        case Component::r22R: return "22R";
        case Component::r22I: return "22I";
    }
    return "?";
}

double component_value(const DensityMatrix& rho, Component c) {
    switch (c) {
        case Component::r11R: return rho.r11.real();
        case Component::r11I: return rho.r11.imag();
        case Component::r12R: return rho.r12.real();
        case Component::r12I: return rho.r12.imag();
        case Component::r21R: return rho.r21.real();
        case Component::r21I: return rho.r21.imag();
        case Component::r22R: return rho.r22.real();
        case Component::r22I: return rho.r22.imag();
    }
    return 0.0;
}

void TargetingConfig::validate() const {
    if (n_intermediates < 1) throw std::invalid_argument("n_intermediates must be >= 1");
    if (cycles_per_intermediate < 1) throw std::invalid_argument("cycles_per_intermediate must be >= 1");
    if (!(i_max > 0.0)) throw std::invalid_argument("i_max must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (hold_cycles < 0) throw std::invalid_argument("hold_cycles must be >= 0");
    axis.validate();
    spectral.validate();
    if (regime == Regime::adiabatic && (std::abs(axis.cx - 1.0) > 1e-12 || axis.cy != 0.0)) {
        throw std::invalid_argument("the adiabatic regime is driven along sigma_x (axis x)");
    }
    const double plane = axis.azimuth();
    in_plane_angle(initial, plane);
    in_plane_angle(target, plane);
}

double in_plane_angle(const PureStateAngle& s, double plane_phi) {
    const BlochVector v = bloch_direction(s);
    const double normal = v.x * std::sin(plane_phi) + v.y * std::cos(plane_phi);
    if (std::abs(normal) > 1e-9) {
        throw std::invalid_argument(
            "state is not on the great circle of the control plane; use composite driving");
    }
    const double along = v.x * std::cos(plane_phi) - v.y * std::sin(plane_phi);
    return std::atan2(along, v.z);
}

std::vector<DensityMatrix> plan_intermediates(const PureStateAngle& initial,
                                              const PureStateAngle& target, int n,
                                              const PlanOptions& opts) {
    if (n < 1) throw std::invalid_argument("need at least one intermediate state");
    constexpr double pi = std::numbers::pi;
    const double a0 = in_plane_angle(initial, opts.plane_phi);
    const double a1 = in_plane_angle(target, opts.plane_phi);
    double delta = a1 - a0;
    switch (opts.direction) {
        case ArcDirection::shorter:
            if (delta > pi) delta -= 2.0 * pi;
            if (delta < -pi) delta += 2.0 * pi;
            break;
        case ArcDirection::positive:
            if (delta < 0.0) delta += 2.0 * pi;
            break;
        case ArcDirection::negative:
            if (delta > 0.0) delta -= 2.0 * pi;
            break;
    }
    const DensityMatrix end = pure_state(target);
    if (std::abs(delta) < 1e-14) return {end};

    std::vector<DensityMatrix> plan;
    plan.reserve(static_cast<std::size_t>(n));
    const BlochVector v0 = bloch_direction(initial);
    const BlochVector v1 = bloch_direction(target);
    for (int k = 1; k < n; ++k) {
        const double f = static_cast<double>(k) / n;
        if (opts.interpolation == Interpolation::great_circle) {
            plan.push_back(pure_state({a0 + f * delta, opts.plane_phi}));
        } else {
            plan.push_back(from_bloch({v0.x + f * (v1.x - v0.x), v0.y + f * (v1.y - v0.y),
                                       v0.z + f * (v1.z - v0.z)}));
        }
    }
    plan.push_back(end);
    return plan;
}

namespace {

constexpr double kZeroResidual = 1e-14;

template <typename F>
double bisect(const F& f, double lo, double hi, double flo) {
    while (hi - lo > kRootTol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

template <typename F>
double golden_min(const F& absf, double lo, double hi) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = absf(c), fd = absf(d);
    while (hi - lo > kRootTol) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = absf(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = absf(d);
        }
    }
    return 0.5 * (lo + hi);
}

// Orders candidates by |I|, positive first on ties.
bool closer_to_zero(double a, double b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return a > b;
}

}  // namespace

StepSolution solve_step(Component component, double zeta, const DensityMatrix& rho_cycle_start,
                        double g_now, double i_accumulated, const StepProblem& problem) {
    auto f = [&](double pulse) {
        const DensityMatrix rho =
            evolve(problem.regime, rho_cycle_start, g_now, i_accumulated + pulse, problem.axis);
        return component_value(rho, component) - zeta;
    };

    if (!(problem.i_max > 0.0)) {
        const double r = f(0.0);
        return {0.0, std::abs(r), std::abs(r) > kZeroResidual};
    }

    const double h = 2.0 * problem.i_max / kScanProbes;
    std::array<double, kScanProbes + 1> probe{};
    std::array<double, kScanProbes + 1> value{};
    for (int k = 0; k <= kScanProbes; ++k) {
        probe[k] = k == kScanProbes / 2 ? 0.0 : -problem.i_max + k * h;
        if (k == kScanProbes) probe[k] = problem.i_max;
        value[k] = f(probe[k]);
    }

    std::optional<double> best;
    auto offer = [&](double root) {
        if (!best || closer_to_zero(root, *best)) best = root;
    };
    for (int k = 0; k <= kScanProbes; ++k) {
        if (std::abs(value[k]) <= kZeroResidual) offer(probe[k]);
    }
    // Visit brackets nearest to zero first; a bracket cannot beat the current
    // best if both its ends are farther out.
    std::vector<int> brackets;
    for (int k = 0; k < kScanProbes; ++k) {
        if (std::abs(value[k]) > kZeroResidual && std::abs(value[k + 1]) > kZeroResidual &&
            (value[k] < 0.0) != (value[k + 1] < 0.0)) {
            brackets.push_back(k);
        }
    }
    std::sort(brackets.begin(), brackets.end(), [&](int a, int b) {
        return std::min(std::abs(probe[a]), std::abs(probe[a + 1])) <
               std::min(std::abs(probe[b]), std::abs(probe[b + 1]));
    });
    for (int k : brackets) {
        const double nearest = std::min(std::abs(probe[k]), std::abs(probe[k + 1]));
        if (best && nearest > std::abs(*best)) break;
        offer(bisect(f, probe[k], probe[k + 1], value[k]));
    }
    if (best) return {*best, std::abs(f(*best)), false};

    // No root in range: minimise |residual| around the best probe.
    int kbest = 0;
    for (int k = 1; k <= kScanProbes; ++k) {
        const double ak = std::abs(value[k]), ab = std::abs(value[kbest]);
        if (ak < ab || (ak == ab && closer_to_zero(probe[k], probe[kbest]))) kbest = k;
    }
    const double lo = probe[std::max(kbest - 1, 0)];
    const double hi = probe[std::min(kbest + 1, kScanProbes)];
    auto absf = [&](double x) { return std::abs(f(x)); };
    double pulse = golden_min(absf, lo, hi);
    double residual = absf(pulse);
    if (std::abs(value[kbest]) <= residual) {
        pulse = probe[kbest];
        residual = std::abs(value[kbest]);
    }
    return {pulse, residual, true};
}

std::vector<double> ControlLog::fidelity_series() const {
    std::vector<double> f;
    f.reserve(steps.size() + 1);
    f.push_back(initial_fidelity);
    for (const auto& s : steps) f.push_back(s.fidelity);
    return f;
}

CycleResult run_cycle(const DensityMatrix& rho_cycle_start, const DensityMatrix& zeta,
                      const DecoherenceCurve& curve, const StepProblem& problem,
                      std::size_t first_step, double dt, const PureStateAngle& final_target) {
    if (curve.size() < kCycleOrder.size() + 1) {
        throw std::invalid_argument("decoherence curve must cover the 8 steps of a cycle");
    }
    CycleResult out{rho_cycle_start, {}};
    out.steps.reserve(kCycleOrder.size());
    double accumulated = 0.0;
    for (std::size_t k = 1; k <= kCycleOrder.size(); ++k) {
        const Component comp = kCycleOrder[k - 1];
        const double g = curve[k];
        const StepSolution sol = solve_step(comp, component_value(zeta, comp), rho_cycle_start, g,
                                            accumulated, problem);
        accumulated += sol.pulse_area;
        out.state = evolve(problem.regime, rho_cycle_start, g, accumulated, problem.axis);

        StepRecord rec;
        rec.step = first_step + k - 1;
        rec.time = static_cast<double>(rec.step) * dt;
        rec.component = comp;
        rec.pulse_area = sol.pulse_area;
        rec.residual = sol.residual;
        rec.fallback = sol.fallback;
        rec.fidelity = fidelity(out.state, final_target);
        rec.bloch = to_bloch(out.state);
        out.steps.push_back(rec);
    }
    return out;
}

DecoherenceCurve cycle_curve(const TargetingConfig& cfg) {
    return tabulate(cfg.regime, cfg.spectral, cfg.dt, kCycleOrder.size() + 1);
}

std::optional<std::size_t> transition_index(const std::vector<double>& fidelity,
                                            double threshold) {
    const std::size_t window = kCycleOrder.size();
    std::size_t run = 0;  // length of the current run of values >= threshold
    for (std::size_t s = 0; s < fidelity.size(); ++s) {
        run = fidelity[s] >= threshold ? run + 1 : 0;
        const std::size_t start = s + 1 - run;
        if (run == window + 1 || (run > 0 && s + 1 == fidelity.size())) return start;
    }
    return std::nullopt;
}

namespace {

void finish(ControlLog& log, const DensityMatrix& state, double threshold) {
    log.final_state = state;
    log.final_fidelity = log.steps.empty() ? log.initial_fidelity : log.steps.back().fidelity;
    log.fallback_steps = static_cast<std::size_t>(
        std::count_if(log.steps.begin(), log.steps.end(), [](const StepRecord& s) { return s.fallback; }));
    log.transition_steps = transition_index(log.fidelity_series(), threshold);
    log.converged = log.final_fidelity >= threshold;
}

}  // namespace

ControlLog run_targeting(const TargetingConfig& cfg, const DensityMatrix& start,
                         const DecoherenceCurve& curve) {
    cfg.validate();
    start.validate();
    const StepProblem problem{cfg.regime, cfg.axis, cfg.i_max};
    const PlanOptions plan_opts{cfg.axis.azimuth(), cfg.interpolation, cfg.direction};
    const std::vector<DensityMatrix> plan =
        plan_intermediates(cfg.initial, cfg.target, cfg.n_intermediates, plan_opts);
    const DensityMatrix final_zeta = pure_state(cfg.target);

    ControlLog log;
    log.initial_fidelity = fidelity(start, cfg.target);
    const std::size_t total_cycles =
        plan.size() * static_cast<std::size_t>(cfg.cycles_per_intermediate) +
        static_cast<std::size_t>(cfg.hold_cycles);
    log.steps.reserve(total_cycles * kCycleOrder.size());
    log.cycles.reserve(total_cycles);

    DensityMatrix state = start;
    std::size_t cycle = 0;
    auto do_cycle = [&](const DensityMatrix& zeta, std::size_t intermediate) {
        ++cycle;
        CycleResult r = run_cycle(state, zeta, curve, problem, log.steps.size() + 1, cfg.dt, cfg.target);
        for (auto& s : r.steps) {
            s.cycle = cycle;
            s.intermediate = intermediate;
            log.steps.push_back(s);
        }
        state = r.state;
        log.cycles.push_back({cycle, intermediate, log.steps.back().fidelity});
    };

    for (std::size_t k = 0; k < plan.size(); ++k) {
        for (int c = 0; c < cfg.cycles_per_intermediate; ++c) do_cycle(plan[k], k + 1);
    }
    for (int c = 0; c < cfg.hold_cycles; ++c) do_cycle(final_zeta, 0);

    finish(log, state, cfg.fidelity_threshold);
    return log;
}

ControlLog run_targeting(const TargetingConfig& cfg) {
    cfg.validate();
    return run_targeting(cfg, pure_state(cfg.initial), cycle_curve(cfg));
}

ControlLog run_composite(const TargetingConfig& leg1, const TargetingConfig& leg2) {
    leg1.validate();
    leg2.validate();
    const BlochVector mid1 = bloch_direction(leg1.target);
    const BlochVector mid2 = bloch_direction(leg2.initial);
    if (std::abs(mid1.x - mid2.x) + std::abs(mid1.y - mid2.y) + std::abs(mid1.z - mid2.z) > 1e-9) {
        throw std::invalid_argument("leg 2 must start where leg 1 ends");
    }
    const ControlLog first = run_targeting(leg1);
    const ControlLog second = run_targeting(leg2, first.final_state, cycle_curve(leg2));

    ControlLog log;
    log.initial_fidelity = fidelity(pure_state(leg1.initial), leg2.target);
    log.steps.reserve(first.steps.size() + second.steps.size());
    for (StepRecord s : first.steps) {
        s.fidelity = fidelity(s.bloch, leg2.target);
        log.steps.push_back(s);
    }
    const std::size_t step_offset = first.steps.size();
    const std::size_t cycle_offset = first.cycles.size();
    const double time_offset = static_cast<double>(step_offset) * leg1.dt;
    for (StepRecord s : second.steps) {
        s.step += step_offset;
        s.cycle += cycle_offset;
        s.time = time_offset + static_cast<double>(s.step - step_offset) * leg2.dt;
        log.steps.push_back(s);
    }
    log.cycles = first.cycles;
    for (std::size_t i = 0; i < log.cycles.size(); ++i) {
        const std::size_t last = (i + 1) * kCycleOrder.size() - 1;
        log.cycles[i].end_fidelity = log.steps[last].fidelity;
    }
    for (CycleRecord c : second.cycles) {
        c.cycle += cycle_offset;
        log.cycles.push_back(c);
    }
    finish(log, second.final_state, leg2.fidelity_threshold);
    return log;
}

void write_control_csv(std::ostream& os, const ControlLog& log) {
    os << "# units: Rabi-normalised time tau = Omega_F t; pulse areas in radians\n";
    os << "step,time,cycle,intermediate,component,pulse_area,residual,fallback,fidelity,x,y,z\n";
    os << std::setprecision(17);
    for (const auto& s : log.steps) {
        os << s.step << ',' << s.time << ',' << s.cycle << ',' << s.intermediate << ','
           << label(s.component) << ',' << s.pulse_area << ',' << s.residual << ','
           << (s.fallback ? 1 : 0) << ',' << s.fidelity << ',' << s.bloch.x << ',' << s.bloch.y
           << ',' << s.bloch.z << '\n';
    }
}

void write_control_summary(std::ostream& os, const ControlLog& log) {
    os << std::setprecision(17) << "final_fidelity=" << log.final_fidelity << " transition_steps=";
    if (log.transition_steps) {
        os << *log.transition_steps;
    } else {
        os << "none";
    }
    os << " fallback_steps=" << log.fallback_steps << '\n';
}

}  // namespace qsteer
