// controller.hpp
// Open-loop targeting: intermediate-state planning and the eight-step control
// cycle that solves one real transcendental equation per density-matrix
// component for a bounded pulse area.

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

#include "qsteer/decoherence.hpp"
#include "qsteer/evolution.hpp"
#include "qsteer/state.hpp"

namespace qsteer {

enum class Component { r11R, r11I, r12R, r12I, r21R, r21I, r22R, r22I };

inline constexpr std::array<Component, 8> kCycleOrder = {
    Component::r11R, Component::r11I, Component::r12R, Component::r12I,
    Component::r21R, Component::r21I, Component::r22R, Component::r22I};

std::string_view label(Component c);
double component_value(const DensityMatrix& rho, Component c);

enum class Interpolation { great_circle, chordal };
// Which way round the control great circle the intermediates advance.
enum class ArcDirection { shorter, positive, negative };

struct TargetingConfig {
    Regime regime = Regime::thermal;
    ControlAxis axis = ControlAxis::sigma_y();
    int n_intermediates = 100;
    int cycles_per_intermediate = 2;
    double i_max = 0.01;
    double dt = 1e-3;
    SpectralConfig spectral{};
    PureStateAngle initial{std::numbers::pi, 0.0};
    PureStateAngle target{0.0, 0.0};
    int hold_cycles = 100;  // maintenance cycles after the last intermediate
    double fidelity_threshold = 0.99;
    Interpolation interpolation = Interpolation::great_circle;
    ArcDirection direction = ArcDirection::shorter;

    void validate() const;
};

struct PlanOptions {
    double plane_phi = 0.0;  // azimuth of the control plane S_phi
    Interpolation interpolation = Interpolation::great_circle;
    ArcDirection direction = ArcDirection::shorter;
};

// n states ending exactly on `target`. Returns {target} when the endpoints
// coincide.
std::vector<DensityMatrix> plan_intermediates(const PureStateAngle& initial,
                                              const PureStateAngle& target, int n,
                                              const PlanOptions& opts = {});

// Signed in-plane angle of a pure state measured in S_phi: the state is
// (sin a cos phi, -sin a sin phi, cos a).
double in_plane_angle(const PureStateAngle& s, double plane_phi);

// Parameters of a single root solve.
struct StepProblem {
    Regime regime = Regime::thermal;
    ControlAxis axis = ControlAxis::sigma_y();
    double i_max = 0.01;
};

struct StepSolution {
    double pulse_area = 0.0;
    double residual = 0.0;
    bool fallback = false;  // no root in [-i_max, i_max]; |residual| minimised instead
};

inline constexpr int kScanProbes = 64;
inline constexpr double kRootTol = 1e-12;

// Finds I in [-i_max, i_max] with component(evolve(rho_cycle_start, g_now,
// i_accumulated + I)) == zeta, preferring the smallest |I|.
StepSolution solve_step(Component component, double zeta, const DensityMatrix& rho_cycle_start,
                        double g_now, double i_accumulated, const StepProblem& problem);

struct StepRecord {
    std::size_t step = 0;  // 1-based absolute step index
    double time = 0.0;
    std::size_t cycle = 0;
    std::size_t intermediate = 0;  // 1-based; 0 during maintenance
    Component component = Component::r11R;
    double pulse_area = 0.0;
    double residual = 0.0;
    bool fallback = false;
    double fidelity = 0.0;  // against the final target
    BlochVector bloch{};
};

struct CycleRecord {
    std::size_t cycle = 0;
    std::size_t intermediate = 0;
    double end_fidelity = 0.0;
};

struct ControlLog {
    std::vector<StepRecord> steps;
    std::vector<CycleRecord> cycles;
    double initial_fidelity = 0.0;
    double final_fidelity = 0.0;
    DensityMatrix final_state{};
    std::optional<std::size_t> transition_steps;
    std::size_t fallback_steps = 0;
    bool converged = false;

    // fidelity[0] is the initial state, fidelity[k] the state after step k.
    std::vector<double> fidelity_series() const;
};

struct CycleResult {
    DensityMatrix state;
    std::vector<StepRecord> steps;
};

// One eight-step cycle toward `zeta`; the k-th step sees g = curve[k].
// Step records carry absolute indices first_step + k and fidelity against
// `final_target`.
CycleResult run_cycle(const DensityMatrix& rho_cycle_start, const DensityMatrix& zeta,
                      const DecoherenceCurve& curve, const StepProblem& problem,
                      std::size_t first_step, double dt, const PureStateAngle& final_target);

// Curve covering one cycle (k = 0..8) for the configuration.
DecoherenceCurve cycle_curve(const TargetingConfig& cfg);

ControlLog run_targeting(const TargetingConfig& cfg);
// Same, starting from an arbitrary (possibly mixed) state.
ControlLog run_targeting(const TargetingConfig& cfg, const DensityMatrix& start,
                         const DecoherenceCurve& curve);

// Leg 1 then leg 2, leg 2 starting from leg 1's final state.
ControlLog run_composite(const TargetingConfig& leg1, const TargetingConfig& leg2);

// First index s with fidelity >= threshold on s..s+8 (clipped at the end).
std::optional<std::size_t> transition_index(const std::vector<double>& fidelity,
                                            double threshold);

void write_control_csv(std::ostream& os, const ControlLog& log);
void write_control_summary(std::ostream& os, const ControlLog& log);

}  // namespace qsteer
