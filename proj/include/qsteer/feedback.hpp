// feedback.hpp
// Homodyne-mediated feedback on a spontaneously emitting two-level atom:
// master equation with and without feedback, its driven fixed points, the
// drive/feedback parameters that stabilise a pure target, and conditioned
// trajectories driven by Wiener noise. Time is in units of 1/gamma when
// gamma = 1.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qsteer/state.hpp"

namespace qsteer {

class DegenerateTarget : public std::invalid_argument {
public:
    explicit DegenerateTarget(const std::string& what) : std::invalid_argument(what) {}
};

class StepInstability : public std::runtime_error {
public:
    explicit StepInstability(const std::string& what) : std::runtime_error(what) {}
};

struct FeedbackConfig {
    double gamma = 1.0;   // decay rate
    double alpha = 0.0;   // drive strength
    double lambda = 0.0;  // feedback strength
    double eta = 1.0;     // detection efficiency
    double delay = 0.0;   // feedback delay
    double phi = 0.0;     // control-plane azimuth; rotates drive and feedback about z
    double dt = 1e-4;     // stochastic integrator step
    double master_dt = 1e-3;  // deterministic integrator step
    std::uint64_t seed = 1;
    std::size_t n_traj = 1;
    double sample_interval = 1e-2;  // spacing of recorded samples

    void validate() const;
};

// Drift of the master equation,
//   -i alpha [s_phi, rho] + D[sqrt(gamma) sigma] rho                  (no feedback)
//   -i alpha [s_phi, rho] + D[sqrt(gamma) sigma - i lambda s_phi] rho  (feedback)
// with s_phi = sin(phi) sigma_x + cos(phi) sigma_y and
// D[A]B = A B A^dag - {A^dag A, B} / 2. The returned matrix is a derivative,
// not a state, so it is not validated.
DensityMatrix master_rhs(const DensityMatrix& rho, const FeedbackConfig& cfg, bool with_feedback);

enum class TrajectoryKind { single_conditioned, ensemble_mean, master_equation };

std::string_view to_string(TrajectoryKind k);

struct TrajectoryRecord {
    TrajectoryKind kind = TrajectoryKind::master_equation;
    std::vector<double> times;
    std::vector<BlochVector> states;
    std::vector<BlochVector> stderr_;  // ensemble records only

    bool empty() const { return times.empty(); }
};

// Fixed-step RK4 at cfg.master_dt. Retries with half the step (at most 6 times) if
// the trace drifts by more than 1e-9 or an eigenvalue drops below -1e-9.
TrajectoryRecord integrate_master(const DensityMatrix& rho0, const FeedbackConfig& cfg,
                                  double t_end, bool with_feedback);

// Fixed point of the driven master equation without feedback.
BlochVector stationary_solution(double alpha, double gamma, double phi);

struct FeedbackParams {
    double alpha = 0.0;
    double lambda = 0.0;
};

// Drive and feedback strength that stabilise |theta> in the plane of the
// drive: alpha = gamma/4 sin(theta) cos(theta),
// lambda = -(sqrt(gamma)/2)(1 + cos(theta)). Throws DegenerateTarget within
// 1e-6 of theta = +-pi/2.
FeedbackParams feedback_params_for_target(double theta, double gamma);

struct ConditionedStep {
    DensityMatrix state;
    double record = 0.0;  // photocurrent increment dY = Delta I dt
    double trace_before_normalisation = 1.0;
};

// One Euler-Maruyama step of the conditioned state with Wiener increment dW.
// The feedback unitary exp(-i lambda u s_phi) uses u = dY of this step when
// `delayed_record` is empty, otherwise the supplied (delayed) value.
ConditionedStep conditioned_step(const DensityMatrix& rho, const FeedbackConfig& cfg, double dt,
                                 double dW, std::optional<double> delayed_record);

// One conditioned trajectory. The Wiener stream is derived from
// (cfg.seed, trajectory_index), so any subset of an ensemble can be
// regenerated independently.
TrajectoryRecord simulate_trajectory(const DensityMatrix& rho0, const FeedbackConfig& cfg,
                                     double t_end, std::uint64_t trajectory_index = 0);

// Mean Bloch vector and its standard error over cfg.n_traj trajectories.
// Trajectories run on all hardware threads; the reduction is a fixed-order
// fold, so the result does not depend on the thread count.
TrajectoryRecord ensemble_average(const FeedbackConfig& cfg, const DensityMatrix& rho0,
                                  double t_end);

// First time the fidelity reaches 0.99, linearly interpolated between the
// bracketing samples.
std::optional<double> transition_time(const TrajectoryRecord& record, const PureStateAngle& target,
                                      double threshold = 0.99);

// Raw Wiener increments of the stream used by simulate_trajectory.
std::vector<double> wiener_increments(std::uint64_t seed, std::uint64_t trajectory_index,
                                      double dt, std::size_t n);

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec,
                          const PureStateAngle& target);
void write_feedback_summary(std::ostream& os, const TrajectoryRecord& rec,
                            const PureStateAngle& target);

}  // namespace qsteer
