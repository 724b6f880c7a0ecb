#include "qsteer/runner.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace qsteer {

namespace fs = std::filesystem;

fs::path default_output_dir(Mode mode, std::optional<std::string> env_root) {
    const fs::path root = env_root && !env_root->empty() ? fs::path(*env_root) : fs::path("qsteer_out");
    return root / std::string(to_string(mode));
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

template <typename F>
void write_stream(const fs::path& path, F&& body) {
    std::ostringstream os;
    body(os);
    write_file(path, os.str());
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Collects unmet thresholds.
struct Checks {
    std::string failures;

    void require(bool ok, const std::string& what) {
        if (!ok) failures += (failures.empty() ? "" : "; ") + what;
    }
};

void check_open_loop(Checks& c, const ControlLog& log, double threshold, const Requirements& req,
                     const std::string& tag) {
    c.require(log.converged, tag + "final fidelity " + fmt(log.final_fidelity) + " < " + fmt(threshold));
    if (req.final_fidelity) {
        c.require(log.final_fidelity >= *req.final_fidelity,
                  tag + "final fidelity below require.final_fidelity");
    }
    if (req.max_transition) {
        c.require(log.transition_steps && static_cast<double>(*log.transition_steps) <= *req.max_transition,
                  tag + "transition slower than require.max_transition steps");
    }
}

void check_feedback(Checks& c, const TrajectoryRecord& rec, const PureStateAngle& target,
                    const Requirements& req, const std::string& tag) {
    const double f = fidelity(rec.states.back(), target);
    const double p = rec.states.back().radius();
    if (req.final_fidelity) c.require(f >= *req.final_fidelity, tag + "final fidelity below require.final_fidelity");
    if (req.min_purity) c.require(p >= *req.min_purity, tag + "final purity below require.min_purity");
    if (req.max_transition) {
        const auto t0 = transition_time(rec, target);
        c.require(t0 && *t0 <= *req.max_transition, tag + "transition slower than require.max_transition");
    }
}

TrajectoryRecord run_feedback_record(const FeedbackRun& f) {
    const FeedbackConfig cfg = f.effective();
    const DensityMatrix rho0 = pure_state(f.initial());
    switch (f.kind) {
        case FeedbackRunKind::trajectory: return simulate_trajectory(rho0, cfg, f.t_end, 0);
        case FeedbackRunKind::ensemble: return ensemble_average(cfg, rho0, f.t_end);
        case FeedbackRunKind::master: return integrate_master(rho0, cfg, f.t_end, f.with_feedback);
    }
    throw std::logic_error("unreachable");
}

std::string execute(const RunSpec& spec, Checks& checks) {
    const fs::path& out = spec.out_dir;
    std::ostringstream summary;
    summary << std::setprecision(17);
    switch (spec.mode) {
        case Mode::decoherence: {
            const DecoherenceRun& d = spec.decoherence;
            const DecoherenceCurve curve = tabulate(d.regime, d.spectral, d.dt, d.n_samples);
            write_stream(out / "decoherence.csv", [&](std::ostream& os) { write_curve_csv(os, curve); });
            summary << "regime=" << to_string(d.regime) << " samples=" << curve.size()
                    << " g_last=" << curve.values.back() << '\n';
            break;
        }
        case Mode::target: {
            const ControlLog log = run_targeting(spec.targeting);
            write_stream(out / "control.csv", [&](std::ostream& os) { write_control_csv(os, log); });
            write_control_summary(summary, log);
            check_open_loop(checks, log, spec.targeting.fidelity_threshold, spec.require, "");
            break;
        }
        case Mode::composite: {
            const ControlLog log = run_composite(spec.leg1, spec.leg2);
            write_stream(out / "control.csv", [&](std::ostream& os) { write_control_csv(os, log); });
            write_control_summary(summary, log);
            check_open_loop(checks, log, spec.leg2.fidelity_threshold, spec.require, "");
            break;
        }
        case Mode::feedback: {
            const TrajectoryRecord rec = run_feedback_record(spec.feedback);
            const PureStateAngle target = spec.feedback.target();
            write_stream(out / "trajectory.csv",
                         [&](std::ostream& os) { write_trajectory_csv(os, rec, target); });
            write_feedback_summary(summary, rec, target);
            check_feedback(checks, rec, target, spec.require, "");
            break;
        }
        case Mode::compare: {
            const ControlLog log = run_targeting(spec.targeting);
            const TrajectoryRecord rec = run_feedback_record(spec.feedback);
            const PureStateAngle target = spec.feedback.target();
            write_stream(out / "openloop.csv", [&](std::ostream& os) { write_control_csv(os, log); });
            write_stream(out / "feedback.csv",
                         [&](std::ostream& os) { write_trajectory_csv(os, rec, target); });
            const auto t0 = transition_time(rec, target);
            summary << "scheme=open_loop units=steps t0=";
            if (log.transition_steps) {
                summary << *log.transition_steps;
            } else {
                summary << "none";
            }
            summary << " t0_time=";
            if (log.transition_steps) {
                summary << static_cast<double>(*log.transition_steps) * spec.targeting.dt;
            } else {
                summary << "none";
            }
            summary << " final_fidelity=" << log.final_fidelity << '\n';
            summary << "scheme=feedback units=1/gamma t0=";
            if (t0) {
                summary << *t0;
            } else {
                summary << "none";
            }
            summary << " final_fidelity=" << fidelity(rec.states.back(), target)
                    << " final_purity=" << rec.states.back().radius() << '\n';
            check_open_loop(checks, log, spec.targeting.fidelity_threshold, Requirements{}, "open_loop: ");
            checks.require(t0.has_value(), "feedback: fidelity 0.99 never reached");
            check_feedback(checks, rec, target, spec.require, "feedback: ");
            if (spec.require.max_transition) {
                checks.require(log.transition_steps &&
                                   static_cast<double>(*log.transition_steps) <= *spec.require.max_transition,
                               "open_loop: transition slower than require.max_transition steps");
            }
            break;
        }
    }
    return summary.str();
}

}  // namespace

RunOutcome run(const RunSpec& spec) {
    const fs::path& out = spec.out_dir;
    fs::create_directories(out);
    fs::remove(out / "FAILED");
    write_file(out / "resolved_config", spec.resolved);

    RunOutcome outcome;
    Checks checks;
    try {
        outcome.message = execute(spec, checks);
        write_file(out / "summary.txt", outcome.message);
    } catch (const QuadratureFailure& e) {
        outcome = {kExitNumerical, std::string("quadrature failure: ") + e.what()};
    } catch (const StepInstability& e) {
        outcome = {kExitNumerical, std::string("step instability: ") + e.what()};
    } catch (const InvalidState& e) {
        outcome = {kExitNumerical, std::string("invalid state: ") + e.what()};
    } catch (const std::invalid_argument& e) {
        outcome = {kExitConfig, std::string("invalid configuration: ") + e.what()};
    }
    if (outcome.exit_code == kExitOk && !checks.failures.empty()) {
        outcome.exit_code = kExitThreshold;
        outcome.message += "not met: " + checks.failures + '\n';
    }
    if (outcome.exit_code != kExitOk) write_file(out / "FAILED", outcome.message + '\n');
    return outcome;
}

}  // namespace qsteer
