#include "qsteer/feedback.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace qsteer {

namespace {

// Row-major 2x2 complex matrix in the (|1>, |2>) basis.
struct Mat2 {
    std::array<cplx, 4> m{};

    cplx& operator()(int i, int j) { return m[2 * i + j]; }
    const cplx& operator()(int i, int j) const { return m[2 * i + j]; }
};

Mat2 operator*(const Mat2& a, const Mat2& b) {
    Mat2 r;
    r(0, 0) = a(0, 0) * b(0, 0) + a(0, 1) * b(1, 0);
    r(0, 1) = a(0, 0) * b(0, 1) + a(0, 1) * b(1, 1);
    r(1, 0) = a(1, 0) * b(0, 0) + a(1, 1) * b(1, 0);
    r(1, 1) = a(1, 0) * b(0, 1) + a(1, 1) * b(1, 1);
    return r;
}

Mat2 operator+(Mat2 a, const Mat2& b) {
    for (int k = 0; k < 4; ++k) a.m[k] += b.m[k];
    return a;
}

Mat2 operator-(Mat2 a, const Mat2& b) {
    for (int k = 0; k < 4; ++k) a.m[k] -= b.m[k];
    return a;
}

Mat2 operator*(cplx s, Mat2 a) {
    for (auto& v : a.m) v *= s;
    return a;
}

Mat2 adjoint(const Mat2& a) {
    Mat2 r;
    r(0, 0) = std::conj(a(0, 0));
    r(0, 1) = std::conj(a(1, 0));
    r(1, 0) = std::conj(a(0, 1));
    r(1, 1) = std::conj(a(1, 1));
    return r;
}

Mat2 identity() {
    Mat2 r;
    r(0, 0) = 1.0;
    r(1, 1) = 1.0;
    return r;
}

Mat2 to_mat(const DensityMatrix& rho) {
    Mat2 r;
    r(0, 0) = rho.r11;
    r(0, 1) = rho.r12;
    r(1, 0) = rho.r21;
    r(1, 1) = rho.r22;
    return r;
}

DensityMatrix to_rho(const Mat2& a) { return {a(0, 0), a(0, 1), a(1, 0), a(1, 1)}; }

// sigma = |1><2|
Mat2 lowering() {
    Mat2 r;
    r(0, 1) = 1.0;
    return r;
}

// sin(phi) sigma_x + cos(phi) sigma_y, sigma_y = i(sigma - sigma^dag)
Mat2 drive_operator(double phi) {
    Mat2 r;
    r(0, 1) = cplx{std::sin(phi), std::cos(phi)};
    r(1, 0) = cplx{std::sin(phi), -std::cos(phi)};
    return r;
}

Mat2 lindblad(const Mat2& a, const Mat2& rho) {
    const Mat2 ad = adjoint(a);
    const Mat2 ada = ad * a;
    return a * rho * ad - cplx{0.5, 0.0} * (ada * rho + rho * ada);
}

// Homodyne feedback with H_fb = I(t) lambda s_phi (F = lambda s_phi):
// -i[H + (c^dag F + F c)/2, rho] + D[c - iF] rho + D[c_und] rho, with c the detected
// channel (the record has unit-variance noise, so D[F] is already inside D[c - iF]).
Mat2 rhs(const Mat2& rho, const FeedbackConfig& cfg, bool with_feedback) {
    const cplx i{0.0, 1.0};
    const Mat2 s_phi = drive_operator(cfg.phi);
    Mat2 h = cplx{cfg.alpha, 0.0} * s_phi;
    if (!with_feedback || cfg.lambda == 0.0) {
        return (-i) * (h * rho - rho * h) + lindblad(cplx{std::sqrt(cfg.gamma), 0.0} * lowering(), rho);
    }
    const Mat2 c_det = std::polar(std::sqrt(cfg.eta * cfg.gamma), -cfg.phi) * lowering();
    const Mat2 c_und = cplx{std::sqrt((1.0 - cfg.eta) * cfg.gamma), 0.0} * lowering();
    const Mat2 f = cplx{cfg.lambda, 0.0} * s_phi;
    h = h + cplx{0.5, 0.0} * (adjoint(c_det) * f + f * c_det);
    const Mat2 out = (-i) * (h * rho - rho * h) + lindblad(c_det - i * f, rho) + lindblad(c_und, rho);
    return out;
}

double trace_error(const Mat2& rho) { return std::abs(rho(0, 0) + rho(1, 1) - 1.0); }

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x71u};
    return std::mt19937_64(seq);
}

std::size_t steps_for(double t, double dt) {
    return static_cast<std::size_t>(std::llround(t / dt));
}

}  // namespace

std::string_view to_string(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::single_conditioned: return "single_conditioned";
        case TrajectoryKind::ensemble_mean: return "ensemble_mean";
        case TrajectoryKind::master_equation: return "master_equation";
    }
    return "?";
}

void FeedbackConfig::validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
    if (!(delay >= 0.0)) throw std::invalid_argument("delay must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (dt > 1e-3 / gamma) throw std::invalid_argument("dt must be <= 1e-3 / gamma for SDE runs");
    if (!(master_dt > 0.0)) throw std::invalid_argument("master_dt must be > 0");
    if (!(sample_interval > 0.0)) throw std::invalid_argument("sample_interval must be > 0");
    if (n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
    if (!std::isfinite(alpha) || !std::isfinite(lambda) || !std::isfinite(phi)) {
        throw std::invalid_argument("alpha, lambda and phi must be finite");
    }
}

DensityMatrix master_rhs(const DensityMatrix& rho, const FeedbackConfig& cfg, bool with_feedback) {
    return to_rho(rhs(to_mat(rho), cfg, with_feedback));
}

TrajectoryRecord integrate_master(const DensityMatrix& rho0, const FeedbackConfig& cfg,
                                  double t_end, bool with_feedback) {
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be > 0");
    cfg.validate();
    rho0.validate();

    double dt = cfg.master_dt;
    for (int attempt = 0; attempt <= 6; ++attempt, dt *= 0.5) {
        const std::size_t n = steps_for(t_end, dt);
        const std::size_t stride = std::max<std::size_t>(1, steps_for(cfg.sample_interval, dt));
        TrajectoryRecord rec;
        rec.kind = TrajectoryKind::master_equation;
        Mat2 rho = to_mat(rho0);
        rec.times.push_back(0.0);
        rec.states.push_back(to_bloch(rho0));
        bool stable = true;
        const cplx h{dt, 0.0};
        for (std::size_t k = 1; k <= n; ++k) {
            const Mat2 k1 = rhs(rho, cfg, with_feedback);
            const Mat2 k2 = rhs(rho + cplx{0.5} * h * k1, cfg, with_feedback);
            const Mat2 k3 = rhs(rho + cplx{0.5} * h * k2, cfg, with_feedback);
            const Mat2 k4 = rhs(rho + h * k3, cfg, with_feedback);
            rho = rho + cplx{1.0 / 6.0} * h * (k1 + cplx{2.0} * k2 + cplx{2.0} * k3 + k4);
            // restore exact Hermiticity lost to rounding
            rho(0, 0) = rho(0, 0).real();
            rho(1, 1) = rho(1, 1).real();
            rho(1, 0) = std::conj(rho(0, 1));
            const DensityMatrix state = to_rho(rho);
            if (!(trace_error(rho) <= 1e-9) || !(state.min_eigenvalue() >= kPositivityTol)) {
                stable = false;
                break;
            }
            if (k % stride == 0 || k == n) {
                rec.times.push_back(static_cast<double>(k) * dt);
                rec.states.push_back(to_bloch(state));
            }
        }
        if (stable) return rec;
    }
    throw StepInstability("master equation integration unstable after 6 step halvings");
}

BlochVector stationary_solution(double alpha, double gamma, double phi) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    const double denom = gamma * gamma + 8.0 * alpha * alpha;
    const double a = 4.0 * alpha * gamma / denom;
    // The drive s_phi rotates about (sin phi, cos phi, 0); the fixed point
    // sits in the plane S_phi on the -x side of the drive for alpha > 0.
    return {-a * std::cos(phi), a * std::sin(phi), -gamma * gamma / denom};
}

FeedbackParams feedback_params_for_target(double theta, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    constexpr double half_pi = 0.5 * std::numbers::pi;
    const double t = wrap_angle(theta);
    if (std::abs(t - half_pi) <= 1e-6 || std::abs(t + half_pi) <= 1e-6) {
        throw DegenerateTarget(
            "equal-superposition targets (theta = +-pi/2) have degenerate drive and feedback");
    }
    return {0.25 * gamma * std::sin(theta) * std::cos(theta),
            -0.5 * std::sqrt(gamma) * (1.0 + std::cos(theta))};
}

ConditionedStep conditioned_step(const DensityMatrix& rho_in, const FeedbackConfig& cfg, double dt,
                                 double dW, std::optional<double> delayed_record) {
    const cplx i{0.0, 1.0};
    const Mat2 rho = to_mat(rho_in);
    const Mat2 s_phi = drive_operator(cfg.phi);
    // Local oscillator phase follows the control plane so the measured
    // quadrature is sigma_x at phi = 0.
    const Mat2 c_det = std::polar(std::sqrt(cfg.eta * cfg.gamma), -cfg.phi) * lowering();
    const Mat2 c_und = cplx{std::sqrt((1.0 - cfg.eta) * cfg.gamma), 0.0} * lowering();
    const Mat2 h = cplx{cfg.alpha, 0.0} * s_phi;

    const Mat2 cd_rho = c_det * rho;
    const double mean_current = 2.0 * (cd_rho(0, 0) + cd_rho(1, 1)).real();  // <c + c^dag>
    const double record = mean_current * dt + dW;

    const Mat2 decay = adjoint(c_det) * c_det + adjoint(c_und) * c_und;
    const Mat2 kraus = identity() - cplx{dt} * (i * h + cplx{0.5} * decay) + cplx{record} * c_det;
    Mat2 next = kraus * rho * adjoint(kraus) + cplx{dt} * (c_und * rho * adjoint(c_und));
    const double tr = (next(0, 0) + next(1, 1)).real();
    next = cplx{1.0 / tr} * next;

    const double u = cfg.lambda * delayed_record.value_or(record);
    if (u != 0.0) {
        const Mat2 v = cplx{std::cos(u)} * identity() - (i * std::sin(u)) * s_phi;
        next = v * next * adjoint(v);
    }
    next(0, 0) = next(0, 0).real();
    next(1, 1) = next(1, 1).real();
    next(1, 0) = std::conj(next(0, 1));
    return {to_rho(next), record, tr};
}

std::vector<double> wiener_increments(std::uint64_t seed, std::uint64_t trajectory_index,
                                      double dt, std::size_t n) {
    std::mt19937_64 rng = stream_for(seed, trajectory_index);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    std::vector<double> out(n);
    for (auto& v : out) v = normal(rng);
    return out;
}

namespace {

bool finite_state(const DensityMatrix& rho) {
    return std::isfinite(rho.r11.real()) && std::isfinite(rho.r22.real()) &&
           std::isfinite(rho.r12.real()) && std::isfinite(rho.r12.imag()) &&
           rho.min_eigenvalue() >= kPositivityTol;
}

// Returns false when the state blows up; the caller retries at dt / 2.
bool run_trajectory(const DensityMatrix& rho0, const FeedbackConfig& cfg, double dt,
                    double t_end, double sample_dt, std::uint64_t index, TrajectoryRecord& rec) {
    const std::size_t n = steps_for(t_end, dt);
    const std::size_t stride = std::max<std::size_t>(1, steps_for(sample_dt, dt));
    const std::size_t delay_steps = steps_for(cfg.delay, dt);

    std::mt19937_64 rng = stream_for(cfg.seed, index);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    std::vector<double> ring(delay_steps, 0.0);

    rec.kind = TrajectoryKind::single_conditioned;
    rec.times.assign(1, 0.0);
    rec.states.assign(1, to_bloch(rho0));
    DensityMatrix rho = rho0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double dW = normal(rng);
        std::optional<double> delayed;
        std::size_t slot = 0;
        if (delay_steps > 0) {
            slot = (k - 1) % delay_steps;
            // before the first delayed sample exists no feedback is applied
            delayed = k > delay_steps ? ring[slot] : 0.0;
        }
        const ConditionedStep step = conditioned_step(rho, cfg, dt, dW, delayed);
        if (!finite_state(step.state) || !(step.trace_before_normalisation > 0.0)) return false;
        if (delay_steps > 0) ring[slot] = step.record;
        rho = step.state;
        if (k % stride == 0 || k == n) {
            rec.times.push_back(static_cast<double>(k) * dt);
            rec.states.push_back(to_bloch(rho));
        }
    }
    return true;
}

}  // namespace

TrajectoryRecord simulate_trajectory(const DensityMatrix& rho0, const FeedbackConfig& cfg,
                                     double t_end, std::uint64_t trajectory_index) {
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be > 0");
    cfg.validate();
    rho0.validate();
    double dt = cfg.dt;
    TrajectoryRecord rec;
    for (int attempt = 0; attempt <= 6; ++attempt, dt *= 0.5) {
        if (run_trajectory(rho0, cfg, dt, t_end, cfg.sample_interval, trajectory_index, rec)) {
            return rec;
        }
    }
    throw StepInstability("conditioned trajectory unstable after 6 step halvings");
}

TrajectoryRecord ensemble_average(const FeedbackConfig& cfg, const DensityMatrix& rho0,
                                  double t_end) {
    cfg.validate();
    rho0.validate();
    constexpr std::size_t kChunk = 32;
    const std::size_t n_traj = cfg.n_traj;
    const std::size_t n_chunks = (n_traj + kChunk - 1) / kChunk;

    struct Sums {
        std::vector<double> times;
        std::vector<std::array<double, 6>> acc;  // sum x, y, z, x^2, y^2, z^2
    };
    std::vector<Sums> chunks(n_chunks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                Sums& s = chunks[c];
                const std::size_t end = std::min(n_traj, (c + 1) * kChunk);
                for (std::size_t t = c * kChunk; t < end; ++t) {
                    const TrajectoryRecord r = simulate_trajectory(rho0, cfg, t_end, t);
                    if (s.acc.empty()) {
                        s.times = r.times;
                        s.acc.assign(r.times.size(), {});
                    }
                    if (r.times.size() != s.times.size()) {
                        throw StepInstability("trajectory sample grids differ after step halving");
                    }
                    for (std::size_t k = 0; k < r.states.size(); ++k) {
                        const BlochVector& v = r.states[k];
                        auto& a = s.acc[k];
                        a[0] += v.x;
                        a[1] += v.y;
                        a[2] += v.z;
                        a[3] += v.x * v.x;
                        a[4] += v.y * v.y;
                        a[5] += v.z * v.z;
                    }
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_chunks;
                return;
            }
        }
    };
    const std::size_t n_threads =
        std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n_chunks, 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    TrajectoryRecord out;
    out.kind = TrajectoryKind::ensemble_mean;
    out.times = chunks.front().times;
    const std::size_t n_samples = out.times.size();
    std::vector<std::array<double, 6>> total(n_samples);
    for (const Sums& s : chunks) {
        if (s.acc.size() != n_samples) throw StepInstability("trajectory sample grids differ");
        for (std::size_t k = 0; k < n_samples; ++k) {
            for (int j = 0; j < 6; ++j) total[k][j] += s.acc[k][j];
        }
    }
    const double n = static_cast<double>(n_traj);
    out.states.resize(n_samples);
    out.stderr_.resize(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        std::array<double, 3> mean{}, se{};
        for (int j = 0; j < 3; ++j) {
            mean[j] = total[k][j] / n;
            if (n_traj > 1) {
                const double var = std::max(0.0, (total[k][j + 3] - n * mean[j] * mean[j]) / (n - 1.0));
                se[j] = std::sqrt(var / n);
            }
        }
        out.states[k] = {mean[0], mean[1], mean[2]};
        out.stderr_[k] = {se[0], se[1], se[2]};
    }
    return out;
}

std::optional<double> transition_time(const TrajectoryRecord& record, const PureStateAngle& target,
                                      double threshold) {
    if (record.empty()) throw std::invalid_argument("empty trajectory record");
    double prev_f = fidelity(record.states[0], target);
    if (prev_f >= threshold) return record.times[0];
    for (std::size_t k = 1; k < record.states.size(); ++k) {
        const double f = fidelity(record.states[k], target);
        if (f >= threshold) {
            const double w = (threshold - prev_f) / (f - prev_f);
            return record.times[k - 1] + w * (record.times[k] - record.times[k - 1]);
        }
        prev_f = f;
    }
    return std::nullopt;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec,
                          const PureStateAngle& target) {
    const bool ensemble = rec.kind == TrajectoryKind::ensemble_mean;
    os << "# units: time in 1/gamma; kind " << to_string(rec.kind) << '\n';
    os << "time,x,y,z,fidelity";
    if (ensemble) os << ",stderr_x,stderr_y,stderr_z";
    os << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
        const BlochVector& v = rec.states[k];
        os << rec.times[k] << ',' << v.x << ',' << v.y << ',' << v.z << ',' << fidelity(v, target);
        if (ensemble) {
            const BlochVector& e = rec.stderr_[k];
            os << ',' << e.x << ',' << e.y << ',' << e.z;
        }
        os << '\n';
    }
}

void write_feedback_summary(std::ostream& os, const TrajectoryRecord& rec,
                            const PureStateAngle& target) {
    const auto t0 = transition_time(rec, target);
    os << std::setprecision(17) << "t0=";
    if (t0) {
        os << *t0;
    } else {
        os << "none";
    }
    os << " final_fidelity=" << fidelity(rec.states.back(), target)
       << " final_purity=" << rec.states.back().radius() << '\n';
}

}  // namespace qsteer
