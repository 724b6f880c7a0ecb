#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qsteer/controller.hpp"

using namespace qsteer;
using std::numbers::pi;

namespace {

struct ScanResult {
    std::optional<double> smallest_root;  // located to within one grid cell
    double min_abs_residual = 0.0;
};

// Dense uniform scan with 10^5 points of the residual on [-i_max, i_max].
template <typename F>
ScanResult grid_scan(const F& f, double i_max) {
    const int n = 100000;
    ScanResult out;
    out.min_abs_residual = std::abs(f(-i_max));
    double prev_x = -i_max, prev_f = f(-i_max);
    for (int k = 1; k <= n; ++k) {
        const double x = -i_max + 2.0 * i_max * k / n;
        const double fx = f(x);
        out.min_abs_residual = std::min(out.min_abs_residual, std::abs(fx));
        if (fx == 0.0 || (fx < 0.0) != (prev_f < 0.0)) {
            const double root = fx == 0.0 ? x : 0.5 * (x + prev_x);
            if (!out.smallest_root || std::abs(root) < std::abs(*out.smallest_root)) out.smallest_root = root;
        }
        prev_x = x;
        prev_f = fx;
    }
    return out;
}

TargetingConfig reference_drive() {
    TargetingConfig c;  // defaults: thermal, sigma_y, 100 x 2, i_max 0.01, ground -> excited
    return c;
}

}  // namespace

TEST_CASE("component labels and order") {
    std::string joined;
    for (Component c : kCycleOrder) joined += std::string(label(c)) + " ";
    CHECK(joined == "11R 11I 12R 12I 21R 21I 22R 22I ");
    const DensityMatrix r{0.25, {0.1, 0.2}, {0.1, -0.2}, 0.75};
    CHECK(component_value(r, Component::r12I) == 0.2);
    CHECK(component_value(r, Component::r21I) == -0.2);
    CHECK(component_value(r, Component::r22R) == 0.75);
}

TEST_CASE("plan_intermediates") {
    const auto one = plan_intermediates({pi, 0}, {0, 0}, 1);
    REQUIRE(one.size() == 1);
    CHECK(fidelity(one[0], {0, 0}) == doctest::Approx(1.0));

    const auto four = plan_intermediates({pi, 0}, {0, 0}, 4);
    REQUIRE(four.size() == 4);
    const double expected[] = {3 * pi / 4, pi / 2, pi / 4, 0};
    for (int k = 0; k < 4; ++k) {
        CHECK(fidelity(four[k], {expected[k], 0.0}) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(purity(four[k]) == doctest::Approx(1.0));
    }
    CHECK(four.back().r22.real() == 1.0);

    const auto six = plan_intermediates({pi, pi / 2}, {pi / 2, pi / 2}, 6, {pi / 2});
    REQUIRE(six.size() == 6);
    for (int k = 0; k < 6; ++k) {
        CHECK(fidelity(six[k], {pi - (k + 1) * pi / 12, pi / 2}) == doctest::Approx(1.0).epsilon(1e-14));
    }

    const auto same = plan_intermediates({0.3, 0}, {0.3, 0}, 5);
    CHECK(same.size() == 1);

    // explicit direction: the long way round from ground to excited through -x
    PlanOptions neg;
    neg.direction = ArcDirection::positive;
    const auto around = plan_intermediates({pi, 0}, {0, 0}, 4, neg);
    CHECK(to_bloch(around[1]).x == doctest::Approx(-1.0));

    CHECK_THROWS(plan_intermediates({pi / 2, pi / 2}, {0, 0}, 3));  // off the x-z great circle
    CHECK_THROWS(plan_intermediates({pi, 0}, {0, 0}, 0));
}

TEST_CASE("solve_step examples") {
    const StepProblem p{Regime::thermal, ControlAxis::sigma_y(), 0.1};
    const DensityMatrix ground = DensityMatrix::ground();
    const double zeta = std::cos(0.05) * std::cos(0.05);
    const StepSolution s = solve_step(Component::r11R, zeta, ground, 0.0, 0.0, p);
    CHECK(std::abs(s.pulse_area) == doctest::Approx(0.05).epsilon(1e-10));  // +-0.05 both solve cos^2 I = zeta
    CHECK(s.residual <= 1e-10);
    CHECK_FALSE(s.fallback);

    // already there: I = 0
    const StepSolution z = solve_step(Component::r11R, 1.0, ground, 0.0, 0.0, p);
    CHECK(z.pulse_area == 0.0);
    CHECK_FALSE(z.fallback);

    // unreachable: needs I = 0.5 > i_max, so the endpoint minimises the residual
    const double far = std::cos(0.5) * std::cos(0.5);
    const StepSolution e = solve_step(Component::r11R, far, ground, 0.0, 0.0, p);
    CHECK(e.fallback);
    CHECK(std::abs(e.pulse_area) == doctest::Approx(0.1).epsilon(1e-9));
    auto f = [&](double x) { return component_value(evolve_thermal(ground, 0.0, x, p.axis), Component::r11R) - far; };
    CHECK(e.residual <= grid_scan(f, 0.1).min_abs_residual + 1e-12);
}

TEST_CASE("solve_step against the grid-scan oracle") {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int rooted = 0, fallback = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const bool thermal = trial % 2 == 0;
        StepProblem p{thermal ? Regime::thermal : Regime::adiabatic,
                      thermal ? ControlAxis::sigma_y() : ControlAxis::sigma_x(), 0.02 + 0.2 * u(rng)};
        const DensityMatrix start =
            from_bloch({0.9 * (u(rng) - 0.5), 0.9 * (u(rng) - 0.5), 0.9 * (u(rng) - 0.5)});
        const Component comp = kCycleOrder[trial % 8];
        const double g = 0.01 * u(rng);
        const double acc = 0.05 * (u(rng) - 0.5);
        const double zeta = component_value(
            evolve(p.regime, start, g, acc + (2 * u(rng) - 1) * 0.3, p.axis), comp);
        auto f = [&](double x) { return component_value(evolve(p.regime, start, g, acc + x, p.axis), comp) - zeta; };
        const ScanResult oracle = grid_scan(f, p.i_max);
        const StepSolution s = solve_step(comp, zeta, start, g, acc, p);
        CHECK(std::abs(s.pulse_area) <= p.i_max);
        if (!s.fallback) {
            ++rooted;
            CHECK(s.residual <= 1e-10);
            if (oracle.smallest_root) {
                CHECK(std::abs(s.pulse_area) <= std::abs(*oracle.smallest_root) + 2.0 * p.i_max / 1e5 + 1e-9);
            }
        } else {
            ++fallback;
            CHECK_FALSE(oracle.smallest_root.has_value());
            CHECK(s.residual <= oracle.min_abs_residual + 1e-12);
        }
    }
    CHECK(rooted > 0);
    CHECK(fallback > 0);
}

TEST_CASE("run_cycle") {
    const TargetingConfig c = reference_drive();
    const StepProblem p{c.regime, c.axis, c.i_max};
    const DecoherenceCurve none{1e-3, std::vector<double>(9, 0.0)};
    const DensityMatrix start = pure_state({2.0, 0.0});
    const CycleResult same = run_cycle(start, start, none, p, 1, 1e-3, {0, 0});
    REQUIRE(same.steps.size() == 8);
    for (const auto& s : same.steps) CHECK(s.pulse_area == 0.0);
    CHECK(std::abs(same.state.r12 - start.r12) < 1e-15);

    // control disabled: pure decoherence over the cycle
    const DecoherenceCurve curve = cycle_curve(c);
    const StepProblem off{c.regime, c.axis, 0.0};
    const CycleResult idle = run_cycle(start, pure_state({0, 0}), curve, off, 1, 1e-3, {0, 0});
    const DensityMatrix ref = evolve(c.regime, start, curve[8], 0.0, c.axis);
    CHECK(std::abs(idle.state.r11 - ref.r11) < 1e-15);
    CHECK(std::abs(idle.state.r12 - ref.r12) < 1e-15);

    // first cycle of the reference drive improves the fidelity towards the first intermediate
    const auto plan = plan_intermediates(c.initial, c.target, c.n_intermediates);
    const PureStateAngle first{pi - pi / 100, 0.0};
    const CycleResult r = run_cycle(DensityMatrix::ground(), plan[0], curve, p, 1, c.dt, c.target);
    CHECK(fidelity(r.state, first) > fidelity(DensityMatrix::ground(), first));
    CHECK(r.steps[0].step == 1);
    CHECK(r.steps[7].time == doctest::Approx(8 * c.dt));

    const DecoherenceCurve short_curve{1e-3, {0.0, 0.0}};
    CHECK_THROWS(run_cycle(start, start, short_curve, p, 1, 1e-3, {0, 0}));
}

TEST_CASE("transition_index") {
    const std::vector<double> f = {0.1, 0.995, 0.5, 0.99, 0.99, 0.99, 0.99, 0.99, 0.99, 0.99, 0.99, 0.99, 0.5};
    CHECK(transition_index(f, 0.99) == std::optional<std::size_t>(3));
    CHECK(transition_index({0.995, 0.999}, 0.99) == std::optional<std::size_t>(0));
    CHECK_FALSE(transition_index({0.1, 0.2}, 0.99).has_value());
    // a run reaching the end counts even if shorter than a cycle
    CHECK(transition_index({0.1, 0.2, 0.999}, 0.99) == std::optional<std::size_t>(2));
}

TEST_CASE("trivial drive: initial equals target") {
    TargetingConfig c = reference_drive();
    c.initial = {0.7, 0.0};
    c.target = {0.7, 0.0};
    c.hold_cycles = 5;
    const ControlLog log = run_targeting(c);
    CHECK(log.transition_steps == std::optional<std::size_t>(0));
    for (const auto& s : log.steps) CHECK(std::abs(s.pulse_area) < 1e-3);
}

TEST_CASE("reference thermal drive: 100 intermediates x 2 cycles") {
    const TargetingConfig c = reference_drive();
    const ControlLog log = run_targeting(c);
    REQUIRE(log.steps.size() == 8u * (100 * 2 + 100));
    CHECK(log.final_fidelity > 0.99);
    REQUIRE(log.transition_steps.has_value());
    CHECK(*log.transition_steps >= 875);
    CHECK(*log.transition_steps <= 1625);

    for (std::size_t k = 0; k < log.steps.size(); ++k) {
        const StepRecord& s = log.steps[k];
        CHECK(std::abs(s.pulse_area) <= c.i_max);
        CHECK(s.component == kCycleOrder[k % 8]);
        CHECK(s.step == k + 1);
        if (!s.fallback) CHECK(s.residual <= 1e-10);
    }

    // end-of-intermediate fidelity is non-decreasing up to small fluctuations
    std::vector<double> end_fid;
    for (const auto& cy : log.cycles) {
        if (cy.intermediate > 0 && cy.cycle % 2 == 0) end_fid.push_back(cy.end_fidelity);
    }
    REQUIRE(end_fid.size() == 100);
    int violations = 0;
    for (std::size_t k = 1; k < end_fid.size(); ++k) {
        if (end_fid[k] < end_fid[k - 1]) {
            ++violations;
            CHECK(end_fid[k - 1] - end_fid[k] < 0.01);
        }
    }
    CHECK(violations <= 5);

    // maintenance
    for (const auto& cy : log.cycles) {
        if (cy.intermediate == 0) CHECK(cy.end_fidelity >= 0.99);
    }
}

TEST_CASE("without decoherence any same-plane target is reached") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ang(-pi, pi);
    for (int k = 0; k < 6; ++k) {
        TargetingConfig c;
        c.spectral.coupling_gamma = 0.0;
        c.n_intermediates = 20;
        c.i_max = 0.05;
        c.hold_cycles = 10;
        const bool use_x = k % 2 == 1;
        const double phi = use_x ? pi / 2 : 0.0;
        if (use_x) c.axis = ControlAxis::sigma_x();
        c.initial = {ang(rng), phi};
        c.target = {ang(rng), phi};
        const ControlLog log = run_targeting(c);
        CHECK(log.final_fidelity >= 1.0 - 1e-6);
    }
}

TEST_CASE("config validation") {
    TargetingConfig c;
    c.i_max = 0.0;
    CHECK_THROWS(c.validate());
    c = TargetingConfig{};
    c.n_intermediates = 0;
    CHECK_THROWS(c.validate());
    c = TargetingConfig{};
    c.target = {pi / 2, pi / 2};  // y-z plane, not reachable with sigma_y
    CHECK_THROWS(c.validate());
    c = TargetingConfig{};
    c.regime = Regime::adiabatic;  // adiabatic maps are for sigma_x
    CHECK_THROWS(c.validate());
}

TEST_CASE("composite drive across planes") {
    TargetingConfig leg1;
    leg1.initial = {pi / 2, 0.0};  // (|1> + |2>)/sqrt(2)
    leg1.target = {pi, 0.0};
    leg1.n_intermediates = 50;
    leg1.hold_cycles = 0;
    TargetingConfig leg2 = leg1;
    leg2.axis = ControlAxis::sigma_x();
    leg2.initial = {pi, pi / 2};
    leg2.target = {pi / 2, pi / 2};  // (|1> + i|2>)/sqrt(2)
    leg2.hold_cycles = 20;
    const ControlLog log = run_composite(leg1, leg2);
    CHECK(log.final_fidelity > 0.99);
    CHECK(log.steps.size() == 8u * (100 + 120));
    CHECK(log.steps.back().step == log.steps.size());
    CHECK(log.steps[800].step == 801);

    // and back again: reverse legs and directions
    TargetingConfig back1 = leg2;
    back1.initial = leg2.target;
    back1.target = leg2.initial;
    back1.hold_cycles = 0;
    TargetingConfig back2 = leg1;
    back2.initial = leg1.target;
    back2.target = leg1.initial;
    back2.hold_cycles = 20;
    const ControlLog back = run_composite(back1, back2);
    CHECK(back.final_fidelity > 0.99);

    // a null second leg
    TargetingConfig null_leg = leg1;
    null_leg.axis = ControlAxis::sigma_x();
    null_leg.initial = {pi, pi / 2};
    null_leg.target = {pi, pi / 2};
    null_leg.hold_cycles = 0;
    const ControlLog only = run_composite(leg1, null_leg);
    const ControlLog alone = run_targeting(leg1);
    for (std::size_t k = 0; k < alone.steps.size(); ++k) {
        CHECK(only.steps[k].pulse_area == alone.steps[k].pulse_area);
    }

    TargetingConfig mismatched = leg2;
    mismatched.initial = {0.0, pi / 2};
    CHECK_THROWS(run_composite(leg1, mismatched));
}

TEST_CASE("CSV and summary formats") {
    TargetingConfig c = reference_drive();
    c.n_intermediates = 2;
    c.hold_cycles = 0;
    c.i_max = 0.5;
    const ControlLog log = run_targeting(c);
    std::ostringstream os;
    write_control_csv(os, log);
    std::istringstream is(os.str());
    std::string units, header;
    std::getline(is, units);
    std::getline(is, header);
    CHECK(units.rfind("# units", 0) == 0);
    CHECK(header == "step,time,cycle,intermediate,component,pulse_area,residual,fallback,fidelity,x,y,z");
    std::size_t rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == log.steps.size());

    std::ostringstream sum;
    write_control_summary(sum, log);
    CHECK(sum.str().rfind("final_fidelity=", 0) == 0);
    CHECK(sum.str().find(" transition_steps=") != std::string::npos);
    CHECK(sum.str().find(" fallback_steps=") != std::string::npos);
}
