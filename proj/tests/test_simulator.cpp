#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gfm/error.hpp"
#include "gfm/simulator.hpp"
#include "oracles.hpp"
#include "sim_oracles.hpp"

using namespace gfm;

namespace {

constexpr double kOmegaB = 100 * std::numbers::pi;
const NetworkParams kNet{0.0, 0.09817477042468103, 1.0, 1.0, kOmegaB};
const NetworkParams kComplexLine{0.075, 0.07853981633974483, 1.0, 1.0, kOmegaB};
const DroopConfig kDroop{0.01, 0.05};
const SetPoints kSet{1.0, 1.0, 0.5, 0.0};

Scenario designed(const NetworkParams& net, double xi, double ts,
                  const DroopConfig& droop = kDroop, const SetPoints& sp = kSet) {
  Scenario s;
  s.net = net;
  s.droop = droop;
  s.sp = sp;
  s.design_op = solve_equilibrium(net, droop, sp);
  const LinearCoeffs c = linearize(s.design_op, net);
  const ErrorModel m = build_error_model(c, droop, net.omega_b);
  TimeSpec spec;
  spec.damping = xi;
  spec.settling_time = ts;
  s.gains = synthesize_gains(m, spec_to_poles(spec));
  s.estimator = estimator_gains(c);
  return s;
}

Event step_event(EventTarget target, double to, double at) {
  return Event{at, target, to, std::nullopt};
}

double max_abs_dev(const std::vector<double>& y, double ref) {
  double worst = 0;
  for (double v : y) worst = std::max(worst, std::abs(v - ref));
  return worst;
}

}  // namespace

TEST_CASE("algebraic loop at the equilibrium") {
  const Scenario s = designed(kNet, 0.707, 1.0);
  Simulator sim(s);
  const SimState x0 = sim.initial_state();
  const AlgebraicSolution a = sim.solve_algebraic(x0.delta, x0);
  CHECK(std::abs(a.delta_hat) < 1e-12);
  CHECK(a.v == doctest::Approx(s.design_op.v0).epsilon(1e-12));
  CHECK(a.p == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(a.q == doctest::Approx(s.design_op.q0).epsilon(1e-10));
}

TEST_CASE("algebraic loop without voltage feedback of the estimate") {
  Scenario s = designed(kNet, 0.707, 1.0);
  s.gains.k(1, 2) = 0.0;
  Simulator sim(s);
  SimState x = sim.initial_state();
  x.delta += 0.02;
  const AlgebraicSolution a = sim.solve_algebraic(x.delta, x);
  CHECK(a.v == x.e_int);
  const Powers pq = oracle::phasor_powers(x.delta, x.e_int, s.net);
  CHECK(a.delta_hat ==
        doctest::Approx(s.estimator.k_p * (pq.p - s.design_op.p0) -
                        s.estimator.k_q * (pq.q - s.design_op.q0))
            .epsilon(1e-12));
}

TEST_CASE("algebraic loop matches a bisection oracle") {
  for (const auto& net : {kNet, kComplexLine}) {
    Scenario s = designed(net, 0.707, 1.0);
    s.gains.k(1, 2) = 0.5;  // strengthen the loop well beyond designed values
    Simulator sim(s);
    SimState x = sim.initial_state();
    x.delta += 0.01;
    const double k23 = s.gains.k(1, 2);
    auto residual = [&](double dh) {
      const Powers pq = oracle::phasor_powers(x.delta, x.e_int - k23 * dh, net);
      return dh - (s.estimator.k_p * (pq.p - s.design_op.p0) -
                   s.estimator.k_q * (pq.q - s.design_op.q0));
    };
    const double ref = oracle::bisect(residual, -0.5, 0.5);
    const AlgebraicSolution a = sim.solve_algebraic(x.delta, x);
    CHECK(std::abs(a.delta_hat - ref) < 1e-9);
    CHECK(std::abs(a.v - (x.e_int - k23 * ref)) < 1e-9);
  }
}

TEST_CASE("a step from equilibrium stays at equilibrium") {
  for (const auto& net : {kNet, kComplexLine}) {
    Simulator sim(designed(net, 0.4, 1.0));
    const SimState x0 = sim.initial_state();
    const SimState x1 = sim.step(x0, 0.0);
    CHECK(std::abs(x1.delta - x0.delta) < 1e-9);
    CHECK(std::abs(x1.omega_int - x0.omega_int) < 1e-9);
    CHECK(std::abs(x1.e_int - x0.e_int) < 1e-9);
  }
}

TEST_CASE("zero gains keep the angle fixed when omega_u equals omega_g") {
  Scenario s = designed(kNet, 0.4, 1.0);
  s.gains = GainMatrix{};
  s.sp.p_set = 0.8;  // nonzero droop error, but no feedback path
  Simulator sim(s);
  SimState x = sim.initial_state();
  const SimState x0 = x;
  for (int i = 0; i < 100; ++i) x = sim.step(x, i * s.dt);
  CHECK(x.delta == x0.delta);
  CHECK(x.omega_int == x0.omega_int);
  CHECK(x.e_int == x0.e_int);
}

TEST_CASE("single RK4 step has fifth-order local error") {
  Scenario s = designed(kComplexLine, 0.4, 1.0);
  s.sp.p_set = 1.0;
  auto advance = [&](double h, int n) {
    Scenario local = s;
    local.dt = h;
    Simulator sim(local);
    SimState x = sim.initial_state();
    for (int i = 0; i < n; ++i) x = sim.step(x, i * h);
    return x;
  };
  // Reference from many tiny steps.
  const double h = 4e-3;
  const SimState ref = advance(h / 256, 256);
  const double e1 = std::abs(advance(h, 1).omega_int - ref.omega_int);
  const double e2 = std::abs(advance(h / 2, 1).omega_int -
                             advance(h / 512, 256).omega_int);
  const double ratio = e1 / e2;
  CHECK(ratio > 24.0);
  CHECK(ratio < 40.0);
}

TEST_CASE("RK4 converges with at least fourth order over an interval") {
  Scenario s = designed(kComplexLine, 0.4, 1.0);
  s.t_end = 0.5;
  s.events = {step_event(EventTarget::PSet, 1.0, 0.0)};
  auto final_p = [&](double dt) {
    Scenario local = s;
    local.dt = dt;
    return run(local).p.back();
  };
  const double a = final_p(1e-2), b = final_p(5e-3), c = final_p(2.5e-3);
  const double ratio = (a - b) / (b - c);
  CHECK(ratio > 14.0);
  CHECK(ratio < 34.0);
}

TEST_CASE("no events keeps every channel constant") {
  Scenario s = designed(kNet, 0.707, 1.0);
  s.t_end = 10.0;
  const TimeSeries ts = run(s);
  CHECK(ts.size() == 100001);
  CHECK(max_abs_dev(ts.p, s.design_op.p0) < 1e-8);
  CHECK(max_abs_dev(ts.q, s.design_op.q0) < 1e-8);
  CHECK(max_abs_dev(ts.delta, s.design_op.delta0) < 1e-8);
  CHECK(max_abs_dev(ts.e_u, s.design_op.v0) < 1e-8);
  CHECK(max_abs_dev(ts.omega_u, 1.0) < 1e-8);
  CHECK(max_abs_dev(ts.e1, 0.0) < 1e-8);
  CHECK(max_abs_dev(ts.e2, 0.0) < 1e-8);
}

TEST_CASE("active power step settles on the new set-point") {
  Scenario s = designed(kNet, 0.707, 1.0);
  s.t_end = 6.0;
  s.events = {step_event(EventTarget::PSet, 1.0, 1.0)};
  s.events[0].from_value = 0.5;
  const TimeSeries ts = run(s);
  CHECK(std::abs(ts.p.back() - 1.0) < 1e-3);
  CHECK(std::abs(ts.e1.back()) < 1e-6);
  CHECK(std::abs(ts.e2.back()) < 1e-6);
  // Pre-event samples are untouched.
  CHECK(std::abs(ts.p[9999] - 0.5) < 1e-9);
}

TEST_CASE("complex line reaches both droop characteristics") {
  Scenario s = designed(kComplexLine, 0.707, 1.0);
  s.t_end = 6.0;
  s.events = {step_event(EventTarget::PSet, 1.0, 1.0)};
  const TimeSeries ts = run(s);
  CHECK(std::abs(ts.e1.back()) < 1e-4);
  CHECK(std::abs(ts.e2.back()) < 1e-4);
  // e = 0 reproduces the droop laws.
  const double p = ts.p.back(), q = ts.q.back();
  CHECK(std::abs(ts.omega_u.back() - (1.0 - s.droop.d_p * (p - 1.0))) < 1e-4);
  CHECK(std::abs(ts.e_u.back() - (1.0 - s.droop.d_q * q)) < 1e-4);
}

TEST_CASE("grid frequency step is tracked with droop-shifted power") {
  Scenario s = designed(kNet, 0.707, 1.0);
  s.t_end = 8.0;
  s.events = {step_event(EventTarget::OmegaG, 0.999, 1.0)};
  const TimeSeries ts = run(s);
  CHECK(std::abs(ts.omega_u.back() - 0.999) < 1e-5);
  // omega_u = omega_set - d_p (p - p_set)
  CHECK(std::abs(ts.p.back() - (0.5 + 0.001 / s.droop.d_p)) < 1e-3);
}

TEST_CASE("small steps agree with the linearized closed loop") {
  for (const auto& net : {kNet, kComplexLine}) {
    Scenario s = designed(net, 0.707, 1.0);
    s.t_end = 3.0;
    const double dp = 0.005;
    s.events = {step_event(EventTarget::PSet, 0.5 + dp, 0.0)};
    const TimeSeries ts = run(s);
    CHECK(oracle::linear_step_deviation(s, ts, dp) < 0.02 * dp);
  }
}

TEST_CASE("decoupled gains reproduce a droop controller with filters") {
  Scenario s = designed(kComplexLine, 0.707, 1.0);
  s.gains.k << 2.0, 0.0, 0.0, 0.0, 12.0, 0.0;
  s.t_end = 2.0;
  s.events = {step_event(EventTarget::PSet, 0.9, 0.0)};
  const TimeSeries ts = run(s);
  SetPoints sp = s.sp;
  sp.p_set = 0.9;
  CHECK(oracle::vsg_reference_deviation(s, ts, 2.0, 12.0, sp) < 1e-9);
}

TEST_CASE("equilibrium invariance on random setups") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10; ++i) {
    const auto r = oracle::random_setup(rng);
    Scenario s = designed(r.net, 0.6, 1.5, r.droop, r.sp);
    s.t_end = 1.0;
    s.dt = 1e-3;
    const TimeSeries ts = run(s);
    CHECK(max_abs_dev(ts.delta, s.design_op.delta0) < 1e-8);
    CHECK(max_abs_dev(ts.e1, 0.0) < 1e-8);
    CHECK(max_abs_dev(ts.e2, 0.0) < 1e-8);
  }
}

TEST_CASE("scenario validation") {
  Scenario s = designed(kNet, 0.707, 1.0);
  auto throws_invalid = [](const Scenario& sc) {
    try {
      sc.validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidArgument;
    }
    return false;
  };
  Scenario bad = s;
  bad.dt = 0.0;
  CHECK(throws_invalid(bad));
  bad = s;
  bad.events = {step_event(EventTarget::PSet, 1.0, 10.0)};
  CHECK(throws_invalid(bad));
  bad = s;
  bad.events = {step_event(EventTarget::PSet, 1.0, 2.0),
                step_event(EventTarget::PSet, 0.5, 1.0)};
  CHECK(throws_invalid(bad));
  bad = s;
  bad.events = {Event{1.0, EventTarget::PSet, 1.0, 0.4}};
  CHECK(throws_invalid(bad));
  bad = s;
  bad.events = {Event{1.0, EventTarget::PSet, 1.0, 0.5},
                Event{2.0, EventTarget::PSet, 0.7, 1.0}};
  CHECK_FALSE(throws_invalid(bad));
}

TEST_CASE("runaway gains are reported as non-finite") {
  Scenario s = designed(kNet, 0.707, 1.0);
  s.gains.k << -5000.0, 0.0, 0.0, 0.0, -5000.0, 0.0;
  s.t_end = 5.0;
  s.dt = 1e-2;
  s.events = {step_event(EventTarget::PSet, 1.0, 0.0)};
  try {
    run(s);
    FAIL("expected a failure");
  } catch (const Error& e) {
    const bool expected = e.code() == ErrorCode::NonFinite ||
                          e.code() == ErrorCode::AlgebraicLoopDivergence;
    CHECK(expected);
  }
}

TEST_CASE("event targets parse with aliases") {
  CHECK(parse_event_target("p_set") == EventTarget::PSet);
  CHECK(parse_event_target("wg") == EventTarget::OmegaG);
  CHECK(parse_event_target("v_g") == EventTarget::VG);
  CHECK_THROWS_AS(parse_event_target("x"), Error);
  for (auto t : {EventTarget::PSet, EventTarget::QSet, EventTarget::VSet,
                 EventTarget::OmegaSet, EventTarget::OmegaG, EventTarget::VG}) {
    CHECK(parse_event_target(to_string(t)) == t);
  }
}

TEST_CASE("metrics of a monotone response") {
  std::vector<double> t, y;
  for (int i = 0; i <= 5000; ++i) {
    t.push_back(i * 1e-3);
    y.push_back(t.back() < 1.0 ? 0.0 : 1.0 - std::exp(-(t.back() - 1.0) / 0.2));
  }
  const StepMetrics m = measure_metrics(t, y, 1.0);
  CHECK(m.percent_overshoot < 1e-5);
  // exp(-T/0.2) = 0.02 relative to the final mean
  CHECK(std::abs(m.settling_time - 0.2 * std::log(50.0)) < 2e-3);
  CHECK(m.initial_value == 0.0);
}

TEST_CASE("metrics of an ideal second-order step") {
  const double xi = 0.4, wn = 10.0;
  std::vector<double> t, y;
  for (int i = 0; i <= 60000; ++i) {
    t.push_back(i * 1e-4);
    const double tau = t.back() - 1.0;
    y.push_back(tau < 0 ? 0.5 : 0.5 + 0.5 * oracle::second_order_step(xi, wn, tau));
  }
  const StepMetrics m = measure_metrics(t, y, 1.0);
  CHECK(m.percent_overshoot == doctest::Approx(overshoot_from_damping(xi)).epsilon(1e-3));
  // Exact last exit from the 2% band.
  const double ts_exact = [&] {
    double last = 0;
    for (int i = 0; i < 200000; ++i) {
      const double tau = i * 1e-5;
      if (std::abs(oracle::second_order_step(xi, wn, tau) - 1.0) > 0.02) last = tau;
    }
    return last;
  }();
  CHECK(std::abs(ts_exact - 0.8409) < 1e-3);
  CHECK(std::abs(m.settling_time - ts_exact) < 2e-4);
}

TEST_CASE("metrics edge cases") {
  std::vector<double> t(100), y(100, 3.0);
  for (int i = 0; i < 100; ++i) t[i] = i * 0.1;
  const StepMetrics flat = measure_metrics(t, y, 1.0);
  CHECK(flat.percent_overshoot == 0.0);
  CHECK(flat.settling_time == 0.0);

  std::vector<double> osc(100);
  for (int i = 0; i < 100; ++i) osc[i] = i < 10 ? 0.0 : 1.0 + 0.5 * std::sin(i);
  CHECK_THROWS_AS(measure_metrics(t, osc, 1.0), Error);
}
