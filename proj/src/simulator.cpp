#include "gfm/simulator.hpp"

#include <cmath>
#include <string>

#include "gfm/error.hpp"

namespace gfm {

std::string_view to_string(EventTarget target) {
  switch (target) {
    case EventTarget::PSet: return "p_set";
    case EventTarget::QSet: return "q_set";
    case EventTarget::VSet: return "v_set";
    case EventTarget::OmegaSet: return "omega_set";
    case EventTarget::OmegaG: return "omega_g";
    case EventTarget::VG: return "v_g";
  }
  return "unknown";
}

EventTarget parse_event_target(std::string_view name) {
  if (name == "p_set" || name == "pset") return EventTarget::PSet;
  if (name == "q_set" || name == "qset") return EventTarget::QSet;
  if (name == "v_set" || name == "vset") return EventTarget::VSet;
  if (name == "omega_set" || name == "wset") return EventTarget::OmegaSet;
  if (name == "omega_g" || name == "wg") return EventTarget::OmegaG;
  if (name == "v_g" || name == "vg") return EventTarget::VG;
  throw Error(ErrorCode::InvalidArgument,
              "unknown event target '" + std::string(name) + "'");
}

namespace {

double& target_ref(NetworkParams& net, SetPoints& sp, EventTarget target) {
  switch (target) {
    case EventTarget::PSet: return sp.p_set;
    case EventTarget::QSet: return sp.q_set;
    case EventTarget::VSet: return sp.v_set;
    case EventTarget::OmegaSet: return sp.omega_set;
    case EventTarget::OmegaG: return net.omega_g;
    case EventTarget::VG: return net.v_g;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown event target");
}

void check_from(const Event& e, double current) {
  if (!e.from_value) return;
  if (std::abs(*e.from_value - current) >
      1e-9 * std::max(1.0, std::abs(current))) {
    throw Error(ErrorCode::InvalidArgument,
                "event on " + std::string(to_string(e.target)) + " at t=" +
                    std::to_string(e.time) + " expects from=" +
                    std::to_string(*e.from_value) + " but value is " +
                    std::to_string(current));
  }
}

}  // namespace

void Scenario::validate() const {
  net.validate();
  droop.validate();
  sp.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  }
  if (!(t_end >= dt) || !std::isfinite(t_end)) {
    throw Error(ErrorCode::InvalidArgument, "t_end must be >= dt");
  }
  if (!gains.k.allFinite() || !std::isfinite(estimator.k_p) ||
      !std::isfinite(estimator.k_q)) {
    throw Error(ErrorCode::InvalidArgument, "gains must be finite");
  }
  NetworkParams replay_net = net;
  SetPoints replay_sp = sp;
  double previous = 0.0;
  for (const Event& e : events) {
    if (!(e.time >= 0.0 && e.time <= t_end)) {
      throw Error(ErrorCode::InvalidArgument,
                  "event time " + std::to_string(e.time) +
                      " outside [0, t_end]");
    }
    if (e.time < previous) {
      throw Error(ErrorCode::InvalidArgument, "events must be time-ordered");
    }
    if (!std::isfinite(e.new_value)) {
      throw Error(ErrorCode::InvalidArgument, "event value must be finite");
    }
    double& slot = target_ref(replay_net, replay_sp, e.target);
    check_from(e, slot);
    slot = e.new_value;
    previous = e.time;
  }
}

const std::vector<std::string_view>& TimeSeries::channel_names() {
  static const std::vector<std::string_view> names = {
      "t", "p", "q", "omega_u", "e_u", "delta", "delta_hat", "e1", "e2"};
  return names;
}

const std::vector<double>& TimeSeries::channel(std::string_view name) const {
  if (name == "t") return t;
  if (name == "p") return p;
  if (name == "q") return q;
  if (name == "omega_u") return omega_u;
  if (name == "e_u" || name == "v") return e_u;
  if (name == "delta") return delta;
  if (name == "delta_hat") return delta_hat;
  if (name == "e1") return e1;
  if (name == "e2") return e2;
  throw Error(ErrorCode::InvalidArgument,
              "unknown channel '" + std::string(name) + "'");
}

Simulator::Simulator(Scenario scenario) : scenario_(std::move(scenario)) {
  scenario_.validate();
}

SimState Simulator::initial_state() const {
  const auto& s = scenario_;
  return {s.design_op.delta0, s.net.omega_g, s.design_op.v0};
}

AlgebraicSolution Simulator::solve_algebraic(double delta,
                                             const SimState& state,
                                             std::optional<double> guess) const {
  const auto& s = scenario_;
  const double k23 = s.gains.k(1, 2);
  const double kp = s.estimator.k_p;
  const double kq = s.estimator.k_q;

  auto evaluate = [&](double delta_hat) {
    AlgebraicSolution sol;
    sol.v = state.e_int - k23 * delta_hat;
    const Powers pq = compute_powers(delta, sol.v, s.net);
    sol.p = pq.p;
    sol.q = pq.q;
    sol.delta_hat = kp * (pq.p - s.design_op.p0) - kq * (pq.q - s.design_op.q0);
    return sol;
  };

  if (k23 == 0.0) return evaluate(0.0);

  // Newton on r(x) = x - estimate(V(x)).
  double x = guess.value_or(0.0);
  for (int iter = 0; iter < 20; ++iter) {
    const AlgebraicSolution sol = evaluate(x);
    if (!(sol.v > 0.0) || !std::isfinite(sol.delta_hat)) break;
    const double r = x - sol.delta_hat;
    const LinearCoeffs c = linearize({delta, sol.v, 0.0, 0.0}, s.net);
    const double slope = 1.0 + k23 * (kp * c.k_pv - kq * c.k_qv);
    if (!std::isfinite(slope) || slope == 0.0) break;
    const double dx = r / slope;
    x -= dx;
    if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) {
      AlgebraicSolution out = evaluate(x);
      out.delta_hat = x;
      return out;
    }
  }
  const AlgebraicSolution last = evaluate(x);
  if (std::abs(x - last.delta_hat) < 1e-10 && last.v > 0.0) {
    AlgebraicSolution out = last;
    out.delta_hat = x;
    return out;
  }
  throw Error(ErrorCode::AlgebraicLoopDivergence,
              "V/delta_hat algebraic loop did not converge at delta=" +
                  std::to_string(delta));
}

Simulator::Derivative Simulator::rhs(const SimState& st,
                                     AlgebraicSolution& alg) {
  const auto& s = scenario_;
  const auto& k = s.gains.k;
  alg = solve_algebraic(st.delta, st, warm_delta_hat_);
  warm_delta_hat_ = alg.delta_hat;

  const double omega_u = st.omega_int - k(0, 2) * alg.delta_hat;
  const double e1 =
      omega_u + s.droop.d_p * alg.p - (s.sp.omega_set + s.droop.d_p * s.sp.p_set);
  const double e2 =
      alg.v + s.droop.d_q * alg.q - (s.sp.v_set + s.droop.d_q * s.sp.q_set);
  return {s.net.omega_b * (omega_u - s.net.omega_g),
          -(k(0, 0) * e1 + k(0, 1) * e2),
          -(k(1, 0) * e1 + k(1, 1) * e2)};
}

SimState Simulator::step(const SimState& st, double t) {
  const double h = scenario_.dt;
  AlgebraicSolution alg;
  auto shifted = [](const SimState& s, const Derivative& d, double scale) {
    return SimState{s.delta + scale * d.delta, s.omega_int + scale * d.omega_int,
                    s.e_int + scale * d.e_int};
  };
  const Derivative k1 = rhs(st, alg);
  const Derivative k2 = rhs(shifted(st, k1, h / 2), alg);
  const Derivative k3 = rhs(shifted(st, k2, h / 2), alg);
  const Derivative k4 = rhs(shifted(st, k3, h), alg);
  SimState next{
      st.delta + h / 6 * (k1.delta + 2 * k2.delta + 2 * k3.delta + k4.delta),
      st.omega_int + h / 6 * (k1.omega_int + 2 * k2.omega_int +
                              2 * k3.omega_int + k4.omega_int),
      st.e_int + h / 6 * (k1.e_int + 2 * k2.e_int + 2 * k3.e_int + k4.e_int)};
  if (!std::isfinite(next.delta) || !std::isfinite(next.omega_int) ||
      !std::isfinite(next.e_int)) {
    throw Error(ErrorCode::NonFinite,
                "state blew up at t=" + std::to_string(t + h));
  }
  return next;
}

void Simulator::apply(const Event& event) {
  double& slot = target_ref(scenario_.net, scenario_.sp, event.target);
  check_from(event, slot);
  slot = event.new_value;
}

void Simulator::record(const SimState& st, double t, TimeSeries& out) {
  const auto& s = scenario_;
  const AlgebraicSolution alg = solve_algebraic(st.delta, st, warm_delta_hat_);
  const double omega_u = st.omega_int - s.gains.k(0, 2) * alg.delta_hat;
  out.t.push_back(t);
  out.p.push_back(alg.p);
  out.q.push_back(alg.q);
  out.omega_u.push_back(omega_u);
  out.e_u.push_back(alg.v);
  out.delta.push_back(st.delta);
  out.delta_hat.push_back(alg.delta_hat);
  out.e1.push_back(omega_u + s.droop.d_p * alg.p -
                   (s.sp.omega_set + s.droop.d_p * s.sp.p_set));
  out.e2.push_back(alg.v + s.droop.d_q * alg.q -
                   (s.sp.v_set + s.droop.d_q * s.sp.q_set));
}

TimeSeries Simulator::run() {
  const double dt = scenario_.dt;
  const auto steps =
      static_cast<std::size_t>(std::llround(scenario_.t_end / dt));
  TimeSeries out;
  out.dt = dt;
  for (auto* channel : {&out.t, &out.p, &out.q, &out.omega_u, &out.e_u,
                        &out.delta, &out.delta_hat, &out.e1, &out.e2}) {
    channel->reserve(steps + 1);
  }

  const std::vector<Event> events = scenario_.events;
  std::size_t next_event = 0;
  SimState state = initial_state();
  warm_delta_hat_ = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    // An event is applied at the first sample at or after its timestamp; the
    // recorded sample at that time already reflects the new value.
    while (next_event < events.size() &&
           events[next_event].time <= t + 0.5 * dt) {
      apply(events[next_event++]);
    }
    record(state, t, out);
    if (i < steps) state = step(state, t);
  }
  return out;
}

TimeSeries run(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace gfm
