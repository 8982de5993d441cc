#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "gfm/gaindesign.hpp"
#include "gfm/powerflow.hpp"

namespace gfm {

enum class EventTarget { PSet, QSet, VSet, OmegaSet, OmegaG, VG };

std::string_view to_string(EventTarget target);
// Accepts p_set/pset, q_set/qset, v_set/vset, omega_set/wset, omega_g/wg, v_g/vg.
EventTarget parse_event_target(std::string_view name);

// Step change of a set-point or grid quantity at `time`.
struct Event {
  double time = 0.0;
  EventTarget target = EventTarget::PSet;
  double new_value = 0.0;
  std::optional<double> from_value;  // checked against the pre-event value
};

struct Scenario {
  NetworkParams net;
  DroopConfig droop;
  SetPoints sp;
  GainMatrix gains;
  EstimatorGains estimator;
  OperatingPoint design_op;  // reference for the (p, q) deviations
  double dt = 1e-4;
  double t_end = 5.0;
  std::vector<Event> events;

  // Throws InvalidArgument.
  void validate() const;
};

// Integrator states of the control law plus the physical angle.
struct SimState {
  double delta = 0.0;
  double omega_int = 0.0;  // omega_u = omega_int - k13 * delta_hat
  double e_int = 0.0;      // E_u = V = e_int - k23 * delta_hat
};

struct AlgebraicSolution {
  double v = 0.0;
  double delta_hat = 0.0;
  double p = 0.0;
  double q = 0.0;
};

struct TimeSeries {
  double dt = 0.0;
  std::vector<double> t, p, q, omega_u, e_u, delta, delta_hat, e1, e2;

  std::size_t size() const { return t.size(); }
  // Throws InvalidArgument for an unknown channel name.
  const std::vector<double>& channel(std::string_view name) const;
  static const std::vector<std::string_view>& channel_names();
};

/// Nonlinear closed loop: ideal inner loops, power equations, estimator
/// feed-through, and the integrating full-state feedback law.
class Simulator {
 public:
  explicit Simulator(Scenario scenario);

  // Rest state at the design operating point with omega_u = omega_g.
  SimState initial_state() const;

  // Resolves V <-> delta_hat at fixed delta. Throws AlgebraicLoopDivergence.
  AlgebraicSolution solve_algebraic(double delta, const SimState& state,
                                    std::optional<double> guess = {}) const;

  // One RK4 step of size dt. Throws NonFinite.
  SimState step(const SimState& state, double t);

  void apply(const Event& event);

  // Records every channel at the given state.
  void record(const SimState& state, double t, TimeSeries& out);

  TimeSeries run();

  const Scenario& scenario() const { return scenario_; }

 private:
  struct Derivative {
    double delta = 0.0;
    double omega_int = 0.0;
    double e_int = 0.0;
  };
  Derivative rhs(const SimState& s, AlgebraicSolution& alg);

  Scenario scenario_;
  double warm_delta_hat_ = 0.0;
};

TimeSeries run(const Scenario& scenario);

struct StepMetrics {
  double percent_overshoot = 0.0;
  double settling_time = 0.0;  // 2% band, measured from the event
  double steady_value = 0.0;
  double initial_value = 0.0;
  double step_size = 0.0;
};

/// Step-response metrics of one channel for an event at t_event.
/// Steady value is the mean of the final 10% of samples. Throws Unsettled
/// when the final window is not inside the 2% band.
StepMetrics measure_metrics(const TimeSeries& ts, std::string_view channel,
                            double t_event);
StepMetrics measure_metrics(const std::vector<double>& t,
                            const std::vector<double>& y, double t_event);

}  // namespace gfm
