#include "gfm/powerflow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "gfm/error.hpp"

namespace gfm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::NonPositiveHorizon: return "NonPositiveHorizon";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::Uncontrollable: return "Uncontrollable";
    case ErrorCode::DegenerateLinearization: return "DegenerateLinearization";
    case ErrorCode::AlgebraicLoopDivergence: return "AlgebraicLoopDivergence";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::Unsettled: return "Unsettled";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

}  // namespace

void NetworkParams::validate() const {
  require(std::isfinite(r_g) && r_g >= 0.0, "r_g must be >= 0");
  require(std::isfinite(x_g) && x_g >= 0.0, "x_g must be >= 0");
  require(impedance_sq() > 0.0, "line impedance must be nonzero");
  require(std::isfinite(v_g) && v_g > 0.0, "v_g must be > 0");
  require(std::isfinite(omega_g), "omega_g must be finite");
  require(std::isfinite(omega_b) && omega_b > 0.0, "omega_b must be > 0");
}

void DroopConfig::validate() const {
  // Zero droops are admitted so the controllability check can reject them
  // with a dedicated error.
  require(std::isfinite(d_p) && d_p >= 0.0, "d_p must be >= 0");
  require(std::isfinite(d_q) && d_q >= 0.0, "d_q must be >= 0");
}

void SetPoints::validate() const {
  require(std::isfinite(omega_set) && omega_set > 0.0, "omega_set must be > 0");
  require(std::isfinite(v_set) && v_set > 0.0, "v_set must be > 0");
  require(std::isfinite(p_set) && std::isfinite(q_set),
          "power set-points must be finite");
}

Powers compute_powers(double delta, double v, const NetworkParams& net) {
  const double z2 = net.impedance_sq();
  const double s = std::sin(delta);
  const double c = std::cos(delta);
  const double vvg = v * net.v_g;
  return {
      (v * v * net.r_g + vvg * (net.x_g * s - net.r_g * c)) / z2,
      (v * v * net.x_g - vvg * (net.r_g * s + net.x_g * c)) / z2,
  };
}

OperatingPoint make_operating_point(double delta0, double v0,
                                    const NetworkParams& net) {
  const Powers pq = compute_powers(delta0, v0, net);
  return {delta0, v0, pq.p, pq.q};
}

LinearCoeffs linearize(const OperatingPoint& op, const NetworkParams& net) {
  const double z2 = net.impedance_sq();
  const double s = std::sin(op.delta0);
  const double c = std::cos(op.delta0);
  const double along = net.r_g * s + net.x_g * c;
  const double across = net.x_g * s - net.r_g * c;
  return {
      op.v0 * net.v_g * along / z2,
      (2.0 * op.v0 * net.r_g + net.v_g * across) / z2,
      op.v0 * net.v_g * across / z2,
      (2.0 * op.v0 * net.x_g - net.v_g * along) / z2,
  };
}

OperatingPoint solve_equilibrium(const NetworkParams& net,
                                 const DroopConfig& droop, const SetPoints& sp,
                                 const EquilibriumOptions& options) {
  net.validate();
  droop.validate();
  sp.validate();

  // Locked to the grid: omega_u = omega_g fixes the active power through the
  // p-f droop; the q-V droop couples V to q.
  double p_target = sp.p_set;
  if (sp.omega_set != net.omega_g) {
    if (droop.d_p == 0.0) {
      throw Error(ErrorCode::NoConvergence,
                  "no equilibrium: omega_set != omega_g without p-f droop");
    }
    p_target += (sp.omega_set - net.omega_g) / droop.d_p;
  }

  auto residual = [&](double delta, double v) {
    const Powers pq = compute_powers(delta, v, net);
    return std::array<double, 2>{
        pq.p - p_target, v - sp.v_set - droop.d_q * (sp.q_set - pq.q)};
  };
  auto norm = [](const std::array<double, 2>& r) {
    return std::max(std::abs(r[0]), std::abs(r[1]));
  };

  double delta = 0.0;
  double v = 1.0;
  auto r = residual(delta, v);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (norm(r) < options.tolerance) break;

    const LinearCoeffs k = linearize({delta, v, 0.0, 0.0}, net);
    // d r1 = k_pdelta dd + k_pv dv ; d r2 = d_q k_qdelta dd + (1 + d_q k_qv) dv
    const double j11 = k.k_pdelta;
    const double j12 = k.k_pv;
    const double j21 = droop.d_q * k.k_qdelta;
    const double j22 = 1.0 + droop.d_q * k.k_qv;
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || std::abs(det) < 1e-14) {
      throw Error(ErrorCode::NoConvergence,
                  "equilibrium Jacobian is singular at iteration " +
                      std::to_string(iter));
    }
    const double step_delta = -(j22 * r[0] - j12 * r[1]) / det;
    const double step_v = -(-j21 * r[0] + j11 * r[1]) / det;

    // Backtrack until the residual decreases.
    double alpha = 1.0;
    const double current = norm(r);
    for (;;) {
      const double trial_delta = delta + alpha * step_delta;
      const double trial_v = v + alpha * step_v;
      const auto trial = residual(trial_delta, trial_v);
      if (trial_v > 0.0 && norm(trial) < current) {
        delta = trial_delta;
        v = trial_v;
        r = trial;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-8) {
        throw Error(ErrorCode::NoConvergence,
                    "equilibrium line search stalled at iteration " +
                        std::to_string(iter));
      }
    }
  }

  if (!(norm(r) < options.tolerance)) {
    throw Error(ErrorCode::NoConvergence,
                "equilibrium not reached within iteration budget");
  }
  if (std::abs(delta) >= std::numbers::pi / 2.0) {
    throw Error(ErrorCode::NoConvergence,
                "equilibrium lies on the high-angle branch |delta| >= pi/2");
  }
  return make_operating_point(delta, v, net);
}

double scr(const NetworkParams& net) {
  const double z = std::sqrt(net.impedance_sq());
  require(z > 0.0, "scr requires nonzero impedance");
  return 1.0 / z;
}

Quantity parse_quantity(std::string_view kind) {
  if (kind == "inductance") return Quantity::Inductance;
  if (kind == "capacitance") return Quantity::Capacitance;
  if (kind == "resistance") return Quantity::Resistance;
  if (kind == "reactance") return Quantity::Reactance;
  if (kind == "voltage") return Quantity::Voltage;
  if (kind == "power") return Quantity::Power;
  if (kind == "frequency") return Quantity::Frequency;
  if (kind == "angular_frequency") return Quantity::AngularFrequency;
  throw Error(ErrorCode::UnknownKind,
              "unknown quantity kind '" + std::string(kind) + "'");
}

void PerUnitBases::validate() const {
  require(std::isfinite(v_n) && v_n > 0.0, "v_n must be > 0");
  require(std::isfinite(s_n) && s_n > 0.0, "s_n must be > 0");
  require(std::isfinite(f_n) && f_n > 0.0, "f_n must be > 0");
}

double PerUnitBases::omega_base() const { return 2.0 * std::numbers::pi * f_n; }

namespace {

// Multiplier m such that pu = si * m.
double per_unit_factor(Quantity kind, const PerUnitBases& b) {
  b.validate();
  switch (kind) {
    case Quantity::Inductance: return b.omega_base() / b.z_base();
    case Quantity::Capacitance: return b.omega_base() * b.z_base();
    case Quantity::Resistance:
    case Quantity::Reactance: return 1.0 / b.z_base();
    case Quantity::Voltage: return 1.0 / b.v_n;
    case Quantity::Power: return 1.0 / b.s_n;
    case Quantity::Frequency: return 1.0 / b.f_n;
    case Quantity::AngularFrequency: return 1.0 / b.omega_base();
  }
  throw Error(ErrorCode::UnknownKind, "unknown quantity kind");
}

}  // namespace

double to_per_unit(double si_value, Quantity kind, const PerUnitBases& bases) {
  return si_value * per_unit_factor(kind, bases);
}

double from_per_unit(double pu_value, Quantity kind,
                     const PerUnitBases& bases) {
  return pu_value / per_unit_factor(kind, bases);
}

double to_per_unit(double si_value, std::string_view kind,
                   const PerUnitBases& bases) {
  return to_per_unit(si_value, parse_quantity(kind), bases);
}

}  // namespace gfm
