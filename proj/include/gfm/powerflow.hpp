#pragma once

#include <string_view>

namespace gfm {

// Two-bus network: converter capacitor bus behind R_g + jX_g to a stiff grid.
// Everything is per-unit except omega_b, which is in rad/s.
struct NetworkParams {
  double r_g = 0.0;
  double x_g = 0.0;
  double v_g = 1.0;
  double omega_g = 1.0;
  double omega_b = 0.0;

  // Throws InvalidArgument when an invariant is violated.
  void validate() const;
  double impedance_sq() const { return r_g * r_g + x_g * x_g; }
};

struct DroopConfig {
  double d_p = 0.0;  // p-f droop
  double d_q = 0.0;  // q-V droop

  void validate() const;
};

struct SetPoints {
  double omega_set = 1.0;
  double v_set = 1.0;
  double p_set = 0.0;
  double q_set = 0.0;

  void validate() const;
};

struct Powers {
  double p = 0.0;
  double q = 0.0;
};

struct OperatingPoint {
  double delta0 = 0.0;
  double v0 = 1.0;
  double p0 = 0.0;
  double q0 = 0.0;
};

// Partial derivatives of (p, q) with respect to (delta, V).
struct LinearCoeffs {
  double k_pdelta = 0.0;
  double k_pv = 0.0;
  double k_qdelta = 0.0;
  double k_qv = 0.0;

  // Jacobian determinant k_pdelta*k_qv - k_pv*k_qdelta.
  double determinant() const { return k_pdelta * k_qv - k_pv * k_qdelta; }
};

Powers compute_powers(double delta, double v, const NetworkParams& net);

struct EquilibriumOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

// Steady state of the droop-controlled converter locked to the grid
// (omega_u = omega_g, zero droop errors). Throws NoConvergence when the damped
// Newton iteration fails or lands outside |delta| < pi/2.
OperatingPoint solve_equilibrium(const NetworkParams& net,
                                 const DroopConfig& droop, const SetPoints& sp,
                                 const EquilibriumOptions& options = {});

// Builds an OperatingPoint at (delta0, v0) with consistent powers.
OperatingPoint make_operating_point(double delta0, double v0,
                                    const NetworkParams& net);

LinearCoeffs linearize(const OperatingPoint& op, const NetworkParams& net);

// Short-circuit ratio in per-unit: 1 / |z_g|.
double scr(const NetworkParams& net);

enum class Quantity {
  Inductance,
  Capacitance,
  Resistance,
  Reactance,
  Voltage,
  Power,
  Frequency,
  AngularFrequency,
};

// Throws UnknownKind.
Quantity parse_quantity(std::string_view kind);

// Nominal bases. v_n is the line-to-line RMS voltage, f_n in Hz.
struct PerUnitBases {
  double v_n = 0.0;
  double s_n = 0.0;
  double f_n = 0.0;

  void validate() const;
  double z_base() const { return v_n * v_n / s_n; }
  double omega_base() const;
};

double to_per_unit(double si_value, Quantity kind, const PerUnitBases& bases);
double from_per_unit(double pu_value, Quantity kind, const PerUnitBases& bases);
double to_per_unit(double si_value, std::string_view kind,
                   const PerUnitBases& bases);

}  // namespace gfm
