#pragma once

#include <Eigen/Dense>

#include "gfm/powerflow.hpp"

namespace gfm {

using Matrix3 = Eigen::Matrix3d;
using Matrix32 = Eigen::Matrix<double, 3, 2>;
using Matrix23 = Eigen::Matrix<double, 2, 3>;

/// Error-based small-signal model of the power loops.
///
/// States are the two droop errors (e1, e2) and the angle rate deviation z;
/// inputs are the rates of the frequency and voltage references. The state
/// matrix is nonzero only in rows 1-2 of column 3, so A*A == 0.
struct ErrorModel {
  Matrix3 a = Matrix3::Zero();
  Matrix32 b = Matrix32::Zero();

  double omega_b() const { return b(2, 0); }
};

ErrorModel build_error_model(const LinearCoeffs& coeffs,
                             const DroopConfig& droop, double omega_b);

struct GramianResult {
  Matrix3 p_t = Matrix3::Zero();
  double det_numeric = 0.0;
  double det_closed = 0.0;
  double horizon_t = 0.0;
};

/// Controllability Gramian over [0, t]. Uses exp(A tau) = I + A tau and
/// integrates the resulting quadratic-in-tau integrand exactly.
/// Throws NonPositiveHorizon for t <= 0.
GramianResult gramian(const ErrorModel& model, double t);

/// Closed-form Gramian determinant
/// (1/12) d_p^2 w_b^4 (k_pd + d_q k_pd k_qv - d_q k_pv k_qd)^2 t^5.
double gramian_det_closed(const LinearCoeffs& coeffs, const DroopConfig& droop,
                          double omega_b, double t);

/// Same determinant expressed through the model entries,
/// (1/12) w_b^4 (a13 b22 - a23 b12)^2 t^5.
double gramian_det_closed(const ErrorModel& model, double t);

/// Scalar controllability index F_c; the model is controllable iff F_c != 0.
double controllability_index(const OperatingPoint& op, const NetworkParams& net,
                             const DroopConfig& droop);

/// F_c computed from the model entries (a13 b22 - a23 b12). Agrees with
/// controllability_index() when the model was built from linearize().
double controllability_index(const ErrorModel& model);

inline constexpr double kDefaultControllabilityTolerance = 1e-9;

bool is_controllable(double f_c,
                     double tol = kDefaultControllabilityTolerance);

}  // namespace gfm
