#include "gfm/ssmodel.hpp"

#include <cmath>
#include <string>

#include "gfm/error.hpp"

namespace gfm {

ErrorModel build_error_model(const LinearCoeffs& coeffs,
                             const DroopConfig& droop, double omega_b) {
  ErrorModel m;
  m.a(0, 2) = droop.d_p * coeffs.k_pdelta;
  m.a(1, 2) = droop.d_q * coeffs.k_qdelta;
  m.b << 1.0, droop.d_p * coeffs.k_pv,
         0.0, 1.0 + droop.d_q * coeffs.k_qv,
         omega_b, 0.0;
  return m;
}

GramianResult gramian(const ErrorModel& model, double t) {
  if (!(t > 0.0)) {
    throw Error(ErrorCode::NonPositiveHorizon,
                "Gramian horizon must be positive, got " + std::to_string(t));
  }
  // (I + A tau) M (I + A^T tau) = M + (A M + M A^T) tau + A M A^T tau^2
  const Matrix3 m = model.b * model.b.transpose();
  const Matrix3 linear = model.a * m + m * model.a.transpose();
  const Matrix3 quadratic = model.a * m * model.a.transpose();

  GramianResult out;
  out.horizon_t = t;
  out.p_t = m * t + linear * (t * t / 2.0) + quadratic * (t * t * t / 3.0);
  // Symmetric by construction; remove roundoff asymmetry.
  out.p_t = 0.5 * (out.p_t + out.p_t.transpose()).eval();
  out.det_numeric = out.p_t.determinant();
  out.det_closed = gramian_det_closed(model, t);
  return out;
}

double gramian_det_closed(const LinearCoeffs& c, const DroopConfig& droop,
                          double omega_b, double t) {
  const double inner = c.k_pdelta + droop.d_q * c.k_pdelta * c.k_qv -
                       droop.d_q * c.k_pv * c.k_qdelta;
  const double wb2 = omega_b * omega_b;
  return droop.d_p * droop.d_p * wb2 * wb2 * inner * inner * std::pow(t, 5) /
         12.0;
}

double gramian_det_closed(const ErrorModel& model, double t) {
  const double index = controllability_index(model);
  const double wb = model.omega_b();
  return wb * wb * wb * wb * index * index * std::pow(t, 5) / 12.0;
}

double controllability_index(const OperatingPoint& op, const NetworkParams& net,
                             const DroopConfig& droop) {
  const double s = std::sin(op.delta0);
  const double c = std::cos(op.delta0);
  const double bracket = net.r_g * s + net.x_g * c - droop.d_q * net.v_g +
                         2.0 * op.v0 * droop.d_q * c;
  return droop.d_p * op.v0 * net.v_g * bracket / net.impedance_sq();
}

double controllability_index(const ErrorModel& model) {
  return model.a(0, 2) * model.b(1, 1) - model.a(1, 2) * model.b(0, 1);
}

bool is_controllable(double f_c, double tol) {
  if (!(tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  }
  return std::abs(f_c) > tol;
}

}  // namespace gfm
