#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "gfm/error.hpp"
#include "gfm/ssmodel.hpp"
#include "oracles.hpp"

using namespace gfm;

namespace {

constexpr double kOmegaB = 100 * std::numbers::pi;
const NetworkParams kNet{0.0, 0.09817477042468103, 1.0, 1.0, kOmegaB};
const DroopConfig kDroop{0.01, 0.05};
const SetPoints kSet{1.0, 1.0, 0.5, 0.0};

struct Built {
  OperatingPoint op;
  LinearCoeffs coeffs;
  ErrorModel model;
};

Built build(const NetworkParams& net, const DroopConfig& droop,
            const SetPoints& sp) {
  Built b;
  b.op = solve_equilibrium(net, droop, sp);
  b.coeffs = linearize(b.op, net);
  b.model = build_error_model(b.coeffs, droop, net.omega_b);
  return b;
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace

TEST_CASE("error model of the reference setup") {
  const Built b = build(kNet, kDroop, kSet);
  const ErrorModel& m = b.model;
  CHECK(std::abs(m.a(0, 2) - 0.1017) < 1e-4);
  CHECK(std::abs(m.a(1, 2) - 0.025) < 1e-4);
  CHECK(m.a(2, 2) == 0.0);
  CHECK(m.b(0, 0) == 1.0);
  CHECK(std::abs(m.b(0, 1) - 0.005) < 1e-4);
  CHECK(m.b(1, 0) == 0.0);
  CHECK(std::abs(m.b(1, 1) - 1.5095) < 1e-4);
  CHECK(std::abs(m.b(2, 0) - 314.1593) < 1e-4);
  CHECK(m.b(2, 1) == 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(m.a(i, j) == 0.0);
  }
}

TEST_CASE("error model without droops") {
  const ErrorModel m =
      build_error_model(LinearCoeffs{10, 0.5, 0.5, 10}, DroopConfig{0, 0}, kOmegaB);
  CHECK(m.a.isZero(0));
  Matrix32 expected;
  expected << 1, 0, 0, 1, kOmegaB, 0;
  CHECK(m.b == expected);
}

TEST_CASE("state matrix is nilpotent and exp(A tau) = I + A tau") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> tau(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_setup(rng);
    const ErrorModel m = build(s.net, s.droop, s.sp).model;
    CHECK((m.a * m.a).isZero(0));
    const double t = tau(rng);
    const Matrix3 series = oracle::expm_series(m.a * t);
    const Matrix3 closed = Matrix3::Identity() + m.a * t;
    CHECK((series - closed).lpNorm<Eigen::Infinity>() < 1e-14);
  }
}

TEST_CASE("Gramian corner entry is w_b^2 t and small-t limit is B B^T") {
  const ErrorModel m = build(kNet, kDroop, kSet).model;
  for (double t : {0.1, 1.0, 10.0}) {
    const GramianResult g = gramian(m, t);
    CHECK(g.p_t(2, 2) == doctest::Approx(kOmegaB * kOmegaB * t).epsilon(1e-14));
  }
  const double t = 1e-9;
  const Matrix3 ratio = gramian(m, t).p_t / t;
  const Matrix3 bbt = m.b * m.b.transpose();
  CHECK((ratio - bbt).lpNorm<Eigen::Infinity>() <
        1e-6 * bbt.lpNorm<Eigen::Infinity>());
}

TEST_CASE("Gramian matches Simpson quadrature of the matrix exponential") {
  const ErrorModel m = build(kNet, kDroop, kSet).model;
  const Matrix3 exact = gramian(m, 1.0).p_t;
  const Matrix3 quad = oracle::gramian_quadrature(m, 1.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(rel(exact(i, j), quad(i, j)) < 1e-8);
  }
  CHECK(rel(exact.determinant(), quad.determinant()) < 1e-8);
}

TEST_CASE("printed off-diagonal Gramian term uses (1 + d_q k_qv)") {
  // P_12 linear-in-t coefficient is b12 * b22 = d_p k_pv (1 + d_q k_qv).
  const Built b = build(kNet, kDroop, kSet);
  const double t = 1e-7;
  const double p12 = gramian(b.model, t).p_t(0, 1) / t;
  const double expected =
      kDroop.d_p * b.coeffs.k_pv * (1 + kDroop.d_q * b.coeffs.k_qv);
  CHECK(p12 == doctest::Approx(expected).epsilon(1e-5));
}

TEST_CASE("Gramian is symmetric positive semidefinite for random models") {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_setup(rng);
    const ErrorModel m = build(s.net, s.droop, s.sp).model;
    for (double t : {0.1, 1.0, 10.0}) {
      const Matrix3 p = gramian(m, t).p_t;
      CHECK(p == p.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix3> es(p);
      const double lambda_max = es.eigenvalues().maxCoeff();
      CHECK(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, lambda_max));
    }
  }
}

TEST_CASE("Gramian determinant equals the closed form") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_setup(rng);
    const Built b = build(s.net, s.droop, s.sp);
    for (double t : {0.1, 1.0, 10.0}) {
      const GramianResult g = gramian(b.model, t);
      const double closed =
          gramian_det_closed(b.coeffs, s.droop, s.net.omega_b, t);
      CHECK(rel(g.det_closed, closed) < 1e-12);
      CHECK(rel(g.det_numeric, closed) < 1e-8);
    }
  }
}

TEST_CASE("closed-form determinant properties") {
  const Built b = build(kNet, kDroop, kSet);
  CHECK(gramian_det_closed(b.coeffs, DroopConfig{0.0, 0.05}, kOmegaB, 1.0) == 0.0);
  const double d1 = gramian_det_closed(b.coeffs, kDroop, kOmegaB, 1.0);
  const double d2 = gramian_det_closed(b.coeffs, kDroop, kOmegaB, 2.0);
  CHECK(d2 / d1 == doctest::Approx(32.0).epsilon(1e-14));
  const double quad = oracle::gramian_quadrature(b.model, 1.0).determinant();
  CHECK(rel(d1, quad) < 1e-8);
}

TEST_CASE("non-positive horizon is rejected") {
  const ErrorModel m = build(kNet, kDroop, kSet).model;
  for (double t : {0.0, -1.0}) {
    try {
      gramian(m, t);
      FAIL("expected NonPositiveHorizon");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonPositiveHorizon);
    }
  }
}

TEST_CASE("controllability index of the reference setup") {
  const Built b = build(kNet, kDroop, kSet);
  const double f_c = controllability_index(b.op, kNet, kDroop);
  CHECK(std::abs(f_c - 0.1534) < 1e-3);
  CHECK(is_controllable(f_c, 1e-6));
  CHECK(controllability_index(b.op, kNet, DroopConfig{0.0, 0.05}) == 0.0);
  CHECK(controllability_index(b.model) == doctest::Approx(f_c).epsilon(1e-12));
}

TEST_CASE("controllability index on a resistive line") {
  const NetworkParams net{0.1, 0.0, 1.0, 1.0, kOmegaB};
  const OperatingPoint op = make_operating_point(0.2, 1.02, net);
  const double f_c = controllability_index(op, net, kDroop);
  const double reduced =
      kDroop.d_p * op.v0 * net.v_g *
      (net.r_g * std::sin(op.delta0) - kDroop.d_q * net.v_g +
       2 * op.v0 * kDroop.d_q * std::cos(op.delta0)) /
      (net.r_g * net.r_g);
  CHECK(f_c == doctest::Approx(reduced).epsilon(1e-14));
}

TEST_CASE("determinant and F_c vanish together") {
  std::mt19937_64 rng(24);
  std::bernoulli_distribution zero_droop(0.3);
  for (int i = 0; i < 100; ++i) {
    auto s = oracle::random_setup(rng);
    if (zero_droop(rng)) s.droop.d_p = 0.0;
    const Built b = build(s.net, s.droop, s.sp);
    const double f_c = controllability_index(b.op, s.net, s.droop);
    const double det = gramian_det_closed(b.coeffs, s.droop, s.net.omega_b, 1.0);
    CHECK((det == 0.0) == (f_c == 0.0));
    // det = w_b^4 F_c^2 t^5 / 12
    const double wb2 = s.net.omega_b * s.net.omega_b;
    CHECK(det == doctest::Approx(wb2 * wb2 * f_c * f_c / 12).epsilon(1e-12));
  }
}

TEST_CASE("is_controllable is sign independent") {
  CHECK(is_controllable(0.1534, 1e-6));
  CHECK_FALSE(is_controllable(0.0, 1e-6));
  CHECK(is_controllable(-0.01, 1e-6));
  CHECK_FALSE(is_controllable(1e-10));
  CHECK_THROWS_AS(is_controllable(1.0, 0.0), Error);
}
