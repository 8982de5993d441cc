#include "gfm/gaindesign.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gfm/error.hpp"

namespace gfm {

namespace {

constexpr double kPi = std::numbers::pi;

Matrix3 adjugate(const Matrix3& m) {
  Matrix3 adj;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3;
      const int c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      // Cyclic index order folds the (-1)^(i+j) sign into the minor.
      adj(i, j) = m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
    }
  }
  return adj;
}

CharPoly charpoly_of(const Matrix3& m) {
  const double tr = m.trace();
  return {-tr, 0.5 * (tr * tr - (m * m).trace()), -m.determinant()};
}

Eigen::Vector3d as_vector(const CharPoly& c) { return {c.c2, c.c1, c.c0}; }

}  // namespace

std::complex<double> PoleSet::dominant() const {
  return {-damping * natural_frequency,
          natural_frequency * std::sqrt(std::max(0.0, 1.0 - damping * damping))};
}

std::array<std::complex<double>, 3> PoleSet::roots() const {
  const auto d = dominant();
  return {std::complex<double>(-real_pole, 0.0), d, std::conj(d)};
}

double overshoot_from_damping(double damping) {
  return 100.0 * std::exp(-damping * kPi / std::sqrt(1.0 - damping * damping));
}

double damping_from_overshoot(double percent_overshoot) {
  const double l = std::log(percent_overshoot / 100.0);
  return -l / std::sqrt(kPi * kPi + l * l);
}

PoleSet spec_to_poles(const TimeSpec& spec) {
  if (spec.damping.has_value() == spec.percent_overshoot.has_value()) {
    throw Error(ErrorCode::InfeasibleSpec,
                "exactly one of damping or percent_overshoot must be given");
  }
  if (!(spec.settling_time > 0.0) || !std::isfinite(spec.settling_time)) {
    throw Error(ErrorCode::InfeasibleSpec, "settling_time must be > 0");
  }
  double xi = 0.0;
  if (spec.percent_overshoot) {
    const double po = *spec.percent_overshoot;
    if (!(po > 0.0 && po < 100.0)) {
      throw Error(ErrorCode::InfeasibleSpec,
                  "percent_overshoot must lie in (0, 100)");
    }
    xi = damping_from_overshoot(po);
  } else {
    xi = *spec.damping;
  }
  if (!(xi > 0.0 && xi < 1.0)) {
    throw Error(ErrorCode::InfeasibleSpec, "damping must lie in (0, 1)");
  }
  // 2% settling band: T_s = 4 / (xi w_n).
  const double sigma = 4.0 / spec.settling_time;
  PoleSet poles{xi, sigma / xi, spec.third_pole};
  if (!(spec.third_pole >= 3.0 * sigma) || !std::isfinite(spec.third_pole)) {
    throw Error(ErrorCode::InfeasibleSpec,
                "third pole a=" + std::to_string(spec.third_pole) +
                    " must be at least 3*xi*w_n=" + std::to_string(3.0 * sigma));
  }
  return poles;
}

CharPoly target_charpoly(const PoleSet& p) {
  // (l + a)(l^2 + 2 xi wn l + wn^2)
  const double s2 = 2.0 * p.damping * p.natural_frequency;
  const double wn2 = p.natural_frequency * p.natural_frequency;
  return {p.real_pole + s2, wn2 + s2 * p.real_pole, p.real_pole * wn2};
}

CharPoly closed_loop_charpoly(const ErrorModel& model, const GainMatrix& k) {
  return charpoly_of(model.a - model.b * k.k);
}

GainMatrix seed_gains(const ErrorModel& model, const PoleSet& poles,
                      SeedStrategy strategy) {
  const CharPoly target = target_charpoly(poles);
  const double a13 = model.a(0, 2);
  const double b11 = model.b(0, 0);
  const double b22 = model.b(1, 1);
  const double b31 = model.b(2, 0);

  GainMatrix seed;
  const bool angle_loop_ok = std::abs(a13 * b31) > 1e-12 && std::abs(b22) > 1e-12;
  if (strategy == SeedStrategy::AngleLoop && angle_loop_ok) {
    // (e1, z) loop under u1 = -k11 e1 - k13 z has
    // l^2 + (b11 k11 + b31 k13) l + b31 a13 k11.
    const double wn2 = poles.natural_frequency * poles.natural_frequency;
    const double k11 = wn2 / (b31 * a13);
    const double sum = 2.0 * poles.damping * poles.natural_frequency;
    seed.k(0, 0) = k11;
    seed.k(0, 2) = (sum - b11 * k11) / b31;
    seed.k(1, 1) = poles.real_pole / b22;
    return seed;
  }
  seed.k(0, 0) = 0.5 * target.c2 / b11;
  if (std::abs(b22) > 1e-12) seed.k(1, 1) = 0.5 * target.c2 / b22;
  return seed;
}

namespace {

// d(c2, c1, c0) / dK, columns ordered row-major over K (k11 k12 k13 k21 ...).
Eigen::Matrix<double, 3, 6> charpoly_jacobian(const ErrorModel& model,
                                              const Matrix23& k) {
  const Matrix3 m = model.a - model.b * k;
  const Matrix32 mb = m * model.b;
  const Matrix32 adjb = adjugate(m) * model.b;
  const double tr = m.trace();
  Eigen::Matrix<double, 3, 6> jac;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int col = 3 * i + j;
      jac(0, col) = model.b(j, i);
      jac(1, col) = -tr * model.b(j, i) + mb(j, i);
      jac(2, col) = adjb(j, i);
    }
  }
  return jac;
}

Eigen::Matrix<double, 6, 1> flatten(const Matrix23& k) {
  Eigen::Matrix<double, 6, 1> v;
  v << k(0, 0), k(0, 1), k(0, 2), k(1, 0), k(1, 1), k(1, 2);
  return v;
}

Matrix23 unflatten(const Eigen::Matrix<double, 6, 1>& v) {
  Matrix23 k;
  k << v(0), v(1), v(2), v(3), v(4), v(5);
  return k;
}

struct ProjectionResult {
  bool converged = false;
  Matrix23 k = Matrix23::Zero();
  std::string failure;
};

ProjectionResult project_onto_target(const ErrorModel& model,
                                     const Eigen::Vector3d& target,
                                     const Matrix23& seed,
                                     const SynthesisOptions& options) {
  const Eigen::Vector3d scale =
      target.cwiseAbs().cwiseMax(Eigen::Vector3d::Ones());
  auto scaled_residual = [&](const Matrix23& k) -> Eigen::Vector3d {
    const Eigen::Vector3d g = as_vector(closed_loop_charpoly(model, {k}));
    return (target - g).cwiseQuotient(scale);
  };

  const Eigen::Matrix<double, 6, 1> x0 = flatten(seed);
  Eigen::Matrix<double, 6, 1> x = x0;
  Eigen::Vector3d r = scaled_residual(seed);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Matrix23 k = unflatten(x);
    const Eigen::Matrix<double, 3, 6> jac =
        scale.cwiseInverse().asDiagonal() * charpoly_jacobian(model, k);
    const Eigen::Matrix3d jjt = jac * jac.transpose();
    Eigen::LDLT<Eigen::Matrix3d> ldlt(jjt);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15) {
      return {false, k, "coefficient Jacobian lost rank"};
    }
    // Minimum-norm correction about the seed: the fixed point satisfies
    // g(K) = target with K - K_seed in the row space of the Jacobian.
    const Eigen::Matrix<double, 6, 1> x_next =
        x0 + jac.transpose() * ldlt.solve(r + jac * (x - x0));
    const Eigen::Matrix<double, 6, 1> step = x_next - x;

    const double current = r.lpNorm<Eigen::Infinity>();
    double alpha = 1.0;
    Eigen::Vector3d r_trial;
    for (;;) {
      r_trial = scaled_residual(unflatten(x + alpha * step));
      const double trial = r_trial.lpNorm<Eigen::Infinity>();
      // Near feasibility accept full steps; they move along the constraint
      // manifold toward the minimum-norm point.
      if (trial < current || trial <= options.tolerance) break;
      alpha *= 0.5;
      if (alpha < 1e-10) return {false, k, "line search stalled"};
    }
    x += alpha * step;
    r = r_trial;

    const bool feasible = r.lpNorm<Eigen::Infinity>() <= options.tolerance;
    const bool stationary =
        (alpha * step).lpNorm<Eigen::Infinity>() <=
        1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>());
    if (feasible && stationary) return {true, unflatten(x), {}};
  }
  if (r.lpNorm<Eigen::Infinity>() <= options.tolerance) {
    return {true, unflatten(x), {}};
  }
  return {false, unflatten(x), "iteration budget exhausted"};
}

}  // namespace

GainMatrix synthesize_gains(const ErrorModel& model, const PoleSet& poles,
                            const SynthesisOptions& options) {
  const double f_c = controllability_index(model);
  if (!is_controllable(f_c, options.controllability_tolerance)) {
    throw Error(ErrorCode::Uncontrollable,
                "model is not controllable (F_c = " + std::to_string(f_c) + ")");
  }
  const Eigen::Vector3d target = as_vector(target_charpoly(poles));

  std::vector<Matrix23> seeds;
  if (options.initial) {
    seeds.push_back(options.initial->k);
  } else {
    seeds.push_back(seed_gains(model, poles, options.seed).k);
  }
  seeds.push_back(seed_gains(model, poles, SeedStrategy::EvenSplit).k);

  std::string failure;
  for (const Matrix23& seed : seeds) {
    ProjectionResult result = project_onto_target(model, target, seed, options);
    if (result.converged) return {result.k};
    failure = result.failure;
  }
  throw Error(ErrorCode::NoConvergence, "gain synthesis failed: " + failure);
}

std::array<std::complex<double>, 3> closed_loop_eigenvalues(
    const ErrorModel& model, const GainMatrix& k) {
  Eigen::EigenSolver<Matrix3> solver(model.a - model.b * k.k, false);
  const auto ev = solver.eigenvalues();
  std::array<std::complex<double>, 3> out{ev(0), ev(1), ev(2)};

  // Real pole = the most negative purely real eigenvalue; when the spectrum
  // contains a complex pair that is the lone real one.
  auto is_real = [&](const std::complex<double>& z) {
    return std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z));
  };
  int real_index = -1;
  for (int i = 0; i < 3; ++i) {
    if (!is_real(out[i])) continue;
    if (real_index < 0 || out[i].real() < out[real_index].real()) real_index = i;
  }
  if (real_index < 0) real_index = 0;
  std::swap(out[0], out[real_index]);
  out[0] = {out[0].real(), 0.0};
  if (out[1].imag() < out[2].imag()) std::swap(out[1], out[2]);
  return out;
}

PlacementReport verify_placement(const ErrorModel& model, const GainMatrix& k,
                                 const PoleSet& poles, double tol) {
  PlacementReport report;
  report.eigenvalues = closed_loop_eigenvalues(model, k);
  const auto& ev = report.eigenvalues;

  report.real_pole = -ev[0].real();
  // Dominant pair as the quadratic (l - l1)(l - l2).
  const double sum = (ev[1] + ev[2]).real();
  const double product = (ev[1] * ev[2]).real();
  report.natural_frequency = std::sqrt(std::abs(product));
  report.damping = report.natural_frequency > 0.0
                       ? -sum / (2.0 * report.natural_frequency)
                       : 0.0;

  const auto targets = poles.roots();
  std::array<int, 3> perm{0, 1, 2};
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double denom = std::abs(targets[i]);
      const double err = std::abs(ev[perm[i]] - targets[i]);
      worst = std::max(worst, denom > 0.0 ? err / denom : err);
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));

  report.max_relative_error = best;
  report.pass = best <= tol;
  return report;
}

EstimatorGains estimator_gains(const LinearCoeffs& c) {
  const double det = c.determinant();
  const double scale =
      std::abs(c.k_pdelta * c.k_qv) + std::abs(c.k_pv * c.k_qdelta);
  if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale || det == 0.0) {
    throw Error(ErrorCode::DegenerateLinearization,
                "k_pdelta*k_qv - k_pv*k_qdelta vanishes; angle cannot be "
                "estimated from (p, q)");
  }
  return {c.k_qv / det, c.k_pv / det};
}

}  // namespace gfm
