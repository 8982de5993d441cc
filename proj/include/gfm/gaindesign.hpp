#pragma once

#include <array>
#include <complex>
#include <optional>

#include "gfm/powerflow.hpp"
#include "gfm/ssmodel.hpp"

namespace gfm {

// Time-domain design specification. Exactly one of damping/percent_overshoot
// is set. third_pole is the magnitude a of the real closed-loop pole -a.
struct TimeSpec {
  std::optional<double> damping;
  std::optional<double> percent_overshoot;
  double settling_time = 1.0;
  double third_pole = 20.0;
};

struct PoleSet {
  double damping = 0.0;
  double natural_frequency = 0.0;
  double real_pole = 0.0;  // a > 0, eigenvalue at -a

  // Upper half-plane member of the dominant pair.
  std::complex<double> dominant() const;
  std::array<std::complex<double>, 3> roots() const;
};

// Monic cubic lambda^3 + c2 lambda^2 + c1 lambda + c0.
struct CharPoly {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
};

struct GainMatrix {
  Matrix23 k = Matrix23::Zero();
};

struct EstimatorGains {
  double k_p = 0.0;
  double k_q = 0.0;
};

// Percent overshoot <-> damping ratio of an ideal second-order step response.
double overshoot_from_damping(double damping);
double damping_from_overshoot(double percent_overshoot);

// Throws InfeasibleSpec.
PoleSet spec_to_poles(const TimeSpec& spec);

CharPoly target_charpoly(const PoleSet& poles);
CharPoly closed_loop_charpoly(const ErrorModel& model, const GainMatrix& k);

enum class SeedStrategy {
  // Dominant pair on the (e1, z) loop through k11/k13, real pole on the e2
  // loop through k22. Falls back to EvenSplit when that loop is degenerate.
  AngleLoop,
  // k11 and b22*k22 share c2 evenly, all other gains zero.
  EvenSplit,
};

struct SynthesisOptions {
  SeedStrategy seed = SeedStrategy::AngleLoop;
  std::optional<GainMatrix> initial;  // overrides `seed` when set
  int max_iterations = 100;
  double tolerance = 1e-12;  // relative, per coefficient
  double controllability_tolerance = kDefaultControllabilityTolerance;
};

GainMatrix seed_gains(const ErrorModel& model, const PoleSet& poles,
                      SeedStrategy strategy);

// Solves min ||K - K_seed||_F subject to charpoly(A - B K) == target.
// Throws Uncontrollable or NoConvergence.
GainMatrix synthesize_gains(const ErrorModel& model, const PoleSet& poles,
                            const SynthesisOptions& options = {});

struct PlacementReport {
  // Real pole first, then the dominant pair (upper member first).
  std::array<std::complex<double>, 3> eigenvalues{};
  double damping = 0.0;
  double natural_frequency = 0.0;
  double real_pole = 0.0;  // a, i.e. eigenvalue at -a
  double max_relative_error = 0.0;
  bool pass = false;
};

std::array<std::complex<double>, 3> closed_loop_eigenvalues(
    const ErrorModel& model, const GainMatrix& k);

PlacementReport verify_placement(const ErrorModel& model, const GainMatrix& k,
                                 const PoleSet& poles, double tol);

// Throws DegenerateLinearization when the (p, q) Jacobian is singular.
EstimatorGains estimator_gains(const LinearCoeffs& coeffs);

}  // namespace gfm
