#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gfm/config.hpp"
#include "gfm/error.hpp"

namespace gfm {

enum class DesignStep { Preparation, Linearization, Controllability, Parameters };

std::string_view to_string(DesignStep step);

// Error raised by run_design; remembers which design step failed.
class DesignError : public Error {
 public:
  DesignError(DesignStep step, const Error& cause)
      : Error(cause.code(), cause.what()), step_(step) {}
  DesignStep step() const noexcept { return step_; }

 private:
  DesignStep step_;
};

struct DesignReport {
  NetworkParams net;
  DroopConfig droop;
  SetPoints sp;
  OperatingPoint op;
  LinearCoeffs coeffs;
  ErrorModel model;
  double f_c = 0.0;
  bool controllable = false;
  PoleSet poles;
  CharPoly target;
  GainMatrix gains;
  EstimatorGains estimator;
  PlacementReport placement;
};

// Preparation -> Linearization -> Controllability checking -> Parameters.
// Throws DesignError.
DesignReport run_design(const ProjectConfig& config);

json to_json(const DesignReport& report);
DesignReport report_from_json(const json& j);

// Accepts either a bare {"k", "k_p", "k_q"} object or a full design report.
GainOverride gains_from_json(const json& j);

// Achieved dominant-pair and real-pole figures against the specification:
// damping within +-0.02, xi*w_n within 5%, real pole within 10%.
struct SpecCheck {
  bool damping_ok = false;
  bool decay_rate_ok = false;
  bool real_pole_ok = false;
  bool pass() const { return damping_ok && decay_rate_ok && real_pole_ok; }
};
SpecCheck check_against_spec(const PlacementReport& achieved,
                             const PoleSet& target);

// Evaluates user-supplied gains against the configured time spec.
struct VerifyResult {
  DesignReport report;  // placement computed for the supplied gains
  double tolerance = 0.0;
  SpecCheck spec;
};
VerifyResult run_verify(const ProjectConfig& config, const GainOverride& gains,
                        double tolerance);
json to_json(const VerifyResult& result);

Scenario make_scenario(const ProjectConfig& config, const DesignReport& report);

struct ChannelMetrics {
  std::string channel;
  bool settled = false;
  StepMetrics metrics;
  std::string note;  // why the metrics are missing when !settled
};

struct SimulationResult {
  TimeSeries series;
  std::optional<double> event_time;
  std::vector<ChannelMetrics> channels;
  double final_e1 = 0.0;
  double final_e2 = 0.0;

  const ChannelMetrics& metrics(std::string_view channel) const;
};

SimulationResult simulate(const ProjectConfig& config,
                          const DesignReport& report);
json metrics_json(const SimulationResult& result);

// Writes timeseries.csv and metrics.json into out_dir.
SimulationResult run_simulation(const ProjectConfig& config,
                                const DesignReport& report,
                                const std::filesystem::path& out_dir);

// Built-in cases 1..7 of the reference setup. Throws InvalidArgument for an
// unknown id.
ProjectConfig builtin_case(int id);
std::string builtin_case_description(int id);

struct CaseResult {
  int id = 0;
  bool ok = false;
  std::string error;
  double scr = 0.0;
  double x_over_r = 0.0;  // +inf for a purely inductive line
  TimeSpec spec;
  std::optional<DesignReport> report;
  std::optional<ChannelMetrics> p_metrics;
  double final_e1 = 0.0;
  double final_e2 = 0.0;
  double final_p = 0.0;
};

// Runs design + simulation per case; failures are collected, not thrown.
// When out_dir is set each case writes into out_dir/case<id>/ and a summary
// is written to out_dir/summary.{json,csv}.
std::vector<CaseResult> run_case_suite(
    const std::vector<int>& ids,
    const std::optional<std::filesystem::path>& out_dir = std::nullopt);

json summary_json(const std::vector<CaseResult>& results);
std::string summary_csv(const std::vector<CaseResult>& results);

}  // namespace gfm
