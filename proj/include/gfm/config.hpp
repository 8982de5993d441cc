#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gfm/gaindesign.hpp"
#include "gfm/powerflow.hpp"
#include "gfm/simulator.hpp"

namespace gfm {

using json = nlohmann::json;

struct GainOverride {
  GainMatrix gains;
  std::optional<EstimatorGains> estimator;
};

struct SimulationSettings {
  double dt = 1e-4;
  double t_end = 5.0;
  std::vector<Event> events;
};

// Canonical per-unit view of a project configuration. SI quantities are
// converted on ingest.
struct ProjectConfig {
  PerUnitBases bases;
  NetworkParams net;
  DroopConfig droop;
  SetPoints sp;
  TimeSpec design;
  SeedStrategy seed = SeedStrategy::AngleLoop;
  double controllability_tolerance = kDefaultControllabilityTolerance;
  SimulationSettings simulation;
  std::optional<GainOverride> gains;
};

// Throws ConfigInvalid with the offending key in the message.
ProjectConfig parse_config(const json& j);
ProjectConfig load_config(const std::filesystem::path& path);
json to_json(const ProjectConfig& config);

// "p_set:0.5->1.0@1.0s"; the arrow may also be the unicode right arrow and
// the trailing "s" is optional. Throws ConfigInvalid.
Event parse_event(std::string_view spec);
std::string format_event(const Event& e);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Throws IOError.
json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

std::string to_csv(const TimeSeries& ts);

}  // namespace gfm
