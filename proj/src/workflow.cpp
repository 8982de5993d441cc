#include "gfm/workflow.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <sstream>

namespace gfm {

std::string_view to_string(DesignStep step) {
  switch (step) {
    case DesignStep::Preparation: return "preparation";
    case DesignStep::Linearization: return "linearization";
    case DesignStep::Controllability: return "controllability";
    case DesignStep::Parameters: return "parameters";
  }
  return "unknown";
}

namespace {

template <typename F>
auto in_step(DesignStep step, F&& body) {
  try {
    return body();
  } catch (const DesignError&) {
    throw;
  } catch (const Error& e) {
    throw DesignError(step, e);
  }
}

constexpr double kPlacementTolerance = 1e-6;

}  // namespace

DesignReport run_design(const ProjectConfig& config) {
  DesignReport r;
  r.net = config.net;
  r.droop = config.droop;
  r.sp = config.sp;

  r.poles = in_step(DesignStep::Preparation,
                    [&] { return spec_to_poles(config.design); });
  r.target = target_charpoly(r.poles);

  in_step(DesignStep::Linearization, [&] {
    r.op = solve_equilibrium(config.net, config.droop, config.sp);
    r.coeffs = linearize(r.op, config.net);
    r.model = build_error_model(r.coeffs, config.droop, config.net.omega_b);
    return 0;
  });

  in_step(DesignStep::Controllability, [&] {
    r.f_c = controllability_index(r.op, config.net, config.droop);
    r.controllable = is_controllable(r.f_c, config.controllability_tolerance);
    if (!r.controllable) {
      throw Error(ErrorCode::Uncontrollable,
                  "F_c = " + format_double(r.f_c) +
                      " is within tolerance of zero; the power loops are not "
                      "controllable at this operating point");
    }
    return 0;
  });

  in_step(DesignStep::Parameters, [&] {
    if (config.gains) {
      r.gains = config.gains->gains;
      r.estimator = config.gains->estimator.value_or(estimator_gains(r.coeffs));
    } else {
      r.estimator = estimator_gains(r.coeffs);
      SynthesisOptions options;
      options.seed = config.seed;
      options.controllability_tolerance = config.controllability_tolerance;
      r.gains = synthesize_gains(r.model, r.poles, options);
    }
    r.placement =
        verify_placement(r.model, r.gains, r.poles, kPlacementTolerance);
    return 0;
  });
  return r;
}

namespace {

json matrix_json(const auto& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

template <typename M>
M matrix_from(const json& j) {
  M m;
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < m.cols(); ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

json placement_json(const PlacementReport& p) {
  json ev = json::array();
  for (const auto& z : p.eigenvalues) ev.push_back({z.real(), z.imag()});
  return {{"eigenvalues", ev},
          {"damping", p.damping},
          {"natural_frequency", p.natural_frequency},
          {"decay_rate", p.damping * p.natural_frequency},
          {"real_pole", p.real_pole},
          {"max_relative_error", p.max_relative_error},
          {"pass", p.pass}};
}

}  // namespace

json to_json(const DesignReport& r) {
  json j;
  j["units"] = {{"angles", "rad"},
                {"electrical", "pu"},
                {"omega_b", "rad/s"},
                {"eigenvalues", "1/s"},
                {"time", "s"}};
  j["network"] = {{"r_g", r.net.r_g}, {"x_g", r.net.x_g}, {"v_g", r.net.v_g},
                  {"omega_g", r.net.omega_g}, {"omega_b", r.net.omega_b},
                  {"scr", scr(r.net)}};
  j["droop"] = {{"d_p", r.droop.d_p}, {"d_q", r.droop.d_q}};
  j["setpoints"] = {{"omega_set", r.sp.omega_set}, {"v_set", r.sp.v_set},
                    {"p_set", r.sp.p_set}, {"q_set", r.sp.q_set}};
  j["operating_point"] = {{"delta0", r.op.delta0}, {"v0", r.op.v0},
                          {"p0", r.op.p0}, {"q0", r.op.q0}};
  j["linearization"] = {{"k_pdelta", r.coeffs.k_pdelta},
                        {"k_pv", r.coeffs.k_pv},
                        {"k_qdelta", r.coeffs.k_qdelta},
                        {"k_qv", r.coeffs.k_qv}};
  j["model"] = {{"A", matrix_json(r.model.a)}, {"B", matrix_json(r.model.b)}};
  j["controllability"] = {{"f_c", r.f_c}, {"controllable", r.controllable}};
  j["target"] = {{"damping", r.poles.damping},
                 {"natural_frequency", r.poles.natural_frequency},
                 {"real_pole", r.poles.real_pole},
                 {"charpoly", {r.target.c2, r.target.c1, r.target.c0}}};
  j["gains"] = {{"k", matrix_json(r.gains.k)},
                {"k_p", r.estimator.k_p},
                {"k_q", r.estimator.k_q}};
  j["achieved"] = placement_json(r.placement);
  return j;
}

DesignReport report_from_json(const json& j) {
  try {
    DesignReport r;
    const json& n = j.at("network");
    r.net = {n.at("r_g").get<double>(), n.at("x_g").get<double>(),
             n.at("v_g").get<double>(), n.at("omega_g").get<double>(),
             n.at("omega_b").get<double>()};
    r.droop = {j.at("droop").at("d_p").get<double>(),
               j.at("droop").at("d_q").get<double>()};
    const json& s = j.at("setpoints");
    r.sp = {s.at("omega_set").get<double>(), s.at("v_set").get<double>(),
            s.at("p_set").get<double>(), s.at("q_set").get<double>()};
    const json& op = j.at("operating_point");
    r.op = {op.at("delta0").get<double>(), op.at("v0").get<double>(),
            op.at("p0").get<double>(), op.at("q0").get<double>()};
    const json& c = j.at("linearization");
    r.coeffs = {c.at("k_pdelta").get<double>(), c.at("k_pv").get<double>(),
                c.at("k_qdelta").get<double>(), c.at("k_qv").get<double>()};
    r.model.a = matrix_from<Matrix3>(j.at("model").at("A"));
    r.model.b = matrix_from<Matrix32>(j.at("model").at("B"));
    r.f_c = j.at("controllability").at("f_c").get<double>();
    r.controllable = j.at("controllability").at("controllable").get<bool>();
    const json& t = j.at("target");
    r.poles = {t.at("damping").get<double>(),
               t.at("natural_frequency").get<double>(),
               t.at("real_pole").get<double>()};
    r.target = {t.at("charpoly").at(0).get<double>(),
                t.at("charpoly").at(1).get<double>(),
                t.at("charpoly").at(2).get<double>()};
    r.gains.k = matrix_from<Matrix23>(j.at("gains").at("k"));
    r.estimator = {j.at("gains").at("k_p").get<double>(),
                   j.at("gains").at("k_q").get<double>()};
    const json& a = j.at("achieved");
    for (int i = 0; i < 3; ++i) {
      r.placement.eigenvalues[i] = {a.at("eigenvalues").at(i).at(0).get<double>(),
                                    a.at("eigenvalues").at(i).at(1).get<double>()};
    }
    r.placement.damping = a.at("damping").get<double>();
    r.placement.natural_frequency = a.at("natural_frequency").get<double>();
    r.placement.real_pole = a.at("real_pole").get<double>();
    r.placement.max_relative_error = a.at("max_relative_error").get<double>();
    r.placement.pass = a.at("pass").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid,
                std::string("malformed design report: ") + e.what());
  }
}

GainOverride gains_from_json(const json& j) {
  const json& g = j.contains("gains") ? j.at("gains") : j;
  try {
    GainOverride o;
    o.gains.k = matrix_from<Matrix23>(g.at("k"));
    if (!o.gains.k.allFinite()) {
      throw Error(ErrorCode::ConfigInvalid, "gain entries must be finite");
    }
    if (g.contains("k_p") && g.contains("k_q")) {
      o.estimator = EstimatorGains{g.at("k_p").get<double>(),
                                   g.at("k_q").get<double>()};
    }
    return o;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid,
                std::string("malformed gains: ") + e.what());
  }
}

SpecCheck check_against_spec(const PlacementReport& a, const PoleSet& t) {
  const double target_decay = t.damping * t.natural_frequency;
  const double decay = a.damping * a.natural_frequency;
  SpecCheck c;
  c.damping_ok = std::abs(a.damping - t.damping) <= 0.02;
  c.decay_rate_ok = std::abs(decay - target_decay) <= 0.05 * target_decay;
  c.real_pole_ok = std::abs(a.real_pole - t.real_pole) <= 0.10 * t.real_pole;
  return c;
}

VerifyResult run_verify(const ProjectConfig& config, const GainOverride& gains,
                        double tolerance) {
  ProjectConfig with_gains = config;
  with_gains.gains = gains;
  VerifyResult out;
  out.report = run_design(with_gains);
  out.tolerance = tolerance;
  out.report.placement = verify_placement(out.report.model, out.report.gains,
                                          out.report.poles, tolerance);
  out.spec = check_against_spec(out.report.placement, out.report.poles);
  return out;
}

json to_json(const VerifyResult& v) {
  json j = placement_json(v.report.placement);
  j["tolerance"] = v.tolerance;
  j["target"] = {{"damping", v.report.poles.damping},
                 {"natural_frequency", v.report.poles.natural_frequency},
                 {"real_pole", v.report.poles.real_pole}};
  j["spec_check"] = {{"damping_ok", v.spec.damping_ok},
                     {"decay_rate_ok", v.spec.decay_rate_ok},
                     {"real_pole_ok", v.spec.real_pole_ok},
                     {"pass", v.spec.pass()}};
  return j;
}

Scenario make_scenario(const ProjectConfig& config, const DesignReport& report) {
  Scenario s;
  s.net = config.net;
  s.droop = config.droop;
  s.sp = config.sp;
  s.gains = report.gains;
  s.estimator = report.estimator;
  s.design_op = report.op;
  s.dt = config.simulation.dt;
  s.t_end = config.simulation.t_end;
  s.events = config.simulation.events;
  return s;
}

const ChannelMetrics& SimulationResult::metrics(std::string_view channel) const {
  for (const auto& c : channels) {
    if (c.channel == channel) return c;
  }
  throw Error(ErrorCode::InvalidArgument,
              "no metrics for channel '" + std::string(channel) + "'");
}

SimulationResult simulate(const ProjectConfig& config,
                          const DesignReport& report) {
  SimulationResult out;
  out.series = run(make_scenario(config, report));
  if (!config.simulation.events.empty()) {
    out.event_time = config.simulation.events.front().time;
  }
  const double t_event = out.event_time.value_or(0.0);
  for (std::string_view name : TimeSeries::channel_names()) {
    if (name == "t") continue;
    ChannelMetrics cm;
    cm.channel = std::string(name);
    try {
      cm.metrics = measure_metrics(out.series, name, t_event);
      cm.settled = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unsettled) throw;
      cm.settled = false;
      cm.note = e.what();
    }
    out.channels.push_back(cm);
  }
  out.final_e1 = out.series.e1.back();
  out.final_e2 = out.series.e2.back();
  return out;
}

json metrics_json(const SimulationResult& r) {
  json channels = json::object();
  for (const auto& c : r.channels) {
    json m = {{"settled", c.settled}};
    if (c.settled) {
      m["percent_overshoot"] = c.metrics.percent_overshoot;
      m["settling_time_s"] = c.metrics.settling_time;
      m["steady_value"] = c.metrics.steady_value;
      m["initial_value"] = c.metrics.initial_value;
      m["step_size"] = c.metrics.step_size;
    } else {
      m["note"] = c.note;
    }
    channels[c.channel] = m;
  }
  json j;
  j["event_time_s"] = r.event_time ? json(*r.event_time) : json(nullptr);
  j["dt_s"] = r.series.dt;
  j["t_end_s"] = r.series.t.empty() ? 0.0 : r.series.t.back();
  j["channels"] = channels;
  j["final_droop_residuals"] = {{"e1", r.final_e1}, {"e2", r.final_e2}};
  return j;
}

SimulationResult run_simulation(const ProjectConfig& config,
                                 const DesignReport& report,
                                 const std::filesystem::path& out_dir) {
  SimulationResult result = simulate(config, report);
  write_text(out_dir / "timeseries.csv", to_csv(result.series));
  write_text(out_dir / "metrics.json", metrics_json(result).dump(2) + "\n");
  return result;
}

namespace {

// Reference setup: 200 V / 5 kW / 50 Hz, droops 0.01 and 0.05, P_set 0.5.
json reference_config() {
  return {
      {"bases", {{"v_n", 200.0}, {"s_n", 5000.0}, {"f_n", 50.0}}},
      {"network",
       {{"r_g", {{"value", 0.0}, {"unit", "ohm"}}},
        {"x_g", {{"value", 2.5}, {"unit", "mH"}}},
        {"v_g", 1.0},
        {"omega_g", 1.0}}},
      {"droop", {{"d_p", 0.01}, {"d_q", 0.05}}},
      {"setpoints",
       {{"omega_set", 1.0}, {"v_set", 1.0}, {"p_set", 0.5}, {"q_set", 0.0}}},
      {"design", {{"damping", 0.707}, {"settling_time", 1.0}, {"third_pole", 20.0}}},
      {"simulation",
       {{"dt", 1e-4}, {"t_end", 6.0}, {"events", {"p_set:0.5->1.0@1.0s"}}}},
  };
}

}  // namespace

ProjectConfig builtin_case(int id) {
  json j = reference_config();
  auto& design = j["design"];
  auto& net = j["network"];
  switch (id) {
    case 1: design["damping"] = 0.4; design["settling_time"] = 1.0; break;
    case 2: design["damping"] = 0.4; design["settling_time"] = 2.0; break;
    case 3: break;
    case 4: design["settling_time"] = 2.0; break;
    case 5:
      net["r_g"] = {{"value", 0.6}, {"unit", "ohm"}};
      net["x_g"] = {{"value", 2.0}, {"unit", "mH"}};
      break;
    case 6: net["x_g"] = {{"value", 10.0}, {"unit", "mH"}}; break;
    case 7: net["x_g"] = {{"value", 13.0}, {"unit", "mH"}}; break;
    default:
      throw Error(ErrorCode::InvalidArgument,
                  "unknown case id " + std::to_string(id) + " (expected 1..7)");
  }
  return parse_config(j);
}

std::string builtin_case_description(int id) {
  switch (id) {
    case 1: return "xi=0.4, Ts=1 s, a=20, inductive line";
    case 2: return "xi=0.4, Ts=2 s, a=20, inductive line";
    case 3: return "xi=0.707, Ts=1 s, a=20, inductive line";
    case 4: return "xi=0.707, Ts=2 s, a=20, inductive line";
    case 5: return "case 3 spec, complex line 0.075+j0.0785 pu";
    case 6: return "case 3 spec, weak grid x_g=0.3927 pu";
    case 7: return "case 3 spec, very weak grid x_g=0.5105 pu";
    default: return "unknown";
  }
}

namespace {

CaseResult run_one_case(int id,
                        const std::optional<std::filesystem::path>& out_dir) {
  CaseResult c;
  c.id = id;
  try {
    const ProjectConfig config = builtin_case(id);
    c.spec = config.design;
    c.scr = scr(config.net);
    c.x_over_r = config.net.r_g > 0.0
                     ? config.net.x_g / config.net.r_g
                     : std::numeric_limits<double>::infinity();
    c.report = run_design(config);
    SimulationResult sim;
    if (out_dir) {
      const auto dir = *out_dir / ("case" + std::to_string(id));
      write_text(dir / "report.json", to_json(*c.report).dump(2) + "\n");
      sim = run_simulation(config, *c.report, dir);
    } else {
      sim = simulate(config, *c.report);
    }
    c.p_metrics = sim.metrics("p");
    c.final_e1 = sim.final_e1;
    c.final_e2 = sim.final_e2;
    c.final_p = sim.series.p.back();
    c.ok = c.p_metrics->settled;
    if (!c.ok) c.error = "p channel did not settle";
  } catch (const Error& e) {
    c.ok = false;
    c.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  return c;
}

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

std::vector<CaseResult> run_case_suite(
    const std::vector<int>& ids,
    const std::optional<std::filesystem::path>& out_dir) {
  std::vector<std::future<CaseResult>> pending;
  pending.reserve(ids.size());
  for (int id : ids) {
    pending.push_back(
        std::async(std::launch::async, run_one_case, id, out_dir));
  }
  std::vector<CaseResult> results;
  results.reserve(ids.size());
  for (auto& f : pending) results.push_back(f.get());

  if (out_dir) {
    write_text(*out_dir / "summary.json", summary_json(results).dump(2) + "\n");
    write_text(*out_dir / "summary.csv", summary_csv(results));
  }
  return results;
}

json summary_json(const std::vector<CaseResult>& results) {
  json rows = json::array();
  for (const auto& c : results) {
    json row = {{"case", c.id},
                {"description", builtin_case_description(c.id)},
                {"ok", c.ok},
                {"scr", c.scr},
                {"x_over_r", number_or_null(c.x_over_r)}};
    if (!c.error.empty()) row["error"] = c.error;
    if (c.spec.damping) row["spec_damping"] = *c.spec.damping;
    row["spec_settling_time_s"] = c.spec.settling_time;
    row["spec_third_pole"] = c.spec.third_pole;
    if (c.report) {
      row["f_c"] = c.report->f_c;
      row["k_p"] = c.report->estimator.k_p;
      row["k_q"] = c.report->estimator.k_q;
      row["achieved_damping"] = c.report->placement.damping;
      row["achieved_real_pole"] = c.report->placement.real_pole;
    }
    if (c.p_metrics && c.p_metrics->settled) {
      row["p_percent_overshoot"] = c.p_metrics->metrics.percent_overshoot;
      row["p_settling_time_s"] = c.p_metrics->metrics.settling_time;
      row["p_steady_value"] = c.p_metrics->metrics.steady_value;
      row["final_e1"] = c.final_e1;
      row["final_e2"] = c.final_e2;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string summary_csv(const std::vector<CaseResult>& results) {
  std::ostringstream out;
  out << "case,ok,scr,x_over_r,spec_damping,spec_settling_time_s,"
         "achieved_damping,p_percent_overshoot,p_settling_time_s,"
         "p_steady_value,final_e1,final_e2\n";
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : "inf"; };
  for (const auto& c : results) {
    const bool has_metrics = c.p_metrics && c.p_metrics->settled;
    out << c.id << ',' << (c.ok ? "true" : "false") << ',' << num(c.scr) << ','
        << num(c.x_over_r) << ','
        << (c.spec.damping ? num(*c.spec.damping) : "") << ','
        << num(c.spec.settling_time) << ','
        << (c.report ? num(c.report->placement.damping) : "") << ','
        << (has_metrics ? num(c.p_metrics->metrics.percent_overshoot) : "")
        << ','
        << (has_metrics ? num(c.p_metrics->metrics.settling_time) : "") << ','
        << (has_metrics ? num(c.p_metrics->metrics.steady_value) : "") << ','
        << (has_metrics ? num(c.final_e1) : "") << ','
        << (has_metrics ? num(c.final_e2) : "") << '\n';
  }
  return out.str();
}

}  // namespace gfm
