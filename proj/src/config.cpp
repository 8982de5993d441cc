#include "gfm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>

#include "gfm/error.hpp"

namespace gfm {

namespace {

[[noreturn]] void invalid(const std::string& message) {
  throw Error(ErrorCode::ConfigInvalid, message);
}

struct UnitInfo {
  Quantity kind;
  double si_scale;  // value * si_scale is in the SI base unit of `kind`
};

const std::map<std::string, UnitInfo, std::less<>>& unit_table() {
  static const std::map<std::string, UnitInfo, std::less<>> table = {
      {"ohm", {Quantity::Resistance, 1.0}},
      {"H", {Quantity::Inductance, 1.0}},
      {"mH", {Quantity::Inductance, 1e-3}},
      {"uH", {Quantity::Inductance, 1e-6}},
      {"F", {Quantity::Capacitance, 1.0}},
      {"uF", {Quantity::Capacitance, 1e-6}},
      {"V", {Quantity::Voltage, 1.0}},
      {"kV", {Quantity::Voltage, 1e3}},
      {"W", {Quantity::Power, 1.0}},
      {"kW", {Quantity::Power, 1e3}},
      {"var", {Quantity::Power, 1.0}},
      {"kvar", {Quantity::Power, 1e3}},
      {"VA", {Quantity::Power, 1.0}},
      {"kVA", {Quantity::Power, 1e3}},
      {"Hz", {Quantity::Frequency, 1.0}},
      {"rad/s", {Quantity::AngularFrequency, 1.0}},
  };
  return table;
}

double number_at(const json& obj, const std::string& key,
                 const std::string& where) {
  if (!obj.contains(key)) invalid("missing key '" + where + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number()) invalid("'" + where + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid("'" + where + key + "' must be finite");
  return d;
}

// A quantity is either a bare number (per-unit) or {"value": x, "unit": u}.
double quantity_at(const json& obj, const std::string& key,
                   const std::string& where, const PerUnitBases& bases,
                   std::initializer_list<Quantity> allowed,
                   std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    invalid("missing key '" + where + key + "'");
  }
  const json& v = obj.at(key);
  if (v.is_number()) return number_at(obj, key, where);
  if (!v.is_object() || !v.contains("value") || !v.contains("unit") ||
      !v.at("unit").is_string()) {
    invalid("'" + where + key +
            "' must be a number or an object {value, unit}");
  }
  const double value = number_at(v, "value", where + key + ".");
  const std::string unit = v.at("unit").get<std::string>();
  if (unit == "pu" || unit == "p.u.") return value;
  const auto it = unit_table().find(unit);
  if (it == unit_table().end()) {
    invalid("'" + where + key + "' has unknown unit '" + unit + "'");
  }
  const bool ok = std::find(allowed.begin(), allowed.end(), it->second.kind) !=
                  allowed.end();
  if (!ok) invalid("'" + where + key + "' cannot be given in " + unit);
  return to_per_unit(value * it->second.si_scale, it->second.kind, bases);
}

const json& section(const json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_object()) {
    invalid("missing object '" + key + "'");
  }
  return j.at(key);
}

Matrix23 gains_from_json(const json& k, const std::string& where) {
  if (!k.is_array() || k.size() != 2) invalid("'" + where + "' must be 2x3");
  Matrix23 m;
  for (int i = 0; i < 2; ++i) {
    const json& row = k.at(i);
    if (!row.is_array() || row.size() != 3) {
      invalid("'" + where + "' must be 2x3");
    }
    for (int j = 0; j < 3; ++j) {
      if (!row.at(j).is_number()) invalid("'" + where + "' entries must be numbers");
      m(i, j) = row.at(j).get<double>();
    }
  }
  if (!m.allFinite()) invalid("'" + where + "' entries must be finite");
  return m;
}

}  // namespace

namespace {

ProjectConfig parse_config_unchecked(const json& j) {
  if (!j.is_object()) invalid("configuration must be a JSON object");
  ProjectConfig c;

  const json& b = section(j, "bases");
  c.bases.v_n = number_at(b, "v_n", "bases.");
  c.bases.s_n = number_at(b, "s_n", "bases.");
  c.bases.f_n = number_at(b, "f_n", "bases.");
  if (!(c.bases.v_n > 0 && c.bases.s_n > 0 && c.bases.f_n > 0)) {
    invalid("bases must be positive");
  }

  const json& n = section(j, "network");
  c.net.r_g = quantity_at(n, "r_g", "network.", c.bases,
                          {Quantity::Resistance}, 0.0);
  c.net.x_g = quantity_at(n, "x_g", "network.", c.bases,
                          {Quantity::Resistance, Quantity::Inductance});
  c.net.v_g = quantity_at(n, "v_g", "network.", c.bases, {Quantity::Voltage}, 1.0);
  c.net.omega_g = quantity_at(n, "omega_g", "network.", c.bases,
                              {Quantity::Frequency, Quantity::AngularFrequency},
                              1.0);
  c.net.omega_b = c.bases.omega_base();

  const json& d = section(j, "droop");
  c.droop.d_p = number_at(d, "d_p", "droop.");
  c.droop.d_q = number_at(d, "d_q", "droop.");

  const json& s = section(j, "setpoints");
  c.sp.omega_set = quantity_at(s, "omega_set", "setpoints.", c.bases,
                               {Quantity::Frequency, Quantity::AngularFrequency},
                               1.0);
  c.sp.v_set = quantity_at(s, "v_set", "setpoints.", c.bases,
                           {Quantity::Voltage}, 1.0);
  c.sp.p_set = quantity_at(s, "p_set", "setpoints.", c.bases, {Quantity::Power});
  c.sp.q_set = quantity_at(s, "q_set", "setpoints.", c.bases, {Quantity::Power},
                           0.0);

  const json& ds = section(j, "design");
  if (ds.contains("damping")) c.design.damping = number_at(ds, "damping", "design.");
  if (ds.contains("percent_overshoot")) {
    c.design.percent_overshoot =
        number_at(ds, "percent_overshoot", "design.");
  }
  if (c.design.damping.has_value() == c.design.percent_overshoot.has_value()) {
    invalid("design needs exactly one of 'damping' or 'percent_overshoot'");
  }
  c.design.settling_time = number_at(ds, "settling_time", "design.");
  c.design.third_pole = number_at(ds, "third_pole", "design.");
  if (ds.contains("seed")) {
    const std::string seed = ds.at("seed").get<std::string>();
    if (seed == "angle_loop") {
      c.seed = SeedStrategy::AngleLoop;
    } else if (seed == "even_split") {
      c.seed = SeedStrategy::EvenSplit;
    } else {
      invalid("design.seed must be 'angle_loop' or 'even_split'");
    }
  }
  if (ds.contains("controllability_tolerance")) {
    c.controllability_tolerance =
        number_at(ds, "controllability_tolerance", "design.");
    if (!(c.controllability_tolerance > 0)) {
      invalid("design.controllability_tolerance must be > 0");
    }
  }

  if (j.contains("simulation")) {
    const json& sim = j.at("simulation");
    if (sim.contains("dt")) c.simulation.dt = number_at(sim, "dt", "simulation.");
    if (sim.contains("t_end")) {
      c.simulation.t_end = number_at(sim, "t_end", "simulation.");
    }
    if (!(c.simulation.dt > 0 && c.simulation.t_end >= c.simulation.dt)) {
      invalid("simulation requires dt > 0 and t_end >= dt");
    }
    if (sim.contains("events")) {
      for (const json& e : sim.at("events")) {
        if (!e.is_string()) invalid("simulation.events entries must be strings");
        c.simulation.events.push_back(parse_event(e.get<std::string>()));
      }
    }
  }

  if (j.contains("gains") && !j.at("gains").is_null()) {
    const json& g = j.at("gains");
    GainOverride o;
    o.gains.k = gains_from_json(g.at("k"), "gains.k");
    if (g.contains("k_p") || g.contains("k_q")) {
      o.estimator = EstimatorGains{number_at(g, "k_p", "gains."),
                                   number_at(g, "k_q", "gains.")};
    }
    c.gains = o;
  }

  return c;
}

}  // namespace

ProjectConfig parse_config(const json& j) {
  try {
    ProjectConfig c = parse_config_unchecked(j);
    // Replays the events against the configured set-points as well.
    Scenario s;
    s.net = c.net;
    s.droop = c.droop;
    s.sp = c.sp;
    s.dt = c.simulation.dt;
    s.t_end = c.simulation.t_end;
    s.events = c.simulation.events;
    s.validate();
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(e.what());
  } catch (const json::exception& e) {
    invalid(e.what());
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IOError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid,
                path.string() + ": " + std::string(e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IOError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IOError, "failed writing " + path.string());
}

ProjectConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json(path));
}

json to_json(const ProjectConfig& c) {
  json j;
  j["bases"] = {{"v_n", c.bases.v_n}, {"s_n", c.bases.s_n}, {"f_n", c.bases.f_n}};
  j["network"] = {{"r_g", c.net.r_g},
                  {"x_g", c.net.x_g},
                  {"v_g", c.net.v_g},
                  {"omega_g", c.net.omega_g}};
  j["droop"] = {{"d_p", c.droop.d_p}, {"d_q", c.droop.d_q}};
  j["setpoints"] = {{"omega_set", c.sp.omega_set},
                    {"v_set", c.sp.v_set},
                    {"p_set", c.sp.p_set},
                    {"q_set", c.sp.q_set}};
  json design = {{"settling_time", c.design.settling_time},
                 {"third_pole", c.design.third_pole},
                 {"seed", c.seed == SeedStrategy::AngleLoop ? "angle_loop"
                                                            : "even_split"},
                 {"controllability_tolerance", c.controllability_tolerance}};
  if (c.design.damping) design["damping"] = *c.design.damping;
  if (c.design.percent_overshoot) {
    design["percent_overshoot"] = *c.design.percent_overshoot;
  }
  j["design"] = design;
  json events = json::array();
  for (const Event& e : c.simulation.events) events.push_back(format_event(e));
  j["simulation"] = {
      {"dt", c.simulation.dt}, {"t_end", c.simulation.t_end}, {"events", events}};
  if (c.gains) {
    json g;
    const auto& k = c.gains->gains.k;
    g["k"] = {{k(0, 0), k(0, 1), k(0, 2)}, {k(1, 0), k(1, 1), k(1, 2)}};
    if (c.gains->estimator) {
      g["k_p"] = c.gains->estimator->k_p;
      g["k_q"] = c.gains->estimator->k_q;
    }
    j["gains"] = g;
  }
  return j;
}

namespace {

double parse_number(std::string_view text, std::string_view spec) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    invalid("bad number '" + std::string(text) + "' in event '" +
            std::string(spec) + "'");
  }
  return value;
}

}  // namespace

Event parse_event(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto at = spec.rfind('@');
  if (colon == std::string_view::npos || at == std::string_view::npos ||
      at < colon) {
    invalid("event must look like target:from->to@time, got '" +
            std::string(spec) + "'");
  }
  const std::string_view target = spec.substr(0, colon);
  const std::string_view values = spec.substr(colon + 1, at - colon - 1);
  std::string_view time = spec.substr(at + 1);
  if (!time.empty() && time.back() == 's') time.remove_suffix(1);

  std::size_t arrow_pos = values.find("->");
  std::size_t arrow_len = 2;
  if (arrow_pos == std::string_view::npos) {
    arrow_pos = values.find("\xE2\x86\x92");  // U+2192
    arrow_len = 3;
  }
  if (arrow_pos == std::string_view::npos) {
    invalid("event '" + std::string(spec) + "' lacks a '->' arrow");
  }

  Event e;
  try {
    e.target = parse_event_target(target);
  } catch (const Error& err) {
    invalid(err.what());
  }
  const std::string_view from = values.substr(0, arrow_pos);
  if (!from.empty()) e.from_value = parse_number(from, spec);
  e.new_value = parse_number(values.substr(arrow_pos + arrow_len), spec);
  e.time = parse_number(time, spec);
  if (e.time < 0.0) invalid("event time must be >= 0");
  return e;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string format_event(const Event& e) {
  std::string out(to_string(e.target));
  out += ':';
  if (e.from_value) out += format_double(*e.from_value);
  out += "->" + format_double(e.new_value) + "@" + format_double(e.time) + "s";
  return out;
}

std::string to_csv(const TimeSeries& ts) {
  std::string out = "t,p,q,omega_u,e_u,delta,delta_hat,e1,e2\n";
  out.reserve(out.size() + ts.size() * 9 * 24);
  const std::vector<double>* cols[] = {&ts.t,       &ts.p,     &ts.q,
                                       &ts.omega_u, &ts.e_u,   &ts.delta,
                                       &ts.delta_hat, &ts.e1,  &ts.e2};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t c = 0; c < 9; ++c) {
      if (c) out += ',';
      out += format_double((*cols[c])[i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace gfm
