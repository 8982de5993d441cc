// gfmctl: design, verify and simulate full-state feedback power loops of a
// grid-forming converter.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gfm/config.hpp"
#include "gfm/workflow.hpp"

namespace {

using gfm::json;

int report_error(const std::string& code, const std::string& message,
                 const std::optional<std::string>& step = std::nullopt) {
  json err = {{"error", code}, {"message", message}};
  if (step) err["step"] = *step;
  std::cerr << err.dump() << std::endl;
  return 1;
}

std::vector<int> parse_case_list(const std::string& text) {
  std::vector<int> ids;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const int id = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      ids.push_back(id);
    } catch (const std::exception&) {
      throw gfm::Error(gfm::ErrorCode::ConfigInvalid,
                       "bad case id '" + item + "' in --cases");
    }
  }
  return ids;
}

void print_matrix(const char* name, const gfm::Matrix3& m) {
  std::printf("%s =\n", name);
  for (int i = 0; i < 3; ++i) {
    std::printf("  [% .10e % .10e % .10e]\n", m(i, 0), m(i, 1), m(i, 2));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-forming converter power-loop design toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string gains_path;
  std::vector<std::string> events;
  std::optional<double> horizon;
  std::string cases = "1,2,3,4,5,6,7";
  double tolerance = 1e-6;

  auto* design = app.add_subcommand("design", "Run the four-step design procedure");
  design->add_option("--config", config_path, "Configuration JSON")->required();
  design->add_option("--out", out_dir, "Directory for report.json");

  auto* simulate = app.add_subcommand("simulate", "Nonlinear closed-loop simulation");
  simulate->add_option("--config", config_path, "Configuration JSON")->required();
  simulate->add_option("--gains", gains_path, "Gains or design report JSON");
  simulate->add_option("--event", events, "Event target:from->to@time (repeatable, replaces config events)");
  simulate->add_option("--t", horizon, "Simulation end time [s]");
  simulate->add_option("--out", out_dir, "Output directory")->required();

  auto* verify = app.add_subcommand("verify", "Check user-supplied gains");
  verify->add_option("--config", config_path, "Configuration JSON")->required();
  verify->add_option("--gains", gains_path, "Gains JSON")->required();
  verify->add_option("--tol", tolerance, "Relative eigenvalue tolerance");

  auto* gramian = app.add_subcommand("gramian", "Controllability Gramian at a horizon");
  gramian->add_option("--config", config_path, "Configuration JSON")->required();
  gramian->add_option("--t", horizon, "Horizon [s]")->required();

  auto* suite = app.add_subcommand("cases", "Reproduce the reference cases");
  suite->add_option("--cases", cases, "Comma-separated case ids (1..7)");
  suite->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what());
  }

  try {
    if (*design) {
      const auto config = gfm::load_config(config_path);
      const auto report = gfm::run_design(config);
      const std::string text = gfm::to_json(report).dump(2) + "\n";
      if (!out_dir.empty()) {
        gfm::write_text(std::filesystem::path(out_dir) / "report.json", text);
      }
      std::cout << text;
    } else if (*simulate) {
      auto config = gfm::load_config(config_path);
      // Events given on the command line replace those in the config.
      if (!events.empty()) config.simulation.events.clear();
      for (const auto& e : events) {
        config.simulation.events.push_back(gfm::parse_event(e));
      }
      if (horizon) config.simulation.t_end = *horizon;
      gfm::DesignReport report;
      if (!gains_path.empty()) {
        const json j = gfm::read_json(gains_path);
        if (j.contains("operating_point")) {
          report = gfm::report_from_json(j);
        } else {
          config.gains = gfm::gains_from_json(j);
          report = gfm::run_design(config);
        }
      } else {
        report = gfm::run_design(config);
      }
      const auto result = gfm::run_simulation(config, report, out_dir);
      std::cout << gfm::metrics_json(result).dump(2) << "\n";
    } else if (*verify) {
      const auto config = gfm::load_config(config_path);
      const auto gains = gfm::gains_from_json(gfm::read_json(gains_path));
      const auto result = gfm::run_verify(config, gains, tolerance);
      std::cout << gfm::to_json(result).dump(2) << "\n";
      if (!result.report.placement.pass && !result.spec.pass()) return 3;
    } else if (*gramian) {
      const auto config = gfm::load_config(config_path);
      const auto op = gfm::solve_equilibrium(config.net, config.droop, config.sp);
      const auto coeffs = gfm::linearize(op, config.net);
      const auto model =
          gfm::build_error_model(coeffs, config.droop, config.net.omega_b);
      const auto g = gfm::gramian(model, *horizon);
      print_matrix("P_T", g.p_t);
      std::printf("det_numeric = %.12e\n", g.det_numeric);
      std::printf("det_closed  = %.12e\n", g.det_closed);
      std::printf("det_closed(coeffs) = %.12e\n",
                  gfm::gramian_det_closed(coeffs, config.droop,
                                          config.net.omega_b, *horizon));
      std::printf("F_c = %.12e\n",
                  gfm::controllability_index(op, config.net, config.droop));
    } else if (*suite) {
      const auto ids = parse_case_list(cases);
      std::optional<std::filesystem::path> dir;
      if (!out_dir.empty()) dir = out_dir;
      const auto results = gfm::run_case_suite(ids, dir);
      std::cout << gfm::summary_csv(results);
      for (const auto& r : results) {
        if (!r.ok) return 4;
      }
    }
  } catch (const gfm::DesignError& e) {
    return report_error(std::string(gfm::to_string(e.code())), e.what(),
                        std::string(gfm::to_string(e.step())));
  } catch (const gfm::Error& e) {
    return report_error(std::string(gfm::to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what());
  }
  return 0;
}
