// subgrid: full solves, automatic model reduction and error estimation.
//
//   subgrid solve    [--config FILE] [--key value ...]
//   subgrid reduce   [--config FILE] [--key value ...]
//   subgrid estimate [--config FILE] [--key value ...]
//   subgrid example  simple|lattice [--output PREFIX]
//
// Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subgrid/driver.hpp"

namespace {

using subgrid::driver::RunConfig;

const std::vector<std::string> kKeys = {
    "problem",      "kappa",    "T",           "p",          "M",           "m",            "displacement",
    "tau",          "resolved_step", "reduced_step", "step",  "control_points", "psi",       "output",
    "observables",  "system_file",   "inactive_tol", "oscillation_ratio", "amplitude_floor", "max_steps"};

void print_model(const subgrid::SubgridModel& m) {
  for (std::size_t i = 0; i < m.dimension(); ++i)
    std::printf("  %zu %s %.6g\n", i + 1, m.active[i] ? "active" : "inactive",
                m.constants[static_cast<Eigen::Index>(i)]);
}

void print_estimate(const subgrid::ErrorEstimate& e) {
  std::printf("S0 = %.6g  S1 = %.6g\n", e.S0, e.S1);
  std::printf("disc_term = %.6g  model_term = %.6g  total = %.6g%s\n", e.disc_term, e.model_term, e.total,
              e.model_validated ? "" : "  (model term unvalidated)");
}

int run_example(const std::string& name, const std::string& output) {
  std::map<std::string, std::string> kv;
  if (name == "simple") {
    kv = {{"problem", "simple"}, {"kappa", "1e18"}, {"T", "100"},          {"tau", "1e-7"},
          {"resolved_step", "2e-10"}, {"reduced_step", "0.1"}, {"control_points", "3"}, {"psi", "1"}};
  } else if (name == "lattice") {
    kv = {{"problem", "lattice"}, {"p", "3"},      {"M", "100"},     {"m", "1e-4"},
          {"T", "100"},           {"tau", "1"},    {"reduced_step", "0.1"}, {"step", "0.002"},
          {"control_points", "6"}, {"psi", "1"},   {"observables", "diameter,d_small"}};
  } else {
    throw subgrid::InvalidArgument("unknown example `" + name + "` (expected simple or lattice)");
  }
  kv["output"] = output.empty() ? "example_" + name : output;
  const RunConfig cfg = RunConfig::from_map(kv);

  const auto reduced = subgrid::driver::cmd_reduce(cfg);
  std::printf("subgrid model (tau = %g):\n", cfg.modeling().tau);
  print_model(reduced.model.model);
  std::printf("resolved steps: %zu, reduced steps: %zu\n", reduced.resolved_steps, reduced.reduced_steps);
  if (name == "lattice") {
    RunConfig full = cfg;
    full.output = cfg.output + "_full";
    const auto traj = subgrid::driver::cmd_solve(full);
    const auto spec = cfg.lattice_spec();
    std::printf("D(T) - sqrt(2): reduced %.6g, full %.6g\n",
                subgrid::problems::diameter(reduced.solution.state(reduced.solution.size() - 1), spec) -
                    std::numbers::sqrt2,
                subgrid::problems::diameter(traj.state(traj.size() - 1), spec) - std::numbers::sqrt2);
  }
  const auto est = subgrid::driver::cmd_estimate(cfg);
  print_estimate(est.estimate);
  for (const auto& p : est.control.points) std::printf("  control point t = %g: deviation %.6g\n", p.time, p.deviation);
  std::printf("wrote %s, %s, %s, %s\n", cfg.csv_path().c_str(), cfg.model_path().c_str(), cfg.plot_path().c_str(),
              cfg.estimate_path().c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic model reduction for multiscale ODE systems"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat `key = value` config file")->check(CLI::ExistingFile);
  std::map<std::string, std::string> flags;
  for (const auto& key : kKeys) app.add_option("--" + key, flags[key], "overrides `" + key + "` from the config");

  auto* solve = app.add_subcommand("solve", "cG(1) solve of the full system on [0, T]");
  auto* reduce = app.add_subcommand("reduce", "build the reduced model and solve it on [0, T]");
  auto* estimate = app.add_subcommand("estimate", "error estimate for a previous reduce run");
  auto* example = app.add_subcommand("example", "reproduce a built-in experiment");
  std::string example_name;
  example->add_option("name", example_name, "simple or lattice")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (example->parsed()) {
      std::string output = app.get_option("--output")->count() ? flags["output"] : "";
      return run_example(example_name, output);
    }
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = subgrid::io::parse_config(subgrid::io::read_text_file(config_path));
    for (const auto& key : kKeys)
      if (app.get_option("--" + key)->count()) kv[key] = flags[key];
    const RunConfig cfg = RunConfig::from_map(kv);

    if (solve->parsed()) {
      const auto traj = subgrid::driver::cmd_solve(cfg);
      std::printf("wrote %s (%zu rows)\n", cfg.csv_path().c_str(), traj.size());
    } else if (reduce->parsed()) {
      const auto r = subgrid::driver::cmd_reduce(cfg);
      print_model(r.model.model);
      std::printf("resolved steps: %zu, reduced steps: %zu\n", r.resolved_steps, r.reduced_steps);
      std::printf("wrote %s, %s, %s\n", cfg.csv_path().c_str(), cfg.model_path().c_str(), cfg.plot_path().c_str());
    } else if (estimate->parsed()) {
      const auto r = subgrid::driver::cmd_estimate(cfg);
      print_estimate(r.estimate);
      std::printf("wrote %s\n", cfg.estimate_path().c_str());
    }
    return 0;
  } catch (const subgrid::ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const subgrid::NonFiniteError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const subgrid::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
