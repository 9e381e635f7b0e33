#pragma once

// Command implementations behind the `subgrid` executable. Each command reads
// a RunConfig, writes its artifacts next to cfg.output and returns what it
// computed so tests can inspect it without re-reading files.

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subgrid/dual.hpp"
#include "subgrid/error.hpp"
#include "subgrid/integrator.hpp"
#include "subgrid/io.hpp"
#include "subgrid/problems.hpp"
#include "subgrid/reduction.hpp"
#include "subgrid/system.hpp"

namespace subgrid::driver {

enum class Problem { simple, lattice, external_file };

struct RunConfig {
  Problem problem = Problem::simple;
  std::optional<double> kappa;
  std::optional<double> T;
  std::size_t p = 3;
  double M = 100.0;
  double m = 1e-4;
  double displacement = 0.05;
  std::optional<double> tau;
  double resolved_step = 0.0;
  std::optional<double> reduced_step;
  std::optional<double> step;
  std::size_t control_points = 3;
  std::string psi = "1";
  std::string output = "run";
  std::vector<std::string> observables;
  std::string system_file;
  std::optional<double> inactive_tol;
  std::optional<double> oscillation_ratio;
  std::optional<double> amplitude_floor;
  /// Upper bound on the steps of a single solve, so that a full solve at a
  /// fast-scale step over a long interval fails fast instead of running for days.
  std::size_t max_steps = 50'000'000;

  static RunConfig from_map(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    auto number = [](const std::string& key, const std::string& v) {
      try {
        return io::parse_double(v);
      } catch (const InvalidArgument&) {
        throw InvalidArgument("`" + key + "` is not a number: " + v);
      }
    };
    auto positive = [&](const std::string& key, const std::string& v) {
      const double x = number(key, v);
      if (!(x > 0.0)) throw InvalidArgument("`" + key + "` must be positive");
      return x;
    };
    auto integer = [&](const std::string& key, const std::string& v) {
      const double x = number(key, v);
      if (x < 0.0 || x != std::floor(x)) throw InvalidArgument("`" + key + "` must be a nonnegative integer");
      return static_cast<std::size_t>(x);
    };
    for (const auto& [key, v] : kv) {
      if (key == "problem") {
        if (v == "simple") c.problem = Problem::simple;
        else if (v == "lattice") c.problem = Problem::lattice;
        else if (v == "external-file" || v == "file") c.problem = Problem::external_file;
        else throw InvalidArgument("unknown problem `" + v + "`");
      } else if (key == "kappa") c.kappa = positive(key, v);
      else if (key == "T") c.T = positive(key, v);
      else if (key == "p") c.p = integer(key, v);
      else if (key == "M") c.M = positive(key, v);
      else if (key == "m") c.m = positive(key, v);
      else if (key == "displacement") c.displacement = number(key, v);
      else if (key == "tau") c.tau = positive(key, v);
      else if (key == "resolved_step") c.resolved_step = positive(key, v);
      else if (key == "reduced_step") c.reduced_step = positive(key, v);
      else if (key == "step") c.step = positive(key, v);
      else if (key == "control_points") c.control_points = integer(key, v);
      else if (key == "psi") c.psi = v;
      else if (key == "output") c.output = v;
      else if (key == "system_file") c.system_file = v;
      else if (key == "inactive_tol") c.inactive_tol = number(key, v);
      else if (key == "oscillation_ratio") c.oscillation_ratio = number(key, v);
      else if (key == "amplitude_floor") c.amplitude_floor = number(key, v);
      else if (key == "max_steps") c.max_steps = integer(key, v);
      else if (key == "observables") {
        c.observables.clear();
        std::istringstream in(v);
        std::string name;
        while (std::getline(in, name, ',')) {
          if (name.empty()) continue;
          if (name != "diameter" && name != "d_small") throw InvalidArgument("unknown observable `" + name + "`");
          c.observables.push_back(name);
        }
      } else {
        throw InvalidArgument("unknown config key `" + key + "`");
      }
    }
    if (c.problem == Problem::lattice && c.p < 2) throw InvalidArgument("lattice needs p >= 2");
    if (c.problem == Problem::external_file && c.system_file.empty())
      throw InvalidArgument("problem external-file needs `system_file`");
    if (c.problem != Problem::lattice && !c.observables.empty())
      throw InvalidArgument("observables are only defined for the lattice");
    return c;
  }

  problems::SimpleModelSpec simple_spec() const { return {kappa.value_or(1e18), T.value_or(100.0)}; }

  problems::LatticeSpec lattice_spec() const {
    problems::LatticeSpec s;
    s.p = p;
    s.M = M;
    s.m = m;
    s.kappa = kappa.value_or(1.0);
    s.initial_small_displacement = displacement;
    s.T = T.value_or(100.0);
    return s;
  }

  DynamicalSystem system() const {
    switch (problem) {
    case Problem::simple: return problems::make_simple_model(simple_spec());
    case Problem::lattice: return problems::make_lattice(lattice_spec());
    case Problem::external_file: {
      DynamicalSystem sys = io::load_linear_system(io::read_text_file(system_file));
      if (T) sys.final_time = *T;
      return sys;
    }
    }
    throw InvalidArgument("unknown problem");
  }

  ModelingOptions modeling() const {
    ModelingOptions o;
    if (tau) o.tau = *tau;
    else if (problem == Problem::simple) o.tau = 1e-7;
    else if (problem == Problem::lattice) o.tau = 1.0;
    else throw InvalidArgument("`tau` is required for external-file problems");
    o.resolved_step = resolved_step;
    if (inactive_tol) o.inactive_tol = *inactive_tol;
    if (oscillation_ratio) o.oscillation_ratio = *oscillation_ratio;
    if (amplitude_floor) o.amplitude_floor = *amplitude_floor;
    return o;
  }

  double reduced_step_or_default() const { return reduced_step.value_or(0.1); }

  double full_step() const {
    if (step) return *step;
    if (problem == Problem::simple) return 2e-10;
    if (problem == Problem::lattice) return 0.002;
    throw InvalidArgument("`step` is required for external-file problems");
  }

  std::string csv_path() const { return output + ".csv"; }
  std::string resolved_csv_path() const { return output + "_resolved.csv"; }
  std::string model_path() const { return output + "_model.txt"; }
  std::string plot_path() const { return output + ".gp"; }
  std::string estimate_path() const { return output + "_estimate.txt"; }

  StateVector psi_vector(std::size_t n) const {
    const std::vector<double> values = io::parse_numbers(psi);
    StateVector v = StateVector::Zero(static_cast<Eigen::Index>(n));
    if (psi.find(',') == std::string::npos && values.size() == 1) {
      const double index = values[0];
      if (index < 1.0 || index > static_cast<double>(n) || index != std::floor(index))
        throw InvalidArgument("psi component index must be in 1.." + std::to_string(n));
      v[static_cast<Eigen::Index>(index) - 1] = 1.0;
      return v;
    }
    if (values.size() != n) throw InvalidArgument("psi vector must have " + std::to_string(n) + " entries");
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = values[i];
    return v;
  }
};

inline TimePartition checked_partition(const RunConfig& cfg, double start, double end, double step) {
  if ((end - start) / step > static_cast<double>(cfg.max_steps))
    throw InvalidArgument("a solve over [" + io::format_double(start) + ", " + io::format_double(end) +
                          "] with step " + io::format_double(step) + " exceeds max_steps = " +
                          std::to_string(cfg.max_steps));
  return TimePartition::uniform(start, end, step);
}

inline std::vector<io::Column> observable_columns(const RunConfig& cfg, const Trajectory& traj) {
  std::vector<io::Column> cols;
  if (cfg.observables.empty()) return cols;
  const problems::LatticeSpec spec = cfg.lattice_spec();
  for (const auto& name : cfg.observables) {
    io::Column c{name, {}};
    c.values.reserve(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j)
      c.values.push_back(name == "diameter" ? problems::diameter(traj.state(j), spec)
                                            : problems::small_mass_distance(traj.state(j), spec));
    cols.push_back(std::move(c));
  }
  return cols;
}

inline void write_trajectory(const RunConfig& cfg, const std::string& path, const Trajectory& traj) {
  std::ostringstream os;
  io::write_csv(os, traj, observable_columns(cfg, traj));
  io::write_text_file(path, os.str());
}

/// gnuplot script plotting every non-time column of the CSV against t.
inline std::string plot_script(const std::string& csv, const std::vector<std::string>& columns) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel 't'\n"
     << "plot";
  for (std::size_t i = 0; i < columns.size(); ++i)
    os << (i ? ", \\\n    " : " ") << "'" << csv << "' using 1:" << i + 2 << " with lines title '" << columns[i]
       << "'";
  os << '\n';
  return os.str();
}

inline Trajectory cmd_solve(const RunConfig& cfg) {
  const DynamicalSystem sys = cfg.system();
  const Trajectory traj = solve_cg1(sys, checked_partition(cfg, 0.0, sys.final_time, cfg.full_step()));
  write_trajectory(cfg, cfg.csv_path(), traj);
  return traj;
}

struct ReduceResult {
  AutoModelResult model;
  Trajectory solution;
  std::size_t resolved_steps = 0;
  std::size_t reduced_steps = 0;
};

inline ReduceResult cmd_reduce(const RunConfig& cfg) {
  const DynamicalSystem sys = cfg.system();
  const ModelingOptions opts = cfg.modeling();
  AutoModelResult am = auto_model(sys, opts);
  const DynamicalSystem reduced = am.reduced.system();
  Trajectory solution = solve_cg1(reduced, checked_partition(cfg, 0.0, sys.final_time, cfg.reduced_step_or_default()));

  write_trajectory(cfg, cfg.csv_path(), solution);
  write_trajectory(cfg, cfg.resolved_csv_path(), am.resolved);
  io::write_text_file(cfg.model_path(), to_report(am.model));
  std::vector<std::string> columns;
  for (std::size_t i = 0; i < sys.dimension; ++i) columns.push_back("u_" + std::to_string(i + 1));
  for (const auto& o : cfg.observables) columns.push_back(o);
  io::write_text_file(cfg.plot_path(), plot_script(cfg.csv_path(), columns));

  ReduceResult r{std::move(am), std::move(solution), 0, 0};
  r.resolved_steps = r.model.resolved.size() - 1;
  r.reduced_steps = r.solution.size() - 1;
  return r;
}

struct EstimateResult {
  ErrorEstimate estimate;
  ControlPointReport control;
};

/// Reads the artifacts of a previous `reduce` run with the same config.
inline EstimateResult cmd_estimate(const RunConfig& cfg) {
  const DynamicalSystem sys = cfg.system();
  const Trajectory U = io::read_csv_file(cfg.csv_path());
  const SubgridModel model = parse_model_report(io::read_text_file(cfg.model_path()));
  if (U.dimension() != sys.dimension || model.dimension() != sys.dimension)
    throw InvalidArgument("reduce artifacts do not match the configured problem");
  if (U.start() != 0.0) throw InvalidArgument("reduced solution must start at t = 0");
  const ReducedSystem reduced(sys, model, U.state(0));

  ModelingOptions opts = cfg.modeling();
  opts.tau = model.tau;
  const DualProblem dp{U, reduced.system(), cfg.psi_vector(sys.dimension), U.end()};
  const Trajectory phi = solve_dual(dp, cfg.reduced_step_or_default());
  EstimateResult r;
  r.control = validate_at_control_points(U, sys, model, default_control_points(model.tau, U.end(), cfg.control_points),
                                         opts);
  r.estimate = error_estimate(U, reduced, phi, r.control.samples());
  io::write_text_file(cfg.estimate_path(), to_report(r.estimate) + to_report(r.control));
  return r;
}

} // namespace subgrid::driver
