#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "subgrid/error.hpp"
#include "subgrid/integrator.hpp"
#include "subgrid/reduction.hpp"
#include "subgrid/system.hpp"

namespace subgrid {

/// -phi'(t) = J(t)^T phi(t) on [0, T), phi(T) = psi.
///
/// J is the Jacobian of `sys` evaluated along the primal trajectory U. The
/// mean-value Jacobian over the segment between avg u and U is replaced by
/// its endpoint at U, since avg u is not available after the reduced solve.
struct DualProblem {
  Trajectory primal;
  DynamicalSystem sys;
  StateVector psi;
  double T = 0.0;
};

/// cG(1) in the reversed time s = T - t. The dual is linear, so each step is
/// the exact midpoint update (I - k/2 A) phi_j = (I + k/2 A) phi_{j-1} with
/// A = J(U(t_mid), t_mid)^T. The result is ordered in t.
inline Trajectory solve_dual(const DualProblem& dp, double step) {
  const auto n = static_cast<Eigen::Index>(dp.sys.dimension);
  if (dp.psi.size() != n) throw InvalidArgument("psi has wrong dimension");
  if (!(dp.psi.norm() > 0.0)) throw InvalidArgument("psi must be nonzero");
  if (!(dp.T > 0.0)) throw InvalidArgument("dual final time must be > 0");
  if (dp.primal.start() > 0.0 || dp.primal.end() < dp.T * (1.0 - 1e-12))
    throw DomainError("primal trajectory does not span [0, T]");

  const TimePartition part = TimePartition::uniform(0.0, dp.T, step);
  const std::size_t M = part.intervals();
  std::vector<StateVector> phi(M + 1);
  phi[M] = dp.psi;
  const Matrix I = Matrix::Identity(n, n);
  for (std::size_t j = M; j >= 1; --j) {
    const double k = part.step(j);
    const double t_mid = std::min(part.node(j - 1) + 0.5 * k, dp.primal.end());
    const Matrix A = jacobian(dp.sys, dp.primal(t_mid), t_mid).transpose();
    const Eigen::PartialPivLU<Matrix> lu(I - 0.5 * k * A);
    phi[j - 1] = lu.solve((I + 0.5 * k * A) * phi[j]);
    if (!phi[j - 1].allFinite())
      throw NonFiniteError("dual solution is not finite on interval " + std::to_string(j));
  }
  return Trajectory(part.nodes(), std::move(phi));
}

struct StabilityFactors {
  double S0 = 0.0; ///< integral of ||phi||_2
  double S1 = 0.0; ///< integral of ||phi'||_2
};

/// S0 by the trapezoid rule on the nodes; S1 exactly for the piecewise-linear
/// phi, i.e. the sum of ||phi_j - phi_{j-1}||_2.
inline StabilityFactors stability_factors(const Trajectory& phi) {
  StabilityFactors f;
  for (std::size_t j = 1; j < phi.size(); ++j) {
    const double k = phi.time(j) - phi.time(j - 1);
    f.S0 += 0.5 * k * (phi.state(j).norm() + phi.state(j - 1).norm());
    f.S1 += (phi.state(j) - phi.state(j - 1)).norm();
  }
  return f;
}

/// A freshly measured variance at time t.
struct VarianceSample {
  double time;
  StateVector gbar;
};

struct ErrorEstimate {
  double S0 = 0.0;
  double S1 = 0.0;
  double max_residual = 0.0;  ///< max over intervals of ||k R||_2
  double max_deviation = 0.0; ///< max over samples of ||g~ - gbar||_2 on active components
  double disc_term = 0.0;
  double model_term = 0.0;
  double total = 0.0;
  bool model_validated = false;
  std::vector<double> sample_times;
  /// Largest fluctuation of the average of an inactive component around its
  /// frozen value, measured in the resolved run.
  double inactive_amplitude = 0.0;
};

inline double active_deviation_l2(const SubgridModel& model, const StateVector& gbar) {
  double sq = 0.0;
  for (std::size_t i = 0; i < model.active.size(); ++i)
    if (model.active[i]) {
      const auto ii = static_cast<Eigen::Index>(i);
      sq += (model.constants[ii] - gbar[ii]) * (model.constants[ii] - gbar[ii]);
    }
  return std::sqrt(sq);
}

inline double active_deviation_inf(const SubgridModel& model, const StateVector& gbar) {
  double m = 0.0;
  for (std::size_t i = 0; i < model.active.size(); ++i)
    if (model.active[i]) {
      const auto ii = static_cast<Eigen::Index>(i);
      m = std::max(m, std::abs(model.constants[ii] - gbar[ii]));
    }
  return m;
}

///   |(e(T), psi)| <= S1 max ||k R~(U)|| + S0 max ||g~ - gbar||.
/// With no variance samples the modeling term is 0 and flagged unvalidated.
inline ErrorEstimate error_estimate(const Trajectory& U, const ReducedSystem& reduced, const Trajectory& phi,
                                    const std::vector<VarianceSample>& gbar_samples) {
  ErrorEstimate e;
  const StabilityFactors sf = stability_factors(phi);
  e.S0 = sf.S0;
  e.S1 = sf.S1;
  e.max_residual = max_residual(residual_samples(U, reduced.system()));
  for (const auto& s : gbar_samples) {
    if (s.gbar.size() != static_cast<Eigen::Index>(reduced.model().dimension()))
      throw InvalidArgument("variance sample has wrong dimension");
    e.max_deviation = std::max(e.max_deviation, active_deviation_l2(reduced.model(), s.gbar));
    e.sample_times.push_back(s.time);
  }
  e.model_validated = !gbar_samples.empty();
  e.disc_term = e.S1 * e.max_residual;
  e.model_term = e.S0 * e.max_deviation;
  e.total = e.disc_term + e.model_term;
  const SubgridModel& m = reduced.model();
  for (std::size_t i = 0; i < m.active.size(); ++i)
    if (!m.active[i]) e.inactive_amplitude = std::max(e.inactive_amplitude, m.frozen_spread[static_cast<Eigen::Index>(i)]);
  return e;
}

struct ControlPoint {
  double time = 0.0;
  StateVector gbar;
  StateVector gtilde;
  double deviation = 0.0; ///< ||g~ - gbar||_inf over active components
  double perturbation = 0.0; ///< max |perturbation| added to U(t)
};

struct ControlPointReport {
  std::vector<ControlPoint> points;

  std::vector<VarianceSample> samples() const {
    std::vector<VarianceSample> out;
    for (const auto& p : points) out.push_back({p.time, p.gbar});
    return out;
  }
};

/// Re-resolves the full system over [t_c, t_c + 2 tau] from U(t_c) plus the
/// model's recorded fast perturbation and compares the freshly measured
/// variance with g~.
inline ControlPointReport validate_at_control_points(const Trajectory& reduced_traj, const DynamicalSystem& sys,
                                                     const SubgridModel& model, const std::vector<double>& points,
                                                     const ModelingOptions& opts) {
  opts.validate();
  if (std::abs(opts.tau - model.tau) > 1e-12 * model.tau)
    throw InvalidArgument("modeling options and subgrid model use different tau");
  const double T = reduced_traj.end();
  ControlPointReport report;
  std::vector<double> sorted = points;
  std::sort(sorted.begin(), sorted.end());
  for (double tc : sorted) {
    if (!(tc > 0.5 * opts.tau && tc < T - opts.tau))
      throw DomainError("control point t = " + std::to_string(tc) + " is outside (tau/2, T - tau)");
    try {
      const StateVector start = reduced_traj(tc) + model.perturbation;
      const DynamicalSystem local = sys.restarted(start, tc + 2.0 * opts.tau);
      const Trajectory run =
          solve_cg1(local, TimePartition::uniform(tc, tc + 2.0 * opts.tau, opts.step()), opts.solver);
      const WindowStatistics st = analyze_window(run, local, opts.tau);
      ControlPoint cp;
      cp.time = tc;
      cp.gbar = frozen_variance(st, local, model.active);
      cp.gtilde = model.constants;
      cp.deviation = active_deviation_inf(model, cp.gbar);
      cp.perturbation = model.perturbation.cwiseAbs().maxCoeff();
      report.points.push_back(std::move(cp));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("control point t = " + std::to_string(tc) + ": " + e.what(), e.interval(),
                             e.residual());
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("control point t = " + std::to_string(tc) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("control point t = " + std::to_string(tc) + ": " + e.what());
    }
  }
  return report;
}

/// n evenly spaced control points on [2 tau, T - 2 tau].
inline std::vector<double> default_control_points(double tau, double T, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  const double a = 2.0 * tau;
  const double b = T - 2.0 * tau;
  if (!(b >= a)) throw InvalidArgument("interval too short for control points");
  if (count == 1) return {a};
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  return out;
}

// key: value text reports.

inline std::string to_report(const ErrorEstimate& e) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "S0: " << e.S0 << '\n'
     << "S1: " << e.S1 << '\n'
     << "max_residual: " << e.max_residual << '\n'
     << "max_deviation: " << e.max_deviation << '\n'
     << "disc_term: " << e.disc_term << '\n'
     << "model_term: " << e.model_term << '\n'
     << "total: " << e.total << '\n'
     << "model_validated: " << (e.model_validated ? "true" : "false") << '\n'
     << "sample_times:";
  for (double t : e.sample_times) os << ' ' << t;
  os << '\n'
     << "inactive_amplitude: " << e.inactive_amplitude << '\n'
     << "jacobian: endpoint approximation J(U) of the mean-value Jacobian\n";
  return os.str();
}

inline std::string to_report(const ControlPointReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "control_points: " << r.points.size() << '\n';
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    const std::string key = "cp" + std::to_string(i + 1) + "_";
    os << key << "time: " << p.time << '\n';
    os << key << "deviation: " << p.deviation << '\n';
    os << key << "perturbation: " << p.perturbation << '\n';
    os << key << "gbar:";
    for (Eigen::Index j = 0; j < p.gbar.size(); ++j) os << ' ' << p.gbar[j];
    os << '\n' << key << "gtilde:";
    for (Eigen::Index j = 0; j < p.gtilde.size(); ++j) os << ' ' << p.gtilde[j];
    os << '\n';
  }
  return os.str();
}

/// Parses `key: value` lines; later keys overwrite earlier ones.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string value = line.substr(colon + 1);
    const auto first = value.find_first_not_of(' ');
    value = first == std::string::npos ? "" : value.substr(first);
    out[line.substr(0, colon)] = value;
  }
  return out;
}

} // namespace subgrid
