#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "subgrid/averaging.hpp"
#include "subgrid/error.hpp"
#include "subgrid/integrator.hpp"
#include "subgrid/system.hpp"

namespace subgrid {

struct ModelingOptions {
  double tau = 0.0;
  /// Step of the resolved run; 0 selects tau / 500.
  double resolved_step = 0.0;
  /// A component has a constant average when the net change of its average
  /// across the fit window is at most inactive_tol times its fast amplitude.
  double inactive_tol = 0.5;
  /// Oscillation guard: TV(u_i) must exceed TV(avg u_i) by this factor.
  double oscillation_ratio = 3.0;
  /// The fast amplitude must exceed amplitude_floor * max(1, max |avg u_i|);
  /// smaller wiggles are slaved responses, not oscillators worth freezing.
  double amplitude_floor = 1e-4;
  std::size_t nodes_per_window_min = 200;
  std::size_t nodes_per_period_min = 20;
  SolverOptions solver{};

  double step() const { return resolved_step > 0.0 ? resolved_step : tau / 500.0; }

  void validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("tau must be > 0");
    if (resolved_step < 0.0) throw InvalidArgument("resolved_step must be > 0");
    if (inactive_tol < 0.0) throw InvalidArgument("inactive_tol must be >= 0");
    if (!(oscillation_ratio >= 1.0)) throw InvalidArgument("oscillation_ratio must be >= 1");
    if (amplitude_floor < 0.0) throw InvalidArgument("amplitude_floor must be >= 0");
    if (nodes_per_window_min < 2) throw InvalidArgument("nodes_per_window_min must be >= 2");
    if (step() > 2.0 * tau / static_cast<double>(nodes_per_window_min))
      throw InvalidArgument("resolved_step " + std::to_string(step()) +
                            " is too coarse: at most 2*tau/nodes_per_window_min = " +
                            std::to_string(2.0 * tau / static_cast<double>(nodes_per_window_min)));
    solver.validate();
  }
};

/// A constant subgrid model g~ with a per-component active mask.
///
/// Inactive components carry constant 0; their effective subgrid term is -f_i.
struct SubgridModel {
  StateVector constants;
  std::vector<bool> active;
  double tau = 0.0;
  double fit_start = 0.0;
  double fit_end = 0.0;
  /// Signed fast amplitude added to U at control points (0 for active
  /// components and for velocity partners of inactive positions).
  StateVector perturbation;
  /// max |avg u_i - frozen value| over the fit window, per component.
  StateVector frozen_spread;

  std::size_t dimension() const { return static_cast<std::size_t>(constants.size()); }
  std::size_t inactive_count() const {
    std::size_t n = 0;
    for (bool a : active) n += a ? 0 : 1;
    return n;
  }

  static SubgridModel identity(std::size_t n) {
    SubgridModel m;
    m.constants = StateVector::Zero(static_cast<Eigen::Index>(n));
    m.active.assign(n, true);
    m.perturbation = StateVector::Zero(static_cast<Eigen::Index>(n));
    m.frozen_spread = StateVector::Zero(static_cast<Eigen::Index>(n));
    return m;
  }
};

/// u~' = f(u~, t) + g~ for active components, u~_i' = 0 for inactive ones.
class ReducedSystem {
public:
  ReducedSystem(DynamicalSystem base, SubgridModel model, StateVector initial)
      : base_(std::move(base)), model_(std::move(model)), initial_(std::move(initial)) {
    base_.validate();
    if (model_.dimension() != base_.dimension || model_.active.size() != base_.dimension)
      throw InvalidArgument("subgrid model dimension does not match the system");
    if (static_cast<std::size_t>(initial_.size()) != base_.dimension)
      throw InvalidArgument("reduced initial value has wrong dimension");
    if (!model_.constants.allFinite()) throw NonFiniteError("subgrid constants are not finite");
  }

  const DynamicalSystem& base() const noexcept { return base_; }
  const SubgridModel& model() const noexcept { return model_; }
  const StateVector& initial_value() const noexcept { return initial_; }

  /// The reduced model as a plain dynamical system. Its Jacobian is the base
  /// Jacobian with the rows of inactive components zeroed.
  DynamicalSystem system() const {
    DynamicalSystem sys;
    sys.dimension = base_.dimension;
    sys.initial_value = initial_;
    sys.final_time = base_.final_time;
    auto base = base_;
    auto model = model_;
    sys.rhs = [base, model](const StateVector& u, double t) {
      StateVector out = base.rhs(u, t) + model.constants;
      for (std::size_t i = 0; i < model.active.size(); ++i)
        if (!model.active[i]) out[static_cast<Eigen::Index>(i)] = 0.0;
      return out;
    };
    sys.jacobian = [base, model](const StateVector& u, double t) {
      Matrix J = jacobian(base, u, t);
      for (std::size_t i = 0; i < model.active.size(); ++i)
        if (!model.active[i]) J.row(static_cast<Eigen::Index>(i)).setZero();
      return J;
    };
    return sys;
  }

private:
  DynamicalSystem base_;
  SubgridModel model_;
  StateVector initial_;
};

/// Full system over [0, 2 tau] with uniform step opts.step().
inline Trajectory resolve_short(const DynamicalSystem& sys, const ModelingOptions& opts) {
  opts.validate();
  sys.validate();
  if (2.0 * opts.tau > sys.final_time)
    throw InvalidArgument("resolved run [0, 2 tau] exceeds the final time");
  try {
    return solve_cg1(sys, TimePartition::uniform(0.0, 2.0 * opts.tau, opts.step()), opts.solver);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string(e.what()) + "; use a smaller resolved_step", e.interval(),
                           e.residual());
  }
}

/// Averages and variance statistics of a resolved run over its central window
/// [start + tau/2, start + 3 tau/2].
struct WindowStatistics {
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t nodes = 0;
  StateVector mean_gbar;   ///< time average of the variance over the window
  StateVector mean_ubar;   ///< time average of the moving average over the window
  StateVector ubar_start;  ///< avg u at the window start
  StateVector ubar_end;    ///< avg u at the window end
  StateVector amplitude;   ///< max |u_i - avg u_i|
  StateVector tv_u;        ///< total variation of u_i
  StateVector tv_ubar;     ///< total variation of avg u_i
  StateVector spread;      ///< max |avg u_i - mean_ubar_i|
  StateVector ubar_max;    ///< max |avg u_i|
  std::vector<std::size_t> sign_changes; ///< of u_i - avg u_i
  std::vector<double> times;             ///< window nodes
  std::vector<StateVector> ubar;         ///< avg u at the window nodes
  StateVector mean_favg;                 ///< time average of avg f(u) over the window
};

/// Time average over the window of avg f(u) - f(v), where v is avg u with the
/// inactive components replaced by their window means, i.e. the variance
/// seen by a reduced system whose inactive components are frozen. With every
/// component active this is the time average of the plain variance.
inline StateVector frozen_variance(const WindowStatistics& st, const DynamicalSystem& sys,
                                   const std::vector<bool>& active) {
  std::vector<StateVector> f_at_average;
  f_at_average.reserve(st.times.size());
  for (std::size_t j = 0; j < st.times.size(); ++j) {
    StateVector v = st.ubar[j];
    for (std::size_t i = 0; i < active.size(); ++i)
      if (!active[i]) v[static_cast<Eigen::Index>(i)] = st.mean_ubar[static_cast<Eigen::Index>(i)];
    f_at_average.push_back(evaluate_rhs(sys, v, st.times[j]));
  }
  const Trajectory f_traj(st.times, std::move(f_at_average));
  const double width = st.window_end - st.window_start;
  return st.mean_favg -
         detail::integrate_piecewise_linear(f_traj, st.window_start, st.window_end) / width;
}

inline WindowStatistics analyze_window(const Trajectory& resolved, const DynamicalSystem& sys, double tau) {
  const AverageWindow w(tau);
  if (resolved.end() - resolved.start() < 2.0 * tau * (1.0 - 1e-12))
    throw WindowError("resolved run is shorter than 2 tau");

  WindowStatistics st;
  st.window_start = resolved.start() + 0.5 * tau;
  st.window_end = resolved.start() + 1.5 * tau;

  // Window nodes: the two endpoints plus every resolved node strictly inside.
  std::vector<double> times{st.window_start};
  for (double t : resolved.times())
    if (t > st.window_start && t < st.window_end) times.push_back(t);
  times.push_back(st.window_end);
  st.nodes = times.size();

  const Trajectory f_values = rhs_trajectory(resolved, sys);
  std::vector<StateVector> ubar, favg, gbar;
  ubar.reserve(times.size());
  favg.reserve(times.size());
  gbar.reserve(times.size());
  for (double t : times) {
    ubar.push_back(moving_average(resolved, w, t));
    favg.push_back(moving_average(f_values, w, t));
    gbar.push_back(favg.back() - evaluate_rhs(sys, ubar.back(), t));
  }
  const Trajectory ubar_traj(times, ubar);
  const Trajectory favg_traj(times, favg);
  const Trajectory gbar_traj(times, gbar);
  st.mean_ubar = detail::integrate_piecewise_linear(ubar_traj, st.window_start, st.window_end) / tau;
  st.mean_favg = detail::integrate_piecewise_linear(favg_traj, st.window_start, st.window_end) / tau;
  st.mean_gbar = detail::integrate_piecewise_linear(gbar_traj, st.window_start, st.window_end) / tau;
  st.ubar_start = ubar.front();
  st.ubar_end = ubar.back();

  const auto n = static_cast<Eigen::Index>(resolved.dimension());
  st.amplitude = StateVector::Zero(n);
  st.tv_u = StateVector::Zero(n);
  st.tv_ubar = StateVector::Zero(n);
  st.spread = StateVector::Zero(n);
  st.ubar_max = StateVector::Zero(n);
  st.sign_changes.assign(static_cast<std::size_t>(n), 0);
  StateVector prev_u, prev_dev;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const StateVector u = resolved(times[j]);
    const StateVector dev = u - ubar[j];
    st.amplitude = st.amplitude.cwiseMax(dev.cwiseAbs());
    st.spread = st.spread.cwiseMax((ubar[j] - st.mean_ubar).cwiseAbs());
    st.ubar_max = st.ubar_max.cwiseMax(ubar[j].cwiseAbs());
    if (j > 0) {
      st.tv_u += (u - prev_u).cwiseAbs();
      st.tv_ubar += (ubar[j] - ubar[j - 1]).cwiseAbs();
      for (Eigen::Index i = 0; i < n; ++i)
        if ((dev[i] > 0.0) != (prev_dev[i] > 0.0)) ++st.sign_changes[static_cast<std::size_t>(i)];
    }
    prev_u = u;
    prev_dev = dev;
  }
  st.times = std::move(times);
  st.ubar = std::move(ubar);
  return st;
}

namespace detail {
inline bool constant_average(const WindowStatistics& st, Eigen::Index i, const ModelingOptions& opts) {
  const double amplitude = st.amplitude[i];
  if (!(amplitude > 0.0)) return false;
  if (amplitude <= opts.amplitude_floor * std::max(1.0, st.ubar_max[i])) return false;
  const bool oscillates = st.tv_u[i] >= opts.oscillation_ratio * st.tv_ubar[i];
  const bool flat = std::abs(st.ubar_end[i] - st.ubar_start[i]) <= opts.inactive_tol * amplitude;
  return oscillates && flat;
}
} // namespace detail

/// Fits a constant subgrid model on the central window of a resolved run
/// covering [s, s + 2 tau]:
///  - component i is inactive when its average is constant over the window
///    while u_i itself oscillates (see ModelingOptions), or when it is the
///    velocity partner of an inactive position;
///  - active components get g~_i = the time average over the window of the
///    variance measured against the frozen state (see frozen_variance).
inline SubgridModel fit_constant_subgrid(const Trajectory& resolved, const DynamicalSystem& sys,
                                         const ModelingOptions& opts) {
  opts.validate();
  const WindowStatistics st = analyze_window(resolved, sys, opts.tau);
  if (st.nodes < opts.nodes_per_window_min)
    throw WindowError("fit window holds " + std::to_string(st.nodes) + " resolved nodes, needs " +
                      std::to_string(opts.nodes_per_window_min));

  const auto n = static_cast<Eigen::Index>(sys.dimension);
  SubgridModel m = SubgridModel::identity(sys.dimension);
  m.tau = opts.tau;
  m.fit_start = st.window_start;
  m.fit_end = st.window_end;

  for (Eigen::Index i = 0; i < n; ++i)
    m.active[static_cast<std::size_t>(i)] = !detail::constant_average(st, i, opts);
  std::vector<bool> partner(sys.dimension, false);
  for (const auto& p : sys.pairs) {
    if (!m.active[p.position]) {
      m.active[p.velocity] = false;
      partner[p.velocity] = true;
    }
  }

  const StateVector gtilde = frozen_variance(st, sys, m.active);
  const StateVector& u0 = resolved.state(0);
  const StateVector ubar0 = moving_average(resolved, AverageWindow(opts.tau), resolved.start());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (m.active[iu]) {
      m.constants[i] = gtilde[i];
      continue;
    }
    const std::size_t changes = st.sign_changes[iu];
    if (changes > 0 && !partner[iu]) {
      const double per_period = 2.0 * static_cast<double>(st.nodes) / static_cast<double>(changes);
      if (per_period < static_cast<double>(opts.nodes_per_period_min))
        throw WindowError("component " + std::to_string(i + 1) + " oscillates with only " +
                          std::to_string(per_period) + " resolved nodes per period (need " +
                          std::to_string(opts.nodes_per_period_min) + "); use a smaller resolved_step");
    }
    m.constants[i] = 0.0;
    m.frozen_spread[i] = st.spread[i];
    if (!partner[iu]) m.perturbation[i] = (u0[i] - ubar0[i] < 0.0 ? -1.0 : 1.0) * st.amplitude[i];
  }
  if (!m.constants.allFinite()) throw NonFiniteError("fitted subgrid constants are not finite");
  return m;
}

/// Reduced initial value: avg u(s + tau/2) for active components, the window
/// mean of avg u for inactive ones.
inline ReducedSystem build_reduced(const DynamicalSystem& sys, const SubgridModel& model,
                                   const Trajectory& resolved) {
  const AverageWindow w(model.tau);
  StateVector initial = moving_average(resolved, w, resolved.start() + 0.5 * model.tau);
  if (model.inactive_count() > 0) {
    const WindowStatistics st = analyze_window(resolved, sys, model.tau);
    for (std::size_t i = 0; i < model.active.size(); ++i)
      if (!model.active[i]) initial[static_cast<Eigen::Index>(i)] = st.mean_ubar[static_cast<Eigen::Index>(i)];
  }
  return ReducedSystem(sys, model, std::move(initial));
}

struct AutoModelResult {
  ReducedSystem reduced;
  SubgridModel model;
  Trajectory resolved;
};

inline AutoModelResult auto_model(const DynamicalSystem& sys, const ModelingOptions& opts) {
  Trajectory resolved = resolve_short(sys, opts);
  SubgridModel model = fit_constant_subgrid(resolved, sys, opts);
  ReducedSystem reduced = build_reduced(sys, model, resolved);
  return {std::move(reduced), std::move(model), std::move(resolved)};
}

// Plain-text report: '#'-prefixed metadata, then `index active|inactive g`
// per component with 1-based indices.

inline std::string to_report(const SubgridModel& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto vec = [&os](const char* key, const StateVector& v) {
    os << "# " << key << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v[i];
    os << '\n';
  };
  os << "# subgrid model\n";
  os << "# tau = " << m.tau << '\n';
  os << "# fit_window = " << m.fit_start << ' ' << m.fit_end << '\n';
  vec("perturbation", m.perturbation);
  vec("frozen_spread", m.frozen_spread);
  for (std::size_t i = 0; i < m.dimension(); ++i)
    os << i + 1 << ' ' << (m.active[i] ? "active" : "inactive") << ' '
       << m.constants[static_cast<Eigen::Index>(i)] << '\n';
  return os.str();
}

inline SubgridModel parse_model_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> constants, perturbation, spread;
  std::vector<bool> active;
  SubgridModel m;
  auto read_list = [](std::istringstream& ls) {
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key, eq;
      ls >> hash >> key >> eq;
      if (eq != "=") continue;
      if (key == "tau") ls >> m.tau;
      else if (key == "fit_window") ls >> m.fit_start >> m.fit_end;
      else if (key == "perturbation") perturbation = read_list(ls);
      else if (key == "frozen_spread") spread = read_list(ls);
      continue;
    }
    std::size_t index = 0;
    std::string status;
    double g = 0.0;
    if (!(ls >> index >> status >> g) || (status != "active" && status != "inactive"))
      throw InvalidArgument("malformed model report line: " + line);
    if (index != constants.size() + 1)
      throw InvalidArgument("model report indices must be consecutive from 1");
    constants.push_back(g);
    active.push_back(status == "active");
  }
  if (constants.empty()) throw InvalidArgument("model report has no components");
  const auto n = static_cast<Eigen::Index>(constants.size());
  auto to_vec = [n](const std::vector<double>& v) {
    if (v.empty()) return StateVector(StateVector::Zero(n));
    if (static_cast<Eigen::Index>(v.size()) != n)
      throw InvalidArgument("model report metadata has wrong length");
    return StateVector(Eigen::Map<const StateVector>(v.data(), n));
  };
  m.constants = to_vec(constants);
  m.active = std::move(active);
  m.perturbation = to_vec(perturbation);
  m.frozen_spread = to_vec(spread);
  return m;
}

} // namespace subgrid
