#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "subgrid/error.hpp"
#include "subgrid/system.hpp"

namespace subgrid {

/// Width tau of the centered moving average.
struct AverageWindow {
  double tau;

  explicit AverageWindow(double width) : tau(width) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("averaging window must be > 0");
  }
};

namespace detail {

inline void check_window(const Trajectory& traj, const AverageWindow& w) {
  if (!(w.tau < traj.end() - traj.start()))
    throw WindowError("averaging window tau = " + std::to_string(w.tau) +
                      " is not shorter than the trajectory span " +
                      std::to_string(traj.end() - traj.start()));
}

/// Exact integral of the piecewise-linear interpolant over [a, b].
inline StateVector integrate_piecewise_linear(const Trajectory& traj, double a, double b) {
  const std::size_t ja = traj.locate(a);
  const std::size_t jb = traj.locate(b);
  const StateVector va = traj(a);
  const StateVector vb = traj(b);
  if (ja == jb) return 0.5 * (b - a) * (va + vb);
  StateVector sum = 0.5 * (traj.time(ja + 1) - a) * (va + traj.state(ja + 1));
  for (std::size_t j = ja + 1; j < jb; ++j)
    sum += 0.5 * (traj.time(j + 1) - traj.time(j)) * (traj.state(j) + traj.state(j + 1));
  sum += 0.5 * (b - traj.time(jb)) * (traj.state(jb) + vb);
  return sum;
}

/// Center of the window actually used at t, after the constant extension.
inline double clamp_center(const Trajectory& traj, const AverageWindow& w, double t) {
  return std::clamp(t, traj.start() + 0.5 * w.tau, traj.end() - 0.5 * w.tau);
}

} // namespace detail

/// (1/tau) * integral of u over [t - tau/2, t + tau/2], exact for the
/// piecewise-linear trajectory. Near the ends the average is extended as a
/// constant: t is clamped into [start + tau/2, end - tau/2].
inline StateVector moving_average(const Trajectory& traj, const AverageWindow& w, double t) {
  detail::check_window(traj, w);
  if (!(t >= traj.start() && t <= traj.end()))
    throw DomainError("moving average requested at t = " + std::to_string(t) +
                      " outside the trajectory");
  const double c = detail::clamp_center(traj, w, t);
  return detail::integrate_piecewise_linear(traj, c - 0.5 * w.tau, c + 0.5 * w.tau) / w.tau;
}

inline Trajectory average_trajectory(const Trajectory& traj, const AverageWindow& w,
                                     const std::vector<double>& output_nodes) {
  std::vector<StateVector> states;
  states.reserve(output_nodes.size());
  for (double t : output_nodes) states.push_back(moving_average(traj, w, t));
  return Trajectory(output_nodes, std::move(states));
}

/// f(u_j, t_j) at every node of the trajectory, as a trajectory of its own.
inline Trajectory rhs_trajectory(const Trajectory& traj, const DynamicalSystem& sys) {
  std::vector<double> times(traj.times().begin(), traj.times().end());
  std::vector<StateVector> values;
  values.reserve(traj.size());
  for (std::size_t j = 0; j < traj.size(); ++j)
    values.push_back(evaluate_rhs(sys, traj.state(j), traj.time(j)));
  return Trajectory(std::move(times), std::move(values));
}

/// Variance from precomputed nodal rhs values (see rhs_trajectory).
inline StateVector variance(const Trajectory& traj, const Trajectory& rhs_values,
                            const DynamicalSystem& sys, const AverageWindow& w, double t) {
  detail::check_window(traj, w);
  const double slack = 1e-12 * std::max(1.0, std::abs(t));
  if (t < traj.start() + 0.5 * w.tau - slack || t > traj.end() - 0.5 * w.tau + slack)
    throw WindowError("variance requested at t = " + std::to_string(t) +
                      " inside a boundary strip of width tau/2");
  const StateVector mean_u = moving_average(traj, w, t);
  return moving_average(rhs_values, w, t) - evaluate_rhs(sys, mean_u, t);
}

/// gbar(u, t) = avg(f(u, .))(t) - f(avg(u)(t), t), defined only on the
/// interior [start + tau/2, end - tau/2]. The rhs is evaluated at every node.
inline StateVector variance(const Trajectory& traj, const DynamicalSystem& sys,
                            const AverageWindow& w, double t) {
  return variance(traj, rhs_trajectory(traj, sys), sys, w, t);
}

} // namespace subgrid
