#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subgrid/error.hpp"

namespace subgrid {

using StateVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using RhsFunction = std::function<StateVector(const StateVector&, double)>;
using JacobianFunction = std::function<Matrix(const StateVector&, double)>;

/// A (position, velocity) index pair of a second-order equation written in
/// first-order form. Inactivating the position also inactivates the velocity.
struct ComponentPair {
  std::size_t position;
  std::size_t velocity;
};

/// u'(t) = f(u(t), t) on (0, T], u(0) = u0.
///
/// The rhs must be a pure function; systems are shared by value across
/// solves and control-point runs.
struct DynamicalSystem {
  std::size_t dimension = 0;
  RhsFunction rhs;
  StateVector initial_value;
  double final_time = 0.0;
  std::optional<JacobianFunction> jacobian;
  std::vector<ComponentPair> pairs;

  void validate() const {
    if (dimension < 1) throw InvalidArgument("system dimension must be >= 1");
    if (!(final_time > 0.0)) throw InvalidArgument("final time must be > 0");
    if (!rhs) throw InvalidArgument("system has no right-hand side");
    if (static_cast<std::size_t>(initial_value.size()) != dimension)
      throw InvalidArgument("initial value has length " + std::to_string(initial_value.size()) +
                            ", expected " + std::to_string(dimension));
    for (const auto& p : pairs)
      if (p.position >= dimension || p.velocity >= dimension)
        throw InvalidArgument("component pair index out of range");
  }

  /// Same dynamics, different initial data and horizon. Used for short
  /// resolved runs started away from t = 0.
  DynamicalSystem restarted(StateVector u0, double horizon) const {
    DynamicalSystem copy = *this;
    copy.initial_value = std::move(u0);
    copy.final_time = std::max(final_time, horizon);
    return copy;
  }
};

inline bool all_finite(const StateVector& v) { return v.allFinite(); }

namespace detail {
// Slack on the [0, T] time check so that accumulated partition times
// (sums of steps) are not rejected at the right endpoint.
inline bool time_in_range(double t, double T) {
  const double slack = 1e-9 * std::max(1.0, std::abs(T));
  return t >= -slack && t <= T + slack;
}
} // namespace detail

inline StateVector evaluate_rhs(const DynamicalSystem& sys, const StateVector& u, double t) {
  if (!detail::time_in_range(t, sys.final_time))
    throw DomainError("rhs evaluated at t = " + std::to_string(t) + " outside [0, " +
                      std::to_string(sys.final_time) + "]");
  if (static_cast<std::size_t>(u.size()) != sys.dimension)
    throw InvalidArgument("state has length " + std::to_string(u.size()) + ", expected " +
                          std::to_string(sys.dimension));
  StateVector out = sys.rhs(u, t);
  if (static_cast<std::size_t>(out.size()) != sys.dimension)
    throw InvalidArgument("rhs returned length " + std::to_string(out.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (!std::isfinite(out[i]))
      throw NonFiniteError("rhs component " + std::to_string(i + 1) + " is not finite at t = " +
                           std::to_string(t));
  return out;
}

/// df/du at (u, t). Uses the analytic Jacobian when the system has one,
/// otherwise central differences with h_j = cbrt(eps) * max(|u_j|, 1).
inline Matrix jacobian(const DynamicalSystem& sys, const StateVector& u, double t) {
  const auto n = static_cast<Eigen::Index>(sys.dimension);
  if (sys.jacobian) {
    Matrix J = (*sys.jacobian)(u, t);
    if (J.rows() != n || J.cols() != n) throw InvalidArgument("analytic Jacobian has wrong shape");
    return J;
  }
  static const double eps_rel = std::cbrt(std::numeric_limits<double>::epsilon());
  Matrix J(n, n);
  StateVector probe = u;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = eps_rel * std::max(std::abs(u[j]), 1.0);
    probe[j] = u[j] + h;
    const StateVector fp = sys.rhs(probe, t);
    probe[j] = u[j] - h;
    const StateVector fm = sys.rhs(probe, t);
    probe[j] = u[j];
    // The actual spacing after rounding, not the nominal 2h.
    const double width = (u[j] + h) - (u[j] - h);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (fp[i] - fm[i]) / width;
      if (!std::isfinite(d))
        throw NonFiniteError("Jacobian entry (" + std::to_string(i + 1) + "," +
                             std::to_string(j + 1) + ") is not finite");
      J(i, j) = d;
    }
  }
  return J;
}

/// Nodal values U_j at strictly increasing times t_j with piecewise-linear
/// dense output, i.e. the cG(1) trial space.
class Trajectory {
public:
  Trajectory() = default;

  Trajectory(std::vector<double> times, std::vector<StateVector> states)
      : times_(std::move(times)), states_(std::move(states)) {
    if (times_.size() < 2) throw InvalidArgument("trajectory needs at least two nodes");
    if (times_.size() != states_.size())
      throw InvalidArgument("trajectory has mismatched time and state counts");
    for (std::size_t j = 1; j < times_.size(); ++j)
      if (!(times_[j] > times_[j - 1]))
        throw InvalidArgument("trajectory times must be strictly increasing (node " +
                              std::to_string(j) + ")");
    const auto n = states_.front().size();
    for (const auto& s : states_)
      if (s.size() != n) throw InvalidArgument("trajectory states have mixed dimensions");
  }

  std::size_t size() const noexcept { return times_.size(); }
  std::size_t dimension() const noexcept {
    return states_.empty() ? 0 : static_cast<std::size_t>(states_.front().size());
  }
  double start() const { return times_.front(); }
  double end() const { return times_.back(); }

  std::span<const double> times() const noexcept { return times_; }
  std::span<const StateVector> states() const noexcept { return states_; }
  double time(std::size_t j) const { return times_[j]; }
  const StateVector& state(std::size_t j) const { return states_[j]; }

  /// Index j of the interval [t_j, t_{j+1}] containing t (t must be in range).
  std::size_t locate(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    auto j = static_cast<std::size_t>(std::distance(times_.begin(), it));
    if (j == 0) return 0;
    return std::min(j - 1, times_.size() - 2);
  }

  StateVector operator()(double t) const {
    if (!(t >= start() && t <= end()))
      throw DomainError("trajectory evaluated at t = " + std::to_string(t) + " outside [" +
                        std::to_string(start()) + ", " + std::to_string(end()) + "]");
    const std::size_t j = locate(t);
    if (t == times_[j]) return states_[j];
    if (t == times_[j + 1]) return states_[j + 1];
    const double theta = (t - times_[j]) / (times_[j + 1] - times_[j]);
    return (1.0 - theta) * states_[j] + theta * states_[j + 1];
  }

  /// Component i at every node.
  std::vector<double> component(std::size_t i) const {
    std::vector<double> out(times_.size());
    for (std::size_t j = 0; j < times_.size(); ++j) out[j] = states_[j][static_cast<Eigen::Index>(i)];
    return out;
  }

private:
  std::vector<double> times_;
  std::vector<StateVector> states_;
};

inline StateVector trajectory_eval(const Trajectory& traj, double t) { return traj(t); }

} // namespace subgrid
