#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "subgrid/error.hpp"
#include "subgrid/system.hpp"

namespace subgrid {

/// t_0 < t_1 < ... < t_M; interval I_j = (t_{j-1}, t_j] has length k_j.
class TimePartition {
public:
  explicit TimePartition(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw InvalidArgument("partition needs at least one interval");
    for (std::size_t j = 1; j < nodes_.size(); ++j)
      if (!(nodes_[j] > nodes_[j - 1]))
        throw InvalidArgument("partition step k_" + std::to_string(j) + " is not positive");
  }

  /// Uniform steps of (nominal) size `step` covering [start, end]. The step
  /// count is rounded to the nearest integer when (end - start)/step is
  /// integral up to roundoff, otherwise rounded up; the last node is `end`.
  static TimePartition uniform(double start, double end, double step) {
    if (!(end > start)) throw InvalidArgument("partition end must exceed start");
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("step must be positive");
    const double ratio = (end - start) / step;
    auto count = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(count)) > 1e-9 * std::max(1.0, ratio))
      count = static_cast<std::size_t>(std::ceil(ratio));
    count = std::max<std::size_t>(count, 1);
    std::vector<double> nodes(count + 1);
    const double k = (end - start) / static_cast<double>(count);
    for (std::size_t j = 0; j <= count; ++j) nodes[j] = start + static_cast<double>(j) * k;
    nodes.back() = end;
    return TimePartition(std::move(nodes));
  }

  std::size_t intervals() const noexcept { return nodes_.size() - 1; }
  double start() const { return nodes_.front(); }
  double end() const { return nodes_.back(); }
  double node(std::size_t j) const { return nodes_[j]; }
  /// k_j for j = 1..M.
  double step(std::size_t j) const { return nodes_[j] - nodes_[j - 1]; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

private:
  std::vector<double> nodes_;
};

struct SolverOptions {
  double fixed_point_tol = 1e-12;
  std::size_t max_fixed_point_iters = 100;

  void validate() const {
    if (!(fixed_point_tol > 0.0)) throw InvalidArgument("fixed_point_tol must be > 0");
    if (max_fixed_point_iters < 1) throw InvalidArgument("max_fixed_point_iters must be >= 1");
  }
};

/// cG(1) with midpoint quadrature (the implicit midpoint rule):
///   U_j = U_{j-1} + k_j f((U_{j-1} + U_j)/2, t_{j-1} + k_j/2).
/// Each step is solved by damped fixed-point iteration started from U_{j-1};
/// the damping starts at 1, halves whenever the fixed-point residual grows,
/// and never drops below 1/4.
///
/// The initial value is sys.initial_value, taken at part.start().
inline Trajectory solve_cg1(const DynamicalSystem& sys, const TimePartition& part,
                            const SolverOptions& opts = {}) {
  sys.validate();
  opts.validate();
  if (!sys.initial_value.allFinite()) throw NonFiniteError("initial value is not finite");

  std::vector<StateVector> states;
  states.reserve(part.intervals() + 1);
  states.push_back(sys.initial_value);

  for (std::size_t j = 1; j <= part.intervals(); ++j) {
    const StateVector& prev = states.back();
    const double k = part.step(j);
    const double t_mid = part.node(j - 1) + 0.5 * k;

    StateVector U = prev;
    double damping = 1.0;
    double last_residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (std::size_t it = 0; it < opts.max_fixed_point_iters; ++it) {
      const StateVector mid = 0.5 * (prev + U);
      StateVector G = prev + k * evaluate_rhs(sys, mid, t_mid);
      const double residual = (G - U).norm();
      const double scale = std::max(G.norm(), prev.norm());
      if (!std::isfinite(residual) || !std::isfinite(scale)) break;
      if (residual <= opts.fixed_point_tol * scale) {
        U = std::move(G);
        converged = true;
        break;
      }
      if (residual > last_residual) damping = std::max(0.5 * damping, 0.25);
      last_residual = residual;
      U += damping * (G - U);
    }
    if (!converged)
      throw ConvergenceError("cG(1) fixed-point iteration did not converge on interval " +
                                 std::to_string(j) + " (t = " + std::to_string(part.node(j)) +
                                 ", residual " + std::to_string(last_residual) +
                                 "); the step does not resolve the fastest active scale",
                             j, last_residual);
    states.push_back(std::move(U));
  }
  return Trajectory(part.nodes(), std::move(states));
}

inline Trajectory solve_cg1(const DynamicalSystem& sys, double step, const SolverOptions& opts = {}) {
  return solve_cg1(sys, TimePartition::uniform(0.0, sys.final_time, step), opts);
}

struct IntervalResidual {
  std::size_t interval; ///< j in I_j = (t_{j-1}, t_j], 1-based
  double value;         ///< max over the samples of ||k_j R(U, t)||_2
};

/// Samples R(U, t) = U'(t) - rhs(U(t), t) on every interval at the two Gauss
/// points and the midpoint. U' is the chord slope of the interval.
inline std::vector<IntervalResidual> residual_samples(const Trajectory& traj, const RhsFunction& rhs) {
  static const double gauss = 0.5 / std::sqrt(3.0);
  std::vector<IntervalResidual> out;
  out.reserve(traj.size() - 1);
  for (std::size_t j = 1; j < traj.size(); ++j) {
    const double t0 = traj.time(j - 1);
    const double k = traj.time(j) - t0;
    const StateVector slope = (traj.state(j) - traj.state(j - 1)) / k;
    double worst = 0.0;
    for (double offset : {0.5 - gauss, 0.5, 0.5 + gauss}) {
      const StateVector U = (1.0 - offset) * traj.state(j - 1) + offset * traj.state(j);
      const StateVector R = slope - rhs(U, t0 + offset * k);
      worst = std::max(worst, k * R.norm());
    }
    out.push_back({j, worst});
  }
  return out;
}

inline std::vector<IntervalResidual> residual_samples(const Trajectory& traj, const DynamicalSystem& sys) {
  return residual_samples(traj, [&sys](const StateVector& u, double t) { return evaluate_rhs(sys, u, t); });
}

inline double max_residual(const std::vector<IntervalResidual>& samples) {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.value);
  return m;
}

} // namespace subgrid
