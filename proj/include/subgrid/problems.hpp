#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "subgrid/error.hpp"
#include "subgrid/system.hpp"

namespace subgrid::problems {

/// u1'' + u1 - u2^2/2 = 0, u2'' + kappa u2 = 0, u(0) = (0, 1), u'(0) = 0.
struct SimpleModelSpec {
  double kappa = 1e18;
  double T = 100.0;
};

/// First-order form u = (u1, u2, u1', u2'),
/// f(u) = (u3, u4, -u1 + u2^2/2, -kappa u2). Components 2 and 4 form a pair.
inline DynamicalSystem make_simple_model(const SimpleModelSpec& spec) {
  if (!(spec.kappa >= 1.0)) throw InvalidArgument("simple model needs kappa >= 1");
  if (!(spec.T > 0.0)) throw InvalidArgument("simple model needs T > 0");
  const double kappa = spec.kappa;
  DynamicalSystem sys;
  sys.dimension = 4;
  sys.final_time = spec.T;
  sys.initial_value = StateVector{{0.0, 1.0, 0.0, 0.0}};
  sys.rhs = [kappa](const StateVector& u, double) {
    return StateVector{{u[2], u[3], -u[0] + 0.5 * u[1] * u[1], -kappa * u[1]}};
  };
  sys.jacobian = [kappa](const StateVector& u, double) {
    Matrix J = Matrix::Zero(4, 4);
    J(0, 2) = 1.0;
    J(1, 3) = 1.0;
    J(2, 0) = -1.0;
    J(2, 1) = u[1];
    J(3, 1) = -kappa;
    return J;
  };
  sys.pairs = {{1, 3}};
  return sys;
}

/// (1 - cos t) / 4, the solution of u1'' + u1 - 1/4 = 0 from rest.
inline double analytic_reduced_simple(double t) { return 0.25 * (1.0 - std::cos(t)); }

/// p x p large masses on the unit square and (p-1)^2 small masses at the
/// cell centers, joined by linear springs.
struct LatticeSpec {
  std::size_t p = 3;
  double M = 100.0;
  double m = 1e-4;
  double kappa = 1.0;
  /// Initial displacement of every small mass, as a fraction of the cell size.
  double initial_small_displacement = 0.05;
  double T = 100.0;

  double cell() const { return 1.0 / static_cast<double>(p - 1); }
  std::size_t large_count() const { return p * p; }
  std::size_t small_count() const { return (p - 1) * (p - 1); }
  std::size_t mass_count() const { return large_count() + small_count(); }
  std::size_t dimension() const { return 4 * mass_count(); }

  /// Mass index of the large mass at grid point (i, j).
  std::size_t large(std::size_t i, std::size_t j) const { return j * p + i; }
  /// Mass index of the small mass in cell (i, j).
  std::size_t small(std::size_t i, std::size_t j) const { return large_count() + j * (p - 1) + i; }

  /// State indices: x and y positions of mass k, then the velocities.
  std::size_t x(std::size_t k) const { return 2 * k; }
  std::size_t y(std::size_t k) const { return 2 * k + 1; }
  std::size_t vx(std::size_t k) const { return 2 * mass_count() + 2 * k; }
  std::size_t vy(std::size_t k) const { return 2 * mass_count() + 2 * k + 1; }

  void validate() const {
    if (p < 2) throw InvalidArgument("lattice needs p >= 2");
    if (!(M > 0.0) || !(m > 0.0)) throw InvalidArgument("lattice masses must be > 0");
    if (!(kappa > 0.0)) throw InvalidArgument("lattice spring constant must be > 0");
    if (!(T > 0.0)) throw InvalidArgument("lattice needs T > 0");
  }
};

struct Spring {
  std::size_t a;
  std::size_t b;
  double rest_length;
};

inline std::vector<Spring> lattice_springs(const LatticeSpec& s) {
  const double h = s.cell();
  const double half_diagonal = 0.5 * std::numbers::sqrt2 * h;
  std::vector<Spring> springs;
  for (std::size_t j = 0; j < s.p; ++j)
    for (std::size_t i = 0; i < s.p; ++i) {
      if (i + 1 < s.p) springs.push_back({s.large(i, j), s.large(i + 1, j), h});
      if (j + 1 < s.p) springs.push_back({s.large(i, j), s.large(i, j + 1), h});
    }
  for (std::size_t j = 0; j + 1 < s.p; ++j)
    for (std::size_t i = 0; i + 1 < s.p; ++i) {
      const std::size_t c = s.small(i, j);
      springs.push_back({c, s.large(i, j), half_diagonal});
      springs.push_back({c, s.large(i + 1, j), half_diagonal});
      springs.push_back({c, s.large(i, j + 1), half_diagonal});
      springs.push_back({c, s.large(i + 1, j + 1), half_diagonal});
    }
  return springs;
}

/// Positions then velocities, x/y interleaved per mass. The unperturbed
/// configuration is an equilibrium (rest lengths are the initial
/// separations). Small masses start displaced along the (1, -1) cell
/// diagonal, i.e. across the springs that join them to the lower-left and
/// upper-right corners of their cell, and all masses start at rest.
inline DynamicalSystem make_lattice(const LatticeSpec& spec) {
  spec.validate();
  const LatticeSpec s = spec;
  const std::vector<Spring> springs = lattice_springs(s);
  const std::size_t nm = s.mass_count();
  std::vector<double> inv_mass(nm, 1.0 / s.M);
  for (std::size_t k = s.large_count(); k < nm; ++k) inv_mass[k] = 1.0 / s.m;

  DynamicalSystem sys;
  sys.dimension = s.dimension();
  sys.final_time = s.T;
  sys.initial_value = StateVector::Zero(static_cast<Eigen::Index>(sys.dimension));
  const double h = s.cell();
  const double shift = s.initial_small_displacement * h / std::numbers::sqrt2;
  for (std::size_t j = 0; j < s.p; ++j)
    for (std::size_t i = 0; i < s.p; ++i) {
      sys.initial_value[static_cast<Eigen::Index>(s.x(s.large(i, j)))] = static_cast<double>(i) * h;
      sys.initial_value[static_cast<Eigen::Index>(s.y(s.large(i, j)))] = static_cast<double>(j) * h;
    }
  for (std::size_t j = 0; j + 1 < s.p; ++j)
    for (std::size_t i = 0; i + 1 < s.p; ++i) {
      const std::size_t c = s.small(i, j);
      sys.initial_value[static_cast<Eigen::Index>(s.x(c))] = (static_cast<double>(i) + 0.5) * h + shift;
      sys.initial_value[static_cast<Eigen::Index>(s.y(c))] = (static_cast<double>(j) + 0.5) * h - shift;
    }

  const double kappa = s.kappa;
  sys.rhs = [s, springs, inv_mass, kappa, nm](const StateVector& u, double) {
    const auto velocity_offset = static_cast<Eigen::Index>(2 * nm);
    StateVector out(u.size());
    out.head(velocity_offset) = u.tail(velocity_offset);
    out.tail(velocity_offset).setZero();
    for (const Spring& sp : springs) {
      const double dx = u[static_cast<Eigen::Index>(s.x(sp.b))] - u[static_cast<Eigen::Index>(s.x(sp.a))];
      const double dy = u[static_cast<Eigen::Index>(s.y(sp.b))] - u[static_cast<Eigen::Index>(s.y(sp.a))];
      const double len = std::hypot(dx, dy);
      const double scale = kappa * (len - sp.rest_length) / len;
      // Force on a, towards b when stretched.
      const double fx = scale * dx;
      const double fy = scale * dy;
      out[static_cast<Eigen::Index>(s.vx(sp.a))] += fx * inv_mass[sp.a];
      out[static_cast<Eigen::Index>(s.vy(sp.a))] += fy * inv_mass[sp.a];
      out[static_cast<Eigen::Index>(s.vx(sp.b))] -= fx * inv_mass[sp.b];
      out[static_cast<Eigen::Index>(s.vy(sp.b))] -= fy * inv_mass[sp.b];
    }
    return out;
  };
  for (std::size_t k = s.large_count(); k < nm; ++k) {
    sys.pairs.push_back({s.x(k), s.vx(k)});
    sys.pairs.push_back({s.y(k), s.vy(k)});
  }
  return sys;
}

/// The undisplaced equilibrium: every mass at its grid or cell-center
/// position, at rest.
inline StateVector lattice_rest_state(const LatticeSpec& spec) {
  LatticeSpec still = spec;
  still.initial_small_displacement = 0.0;
  return make_lattice(still).initial_value;
}

namespace detail {
inline void check_lattice_trajectory(const Trajectory& traj, const LatticeSpec& spec) {
  spec.validate();
  if (traj.dimension() != spec.dimension())
    throw InvalidArgument("trajectory dimension " + std::to_string(traj.dimension()) +
                          " does not match the lattice (" + std::to_string(spec.dimension()) + ")");
}

inline double mass_distance(const StateVector& u, const LatticeSpec& s, std::size_t a, std::size_t b) {
  const auto ix = [](std::size_t i) { return static_cast<Eigen::Index>(i); };
  return std::hypot(u[ix(s.x(b))] - u[ix(s.x(a))], u[ix(s.y(b))] - u[ix(s.y(a))]);
}
} // namespace detail

/// Distance D between the large masses that start at (0, 0) and (1, 1).
inline double diameter(const StateVector& u, const LatticeSpec& spec) {
  return detail::mass_distance(u, spec, spec.large(0, 0), spec.large(spec.p - 1, spec.p - 1));
}

inline double diameter(const Trajectory& traj, const LatticeSpec& spec, double t) {
  detail::check_lattice_trajectory(traj, spec);
  return diameter(traj(t), spec);
}

/// Distance d between the (0, 0) large mass and the small mass of its cell.
inline double small_mass_distance(const StateVector& u, const LatticeSpec& spec) {
  return detail::mass_distance(u, spec, spec.large(0, 0), spec.small(0, 0));
}

inline double small_mass_distance(const Trajectory& traj, const LatticeSpec& spec, double t) {
  detail::check_lattice_trajectory(traj, spec);
  return small_mass_distance(traj(t), spec);
}

} // namespace subgrid::problems
