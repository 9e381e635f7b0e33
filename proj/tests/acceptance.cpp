// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "subgrid/subgrid.hpp"

using namespace subgrid;

namespace {

// Pinned tolerances.
constexpr double kSubgridTarget = 0.2495;
constexpr double kSubgridTol = 0.005;
constexpr double kReducedAccuracy = 1e-2;
constexpr std::size_t kResolvedStepsMax = 2000;
constexpr std::size_t kTotalStepsMax = 3000;
constexpr double kOracleRelTol = 0.05;
constexpr double kBaselineTol = 1e-6;
constexpr double kLatticeAmplitudeMin = 1e-4;
constexpr double kAdjointTol = 1e-4;
constexpr double kRatioLow = 3.5;
constexpr double kRatioHigh = 4.5;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int failures = 0;

void criterion(int number, const char* title, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0.0) out.require(seconds < time_limit, "runtime " + fmt("%.2f", seconds) + " s < " + fmt("%g", time_limit) + " s");
  std::printf("%s  [%d] %s: %s\n", out.pass ? "PASS" : "FAIL", number, title, out.detail.c_str());
  std::fflush(stdout);
  if (!out.pass) ++failures;
}

ModelingOptions simple_options() {
  ModelingOptions o;
  o.tau = 1e-7;
  o.resolved_step = 2e-10;
  return o;
}

DynamicalSystem linear_2d(double T) {
  Matrix A(2, 2);
  A << -0.5, 1.0, -1.0, -0.5;
  DynamicalSystem sys;
  sys.dimension = 2;
  sys.initial_value = StateVector{{1.0, 0.0}};
  sys.final_time = T;
  sys.rhs = [A](const StateVector& u, double) { return StateVector(A * u); };
  sys.jacobian = [A](const StateVector&, double) { return A; };
  return sys;
}

// u(t) = e^{-t/2} (cos t, -sin t) for u(0) = e1.
StateVector linear_2d_exact(double t) {
  return std::exp(-0.5 * t) * StateVector{{std::cos(t), -std::sin(t)}};
}

// phi(t) = exp(A^T (T - t)) psi.
StateVector linear_2d_adjoint(double t, double T, const StateVector& psi) {
  const double s = T - t;
  Matrix R(2, 2);
  R << std::cos(s), -std::sin(s), std::sin(s), std::cos(s);
  return std::exp(-0.5 * s) * R * psi;
}

} // namespace

int main() {
  criterion(1, "subgrid constant reproduction", 5.0, [] {
    Outcome o;
    const auto fit = auto_model(problems::make_simple_model({1e18, 100.0}), simple_options());
    const double g = fit.model.constants[2];
    o.require(std::abs(g - kSubgridTarget) <= kSubgridTol, "g~_3 = " + fmt("%.6f", g) + " within 0.2495 +- 0.005");
    o.require(!fit.model.active[1] && !fit.model.active[3], "components 2 and 4 inactive");
    return o;
  });

  criterion(2, "reduced-solution accuracy", 5.0, [] {
    Outcome o;
    const auto fit = auto_model(problems::make_simple_model({1e18, 100.0}), simple_options());
    const Trajectory U = solve_cg1(fit.reduced.system(), 0.01);
    double err = 0.0;
    for (std::size_t j = 0; j < U.size(); ++j)
      err = std::max(err, std::abs(U.state(j)[0] - problems::analytic_reduced_simple(U.time(j))));
    o.require(err <= kReducedAccuracy, "max |U_1 - (1 - cos t)/4| = " + fmt("%.3e", err) + " <= 1e-2");
    return o;
  });

  criterion(3, "cost bookkeeping", 0.0, [] {
    Outcome o;
    const auto sys = problems::make_simple_model({1e18, 100.0});
    const auto fit = auto_model(sys, simple_options());
    const Trajectory U = solve_cg1(fit.reduced.system(), 0.1);
    const std::size_t resolved = fit.resolved.size() - 1;
    const std::size_t reduced = U.size() - 1;
    o.require(resolved <= kResolvedStepsMax, "resolved steps " + std::to_string(resolved) + " <= 2000");
    o.require(reduced >= 900 && reduced <= 1100, "reduced steps " + std::to_string(reduced) + " ~ 1e3");
    o.require(resolved + reduced <= kTotalStepsMax, "total " + std::to_string(resolved + reduced) + " <= 3000");
    const double full = sys.final_time / simple_options().resolved_step;
    o.detail += "; full resolution would take " + fmt("%.1e", full) + " steps";
    return o;
  });

  criterion(4, "oracle equivalence at kappa = 1e4", 60.0, [] {
    Outcome o;
    const auto sys = problems::make_simple_model({1e4, 10.0});
    ModelingOptions opts;
    opts.tau = 0.1;
    const auto fit = auto_model(sys, opts);
    const Trajectory U = solve_cg1(fit.reduced.system(), 0.01);
    const Trajectory brute = solve_cg1(sys, 1e-4);
    const AverageWindow w(opts.tau);
    double err = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < U.size(); ++j) {
      const double avg = moving_average(brute, w, U.time(j))[0];
      err = std::max(err, std::abs(U.state(j)[0] - avg));
      scale = std::max(scale, std::abs(avg));
    }
    o.require(err / scale <= kOracleRelTol, "relative max error of U_1 " + fmt("%.4f", err / scale) + " <= 0.05");
    return o;
  });

  criterion(5, "lattice baseline and modeled diameter", 120.0, [] {
    Outcome o;
    const problems::LatticeSpec spec;
    const auto sys = problems::make_lattice(spec);
    ModelingOptions opts;
    opts.tau = 1.0;
    const auto fit = auto_model(sys, opts);

    SubgridModel disabled = fit.model;
    disabled.constants.setZero();
    const ReducedSystem baseline(sys, disabled, problems::lattice_rest_state(spec));
    DynamicalSystem base_sys = baseline.system();
    base_sys.final_time = 20.0;
    const Trajectory B = solve_cg1(base_sys, 0.1);
    double dev = 0.0;
    for (std::size_t j = 0; j < B.size(); ++j)
      dev = std::max(dev, std::abs(problems::diameter(B.state(j), spec) - std::numbers::sqrt2));
    o.require(dev <= kBaselineTol, "disabled model: max |D - sqrt 2| on [0, 20] = " + fmt("%.2e", dev));

    const Trajectory U = solve_cg1(fit.reduced.system(), 0.1);
    double lo = 1e300, hi = -1e300, sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < U.size(); ++j) {
      const double D = problems::diameter(U.state(j), spec);
      lo = std::min(lo, D);
      hi = std::max(hi, D);
      if (U.time(j) >= 5.0 - 1e-9 && U.time(j) <= 10.0 + 1e-9) {
        sum += D;
        ++count;
      }
    }
    const double amplitude = 0.5 * (hi - lo);
    const double mean = sum / static_cast<double>(count);
    o.require(amplitude > kLatticeAmplitudeMin, "modeled D amplitude " + fmt("%.3e", amplitude) + " > 1e-4");
    o.require(mean < std::numbers::sqrt2, "mean D on [5, 10] - sqrt 2 = " + fmt("%.3e", mean - std::numbers::sqrt2));
    return o;
  });

  criterion(6, "dual and estimator soundness", 10.0, [] {
    Outcome o;
    const double T = 5.0;
    const auto sys = linear_2d(T);
    const ReducedSystem reduced(sys, SubgridModel::identity(2), sys.initial_value);
    bool bounded = true, adjoint_ok = true;
    double worst_adjoint = 0.0, worst_ratio = 0.0;
    for (double k : {0.1, 0.05, 0.01}) {
      const Trajectory U = solve_cg1(reduced.system(), k);
      for (const StateVector& psi : {StateVector{{1.0, 0.0}}, StateVector{{0.0, 1.0}}, StateVector{{0.6, -0.8}}}) {
        const Trajectory phi = solve_dual({U, reduced.system(), psi, T}, k);
        const auto est = error_estimate(U, reduced, phi, {});
        const double err = std::abs((U.state(U.size() - 1) - linear_2d_exact(T)).dot(psi));
        bounded = bounded && err <= est.total;
        worst_ratio = std::max(worst_ratio, err / est.total);
        if (k == 0.01)
          for (std::size_t j = 0; j < phi.size(); ++j)
            worst_adjoint = std::max(worst_adjoint, (phi.state(j) - linear_2d_adjoint(phi.time(j), T, psi)).norm());
      }
    }
    adjoint_ok = worst_adjoint <= kAdjointTol;
    o.require(bounded, "|(e(T), psi)| <= total (max ratio " + fmt("%.3f", worst_ratio) + ")");
    o.require(adjoint_ok, "adjoint error " + fmt("%.2e", worst_adjoint) + " <= 1e-4");

    // Dual linearity.
    {
      const Trajectory U = solve_cg1(sys, 0.05);
      const StateVector p1{{1.0, 2.0}}, p2{{-0.5, 0.25}};
      const auto a = solve_dual({U, sys, p1, T}, 0.05);
      const auto b = solve_dual({U, sys, p2, T}, 0.05);
      const auto c = solve_dual({U, sys, StateVector(2.0 * p1 - 3.0 * p2), T}, 0.05);
      double d = 0.0;
      for (std::size_t j = 0; j < c.size(); ++j) d = std::max(d, (c.state(j) - 2.0 * a.state(j) + 3.0 * b.state(j)).norm());
      o.require(d <= 1e-12, "dual linearity");
      const auto sa = stability_factors(a);
      const auto sc = stability_factors(solve_dual({U, sys, StateVector(-4.0 * p1), T}, 0.05));
      o.require(std::abs(sc.S0 - 4.0 * sa.S0) <= 1e-12 * sc.S0 && std::abs(sc.S1 - 4.0 * sa.S1) <= 1e-12 * sc.S1,
                "stability factor homogeneity");
    }
    // Zero variance for a linear field.
    {
      const Trajectory U = solve_cg1(sys, 0.01);
      double g = 0.0;
      for (double t : {1.0, 2.5, 4.0}) g = std::max(g, variance(U, sys, AverageWindow(0.5), t).norm());
      o.require(g <= 1e-12, "zero variance for linear f");
    }
    // Frozen components never move.
    {
      const auto fit = auto_model(problems::make_simple_model({1e18, 100.0}), simple_options());
      const Trajectory U = solve_cg1(fit.reduced.system(), 0.1);
      bool frozen = true;
      for (std::size_t j = 0; j < U.size(); ++j)
        frozen = frozen && U.state(j)[1] == fit.reduced.initial_value()[1] && U.state(j)[3] == fit.reduced.initial_value()[3];
      o.require(frozen, "frozen-component exactness");
    }
    // Second-order convergence on u' = -u.
    {
      DynamicalSystem decay;
      decay.dimension = 1;
      decay.initial_value = StateVector{{1.0}};
      decay.final_time = 1.0;
      decay.rhs = [](const StateVector& u, double) { return StateVector(-u); };
      const double e1 = std::abs(solve_cg1(decay, 0.01).state(100)[0] - std::exp(-1.0));
      const double e2 = std::abs(solve_cg1(decay, 0.005).state(200)[0] - std::exp(-1.0));
      o.require(e1 / e2 >= kRatioLow && e1 / e2 <= kRatioHigh, "convergence ratio " + fmt("%.3f", e1 / e2));
    }
    return o;
  });

  criterion(7, "control-point validity decay on the lattice", 0.0, [] {
    Outcome o;
    const problems::LatticeSpec spec;
    const auto sys = problems::make_lattice(spec);
    ModelingOptions opts;
    opts.tau = 1.0;
    const auto fit = auto_model(sys, opts);
    const Trajectory U = solve_cg1(fit.reduced.system(), 0.1);

    const auto early = validate_at_control_points(U, sys, fit.model, {2.0, 10.0, 20.0, 30.0}, opts);
    bool increasing = true;
    std::string values;
    for (std::size_t i = 0; i < early.points.size(); ++i) {
      if (i > 0) increasing = increasing && early.points[i].deviation > early.points[i - 1].deviation;
      values += (i ? " " : "") + fmt("%.3e", early.points[i].deviation);
    }
    o.require(increasing, "deviation strictly increasing at t = 2, 10, 20, 30 (" + values + ")");

    const auto sweep = validate_at_control_points(U, sys, fit.model, default_control_points(1.0, spec.T, 6), opts);
    const double first = sweep.points.front().deviation;
    bool later_exceed = true;
    double tm = 0.0, dm = 0.0;
    for (const auto& p : sweep.points) {
      tm += p.time;
      dm += p.deviation;
    }
    tm /= static_cast<double>(sweep.points.size());
    dm /= static_cast<double>(sweep.points.size());
    double cov = 0.0;
    for (std::size_t i = 0; i < sweep.points.size(); ++i) {
      if (i > 0) later_exceed = later_exceed && sweep.points[i].deviation > first;
      cov += (sweep.points[i].time - tm) * (sweep.points[i].deviation - dm);
    }
    o.require(later_exceed, "every later point of the 6-point sweep over [2, 98] exceeds the first");
    o.require(cov > 0.0, "positive trend of deviation against time");
    return o;
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
