#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <sstream>

#include "subgrid/integrator.hpp"
#include "subgrid/io.hpp"

using namespace subgrid;

namespace {

Trajectory random_trajectory(std::mt19937& gen, std::size_t nodes, std::size_t dim) {
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  std::vector<double> t{0.0};
  for (std::size_t j = 1; j < nodes; ++j) t.push_back(t.back() + std::abs(mant(gen)) + 1e-3);
  std::vector<StateVector> s;
  for (std::size_t j = 0; j < nodes; ++j) {
    StateVector u(static_cast<Eigen::Index>(dim));
    for (auto& x : u) x = std::ldexp(mant(gen), expo(gen));
    s.push_back(u);
  }
  return Trajectory(t, s);
}

} // namespace

TEST(Csv, HeaderAndRows) {
  const Trajectory traj({0.0, 0.5}, {StateVector{{1.0, 2.0}}, StateVector{{0.1, -3.0}}});
  std::ostringstream os;
  io::write_csv(os, traj, {{"D", {1.5, 2.5}}});
  EXPECT_EQ(os.str(), "t,u_1,u_2,D\n0,1,2,1.5\n0.5,0.10000000000000001,-3,2.5\n");
}

TEST(Csv, RoundTripIsBitExact) {
  std::mt19937 gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto traj = random_trajectory(gen, 5 + trial, 1 + trial % 6);
    std::stringstream ss;
    io::write_csv(ss, traj, {{"extra", std::vector<double>(traj.size(), 0.25)}});
    const Trajectory back = io::read_csv(ss);
    ASSERT_EQ(back.size(), traj.size());
    ASSERT_EQ(back.dimension(), traj.dimension());
    for (std::size_t j = 0; j < traj.size(); ++j) {
      EXPECT_EQ(back.time(j), traj.time(j));
      EXPECT_EQ(back.state(j), traj.state(j));
    }
  }
}

TEST(Csv, SpecialValuesSurvive) {
  const double tiny = std::numeric_limits<double>::denorm_min();
  const Trajectory traj({0.0, 1e-300}, {StateVector{{tiny, -0.0}}, StateVector{{1e308, 1.0 / 3.0}}});
  std::stringstream ss;
  io::write_csv(ss, traj);
  const Trajectory back = io::read_csv(ss);
  EXPECT_EQ(back.state(0)[0], tiny);
  EXPECT_EQ(back.state(1), traj.state(1));
  EXPECT_EQ(back.time(1), 1e-300);
}

TEST(Csv, MalformedInput) {
  const Trajectory traj({0.0, 1.0}, {StateVector{{1.0}}, StateVector{{2.0}}});
  std::ostringstream os;
  EXPECT_THROW(io::write_csv(os, traj, {{"bad", {1.0}}}), InvalidArgument);
  std::istringstream empty("");
  EXPECT_THROW(io::read_csv(empty), InvalidArgument);
  std::istringstream no_t("x,u_1\n0,1\n1,2\n");
  EXPECT_THROW(io::read_csv(no_t), InvalidArgument);
  std::istringstream gap("t,u_2\n0,1\n1,2\n");
  EXPECT_THROW(io::read_csv(gap), InvalidArgument);
  std::istringstream short_row("t,u_1\n0,1\n1\n");
  EXPECT_THROW(io::read_csv(short_row), InvalidArgument);
  EXPECT_THROW(io::read_csv_file("/nonexistent/path.csv"), InvalidArgument);
}

TEST(Config, KeyValueLinesWithComments) {
  const auto kv = io::parse_config("# header\nproblem = lattice\n  tau=0.5  # window\n\nT = 10\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv.at("problem"), "lattice");
  EXPECT_EQ(kv.at("tau"), "0.5");
  EXPECT_EQ(kv.at("T"), "10");
}

TEST(Config, LaterKeysOverride) {
  EXPECT_EQ(io::parse_config("a = 1\na = 2\n").at("a"), "2");
}

TEST(Config, RejectsLinesWithoutEquals) {
  try {
    io::parse_config("a = 1\nnonsense\n");
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Numbers, Separators) {
  EXPECT_EQ(io::parse_numbers("1, 2;3  4.5e-1"), (std::vector<double>{1.0, 2.0, 3.0, 0.45}));
  EXPECT_TRUE(io::parse_numbers("  ").empty());
  EXPECT_THROW(io::parse_numbers("1 2x"), InvalidArgument);
}

TEST(LinearSystem, LoadsAndSolves) {
  const auto sys = io::load_linear_system("A = 0 1; -1 0\nb = 0, 1\nu0 = 1 0\nT = 2\n");
  EXPECT_EQ(sys.dimension, 2u);
  EXPECT_EQ(sys.final_time, 2.0);
  EXPECT_EQ(sys.initial_value, (StateVector{{1.0, 0.0}}));
  EXPECT_EQ(evaluate_rhs(sys, StateVector{{2.0, 3.0}}, 0.0), (StateVector{{3.0, -1.0}}));
  Matrix A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  EXPECT_EQ(jacobian(sys, sys.initial_value, 0.0), A);
  EXPECT_NO_THROW(solve_cg1(sys, 0.1));
}

TEST(LinearSystem, MissingOrInconsistentKeys) {
  EXPECT_THROW(io::load_linear_system("A = 1\nT = 1\n"), InvalidArgument);
  EXPECT_THROW(io::load_linear_system("A = 1 2\nu0 = 1\nT = 1\n"), InvalidArgument);
  EXPECT_THROW(io::load_linear_system("A = 1; 2\nu0 = 1\nT = 1\n"), InvalidArgument);
  EXPECT_THROW(io::load_linear_system("A = 1\nb = 1 2\nu0 = 1\nT = 1\n"), InvalidArgument);
}
