#pragma once

#include <charconv>
#include <cstdio>
#include <system_error>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "subgrid/error.hpp"
#include "subgrid/system.hpp"

namespace subgrid::io {

/// An extra CSV column with one value per trajectory node.
struct Column {
  std::string name;
  std::vector<double> values;
};

/// Parses the whole of `text` as a double; subnormals are accepted.
inline double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) throw InvalidArgument("not a number: `" + text + "`");
  return v;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Header `t,u_1,...,u_N[,extra...]`, one row per node, LF line endings.
inline void write_csv(std::ostream& os, const Trajectory& traj, const std::vector<Column>& extra = {}) {
  for (const auto& c : extra)
    if (c.values.size() != traj.size())
      throw InvalidArgument("column " + c.name + " has " + std::to_string(c.values.size()) + " values, expected " +
                            std::to_string(traj.size()));
  os << 't';
  for (std::size_t i = 0; i < traj.dimension(); ++i) os << ",u_" << i + 1;
  for (const auto& c : extra) os << ',' << c.name;
  os << '\n';
  for (std::size_t j = 0; j < traj.size(); ++j) {
    os << format_double(traj.time(j));
    const StateVector& u = traj.state(j);
    for (Eigen::Index i = 0; i < u.size(); ++i) os << ',' << format_double(u[i]);
    for (const auto& c : extra) os << ',' << format_double(c.values[j]);
    os << '\n';
  }
}

/// Reads the t and u_i columns of a CSV written by write_csv; other columns
/// are ignored.
inline Trajectory read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("CSV is empty");
  std::vector<int> state_column; // -1: not a state column
  std::size_t dim = 0;
  {
    std::istringstream hs(line);
    std::string name;
    std::size_t col = 0;
    while (std::getline(hs, name, ',')) {
      if (col == 0 && name != "t") throw InvalidArgument("CSV header must start with t");
      if (col > 0 && name.rfind("u_", 0) == 0) {
        const std::string digits = name.substr(2);
        std::size_t index = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || index != dim + 1) throw InvalidArgument("CSV state columns must be u_1..u_N in order");
        state_column.push_back(static_cast<int>(dim++));
      } else {
        state_column.push_back(-1);
      }
      ++col;
    }
  }
  if (dim == 0) throw InvalidArgument("CSV has no state columns");
  std::vector<double> times;
  std::vector<StateVector> states;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    StateVector u(static_cast<Eigen::Index>(dim));
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col >= state_column.size()) throw InvalidArgument("CSV row has too many columns");
      const double v = parse_double(cell);
      if (col == 0) times.push_back(v);
      else if (state_column[col] >= 0) u[state_column[col]] = v;
      ++col;
    }
    if (col != state_column.size()) throw InvalidArgument("CSV row has " + std::to_string(col) + " columns");
    states.push_back(std::move(u));
  }
  return Trajectory(std::move(times), std::move(states));
}

inline Trajectory read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_csv(in);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Flat `key = value` lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string{};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(number) + " is not `key = value`");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Whitespace or comma separated numbers.
inline std::vector<double> parse_numbers(const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == ',' || c == ';') c = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    out.push_back(parse_double(tok));
  }
  return out;
}

/// u' = A u + b from a `key = value` file with keys A (rows separated by
/// ';'), b (optional), u0 and T.
inline DynamicalSystem load_linear_system(const std::string& text) {
  const auto cfg = parse_config(text);
  auto get = [&cfg](const std::string& key) -> const std::string& {
    const auto it = cfg.find(key);
    if (it == cfg.end()) throw InvalidArgument("system file is missing `" + key + "`");
    return it->second;
  };
  const std::vector<double> u0 = parse_numbers(get("u0"));
  const auto n = static_cast<Eigen::Index>(u0.size());
  if (n == 0) throw InvalidArgument("system file has an empty u0");
  std::vector<std::vector<double>> rows;
  {
    std::istringstream rs(get("A"));
    std::string row;
    while (std::getline(rs, row, ';')) rows.push_back(parse_numbers(row));
  }
  if (static_cast<Eigen::Index>(rows.size()) != n) throw InvalidArgument("matrix A must have one row per component");
  Matrix A(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw InvalidArgument("matrix A must be square");
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  StateVector b = StateVector::Zero(n);
  if (cfg.count("b")) {
    const auto bv = parse_numbers(cfg.at("b"));
    if (static_cast<Eigen::Index>(bv.size()) != n) throw InvalidArgument("vector b has wrong length");
    b = Eigen::Map<const StateVector>(bv.data(), n);
  }
  DynamicalSystem sys;
  sys.dimension = static_cast<std::size_t>(n);
  sys.initial_value = Eigen::Map<const StateVector>(u0.data(), n);
  sys.final_time = parse_numbers(get("T")).at(0);
  sys.rhs = [A, b](const StateVector& u, double) { return StateVector(A * u + b); };
  sys.jacobian = [A](const StateVector&, double) { return A; };
  return sys;
}

} // namespace subgrid::io
