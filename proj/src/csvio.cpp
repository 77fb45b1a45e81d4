// SPDX-License-Identifier: Apache-2.0
#include "stpc/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace stpc {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& s, const std::string& path, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": parse error at line " + std::to_string(lineno) +
                             ": bad number '" + s + "'");
  }
}

void column_names(std::ostream& os, const std::string& base, std::size_t n) {
  if (n == 1) {
    os << "," << base;
  } else {
    for (std::size_t c = 0; c < n; ++c) os << "," << base << "_" << c;
  }
}

}  // namespace

void write_dataset(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset write: cannot open " + path);
  const std::size_t m = traj.m(), p = traj.p();
  out << "t";
  for (std::size_t c = 0; c < m; ++c) out << ",u_" << c;
  for (std::size_t c = 0; c < p; ++c) out << ",y_" << c;
  out << "\n";
  for (std::size_t t = 0; t < traj.length(); ++t) {
    out << (traj.start_index + static_cast<long>(t));
    for (std::size_t c = 0; c < m; ++c) out << "," << fmt(traj.inputs[t][c]);
    for (std::size_t c = 0; c < p; ++c) out << "," << fmt(traj.outputs[t][c]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("dataset write: write failed for " + path);
}

Trajectory read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset read: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": parse error at line 1: empty file");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "t")
    throw std::runtime_error(path + ": parse error at line 1: header must start with 't'");
  std::size_t m = 0, p = 0;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].rfind("u_", 0) == 0 && p == 0) ++m;
    else if (header[i].rfind("y_", 0) == 0) ++p;
    else
      throw std::runtime_error(path + ": parse error at line 1: unexpected column '" + header[i] +
                               "'");
  }
  if (m == 0 || p == 0)
    throw std::runtime_error(path + ": parse error at line 1: need u_* and y_* columns");

  Trajectory traj;
  std::size_t lineno = 1;
  bool first = true;
  long expect_t = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 1 + m + p)
      throw std::runtime_error(path + ": parse error at line " + std::to_string(lineno) +
                               ": expected " + std::to_string(1 + m + p) + " columns, got " +
                               std::to_string(cells.size()));
    const double traw = parse_num(cells[0], path, lineno);
    const long t = static_cast<long>(traw);
    if (first) {
      traj.start_index = t;
      expect_t = t;
      first = false;
    }
    if (t != expect_t)
      throw std::runtime_error(path + ": parse error at line " + std::to_string(lineno) +
                               ": non-contiguous time index");
    ++expect_t;
    Vec u(m), y(p);
    for (std::size_t c = 0; c < m; ++c) u[c] = parse_num(cells[1 + c], path, lineno);
    for (std::size_t c = 0; c < p; ++c) y[c] = parse_num(cells[1 + m + c], path, lineno);
    traj.inputs.push_back(std::move(u));
    traj.outputs.push_back(std::move(y));
  }
  if (traj.length() == 0) throw std::runtime_error(path + ": parse error: no data rows");
  return traj;
}

void write_sample_log(const std::string& path, const std::vector<SampleStep>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("sample log write: cannot open " + path);
  const std::size_t m = log.empty() ? 1 : log.front().u_l.size();
  const std::size_t p = log.empty() ? 1 : log.front().y.size();
  out << "t";
  column_names(out, "u_l", m);
  column_names(out, "u_safe", m);
  column_names(out, "y", p);
  out << ",objective,qp_status\n";
  for (const SampleStep& s : log) {
    out << s.t;
    for (double v : s.u_l) out << "," << fmt(v);
    for (double v : s.u_safe) out << "," << fmt(v);
    for (double v : s.y) out << "," << fmt(v);
    out << "," << fmt(s.objective) << "," << to_string(s.status) << "\n";
  }
  if (!out) throw std::runtime_error("sample log write: write failed for " + path);
}

void write_run_log(const std::string& path, const std::vector<LogRow>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("run log write: cannot open " + path);
  const std::size_t m = log.empty() ? 1 : log.front().u.size();
  const std::size_t p = log.empty() ? 1 : log.front().y.size();
  out << "t";
  column_names(out, "u", m);
  column_names(out, "y", p);
  out << ",level,w,status,objective,solve_ms\n";
  for (const LogRow& r : log) {
    out << r.t;
    for (double v : r.u) out << "," << fmt(v);
    for (double v : r.y) out << "," << fmt(v);
    out << "," << r.level << "," << r.w << "," << r.status << "," << fmt(r.objective) << ","
        << fmt(r.solve_ms) << "\n";
  }
  if (!out) throw std::runtime_error("run log write: write failed for " + path);
}

std::vector<LogRow> read_run_log(const std::string& path, std::size_t m, std::size_t p) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("run log read: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": parse error at line 1: empty file");
  std::vector<LogRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 1 + m + p + 5)
      throw std::runtime_error(path + ": parse error at line " + std::to_string(lineno) +
                               ": unexpected column count");
    LogRow r;
    r.t = static_cast<long>(parse_num(cells[0], path, lineno));
    r.u.resize(m);
    r.y.resize(p);
    for (std::size_t c = 0; c < m; ++c) r.u[c] = parse_num(cells[1 + c], path, lineno);
    for (std::size_t c = 0; c < p; ++c) r.y[c] = parse_num(cells[1 + m + c], path, lineno);
    r.level = static_cast<long>(parse_num(cells[1 + m + p], path, lineno));
    r.w = static_cast<long>(parse_num(cells[2 + m + p], path, lineno));
    r.status = cells[3 + m + p];
    r.objective = parse_num(cells[4 + m + p], path, lineno);
    r.solve_ms = parse_num(cells[5 + m + p], path, lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_run_summary(const std::string& path, const RunResult& res) {
  nlohmann::json j;
  j["converged"] = res.converged;
  j["steps"] = res.steps;
  j["max_abs_u"] = res.max_abs_u;
  j["max_abs_y"] = res.max_abs_y;
  j["min_level_reached"] = res.min_level_reached;
  j["any_infeasible"] = res.any_infeasible;
  if (!res.failure_reason.empty()) j["reason"] = res.failure_reason;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("summary write: cannot open " + path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("summary write: write failed for " + path);
}

}  // namespace stpc
