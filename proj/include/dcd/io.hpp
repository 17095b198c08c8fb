#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dcd/oracle.hpp"
#include "dcd/problem.hpp"
#include "dcd/solver.hpp"

namespace dcd {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

inline json network_to_json(const Network& net) {
  json j;
  j["agents"] = net.agent_count;
  j["edges"] = json::array();
  for (auto& [a, b] : net.edges) j["edges"].push_back({a, b});
  if (!net.positions.empty()) {
    j["positions"] = json::array();
    for (auto& p : net.positions) j["positions"].push_back({p[0], p[1]});
  }
  return j;
}

inline Network network_from_json(const json& j) {
  if (!j.contains("agents") || !j.contains("edges"))
    throw ConfigError("topology needs 'agents' and 'edges'");
  std::vector<std::pair<int, int>> edges;
  for (auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("edges must be [i, j] pairs");
    edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  Network net = build_network(j.at("agents").get<int>(), edges);
  if (j.contains("positions")) {
    for (auto& p : j.at("positions"))
      net.positions.push_back({p[0].get<double>(), p[1].get<double>()});
    if (static_cast<int>(net.positions.size()) != net.agent_count)
      throw ConfigError("one position per agent required");
  }
  return net;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix must be a non-empty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols)
      throw ConfigError("matrix rows have inconsistent lengths");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

inline json reference_to_json(const ReferenceSolution& ref) {
  json j;
  j["method"] = ref.method;
  j["tolerance"] = ref.tolerance;
  j["dual_unique"] = ref.dual_unique;
  j["w"] = json::array();
  for (auto& wk : ref.w) j["w"].push_back(vector_to_json(wk));
  j["multipliers"] = json::array();
  for (auto& ve : ref.multipliers) j["multipliers"].push_back(vector_to_json(ve));
  return j;
}

inline ReferenceSolution reference_from_json(const json& j) {
  ReferenceSolution ref;
  ref.method = j.at("method").get<std::string>();
  ref.tolerance = j.at("tolerance").get<double>();
  ref.dual_unique = j.at("dual_unique").get<bool>();
  for (auto& wk : j.at("w")) ref.w.push_back(vector_from_json(wk));
  for (auto& ve : j.at("multipliers")) ref.multipliers.push_back(vector_from_json(ve));
  return ref;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && rows.back().size() != row.size())
      throw Error("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("empty CSV: " + path.string());
  Matrix m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ostringstream out;
  out << "round,rel_error,constraint_residual,consensus_residual,lyapunov,comm_scalars\n";
  for (auto& r : trace.records)
    out << r.round << ',' << format_double(r.rel_error) << ','
        << format_double(r.constraint_residual) << ','
        << format_double(r.consensus_residual) << ',' << format_double(r.lyapunov) << ','
        << format_double(r.comm_scalars) << '\n';
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Content hash for oracle caching
// ---------------------------------------------------------------------------

namespace detail {

struct Fnv1a {
  std::uint64_t state = 0xcbf29ce484222325ULL;
  void feed_bytes(const void* data, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state ^= bytes[i];
      state *= 0x100000001b3ULL;
    }
  }
  void feed(double v) { feed_bytes(&v, sizeof(v)); }
  void feed(int v) { feed_bytes(&v, sizeof(v)); }
  void feed(const Matrix& m) {
    feed(static_cast<int>(m.rows()));
    feed(static_cast<int>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) feed(m(i, j));
  }
  void feed(const Vector& v) {
    feed(static_cast<int>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) feed(v(i));
  }
};

}  // namespace detail

/// Stable content hash of everything that determines the optimum; used to
/// key cached reference solutions.
inline std::string problem_hash(const ProblemSpec& p) {
  detail::Fnv1a h;
  h.feed(p.agent_count());
  h.feed(p.constraint_count());
  for (auto& c : p.costs) {
    h.feed(static_cast<int>(c.kind()));
    h.feed(c.regressors());
    h.feed(c.targets());
    h.feed(c.l2_weight());
  }
  for (auto& r : p.regularizers) {
    h.feed(static_cast<int>(r.kind()));
    h.feed(r.l1_weight());
    h.feed(r.l2_weight());
    h.feed(r.lower());
    h.feed(r.upper());
  }
  for (auto& group : p.blocks)
    for (auto& blk : group) {
      h.feed(blk.constraint_id);
      h.feed(blk.agent_id);
      h.feed(blk.coupling);
      h.feed(blk.rhs);
    }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.state));
  return buf;
}

}  // namespace dcd
