// Copyright 2026 The PALS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats: delimited node/edge/ground-truth/contact/score tables,
// weights JSON, state diagnostics and atomic output.

#pragma once

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pals/cohort.hpp"
#include "pals/experiment.hpp"
#include "pals/errors.hpp"
#include "pals/graph.hpp"
#include "pals/model.hpp"
#include "pals/synth.hpp"

namespace pals {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw FormatError("format_double: conversion failed");
  return std::string(buf, end);
}

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Output

// Writes `content` to `path` through a temporary file in the same directory
// and a rename, so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Delimited tables

struct CsvTable {
  std::string source;  // file name used in error messages
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_of_row;  // 1-based line numbers

  std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw FormatError(source + ": missing column '" + std::string(name) + "'");
  }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    return std::nullopt;
  }

  [[noreturn]] void fail(std::size_t row, std::size_t col,
                         const std::string& what) const {
    throw FormatError(source + ": line " + std::to_string(line_of_row[row]) +
                      ", column '" + header[col] + "': " + what);
  }

  double real(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      fail(row, col, "expected a number, got '" + s + "'");
    return v;
  }

  std::int64_t integer(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      fail(row, col, "expected an integer, got '" + s + "'");
    return v;
  }

  int binary(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    if (s == "0") return 0;
    if (s == "1") return 1;
    fail(row, col, "expected 0 or 1, got '" + s + "'");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

}  // namespace detail

// Comma-separated text with a header row. Blank lines are skipped; every
// data row must have exactly as many fields as the header.
inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw FormatError(source + ": line " + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_of_row.push_back(line_no);
  }
  if (!have_header) throw FormatError(source + ": empty file (no header)");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

inline void require_header_prefix(const CsvTable& t,
                                  const std::vector<std::string>& expected) {
  for (std::size_t c = 0; c < expected.size(); ++c)
    if (c >= t.header.size() || t.header[c] != expected[c])
      throw FormatError(t.source + ": header column " + std::to_string(c + 1) +
                        " must be '" + expected[c] + "'");
}

// ---------------------------------------------------------------------------
// Networks: nodes `id,role,f1..fd` and edges `src,dst,last_contact_day`.

inline std::string nodes_csv(const ContactNetwork& net) {
  std::string out = "id,role";
  for (std::size_t k = 0; k < net.feature_dim(); ++k)
    out += ",f" + std::to_string(k + 1);
  out += '\n';
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    out += net.ids[i];
    out += net.is_main(i) ? ",main" : ",auxiliary";
    for (double v : net.features.row(i)) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

// One row per (main, neighbor) entry of the neighbor lists; an empty
// last_contact_day means the edge carries no date.
inline std::string edges_csv(const ContactNetwork& net) {
  std::string out = "src,dst,last_contact_day\n";
  for (std::size_t i = 0; i < net.node_count(); ++i)
    for (const Edge& e : net.neighbors[i]) {
      out += net.ids[i] + "," + net.ids[e.node] + ",";
      if (e.last_contact_day) out += std::to_string(*e.last_contact_day);
      out += '\n';
    }
  return out;
}

inline ContactNetwork network_from_tables(const CsvTable& nodes,
                                          const CsvTable& edges) {
  require_header_prefix(nodes, {"id", "role"});
  const std::size_t d = nodes.header.size() - 2;
  for (std::size_t k = 0; k < d; ++k)
    if (nodes.header[k + 2] != "f" + std::to_string(k + 1))
      throw FormatError(nodes.source + ": header column " + std::to_string(k + 3) +
                        " must be 'f" + std::to_string(k + 1) + "'");
  ContactNetwork net = make_empty_network(nodes.rows.size());
  net.features = Matrix(nodes.rows.size(), d);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < nodes.rows.size(); ++r) {
    const auto& row = nodes.rows[r];
    if (row[0].empty()) nodes.fail(r, 0, "empty id");
    if (!index.emplace(row[0], r).second) nodes.fail(r, 0, "duplicate id '" + row[0] + "'");
    net.ids[r] = row[0];
    if (row[1] == "main") {
      net.roles[r] = NodeRole::kMain;
    } else if (row[1] == "auxiliary") {
      net.roles[r] = NodeRole::kAuxiliary;
    } else {
      nodes.fail(r, 1, "role must be 'main' or 'auxiliary', got '" + row[1] + "'");
    }
    for (std::size_t k = 0; k < d; ++k) net.features(r, k) = nodes.real(r, k + 2);
  }

  require_header_prefix(edges, {"src", "dst"});
  const auto day_col = edges.find_column("last_contact_day");
  for (std::size_t r = 0; r < edges.rows.size(); ++r) {
    const auto& row = edges.rows[r];
    auto src = index.find(row[0]);
    if (src == index.end()) edges.fail(r, 0, "unknown node '" + row[0] + "'");
    auto dst = index.find(row[1]);
    if (dst == index.end()) edges.fail(r, 1, "unknown node '" + row[1] + "'");
    Edge e{dst->second, std::nullopt};
    if (day_col && !row[*day_col].empty()) e.last_contact_day = edges.integer(r, *day_col);
    net.neighbors[src->second].push_back(e);
  }
  try {
    net.validate();
  } catch (const ConfigError& e) {
    throw FormatError(edges.source + ": " + e.what());
  }
  return net;
}

inline ContactNetwork read_network(const std::filesystem::path& nodes,
                                   const std::filesystem::path& edges) {
  return network_from_tables(read_csv(nodes), read_csv(edges));
}

// ---------------------------------------------------------------------------
// Ground truth `id,y,z_true,eta_true,z_observed`.

inline std::string ground_truth_csv(const ContactNetwork& net, const GroundTruth& gt) {
  std::string out = "id,y,z_true,eta_true,z_observed\n";
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    out += net.ids[i] + "," + std::to_string(gt.y[i]) + "," +
           std::to_string(gt.z_true[i]) + "," + std::to_string(gt.eta_true[i]) + "," +
           (gt.z_observed_mask[i] ? "1" : "0") + "\n";
  }
  return out;
}

// Per-node labels read back from a ground-truth table. Only y, z_true,
// eta_true and the observation flag are stored.
struct NodeLabels {
  std::vector<int> y;
  std::vector<int> z_true;
  std::vector<int> eta_true;
  std::vector<bool> z_observed;
};

inline NodeLabels labels_from_table(const CsvTable& t, const ContactNetwork& net) {
  require_header_prefix(t, {"id", "y", "z_true", "eta_true", "z_observed"});
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < net.node_count(); ++i) index.emplace(net.ids[i], i);
  const std::size_t n = net.node_count();
  NodeLabels out{std::vector<int>(n, 0), std::vector<int>(n, 0),
                 std::vector<int>(n, 0), std::vector<bool>(n, false)};
  std::vector<bool> seen(n, false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto it = index.find(t.rows[r][0]);
    if (it == index.end()) t.fail(r, 0, "unknown node '" + t.rows[r][0] + "'");
    const std::size_t i = it->second;
    if (seen[i]) t.fail(r, 0, "duplicate id '" + t.rows[r][0] + "'");
    seen[i] = true;
    out.y[i] = t.binary(r, 1);
    out.z_true[i] = t.binary(r, 2);
    out.eta_true[i] = t.binary(r, 3);
    out.z_observed[i] = t.binary(r, 4) == 1;
  }
  for (std::size_t i : net.main_nodes())
    if (!seen[i])
      throw FormatError(t.source + ": main node '" + net.ids[i] + "' has no row");
  return out;
}

// Labeled cohort from files. Spreader labels are taken from rows flagged
// z_observed only when `use_observed` is set.
inline LabeledCohort read_labeled_cohort(const std::filesystem::path& nodes,
                                         const std::filesystem::path& edges,
                                         const std::filesystem::path& truth,
                                         bool use_observed) {
  LabeledCohort c;
  c.network = read_network(nodes, edges);
  const NodeLabels l = labels_from_table(read_csv(truth), c.network);
  const std::size_t n = c.network.node_count();
  c.outcome.resize(n);
  c.spreader.resize(n);
  GroundTruth gt;
  gt.y = l.y;
  gt.z_true = l.z_true;
  gt.eta_true = l.eta_true;
  gt.z_observed_mask = l.z_observed;
  for (std::size_t i = 0; i < n; ++i) {
    if (c.network.is_main(i)) c.outcome[i] = l.y[i] == 1;
    if (use_observed && l.z_observed[i]) c.spreader[i] = l.z_true[i] == 1;
  }
  c.truth = std::move(gt);
  return c;
}

// ---------------------------------------------------------------------------
// Contact logs `main_id,neighbor_id,day,channel` and cutoffs `main_id,cutoff_day`.

inline std::vector<ContactEvent> contacts_from_table(const CsvTable& t) {
  require_header_prefix(t, {"main_id", "neighbor_id", "day", "channel"});
  std::vector<ContactEvent> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ContactEvent e;
    e.main_id = t.rows[r][0];
    e.neighbor_id = t.rows[r][1];
    if (e.main_id.empty()) t.fail(r, 0, "empty id");
    if (e.neighbor_id.empty()) t.fail(r, 1, "empty id");
    e.day = t.integer(r, 2);
    const auto channel = parse_channel(t.rows[r][3]);
    if (!channel) t.fail(r, 3, "unknown channel '" + t.rows[r][3] + "'");
    e.channel = *channel;
    out.push_back(std::move(e));
  }
  return out;
}

inline std::map<std::string, std::int64_t> cutoffs_from_table(const CsvTable& t) {
  require_header_prefix(t, {"main_id", "cutoff_day"});
  std::map<std::string, std::int64_t> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!out.emplace(t.rows[r][0], t.integer(r, 1)).second)
      t.fail(r, 0, "duplicate id '" + t.rows[r][0] + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Scores `id,score`.

inline std::string scores_csv(const std::vector<std::string>& ids,
                              const std::vector<double>& scores) {
  std::string out = "id,score\n";
  for (std::size_t k = 0; k < ids.size(); ++k)
    out += ids[k] + "," + format_double(scores[k]) + "\n";
  return out;
}

inline std::vector<std::pair<std::string, double>> scores_from_table(const CsvTable& t) {
  require_header_prefix(t, {"id", "score"});
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    out.emplace_back(t.rows[r][0], t.real(r, 1));
  return out;
}

// ---------------------------------------------------------------------------
// Weights JSON.

inline constexpr int kWeightsFormatVersion = 1;

// `intercept` records that the weights include a trailing constant-feature
// entry; feature_dim counts the data features only.
inline std::string weights_json(const PalsWeights& w, bool intercept) {
  nlohmann::ordered_json j;
  j["u"] = w.u;
  j["w_sus"] = w.w_sus;
  j["w_e"] = w.w_e;
  j["feature_dim"] = w.dim() - (intercept ? 1 : 0);
  j["intercept"] = intercept;
  j["format_version"] = kWeightsFormatVersion;
  return j.dump(2) + "\n";
}

struct StoredWeights {
  PalsWeights weights;
  bool intercept = false;
  std::size_t feature_dim = 0;
};

inline StoredWeights parse_weights_json(const std::string& text,
                                        const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(source + ": invalid JSON: " + e.what());
  }
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key))
      throw FormatError(source + ": missing key '" + key + "'");
    return j.at(key);
  };
  StoredWeights out;
  try {
    if (need("format_version").get<int>() != kWeightsFormatVersion)
      throw FormatError(source + ": unsupported format_version");
    out.weights.u = need("u").get<std::vector<double>>();
    out.weights.w_sus = need("w_sus").get<std::vector<double>>();
    out.weights.w_e = need("w_e").get<double>();
    out.feature_dim = need("feature_dim").get<std::size_t>();
    out.intercept = j.value("intercept", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": wrong value type: " + e.what());
  }
  const std::size_t expected = out.feature_dim + (out.intercept ? 1 : 0);
  if (out.weights.u.size() != expected || out.weights.w_sus.size() != expected)
    throw FormatError(source + ": u/w_sus length differs from feature_dim");
  return out;
}

inline StoredWeights read_weights(const std::filesystem::path& path) {
  return parse_weights_json(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Diagnostics.

// Per-node gamma and pi, per-edge phi.
inline std::string state_json(const ContactNetwork& net, const VariationalState& st) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < st.main_count(); ++m) {
    nlohmann::ordered_json node;
    node["id"] = net.ids[st.main_nodes[m]];
    node["gamma"] = {st.gamma[m][0], st.gamma[m][1]};
    node["pi"] = st.pi[m];
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (std::size_t e = st.edge_begin[m]; e < st.edge_begin[m + 1]; ++e)
      edges.push_back({{"neighbor", net.ids[st.edge_node[e]]},
                       {"phi", st.phi[e]},
                       {"clamped", static_cast<bool>(st.clamped[e])}});
    node["edges"] = std::move(edges);
    nodes.push_back(std::move(node));
  }
  nlohmann::ordered_json j;
  j["main_nodes"] = std::move(nodes);
  return j.dump(1) + "\n";
}

inline std::string elbo_trace_csv(const std::vector<double>& trace) {
  std::string out = "round,elbo\n";
  for (std::size_t r = 0; r < trace.size(); ++r)
    out += std::to_string(r) + "," + format_double(trace[r]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Experiment outputs.

inline std::string metrics_csv(int experiment, const std::vector<MetricRow>& rows) {
  std::string out = "experiment,grid_value,model,metric,mean,ci_low,ci_high,n_runs\n";
  for (const auto& r : rows)
    out += std::to_string(experiment) + "," + format_fixed(r.grid_value, 2) + "," +
           r.model + "," + r.metric + "," + format_fixed(r.summary.mean) + "," +
           format_fixed(r.summary.ci_low) + "," + format_fixed(r.summary.ci_high) +
           "," + std::to_string(r.summary.n_runs) + "\n";
  return out;
}

// Wide layout: one row per grid value, three columns per model.
inline std::string curves_csv(int experiment, const std::vector<std::string>& models,
                              const std::vector<MetricRow>& rows) {
  std::string out = "experiment,grid_value";
  for (const auto& m : models) out += "," + m + "," + m + "_ci_low," + m + "_ci_high";
  out += '\n';
  std::vector<double> grid;
  for (const auto& r : rows)
    if (grid.empty() || grid.back() != r.grid_value) grid.push_back(r.grid_value);
  for (double g : grid) {
    out += std::to_string(experiment) + "," + format_fixed(g, 2);
    for (const auto& m : models) {
      const MetricRow* hit = nullptr;
      for (const auto& r : rows)
        if (r.grid_value == g && r.model == m) hit = &r;
      if (hit) {
        out += "," + format_fixed(hit->summary.mean) + "," +
               format_fixed(hit->summary.ci_low) + "," + format_fixed(hit->summary.ci_high);
      } else {
        out += ",,,";
      }
    }
    out += '\n';
  }
  return out;
}

inline std::string runs_csv(int experiment, const std::vector<RunRecord>& runs) {
  std::string out = "experiment,grid_value,run,model,metric,value\n";
  for (const auto& r : runs)
    out += std::to_string(experiment) + "," + format_fixed(r.grid_value, 2) + "," +
           std::to_string(r.run) + "," + r.model + "," + r.metric + "," +
           format_double(r.value) + "\n";
  return out;
}

inline std::vector<MetricRow> metrics_from_table(const CsvTable& t) {
  require_header_prefix(t, {"experiment", "grid_value", "model", "metric", "mean",
                            "ci_low", "ci_high", "n_runs"});
  std::vector<MetricRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    MetricRow m;
    m.grid_value = t.real(r, 1);
    m.model = t.rows[r][2];
    m.metric = t.rows[r][3];
    m.summary.mean = t.real(r, 4);
    m.summary.ci_low = t.real(r, 5);
    m.summary.ci_high = t.real(r, 6);
    const auto n = t.integer(r, 7);
    if (n < 0) t.fail(r, 7, "negative count");
    m.summary.n_runs = static_cast<std::size_t>(n);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace pals
