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

// Contact networks: representation, stochastic block model generation,
// ingestion of contact logs and quintile binning of raw features.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pals/errors.hpp"
#include "pals/numerics.hpp"
#include "pals/random.hpp"

namespace pals {

enum class NodeRole { kMain, kAuxiliary };

struct Edge {
  std::size_t node = 0;
  // Latest qualifying contact day; absent for generated networks.
  std::optional<std::int64_t> last_contact_day;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Individuals with binary characteristics and per-node neighbor lists.
//
// Main nodes carry outcomes and neighbor lists. Auxiliary nodes only ever
// appear inside main nodes' neighbor lists.
struct ContactNetwork {
  std::vector<std::string> ids;
  Matrix features;  // node_count x feature_dim
  std::vector<std::vector<Edge>> neighbors;
  std::vector<NodeRole> roles;

  std::size_t node_count() const { return ids.size(); }
  std::size_t feature_dim() const { return features.cols(); }
  bool is_main(std::size_t i) const { return roles[i] == NodeRole::kMain; }

  std::vector<std::size_t> main_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i)
      if (roles[i] == NodeRole::kMain) out.push_back(i);
    return out;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& list : neighbors) n += list.size();
    return n;
  }

  // Throws ConfigError describing the first violated invariant.
  void validate() const {
    const std::size_t n = node_count();
    if (neighbors.size() != n || roles.size() != n)
      throw ConfigError("network: ids/neighbors/roles sizes differ");
    if (features.rows() != n && !(features.rows() == 0 && features.cols() == 0))
      throw ConfigError("network: feature rows differ from node count");
    for (std::size_t i = 0; i < n; ++i) {
      std::set<std::size_t> seen;
      if (!is_main(i) && !neighbors[i].empty())
        throw ConfigError("network: auxiliary node '" + ids[i] +
                          "' has a neighbor list");
      for (const Edge& e : neighbors[i]) {
        if (e.node >= n)
          throw ConfigError("network: neighbor index out of range at '" +
                            ids[i] + "'");
        if (e.node == i)
          throw ConfigError("network: self-loop at '" + ids[i] + "'");
        if (!seen.insert(e.node).second)
          throw ConfigError("network: duplicate neighbor '" + ids[e.node] +
                            "' of '" + ids[i] + "'");
        if (is_main(e.node)) {
          const auto& back = neighbors[e.node];
          const bool sym = std::any_of(back.begin(), back.end(),
                                       [&](const Edge& b) { return b.node == i; });
          if (!sym)
            throw ConfigError("network: edge '" + ids[i] + "'->'" +
                              ids[e.node] + "' between main nodes is not "
                              "symmetric");
        }
      }
    }
  }
};

// Network of n main nodes named "0".."n-1" with no edges and no features.
inline ContactNetwork make_empty_network(std::size_t n) {
  ContactNetwork net;
  net.ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) net.ids.push_back(std::to_string(i));
  net.neighbors.assign(n, {});
  net.roles.assign(n, NodeRole::kMain);
  net.features = Matrix(n, 0);
  return net;
}

// Adds an undirected edge between main nodes a and b.
inline void add_undirected_edge(ContactNetwork& net, std::size_t a,
                                std::size_t b) {
  net.neighbors[a].push_back({b, std::nullopt});
  net.neighbors[b].push_back({a, std::nullopt});
}

// Copy of `net` with a constant-1 column appended to the features (an
// intercept for every linear predictor fitted on it).
inline ContactNetwork append_constant_feature(const ContactNetwork& net) {
  ContactNetwork out = net;
  const std::size_t d = net.feature_dim();
  out.features = Matrix(net.node_count(), d + 1);
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    for (std::size_t k = 0; k < d; ++k) out.features(i, k) = net.features(i, k);
    out.features(i, d) = 1.0;
  }
  return out;
}

// Undirected contact lists over all nodes: the symmetric closure of the
// neighbor lists, sorted ascending.
inline std::vector<std::vector<std::size_t>> undirected_contacts(
    const ContactNetwork& net) {
  std::vector<std::set<std::size_t>> sets(net.node_count());
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    for (const Edge& e : net.neighbors[i]) {
      sets[i].insert(e.node);
      sets[e.node].insert(i);
    }
  }
  std::vector<std::vector<std::size_t>> out(net.node_count());
  for (std::size_t i = 0; i < sets.size(); ++i)
    out[i].assign(sets[i].begin(), sets[i].end());
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic block model

struct SbmConfig {
  std::vector<std::size_t> nodes_per_block;
  double p_within = 0.5;
  double p_between = 0.01;
  std::uint64_t seed = 0;

  std::size_t node_count() const {
    std::size_t n = 0;
    for (auto b : nodes_per_block) n += b;
    return n;
  }

  void validate() const {
    if (nodes_per_block.empty())
      throw ConfigError("sbm: at least one block is required");
    if (node_count() < 2) throw ConfigError("sbm: at least 2 nodes required");
    if (!(p_within >= 0.0 && p_within <= 1.0) ||
        !(p_between >= 0.0 && p_between <= 1.0))
      throw ConfigError("sbm: edge probabilities must lie in [0,1]");
  }
};

// Block index of every node; blocks are contiguous runs of node indices.
inline std::vector<std::size_t> sbm_blocks(const SbmConfig& cfg) {
  std::vector<std::size_t> block;
  block.reserve(cfg.node_count());
  for (std::size_t b = 0; b < cfg.nodes_per_block.size(); ++b)
    block.insert(block.end(), cfg.nodes_per_block[b], b);
  return block;
}

// Each unordered pair is an edge independently, with p_within inside a
// block and p_between across blocks. All nodes are main; no features.
inline ContactNetwork generate_sbm(const SbmConfig& cfg) {
  cfg.validate();
  const auto block = sbm_blocks(cfg);
  const std::size_t n = block.size();
  ContactNetwork net = make_empty_network(n);
  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block[i] == block[j] ? cfg.p_within : cfg.p_between;
      if (rng.bernoulli(p)) add_undirected_edge(net, i, j);
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Contact-log ingestion

enum class Channel { kRoom, kNurse };

inline std::string to_string(Channel c) {
  return c == Channel::kRoom ? "room" : "nurse";
}

inline std::optional<Channel> parse_channel(std::string_view s) {
  if (s == "room") return Channel::kRoom;
  if (s == "nurse") return Channel::kNurse;
  return std::nullopt;
}

struct ContactEvent {
  std::string main_id;
  std::string neighbor_id;
  std::int64_t day = 0;
  Channel channel = Channel::kRoom;
};

// Builds the network of one channel.
//
// Main nodes are the distinct main_ids of `events` (all channels), sorted by
// id; auxiliary nodes (neighbors that are never a main) follow, sorted by id.
// A main keeps neighbor j if they share the channel on some day at or before
// its cutoff; the edge records the latest such day. Between two mains the
// edge must satisfy both cutoffs, which keeps main-main edges symmetric.
// Cutoff entries for ids without events are ignored.
inline ContactNetwork build_network_from_contacts(
    std::span<const ContactEvent> events, Channel channel,
    const std::map<std::string, std::int64_t>& cutoff_per_main) {
  std::set<std::string> mains;
  for (const auto& ev : events) {
    if (ev.main_id == ev.neighbor_id)
      throw ConfigError("contacts: main_id equals neighbor_id ('" +
                        ev.main_id + "')");
    if (!cutoff_per_main.contains(ev.main_id))
      throw ConfigError("contacts: no cutoff for main '" + ev.main_id + "'");
    mains.insert(ev.main_id);
  }
  std::set<std::string> aux;
  for (const auto& ev : events)
    if (!mains.contains(ev.neighbor_id)) aux.insert(ev.neighbor_id);

  ContactNetwork net;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& id : mains) {
    index.emplace(id, net.ids.size());
    net.ids.push_back(id);
    net.roles.push_back(NodeRole::kMain);
  }
  for (const auto& id : aux) {
    index.emplace(id, net.ids.size());
    net.ids.push_back(id);
    net.roles.push_back(NodeRole::kAuxiliary);
  }
  const std::size_t n = net.ids.size();
  net.features = Matrix(n, 0);

  // Latest qualifying day per directed (main, neighbor) pair.
  std::vector<std::map<std::size_t, std::int64_t>> latest(n);
  auto record = [&](std::size_t a, std::size_t b, std::int64_t day) {
    auto [it, inserted] = latest[a].emplace(b, day);
    if (!inserted) it->second = std::max(it->second, day);
  };
  for (const auto& ev : events) {
    if (ev.channel != channel) continue;
    const std::size_t a = index.at(ev.main_id);
    const std::size_t b = index.at(ev.neighbor_id);
    std::int64_t limit = cutoff_per_main.at(ev.main_id);
    if (net.is_main(b)) limit = std::min(limit, cutoff_per_main.at(ev.neighbor_id));
    if (ev.day > limit) continue;
    record(a, b, ev.day);
    if (net.is_main(b)) record(b, a, ev.day);
  }
  net.neighbors.assign(n, {});
  for (std::size_t a = 0; a < n; ++a)
    for (const auto& [b, day] : latest[a]) net.neighbors[a].push_back({b, day});
  return net;
}

// ---------------------------------------------------------------------------
// Quintile binning

// Interior quintile boundaries (20/40/60/80%) of the training rows, with
// linear interpolation between order statistics.
inline std::array<double, 4> quintile_boundaries(
    std::span<const double> raw, std::span<const bool> training_mask,
    const std::string& column = "column") {
  if (raw.size() != training_mask.size())
    throw ConfigError("quintile_bin: mask size differs for '" + column + "'");
  std::vector<double> train;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (training_mask[i]) train.push_back(raw[i]);
  std::sort(train.begin(), train.end());
  std::vector<double> uniq = train;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 5)
    throw BinningError("quintile_bin: column '" + column + "' has " +
                       std::to_string(uniq.size()) +
                       " distinct training values (need 5)");
  std::array<double, 4> bounds{};
  const std::size_t m = train.size() - 1;
  for (std::size_t k = 1; k <= 4; ++k) {
    // Position k*m/5 kept in integers so boundaries land exactly on
    // representable values where possible.
    const std::size_t num = k * m;
    const std::size_t lo = num / 5;
    const double frac = static_cast<double>(num % 5) / 5.0;
    bounds[k - 1] = lo + 1 < train.size()
                        ? train[lo] + frac * (train[lo + 1] - train[lo])
                        : train[lo];
  }
  return bounds;
}

// One-hot quintile membership (5 columns) for every row. Boundaries come
// from training rows only; a value equal to a boundary goes to the lower
// bin, and values outside the training range clamp to the extreme bins.
inline Matrix quintile_bin(std::span<const double> raw,
                           std::span<const bool> training_mask,
                           const std::string& column = "column") {
  const auto bounds = quintile_boundaries(raw, training_mask, column);
  Matrix out(raw.size(), 5);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto bin = static_cast<std::size_t>(
        std::lower_bound(bounds.begin(), bounds.end(), raw[i]) - bounds.begin());
    out(i, bin) = 1.0;
  }
  return out;
}

}  // namespace pals
