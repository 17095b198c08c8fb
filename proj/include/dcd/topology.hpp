#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "dcd/common.hpp"
#include "dcd/rng.hpp"

namespace dcd {

/// Undirected agent graph. Agent ids are 1..K. Neighborhoods include the
/// agent itself; self-loop edges are never stored.
struct Network {
  int agent_count = 0;
  std::vector<std::pair<int, int>> edges;           // normalized (i<j), sorted
  std::vector<std::vector<int>> neighborhoods;      // [k-1] -> sorted ids, contains k
  std::vector<std::array<double, 2>> positions;     // empty unless geometric

  bool adjacent(int i, int j) const {
    if (i == j) return true;
    if (i > j) std::swap(i, j);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
  }

  const std::vector<int>& neighborhood(int k) const { return neighborhoods[k - 1]; }

  int degree(int k) const { return static_cast<int>(neighborhoods[k - 1].size()) - 1; }
};

/// The agents coupled by one constraint, with the sub-graph they induce.
/// Member order is ascending id; it fixes the block layout of all stacked
/// dual vectors, so every consumer must respect it.
struct SubNetwork {
  int constraint_id = 0;
  std::vector<int> members;                         // ascending
  std::vector<std::pair<int, int>> induced_edges;   // normalized, sorted
  int size = 0;

  bool contains(int k) const {
    return std::binary_search(members.begin(), members.end(), k);
  }

  /// Position of agent k in the member ordering.
  int position(int k) const {
    auto it = std::lower_bound(members.begin(), members.end(), k);
    if (it == members.end() || *it != k)
      throw Error("agent " + std::to_string(k) + " is not a member of sub-network " +
                  std::to_string(constraint_id));
    return static_cast<int>(it - members.begin());
  }

  bool induced_adjacent(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(induced_edges.begin(), induced_edges.end(),
                              std::make_pair(i, j));
  }

  int induced_degree(int k) const {
    int d = 0;
    for (auto& [a, b] : induced_edges) d += (a == k || b == k);
    return d;
  }
};

namespace detail {

inline bool reaches_all(int count, const std::vector<int>& ids,
                        const std::vector<std::pair<int, int>>& edge_list) {
  if (ids.empty()) return false;
  std::set<int> id_set(ids.begin(), ids.end());
  std::vector<std::vector<int>> adj;
  adj.resize(ids.size());
  auto index_of = [&](int id) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  for (auto& [a, b] : edge_list) {
    if (id_set.count(a) && id_set.count(b)) {
      adj[index_of(a)].push_back(index_of(b));
      adj[index_of(b)].push_back(index_of(a));
    }
  }
  std::vector<char> seen(ids.size(), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
  }
  return reached == count;
}

}  // namespace detail

/// Builds a Network from an edge list. Duplicate and reversed edges are
/// merged; self-loops are dropped (self-membership in neighborhoods is
/// implicit). Throws on endpoints outside 1..K.
inline Network build_network(int agent_count, std::vector<std::pair<int, int>> edge_list) {
  if (agent_count < 1) throw Error("agent count must be positive");
  std::set<std::pair<int, int>> normalized;
  for (auto [a, b] : edge_list) {
    if (a < 1 || a > agent_count || b < 1 || b > agent_count)
      throw Error("edge endpoint out of range 1.." + std::to_string(agent_count));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    normalized.insert({a, b});
  }
  Network net;
  net.agent_count = agent_count;
  net.edges.assign(normalized.begin(), normalized.end());
  net.neighborhoods.resize(agent_count);
  for (int k = 1; k <= agent_count; ++k) net.neighborhoods[k - 1].push_back(k);
  for (auto& [a, b] : net.edges) {
    net.neighborhoods[a - 1].push_back(b);
    net.neighborhoods[b - 1].push_back(a);
  }
  for (auto& nbrs : net.neighborhoods) std::sort(nbrs.begin(), nbrs.end());
  return net;
}

inline bool is_connected(const Network& net) {
  std::vector<int> all(net.agent_count);
  for (int k = 1; k <= net.agent_count; ++k) all[k - 1] = k;
  return detail::reaches_all(net.agent_count, all, net.edges);
}

/// Samples agent positions uniformly in the unit square and connects pairs
/// within the given radius. Resamples (with a derived sub-seed) until the
/// whole network is connected, up to 100 attempts.
inline Network random_geometric_network(int agent_count, double radius, std::uint64_t seed) {
  if (agent_count < 1) throw Error("agent count must be positive");
  if (radius <= 0.0 || radius > std::sqrt(2.0) + 1e-12)
    throw Error("geometric radius must lie in (0, sqrt(2)]");
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(Rng::derive(seed, stream::kRetry * 1000 + static_cast<std::uint64_t>(attempt)));
    std::vector<std::array<double, 2>> pos(agent_count);
    for (auto& p : pos) {
      p[0] = rng.uniform();
      p[1] = rng.uniform();
    }
    std::vector<std::pair<int, int>> edge_list;
    for (int i = 1; i <= agent_count; ++i)
      for (int j = i + 1; j <= agent_count; ++j) {
        const double dx = pos[i - 1][0] - pos[j - 1][0];
        const double dy = pos[i - 1][1] - pos[j - 1][1];
        if (std::sqrt(dx * dx + dy * dy) <= radius) edge_list.push_back({i, j});
      }
    Network net = build_network(agent_count, std::move(edge_list));
    net.positions = std::move(pos);
    if (is_connected(net)) return net;
  }
  throw Error("geometric network not connected within 100 resampling attempts");
}

/// Restricts the network to the given member set. Fails if the induced
/// sub-graph is disconnected: constraints may only couple agent sets that
/// can reach each other without leaving the set.
inline SubNetwork induced_subnetwork(const Network& net, std::vector<int> members,
                                     int constraint_id) {
  if (members.empty()) throw EmptyConstraint("sub-network has no members");
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  for (int k : members)
    if (k < 1 || k > net.agent_count)
      throw Error("sub-network member out of range: " + std::to_string(k));

  SubNetwork sub;
  sub.constraint_id = constraint_id;
  sub.size = static_cast<int>(members.size());
  for (size_t i = 0; i < members.size(); ++i)
    for (size_t j = i + 1; j < members.size(); ++j)
      if (net.adjacent(members[i], members[j]))
        sub.induced_edges.push_back({members[i], members[j]});
  sub.members = std::move(members);
  if (!detail::reaches_all(sub.size, sub.members, sub.induced_edges))
    throw DisconnectedSubnetwork("sub-network " + std::to_string(constraint_id) +
                                 " induces a disconnected sub-graph");
  return sub;
}

/// One sub-network per agent, each holding that agent's neighborhood
/// (the constraint-per-neighborhood preset). Always connected: every member
/// is adjacent to the center.
inline std::vector<SubNetwork> neighborhood_subnetworks(const Network& net) {
  if (!is_connected(net)) throw DisconnectedSubnetwork("network is not connected");
  std::vector<SubNetwork> subs;
  subs.reserve(net.agent_count);
  for (int e = 1; e <= net.agent_count; ++e)
    subs.push_back(induced_subnetwork(net, net.neighborhood(e), e));
  return subs;
}

}  // namespace dcd
