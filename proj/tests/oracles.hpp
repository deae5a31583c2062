#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Minimum-cost transportation by vertex enumeration: every basic feasible
// solution is supported on a spanning tree of the complete bipartite graph,
// so trying every (m+n-1)-edge subset that forms a tree finds the optimum.
// Masses are real; only meant for m, n <= 4.
inline double brute_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                              const std::vector<double>& cost) {
  const std::size_t m = supply.size(), n = demand.size(), edges = m * n, need = m + n - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(edges, 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(need), pick.end(), 1);
  do {
    std::vector<std::size_t> chosen;
    for (std::size_t e = 0; e < edges; ++e)
      if (pick[e]) chosen.push_back(e);
    // acyclic with m+n-1 edges on m+n nodes => spanning tree
    std::vector<std::size_t> parent(m + n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    bool tree = true;
    for (auto e : chosen) {
      auto a = find(e / n), b = find(m + e % n);
      if (a == b) {
        tree = false;
        break;
      }
      parent[a] = b;
    }
    if (!tree) continue;
    // peel leaves
    std::vector<double> residual(m + n);
    for (std::size_t i = 0; i < m; ++i) residual[i] = supply[i];
    for (std::size_t j = 0; j < n; ++j) residual[m + j] = demand[j];
    std::vector<bool> used(chosen.size(), false);
    std::vector<double> flow(chosen.size(), 0.0);
    for (std::size_t round = 0; round < chosen.size(); ++round) {
      std::vector<int> degree(m + n, 0);
      for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (used[k]) continue;
        ++degree[chosen[k] / n];
        ++degree[m + chosen[k] % n];
      }
      for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (used[k]) continue;
        const std::size_t u = chosen[k] / n, v = m + chosen[k] % n;
        std::size_t leaf = degree[u] == 1 ? u : (degree[v] == 1 ? v : m + n);
        if (leaf == m + n) continue;
        const std::size_t other = leaf == u ? v : u;
        flow[k] = residual[leaf];
        residual[leaf] = 0.0;
        residual[other] -= flow[k];
        used[k] = true;
        break;
      }
    }
    bool feasible = true;
    double total = 0.0;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (flow[k] < -1e-12) feasible = false;
      total += flow[k] * cost[chosen[k]];
    }
    if (feasible) best = std::min(best, total);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Accept decision by counting: every question needs some option with at
// least ceil(threshold * total) votes.
inline bool brute_accept(const std::vector<std::vector<std::size_t>>& votes_per_question,
                         double threshold) {
  for (const auto& votes : votes_per_question) {
    const std::size_t total = votes.size();
    const auto required = static_cast<std::size_t>(std::ceil(threshold * static_cast<double>(total) - 1e-9));
    std::size_t top = 0;
    for (std::size_t option = 0; option < 5; ++option) {
      std::size_t c = 0;
      for (auto v : votes) c += v == option ? 1 : 0;
      top = std::max(top, c);
    }
    if (top < required) return false;
  }
  return true;
}

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace oracle
