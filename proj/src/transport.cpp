#include "policyal/transport.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "policyal/error.hpp"

namespace policyal::transport {

namespace {

struct Edge {
  std::size_t to;
  std::int64_t cap;
  double cost;
  std::size_t rev;
};

class FlowGraph {
 public:
  explicit FlowGraph(std::size_t n) : adj_(n) {}

  std::size_t add_edge(std::size_t from, std::size_t to, std::int64_t cap, double cost) {
    adj_[from].push_back({to, cap, cost, adj_[to].size()});
    adj_[to].push_back({from, 0, -cost, adj_[from].size() - 1});
    return adj_[from].size() - 1;
  }

  // Pushes `amount` units from s to t at minimum cost. Returns false if the
  // residual network cannot carry the full amount.
  bool min_cost_flow(std::size_t s, std::size_t t, std::int64_t amount) {
    const std::size_t n = adj_.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> potential(n, 0.0);
    std::vector<double> dist(n);
    std::vector<std::size_t> prev_node(n), prev_edge(n);
    std::vector<char> done(n);

    while (amount > 0) {
      std::fill(dist.begin(), dist.end(), kInf);
      std::fill(done.begin(), done.end(), 0);
      dist[s] = 0.0;
      // Dense Dijkstra: graphs here have at most a few hundred nodes.
      for (std::size_t iter = 0; iter < n; ++iter) {
        std::size_t u = n;
        for (std::size_t v = 0; v < n; ++v) {
          if (!done[v] && dist[v] < kInf && (u == n || dist[v] < dist[u])) u = v;
        }
        if (u == n) break;
        done[u] = 1;
        for (std::size_t k = 0; k < adj_[u].size(); ++k) {
          const Edge& e = adj_[u][k];
          if (e.cap <= 0 || done[e.to]) continue;
          double rc = e.cost + potential[u] - potential[e.to];
          if (rc < 0.0) rc = 0.0;  // rounding noise only; true reduced costs are >= 0
          if (dist[u] + rc < dist[e.to]) {
            dist[e.to] = dist[u] + rc;
            prev_node[e.to] = u;
            prev_edge[e.to] = k;
          }
        }
      }
      if (dist[t] == kInf) return false;
      // Unreachable nodes take the largest finite distance so every residual
      // edge keeps a non-negative reduced cost.
      double reach = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        if (dist[v] < kInf) reach = std::max(reach, dist[v]);
      }
      for (std::size_t v = 0; v < n; ++v) potential[v] += dist[v] < kInf ? dist[v] : reach;
      std::int64_t push = amount;
      for (std::size_t v = t; v != s; v = prev_node[v]) {
        push = std::min(push, adj_[prev_node[v]][prev_edge[v]].cap);
      }
      for (std::size_t v = t; v != s; v = prev_node[v]) {
        Edge& e = adj_[prev_node[v]][prev_edge[v]];
        e.cap -= push;
        adj_[v][e.rev].cap += push;
      }
      amount -= push;
    }
    return true;
  }

  const Edge& edge(std::size_t from, std::size_t k) const { return adj_[from][k]; }

 private:
  std::vector<std::vector<Edge>> adj_;
};

}  // namespace

Plan solve(std::span<const std::int64_t> supplies, std::span<const std::int64_t> demands,
           std::span<const double> costs) {
  const std::size_t m = supplies.size();
  const std::size_t n = demands.size();
  if (costs.size() != m * n) throw InvalidArgument("transport: cost matrix shape mismatch");
  const std::int64_t total = std::accumulate(supplies.begin(), supplies.end(), std::int64_t{0});
  if (total != std::accumulate(demands.begin(), demands.end(), std::int64_t{0})) {
    throw InvalidArgument("transport: unbalanced problem");
  }
  for (auto s : supplies) {
    if (s < 0) throw InvalidArgument("transport: negative supply");
  }
  for (auto d : demands) {
    if (d < 0) throw InvalidArgument("transport: negative demand");
  }
  for (double c : costs) {
    if (!(c >= 0.0)) throw InvalidArgument("transport: costs must be non-negative");
  }

  const std::size_t source = 0;
  const std::size_t sink = m + n + 1;
  FlowGraph g(m + n + 2);
  for (std::size_t i = 0; i < m; ++i) g.add_edge(source, 1 + i, supplies[i], 0.0);
  std::vector<std::size_t> handle(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      handle[i * n + j] = g.add_edge(1 + i, 1 + m + j, total, costs[i * n + j]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) g.add_edge(1 + m + j, sink, demands[j], 0.0);

  if (!g.min_cost_flow(source, sink, total)) {
    throw Error("transport: flow infeasible");  // unreachable for balanced input
  }

  Plan plan;
  plan.flow.resize(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::int64_t f = total - g.edge(1 + i, handle[i * n + j]).cap;
      plan.flow[i * n + j] = f;
      plan.cost += static_cast<double>(f) * costs[i * n + j];
    }
  }
  return plan;
}

}  // namespace policyal::transport
