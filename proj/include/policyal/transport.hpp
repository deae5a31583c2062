#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace policyal::transport {

// Balanced transportation problem with integral supplies/demands and real
// costs (row-major, supplies.size() x demands.size()). Solved exactly by
// successive shortest augmenting paths with Johnson potentials; integrality
// keeps the flow exact, so only the cost accumulation touches floating point.
struct Plan {
  double cost = 0.0;                  // sum of flow * cost
  std::vector<std::int64_t> flow;     // row-major, same shape as costs
};

Plan solve(std::span<const std::int64_t> supplies, std::span<const std::int64_t> demands,
           std::span<const double> costs);

}  // namespace policyal::transport
