#pragma once

#include <span>
#include <string_view>

namespace policyal::al {

enum class Strategy { kUncertainty, kMargin, kEntropy };

std::string_view to_string(Strategy s);
Strategy strategy_from(std::string_view s);

// Higher score = queried sooner, for every strategy:
//   uncertainty = 1 - max_y P(y)
//   margin      = -(P(1st) - P(2nd))
//   entropy     = -sum P log P (nats)
// Throws InvalidArgument unless dist is a probability distribution with at
// least two entries.
double query_score(std::span<const double> dist, Strategy strategy);

// Least-confidence uncertainty without validation; pruning history uses it
// regardless of the selection strategy.
double least_confidence(std::span<const double> dist);

// query_score without validation, for distributions known to be valid
// (softmax outputs).
double score_unchecked(std::span<const double> dist, Strategy strategy);

}  // namespace policyal::al
