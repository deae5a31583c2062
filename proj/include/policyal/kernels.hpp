#pragma once

// Data-parallel kernels. Every kernel has a serial reference implementation
// and an OpenMP one; both compute each output element independently, so the
// results are bitwise identical and the serial path is the test oracle.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "policyal/embedding.hpp"
#include "policyal/query.hpp"
#include "policyal/textmodel.hpp"

namespace policyal::kernels {

enum class Exec { kSerial, kParallel };

Exec default_exec();
void set_default_exec(Exec exec);
int max_threads();

using IndexPair = std::pair<std::size_t, std::size_t>;

std::vector<double> pairwise_wmd_serial(std::span<const embedding::Bag> bags,
                                        std::span<const IndexPair> pairs,
                                        const embedding::WordVectorTable& table);
std::vector<double> pairwise_wmd_parallel(std::span<const embedding::Bag> bags,
                                          std::span<const IndexPair> pairs,
                                          const embedding::WordVectorTable& table);
std::vector<double> pairwise_wmd(std::span<const embedding::Bag> bags,
                                 std::span<const IndexPair> pairs,
                                 const embedding::WordVectorTable& table,
                                 Exec exec = default_exec());

std::vector<textmodel::FeatureVector> featurize_serial(const textmodel::Featurizer& f,
                                                       std::span<const std::string> texts);
std::vector<textmodel::FeatureVector> featurize_parallel(const textmodel::Featurizer& f,
                                                         std::span<const std::string> texts);
std::vector<textmodel::FeatureVector> featurize(const textmodel::Featurizer& f,
                                                std::span<const std::string> texts,
                                                Exec exec = default_exec());

// Row-major probabilities, items x classes.
std::vector<double> predict_serial(const textmodel::LinearModel& model,
                                   std::span<const textmodel::FeatureVector> xs);
std::vector<double> predict_parallel(const textmodel::LinearModel& model,
                                     std::span<const textmodel::FeatureVector> xs);
std::vector<double> predict(const textmodel::LinearModel& model,
                            std::span<const textmodel::FeatureVector> xs,
                            Exec exec = default_exec());

struct PoolScores {
  std::vector<double> score;        // per the chosen strategy
  std::vector<double> uncertainty;  // least confidence, for pruning history
};

// Scores xs[which[i]] for every i.
PoolScores score_pool_serial(const textmodel::LinearModel& model,
                             std::span<const textmodel::FeatureVector> xs,
                             std::span<const std::size_t> which, al::Strategy strategy);
PoolScores score_pool_parallel(const textmodel::LinearModel& model,
                               std::span<const textmodel::FeatureVector> xs,
                               std::span<const std::size_t> which, al::Strategy strategy);
PoolScores score_pool(const textmodel::LinearModel& model,
                      std::span<const textmodel::FeatureVector> xs,
                      std::span<const std::size_t> which, al::Strategy strategy,
                      Exec exec = default_exec());

}  // namespace policyal::kernels
