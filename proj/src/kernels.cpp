#include "policyal/kernels.hpp"

#include <atomic>
#include <exception>
#include <mutex>

#include <omp.h>

namespace policyal::kernels {

namespace {

std::atomic<Exec> g_exec{Exec::kParallel};

// First exception thrown inside a parallel region, rethrown after it.
class ExceptionSlot {
 public:
  template <typename F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!first_) first_ = std::current_exception();
    }
  }
  void rethrow() {
    if (first_) std::rethrow_exception(first_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr first_;
};

}  // namespace

Exec default_exec() { return g_exec.load(); }
void set_default_exec(Exec exec) { g_exec.store(exec); }
int max_threads() { return omp_get_max_threads(); }

std::vector<double> pairwise_wmd_serial(std::span<const embedding::Bag> bags,
                                        std::span<const IndexPair> pairs,
                                        const embedding::WordVectorTable& table) {
  std::vector<double> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out[i] = embedding::wmd(bags[pairs[i].first], bags[pairs[i].second], table);
  }
  return out;
}

std::vector<double> pairwise_wmd_parallel(std::span<const embedding::Bag> bags,
                                          std::span<const IndexPair> pairs,
                                          const embedding::WordVectorTable& table) {
  std::vector<double> out(pairs.size());
  ExceptionSlot slot;
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    slot.run([&] {
      const auto& p = pairs[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = embedding::wmd(bags[p.first], bags[p.second], table);
    });
  }
  slot.rethrow();
  return out;
}

std::vector<double> pairwise_wmd(std::span<const embedding::Bag> bags,
                                 std::span<const IndexPair> pairs,
                                 const embedding::WordVectorTable& table, Exec exec) {
  return exec == Exec::kParallel ? pairwise_wmd_parallel(bags, pairs, table)
                                 : pairwise_wmd_serial(bags, pairs, table);
}

std::vector<textmodel::FeatureVector> featurize_serial(const textmodel::Featurizer& f,
                                                       std::span<const std::string> texts) {
  std::vector<textmodel::FeatureVector> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out[i] = f(texts[i]);
  return out;
}

std::vector<textmodel::FeatureVector> featurize_parallel(const textmodel::Featurizer& f,
                                                         std::span<const std::string> texts) {
  std::vector<textmodel::FeatureVector> out(texts.size());
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = f(texts[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<textmodel::FeatureVector> featurize(const textmodel::Featurizer& f,
                                                std::span<const std::string> texts, Exec exec) {
  return exec == Exec::kParallel ? featurize_parallel(f, texts) : featurize_serial(f, texts);
}

std::vector<double> predict_serial(const textmodel::LinearModel& model,
                                   std::span<const textmodel::FeatureVector> xs) {
  const std::size_t k = model.classes();
  std::vector<double> out(xs.size() * k);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    model.predict_proba_into(xs[i], std::span<double>(out.data() + i * k, k));
  }
  return out;
}

std::vector<double> predict_parallel(const textmodel::LinearModel& model,
                                     std::span<const textmodel::FeatureVector> xs) {
  const std::size_t k = model.classes();
  std::vector<double> out(xs.size() * k);
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    model.predict_proba_into(xs[u], std::span<double>(out.data() + u * k, k));
  }
  return out;
}

std::vector<double> predict(const textmodel::LinearModel& model,
                            std::span<const textmodel::FeatureVector> xs, Exec exec) {
  return exec == Exec::kParallel ? predict_parallel(model, xs) : predict_serial(model, xs);
}

PoolScores score_pool_serial(const textmodel::LinearModel& model,
                             std::span<const textmodel::FeatureVector> xs,
                             std::span<const std::size_t> which, al::Strategy strategy) {
  PoolScores out;
  out.score.resize(which.size());
  out.uncertainty.resize(which.size());
  std::vector<double> p(model.classes());
  for (std::size_t i = 0; i < which.size(); ++i) {
    model.predict_proba_into(xs[which[i]], p);
    out.score[i] = al::score_unchecked(p, strategy);
    out.uncertainty[i] = al::least_confidence(p);
  }
  return out;
}

PoolScores score_pool_parallel(const textmodel::LinearModel& model,
                               std::span<const textmodel::FeatureVector> xs,
                               std::span<const std::size_t> which, al::Strategy strategy) {
  PoolScores out;
  out.score.resize(which.size());
  out.uncertainty.resize(which.size());
  const auto n = static_cast<std::ptrdiff_t>(which.size());
#pragma omp parallel
  {
    std::vector<double> p(model.classes());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      model.predict_proba_into(xs[which[u]], p);
      out.score[u] = al::score_unchecked(p, strategy);
      out.uncertainty[u] = al::least_confidence(p);
    }
  }
  return out;
}

PoolScores score_pool(const textmodel::LinearModel& model,
                      std::span<const textmodel::FeatureVector> xs,
                      std::span<const std::size_t> which, al::Strategy strategy, Exec exec) {
  return exec == Exec::kParallel ? score_pool_parallel(model, xs, which, strategy)
                                 : score_pool_serial(model, xs, which, strategy);
}

}  // namespace policyal::kernels
