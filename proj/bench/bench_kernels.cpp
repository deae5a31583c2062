// Serial vs OpenMP kernels on a synthetic corpus.

#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "policyal/corpus.hpp"
#include "policyal/kernels.hpp"
#include "policyal/synthetic.hpp"

using namespace policyal;

namespace {

struct Data {
  std::shared_ptr<const embedding::WordVectorTable> table;
  std::vector<std::string> texts;
  std::vector<embedding::Bag> bags;
  std::vector<kernels::IndexPair> pairs;
  std::vector<textmodel::FeatureVector> features;
  std::unique_ptr<textmodel::Featurizer> featurizer;
  textmodel::LinearModel model;
  std::vector<std::size_t> which;
};

const Data& data() {
  static const Data d = [] {
    Data out;
    synthetic::CorpusConfig cc;
    cc.policies = 60;
    cc.seed = 2;
    const auto gen = synthetic::generate_corpus(cc);
    out.table = std::make_shared<const embedding::WordVectorTable>(synthetic::build_vectors(gen.documents));
    for (const auto& doc : gen.documents) {
      for (const auto& s : corpus::split_sentences(doc).sentences) out.texts.push_back(s.text);
    }
    for (const auto& t : out.texts) out.bags.push_back(embedding::make_bag(t, *out.table));
    for (std::size_t i = 0; i + 1 < out.bags.size(); ++i) {
      if (!out.bags[i].empty() && !out.bags[i + 1].empty()) out.pairs.emplace_back(i, i + 1);
    }
    out.featurizer = std::make_unique<textmodel::Featurizer>(16, out.table);
    out.features = kernels::featurize_serial(*out.featurizer, out.texts);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 0.1);
    textmodel::LinearParams p(5, out.featurizer->dimension());
    for (auto& w : p.weights) w = g(rng);
    out.model = textmodel::LinearModel(p);
    for (std::size_t i = 0; i < out.features.size(); ++i) out.which.push_back(i);
    return out;
  }();
  return d;
}

template <kernels::Exec E>
void BM_PairwiseWmd(benchmark::State& state) {
  const auto& d = data();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::pairwise_wmd(d.bags, d.pairs, *d.table, E));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.pairs.size()));
}

template <kernels::Exec E>
void BM_Featurize(benchmark::State& state) {
  const auto& d = data();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::featurize(*d.featurizer, d.texts, E));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.texts.size()));
}

template <kernels::Exec E>
void BM_ScorePool(benchmark::State& state) {
  const auto& d = data();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::score_pool(d.model, d.features, d.which, al::Strategy::kEntropy, E));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.which.size()));
}

}  // namespace

BENCHMARK(BM_PairwiseWmd<kernels::Exec::kSerial>)->Name("pairwise_wmd/serial");
BENCHMARK(BM_PairwiseWmd<kernels::Exec::kParallel>)->Name("pairwise_wmd/parallel");
BENCHMARK(BM_Featurize<kernels::Exec::kSerial>)->Name("featurize/serial");
BENCHMARK(BM_Featurize<kernels::Exec::kParallel>)->Name("featurize/parallel");
BENCHMARK(BM_ScorePool<kernels::Exec::kSerial>)->Name("score_pool/serial");
BENCHMARK(BM_ScorePool<kernels::Exec::kParallel>)->Name("score_pool/parallel");

BENCHMARK_MAIN();
