#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "policyal/analysis.hpp"
#include "policyal/corpus.hpp"
#include "policyal/crowd.hpp"
#include "policyal/segmenter.hpp"
#include "policyal/synthetic.hpp"
#include "policyal/textmodel.hpp"

#ifndef POLICYAL_FIXTURES
#define POLICYAL_FIXTURES "tests/fixtures"
#endif

namespace support {

using namespace policyal;

// ---------------------------------------------------------------------------
// Hand-labeled coverage fixture: ten policies, contact statements marked by
// sentence text.

struct CoverageFixture {
  std::vector<corpus::RawDocument> documents;
  std::vector<corpus::Policy> policies;
  std::map<std::string, std::set<std::size_t>> relevant;  // doc_id -> sentence indices
  std::size_t unmatched = 0;                               // label texts not found by the splitter
};

inline CoverageFixture load_coverage_fixture() {
  const std::string dir = std::string(POLICYAL_FIXTURES) + "/coverage";
  CoverageFixture f;
  f.documents = corpus::load_corpus_dir(dir);
  for (const auto& d : f.documents) f.policies.push_back(corpus::split_sentences(d));
  std::ifstream in(dir + "/labels.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto id = j.at("doc_id").get<std::string>();
    const corpus::Policy* p = nullptr;
    for (const auto& q : f.policies)
      if (q.doc_id == id) p = &q;
    for (const auto& t : j.at("relevant")) {
      bool found = false;
      for (const auto& s : p->sentences) {
        if (s.text == t.get<std::string>()) {
          f.relevant[id].insert(s.index);
          found = true;
        }
      }
      if (!found) ++f.unmatched;
    }
  }
  return f;
}

// Category model and vectors trained on the synthetic generator only; the
// fixture text is never seen in training. The vector table covers both.
struct TrainedCategory {
  std::shared_ptr<const embedding::WordVectorTable> table;
  std::shared_ptr<textmodel::LogisticClassifier> model;
};

inline TrainedCategory train_on_synthetic(const std::vector<corpus::RawDocument>& extra_vocab,
                                          DataCategory category, std::size_t policies = 60,
                                          std::uint64_t seed = 5) {
  synthetic::CorpusConfig cc;
  cc.policies = policies;
  cc.seed = seed;
  auto gen = synthetic::generate_corpus(cc);
  auto vocab_docs = gen.documents;
  vocab_docs.insert(vocab_docs.end(), extra_vocab.begin(), extra_vocab.end());
  TrainedCategory out;
  out.table = std::make_shared<const embedding::WordVectorTable>(synthetic::build_vectors(vocab_docs));
  std::vector<textmodel::LabeledText> data;
  for (const auto& d : gen.documents) {
    const auto p = corpus::split_sentences(d);
    std::set<std::size_t> rel;
    for (const auto& l : gen.truth) {
      if (l.segment.doc_id != d.doc_id || l.category != category || !l.relevant) continue;
      for (std::size_t i = l.segment.first_index; i <= l.segment.last_index; ++i) rel.insert(i);
    }
    for (const auto& s : p.sentences) data.push_back({s.text, rel.count(s.index) ? 1u : 0u});
  }
  textmodel::Featurizer f(14, out.table);
  out.model = std::make_shared<textmodel::LogisticClassifier>(
      textmodel::train(f, 2, std::span<const textmodel::LabeledText>(data), {}));
  return out;
}

struct Coverage {
  std::size_t labeled = 0;
  std::size_t covered = 0;
  std::size_t segment_sentences = 0;
  std::size_t corpus_sentences = 0;
  double rate() const { return labeled ? static_cast<double>(covered) / labeled : 0.0; }
};

inline Coverage coverage_of(const CoverageFixture& f, const std::vector<segmenter::Segment>& segs) {
  Coverage c;
  for (const auto& [doc, idx] : f.relevant) {
    for (auto i : idx) {
      ++c.labeled;
      for (const auto& s : segs) {
        if (s.doc_id == doc && s.contains(i)) {
          ++c.covered;
          break;
        }
      }
    }
  }
  for (const auto& s : segs) c.segment_sentences += s.length();
  for (const auto& p : f.policies) c.corpus_sentences += p.sentences.size();
  return c;
}

// ---------------------------------------------------------------------------
// Planted-conflict fixture: 25 documents of relevant labels. Background
// cells never mix denial with assert or choice; planted cells do.

struct ConflictFixture {
  std::vector<crowd::SegmentLabel> labels;
  std::set<std::tuple<std::string, DataCategory, DataAction>> planted;
  // document-level mode of every non-planted cell with a relevant mention
  std::map<std::tuple<std::string, DataCategory, DataAction>, ActionMode> expected;
};

inline ConflictFixture planted_conflicts(std::size_t documents = 25, std::uint64_t seed = 31) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> cat(0, kNumCategories - 1), act(0, kNumActions - 1),
      nbg(2, 6);
  std::bernoulli_distribution coin(0.5);
  ConflictFixture f;
  // (modes, expected roll-up)
  const std::vector<std::pair<std::vector<ActionMode>, ActionMode>> safe_sets = {
      {{ActionMode::kAssert}, ActionMode::kAssert},
      {{ActionMode::kDenial}, ActionMode::kDenial},
      {{ActionMode::kChoice}, ActionMode::kChoice},
      {{ActionMode::kAmbiguous}, ActionMode::kAmbiguous},
      {{ActionMode::kAssert, ActionMode::kChoice}, ActionMode::kChoice},
      {{ActionMode::kDenial, ActionMode::kAmbiguous}, ActionMode::kDenial},
      {{ActionMode::kAssert, ActionMode::kAmbiguous}, ActionMode::kAssert}};
  std::vector<std::pair<DataCategory, DataAction>> previous_planted;
  for (std::size_t d = 0; d < documents; ++d) {
    const std::string doc = "conf_" + std::to_string(d);
    std::size_t sentence = 0;
    std::set<std::pair<DataCategory, DataAction>> used;
    auto add = [&](DataCategory c, DataAction a, ActionMode m, const std::string& text) {
      ModeTriple modes = kAllNotMentioned;
      modes[index_of(a)] = m;
      segmenter::Segment s{doc, sentence, sentence, sentence, c, text};
      ++sentence;
      f.labels.push_back(crowd::make_label(s, c, true, modes, crowd::Provenance::kReplay));
    };
    std::vector<std::pair<DataCategory, DataAction>> this_planted;
    auto fresh_cell = [&] {
      while (true) {
        std::pair<DataCategory, DataAction> k{kAllCategories[cat(rng)], kAllActions[act(rng)]};
        if (used.insert(k).second) return k;
      }
    };
    // planted conflicts: kinds alternate, some documents get two, every fifth none
    const std::size_t planted = d % 5 == 4 ? 0 : (d % 3 == 0 ? 2 : 1);
    for (std::size_t k = 0; k < planted; ++k) {
      auto [c, a] = fresh_cell();
      const bool with_choice = (d + k) % 2 == 1;
      add(c, a, with_choice ? ActionMode::kChoice : ActionMode::kAssert, "statement");
      add(c, a, ActionMode::kDenial,
          coin(rng) ? "we do not disclose it except as required by law" : "we never do this");
      if (coin(rng)) add(c, a, ActionMode::kAmbiguous, "vague statement");
      f.planted.insert({doc, c, a});
      this_planted.push_back({c, a});
    }
    // cross-document distractor: a lone denial on the cell planted in the
    // previous document
    if (!previous_planted.empty() && used.insert(previous_planted.front()).second) {
      const auto [c, a] = previous_planted.front();
      add(c, a, ActionMode::kDenial, "we do not do this");
      f.expected[std::make_tuple(doc, c, a)] = ActionMode::kDenial;
    }
    previous_planted = this_planted;
    // background
    for (std::size_t k = nbg(rng); k > 0; --k) {
      auto [c, a] = fresh_cell();
      std::uniform_int_distribution<std::size_t> which(0, safe_sets.size() - 1);
      const auto& [modes, rolled] = safe_sets[which(rng)];
      for (auto m : modes) add(c, a, m, "background");
      f.expected[std::make_tuple(doc, c, a)] = rolled;
    }
    // irrelevant labels carrying nothing
    segmenter::Segment s{doc, sentence, sentence, sentence, DataCategory::kContact, "filler"};
    f.labels.push_back(crowd::make_label(s, DataCategory::kContact, false, kAllNotMentioned,
                                         crowd::Provenance::kReplay));
  }
  return f;
}

struct ConflictScore {
  std::size_t true_pos = 0;
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;
  std::size_t rollup_cells = 0;
  std::size_t rollup_wrong = 0;
  double precision() const { return true_pos + false_pos ? double(true_pos) / (true_pos + false_pos) : 1.0; }
  double recall() const { return true_pos + false_neg ? double(true_pos) / (true_pos + false_neg) : 1.0; }
};

inline ConflictScore score_conflicts(const ConflictFixture& f) {
  ConflictScore s;
  std::set<std::tuple<std::string, DataCategory, DataAction>> found;
  for (const auto& [doc, labels] : analysis::group_by_document(f.labels)) {
    for (const auto& c : analysis::detect_conflicts(labels)) found.insert({c.doc_id, c.category, c.action});
    for (const auto& [cell, mode] : analysis::document_rollup(labels)) {
      const std::tuple<std::string, DataCategory, DataAction> key{doc, cell.first, cell.second};
      analysis::DocumentMode want;
      if (f.planted.count(key)) {
        want.conflicting = true;
      } else if (auto it = f.expected.find(key); it != f.expected.end()) {
        want.mode = it->second;
      }
      ++s.rollup_cells;
      if (!(mode == want)) ++s.rollup_wrong;
    }
  }
  for (const auto& k : found) (f.planted.count(k) ? s.true_pos : s.false_pos)++;
  for (const auto& k : f.planted) s.false_neg += found.count(k) ? 0 : 1;
  return s;
}

}  // namespace support
