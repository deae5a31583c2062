#include "policyal/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "policyal/error.hpp"
#include "policyal/kernels.hpp"
#include "policyal/text.hpp"
#include "policyal/transport.hpp"

namespace policyal::embedding {

void WordVectorTable::add(std::string token, std::vector<double> vec) {
  if (dim_ == 0 && index_.empty()) dim_ = vec.size();
  if (vec.size() != dim_ || dim_ == 0) {
    throw InvalidArgument("word vector for '" + token + "' has dimension " +
                          std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
  }
  if (auto it = index_.find(token); it != index_.end()) {
    std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::ptrdiff_t WordVectorTable::find(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

WordVectorTable WordVectorTable::scaled(double factor) const {
  WordVectorTable out = *this;
  for (auto& v : out.data_) v *= factor;
  return out;
}

WordVectorTable load_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word-vector file " + path.string());
  WordVectorTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (ls >> field) {
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad real '" + field + "'");
      }
      vec.push_back(v);
    }
    if (vec.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": no vector components");
    }
    if (!table.empty() && vec.size() != table.dimension()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": dimension mismatch (" +
                       std::to_string(vec.size()) + " vs " + std::to_string(table.dimension()) + ")");
    }
    table.add(std::move(token), std::move(vec));
  }
  if (table.empty()) throw ParseError("word-vector file " + path.string() + " is empty");
  return table;
}

void save_vectors(const WordVectorTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.token(r);
    for (double v : table.row(r)) out << ' ' << v;
    out << '\n';
  }
}

Bag make_bag(std::string_view s, const WordVectorTable& table) {
  std::map<std::size_t, std::int64_t> counts;
  for (const auto& tok : text::content_tokens(s)) {
    auto id = table.find(tok);
    if (id >= 0) ++counts[static_cast<std::size_t>(id)];
  }
  Bag bag;
  for (auto [row, c] : counts) {
    bag.rows.push_back(row);
    bag.counts.push_back(c);
    bag.total += c;
  }
  return bag;
}

Bag merge(const Bag& a, const Bag& b) {
  Bag out;
  std::size_t i = 0, j = 0;
  while (i < a.rows.size() || j < b.rows.size()) {
    if (j >= b.rows.size() || (i < a.rows.size() && a.rows[i] < b.rows[j])) {
      out.rows.push_back(a.rows[i]);
      out.counts.push_back(a.counts[i++]);
    } else if (i >= a.rows.size() || b.rows[j] < a.rows[i]) {
      out.rows.push_back(b.rows[j]);
      out.counts.push_back(b.counts[j++]);
    } else {
      out.rows.push_back(a.rows[i]);
      out.counts.push_back(a.counts[i++] + b.counts[j++]);
    }
  }
  out.total = a.total + b.total;
  return out;
}

double wmd(const Bag& a, const Bag& b, const WordVectorTable& table) {
  if (a.empty() || b.empty()) {
    throw OutOfVocabulary("WMD needs at least one in-vocabulary token on each side");
  }
  // Scale both distributions to the common integer mass a.total * b.total.
  std::vector<std::int64_t> supply(a.rows.size()), demand(b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) supply[i] = a.counts[i] * b.total;
  for (std::size_t j = 0; j < b.rows.size(); ++j) demand[j] = b.counts[j] * a.total;

  std::vector<double> cost(a.rows.size() * b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    auto u = table.row(a.rows[i]);
    for (std::size_t j = 0; j < b.rows.size(); ++j) {
      if (a.rows[i] == b.rows[j]) continue;  // zero ground cost
      auto v = table.row(b.rows[j]);
      double s = 0.0;
      for (std::size_t d = 0; d < u.size(); ++d) {
        const double diff = u[d] - v[d];
        s += diff * diff;
      }
      cost[i * b.rows.size() + j] = std::sqrt(s);
    }
  }
  const auto plan = transport::solve(supply, demand, cost);
  return plan.cost / static_cast<double>(a.total * b.total);
}

double wmd(std::string_view a, std::string_view b, const WordVectorTable& table) {
  return wmd(make_bag(a, table), make_bag(b, table), table);
}

WmdStats stats_from_distances(std::span<const double> d, double alpha) {
  WmdStats st;
  st.pairs = d.size();
  if (d.empty()) return st;
  double sum = 0.0;
  for (double x : d) sum += x;
  st.mean = sum / static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - st.mean) * (x - st.mean);
  st.std = std::sqrt(var / static_cast<double>(d.size()));
  st.threshold = std::max(0.0, st.mean - alpha * st.std);
  return st;
}

WmdStats document_wmd_stats(std::span<const Bag> bags, const WordVectorTable& table, double alpha,
                            PairMode mode) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    if (!bags[i].empty()) usable.push_back(i);
  }
  if (usable.size() < 2) {
    throw DegenerateDocument("need at least two sentences with in-vocabulary content");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (mode == PairMode::kAdjacent) {
    for (std::size_t k = 0; k + 1 < usable.size(); ++k) pairs.emplace_back(usable[k], usable[k + 1]);
  } else {
    for (std::size_t x = 0; x < usable.size(); ++x) {
      for (std::size_t y = x + 1; y < usable.size(); ++y) pairs.emplace_back(usable[x], usable[y]);
    }
  }
  const auto distances = kernels::pairwise_wmd(bags, pairs, table);
  return stats_from_distances(distances, alpha);
}

WmdStats document_wmd_stats(const corpus::Policy& policy, const WordVectorTable& table,
                            double alpha, PairMode mode) {
  std::vector<Bag> bags;
  bags.reserve(policy.sentences.size());
  for (const auto& s : policy.sentences) bags.push_back(make_bag(s.text, table));
  return document_wmd_stats(bags, table, alpha, mode);
}

}  // namespace policyal::embedding
