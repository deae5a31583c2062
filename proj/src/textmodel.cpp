#include "policyal/textmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"
#include "policyal/error.hpp"
#include "policyal/kernels.hpp"
#include "policyal/log.hpp"
#include "policyal/text.hpp"

namespace policyal::textmodel {

using nlohmann::json;

bool FeatureVector::is_zero() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.second == 0.0; });
}

Featurizer::Featurizer(unsigned hash_bits, std::shared_ptr<const embedding::WordVectorTable> table)
    : hash_bits_(hash_bits), table_(std::move(table)) {
  if (hash_bits_ < 1 || hash_bits_ > 26) throw InvalidConfig("hash_bits must be in [1, 26]");
}

std::uint32_t Featurizer::unigram_index(std::string_view token) const {
  const auto h = text::fnv1a(token, text::fnv1a("u\x1f"));
  return static_cast<std::uint32_t>(h & (hash_size() - 1));
}

std::uint32_t Featurizer::bigram_index(std::string_view first, std::string_view second) const {
  auto h = text::fnv1a(first, text::fnv1a("b\x1f"));
  h = text::fnv1a("\x1f", h);
  h = text::fnv1a(second, h);
  return static_cast<std::uint32_t>(h & (hash_size() - 1));
}

FeatureVector Featurizer::operator()(std::string_view s) const {
  const auto tokens = text::tokenize(s);
  std::map<std::uint32_t, double> grams;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    grams[unigram_index(tokens[i])] += 1.0;
    if (i + 1 < tokens.size()) grams[bigram_index(tokens[i], tokens[i + 1])] += 1.0;
  }
  double norm = 0.0;
  for (const auto& [_, v] : grams) norm += v * v;
  norm = std::sqrt(norm);

  FeatureVector fv;
  fv.entries.reserve(grams.size() + vector_dim());
  for (const auto& [idx, v] : grams) fv.entries.emplace_back(idx, v / norm);

  if (table_) {
    std::vector<double> mean(table_->dimension(), 0.0);
    std::size_t hits = 0;
    for (const auto& t : tokens) {
      const auto id = table_->find(t);
      if (id < 0) continue;
      const auto row = table_->row(static_cast<std::size_t>(id));
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += row[d];
      ++hits;
    }
    if (hits > 0) {
      for (std::size_t d = 0; d < mean.size(); ++d) {
        const double v = mean[d] / static_cast<double>(hits);
        if (v != 0.0) fv.entries.emplace_back(static_cast<std::uint32_t>(hash_size() + d), v);
      }
    }
  }
  return fv;
}

// ---------------------------------------------------------------------------
// LinearModel

LinearModel::LinearModel(std::size_t classes, std::size_t dim)
    : classes_(classes), dim_(dim), w_(classes * dim, 0.0), bias_(classes, 0.0) {
  if (classes < 2) throw InvalidArgument("a classifier needs at least two classes");
}

LinearModel::LinearModel(const LinearParams& p) : LinearModel(p.classes, p.dim) {
  if (p.weights.size() != p.classes * p.dim || p.bias.size() != p.classes) {
    throw InvalidArgument("LinearParams shape mismatch");
  }
  w_ = p.weights;
  bias_ = p.bias;
  sq_norm_ = std::inner_product(w_.begin(), w_.end(), w_.begin(), 0.0);
}

std::vector<double> LinearModel::scores(const FeatureVector& x) const {
  std::vector<double> s(bias_);
  for (std::size_t k = 0; k < classes_; ++k) {
    const double* row = w_.data() + k * dim_;
    double dot = 0.0;
    for (const auto& [i, v] : x.entries) dot += row[i] * v;
    s[k] += scale_ * dot;
  }
  return s;
}

void LinearModel::predict_proba_into(const FeatureVector& x, std::span<double> out) const {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes_; ++k) {
    const double* row = w_.data() + k * dim_;
    double dot = 0.0;
    for (const auto& [i, v] : x.entries) dot += row[i] * v;
    out[k] = bias_[k] + scale_ * dot;
    top = std::max(top, out[k]);
  }
  double z = 0.0;
  for (std::size_t k = 0; k < classes_; ++k) {
    out[k] = std::exp(out[k] - top);
    z += out[k];
  }
  for (std::size_t k = 0; k < classes_; ++k) out[k] /= z;
}

std::vector<double> LinearModel::predict_proba(const FeatureVector& x) const {
  std::vector<double> p(classes_);
  predict_proba_into(x, p);
  return p;
}

LinearParams LinearModel::params() const {
  LinearParams p(classes_, dim_);
  for (std::size_t i = 0; i < w_.size(); ++i) p.weights[i] = scale_ * w_[i];
  p.bias = bias_;
  return p;
}

LinearModel::SparseGradient LinearModel::data_gradient(
    std::span<const LabeledFeatures* const> batch) const {
  SparseGradient g;
  g.bias.assign(classes_, 0.0);
  if (batch.empty()) return g;
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> p(classes_);
  for (const LabeledFeatures* ex : batch) {
    predict_proba_into(ex->x, p);
    for (std::size_t k = 0; k < classes_; ++k) {
      const double r = (p[k] - (k == ex->label ? 1.0 : 0.0)) * inv;
      g.bias[k] += r;
      if (r == 0.0) continue;
      for (const auto& [i, v] : ex->x.entries) g.weights.emplace_back(k, i, r * v);
    }
  }
  return g;
}

void LinearModel::step(std::span<const LabeledFeatures* const> batch, double learning_rate,
                       double l2) {
  const auto g = data_gradient(batch);
  if (l2 > 0.0) scale_ *= (1.0 - learning_rate * l2);
  const double factor = learning_rate / scale_;
  for (const auto& [k, i, v] : g.weights) {
    double& w = w_[k * dim_ + i];
    const double old = w;
    w -= factor * v;
    sq_norm_ += w * w - old * old;
  }
  for (std::size_t k = 0; k < classes_; ++k) bias_[k] -= learning_rate * g.bias[k];
  if (scale_ < 1e-6) renormalize();
}

void LinearModel::renormalize() {
  for (auto& w : w_) w *= scale_;
  scale_ = 1.0;
  sq_norm_ = std::inner_product(w_.begin(), w_.end(), w_.begin(), 0.0);
}

double LinearModel::loss(std::span<const LabeledFeatures> data, double l2) const {
  double ce = 0.0;
  std::vector<double> p(classes_);
  for (const auto& ex : data) {
    predict_proba_into(ex.x, p);
    ce -= std::log(std::max(p[ex.label], 1e-300));
  }
  if (!data.empty()) ce /= static_cast<double>(data.size());
  return ce + 0.5 * l2 * squared_norm();
}

// ---------------------------------------------------------------------------
// LogisticClassifier

LogisticClassifier::LogisticClassifier(Featurizer featurizer, std::size_t classes)
    : featurizer_(std::move(featurizer)), model_(classes, featurizer_.dimension()) {}

LogisticClassifier::LogisticClassifier(Featurizer featurizer, LinearModel model)
    : featurizer_(std::move(featurizer)), model_(std::move(model)) {
  if (model_.dim() != featurizer_.dimension()) {
    throw InvalidArgument("model dimension does not match featurizer");
  }
}

std::vector<double> LogisticClassifier::predict_proba(std::string_view text) const {
  return model_.predict_proba(featurizer_(text));
}

std::size_t LogisticClassifier::predict(const FeatureVector& x) const {
  const auto p = model_.predict_proba(x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// ---------------------------------------------------------------------------
// Training

namespace {

void validate(std::size_t classes, std::span<const LabeledFeatures> data, const TrainConfig& cfg,
              bool warn_single_class) {
  if (data.empty()) throw InvalidArgument("training set is empty");
  if (cfg.batch_size == 0) throw InvalidConfig("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
  if (cfg.l2 < 0.0 || cfg.learning_rate * cfg.l2 >= 1.0) {
    throw InvalidConfig("l2 must satisfy 0 <= learning_rate * l2 < 1");
  }
  std::vector<std::size_t> counts(classes, 0);
  for (const auto& ex : data) {
    if (ex.label >= classes) {
      throw InvalidArgument("label " + std::to_string(ex.label) + " out of range for " +
                            std::to_string(classes) + " classes");
    }
    ++counts[ex.label];
  }
  if (warn_single_class &&
      std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
    log::warn("training set contains a single class; the model is degenerate");
  }
}

void run_epochs(LinearModel& model, std::vector<double>& log_out,
                std::span<const LabeledFeatures> data, const TrainConfig& cfg) {
  std::vector<const LabeledFeatures*> order(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) order[i] = &data[i];
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      model.step(std::span<const LabeledFeatures* const>(order.data() + b, e - b),
                 cfg.learning_rate, cfg.l2);
    }
    const double l = model.loss(data, cfg.l2);
    if (!std::isfinite(l)) {
      throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch));
    }
    log_out.push_back(l);
  }
}

}  // namespace

LogisticClassifier train(const Featurizer& featurizer, std::size_t classes,
                         std::span<const LabeledFeatures> data, const TrainConfig& config) {
  validate(classes, data, config, true);
  LogisticClassifier model(featurizer, classes);
  run_epochs(model.mutable_model(), model.mutable_train_log(), data, config);
  return model;
}

LogisticClassifier train(const Featurizer& featurizer, std::size_t classes,
                         std::span<const LabeledText> data, const TrainConfig& config) {
  std::vector<std::string> texts;
  texts.reserve(data.size());
  for (const auto& d : data) texts.push_back(d.text);
  auto xs = kernels::featurize(featurizer, texts);
  std::vector<LabeledFeatures> feats(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) feats[i] = {std::move(xs[i]), data[i].label};
  return train(featurizer, classes, std::span<const LabeledFeatures>(feats), config);
}

void continue_training(LogisticClassifier& model, std::span<const LabeledFeatures> data,
                       const TrainConfig& config) {
  if (data.empty()) return;
  // new-label batches are often single-class; that is expected here
  validate(model.class_count(), data, config, false);
  run_epochs(model.mutable_model(), model.mutable_train_log(), data, config);
}

std::pair<double, LinearParams> loss_and_gradient(const LinearParams& params,
                                                  std::span<const LabeledFeatures> data,
                                                  double l2) {
  const LinearModel model(params);
  std::vector<const LabeledFeatures*> batch(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) batch[i] = &data[i];
  const auto g = model.data_gradient(batch);

  LinearParams grad(params.classes, params.dim);
  for (const auto& [k, i, v] : g.weights) grad.weights[k * params.dim + i] += v;
  for (std::size_t j = 0; j < grad.weights.size(); ++j) grad.weights[j] += l2 * params.weights[j];
  grad.bias = g.bias;
  return {model.loss(data, l2), std::move(grad)};
}

// ---------------------------------------------------------------------------
// Evaluation

EvalMetrics metrics_from_predictions(std::span<const std::size_t> truth,
                                     std::span<const std::size_t> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw InvalidArgument("truth/prediction size mismatch");
  if (truth.empty()) throw InvalidArgument("test set is empty");
  EvalMetrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) throw InvalidArgument("class out of range");
    ++m.confusion[truth[i]][predicted[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.per_class_f1.assign(classes, 0.0);
  m.support.assign(classes, 0);
  double weighted = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = m.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == c) continue;
      fp += m.confusion[o][c];
      fn += m.confusion[c][o];
    }
    m.support[c] = tp + fn;
    const std::size_t denom = 2 * tp + fp + fn;
    m.per_class_f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    weighted += m.per_class_f1[c] * static_cast<double>(m.support[c]);
  }
  m.weighted_f1 = weighted / static_cast<double>(truth.size());
  m.balanced_f1 = std::accumulate(m.per_class_f1.begin(), m.per_class_f1.end(), 0.0) /
                  static_cast<double>(classes);
  return m;
}

EvalMetrics evaluate(const TextClassifier& model, std::span<const LabeledText> testset) {
  std::vector<std::size_t> truth, pred;
  for (const auto& ex : testset) {
    const auto p = model.predict_proba(ex.text);
    truth.push_back(ex.label);
    pred.push_back(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return metrics_from_predictions(truth, pred, model.class_count());
}

EvalMetrics evaluate(const LogisticClassifier& model, std::span<const LabeledFeatures> testset) {
  std::vector<FeatureVector> xs;
  xs.reserve(testset.size());
  for (const auto& ex : testset) xs.push_back(ex.x);
  const auto probs = kernels::predict(model.model(), xs);
  const std::size_t k = model.class_count();
  std::vector<std::size_t> truth, pred;
  for (std::size_t i = 0; i < testset.size(); ++i) {
    truth.push_back(testset[i].label);
    const auto* row = probs.data() + i * k;
    pred.push_back(static_cast<std::size_t>(std::max_element(row, row + k) - row));
  }
  return metrics_from_predictions(truth, pred, k);
}

// ---------------------------------------------------------------------------
// Persistence

void save_model(const LogisticClassifier& model, const std::filesystem::path& path) {
  const auto& m = model.model();
  json j;
  j["format"] = "policyal-linear";
  j["version"] = 1;
  j["class_count"] = m.classes();
  j["hash_bits"] = model.featurizer().hash_bits();
  j["vector_dim"] = model.featurizer().vector_dim();
  json cols = json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    bool any = false;
    for (std::size_t k = 0; k < m.classes() && !any; ++k) any = m.weight(k, i) != 0.0;
    if (!any) continue;
    json col = json::array({i});
    for (std::size_t k = 0; k < m.classes(); ++k) col.push_back(m.weight(k, i));
    cols.push_back(std::move(col));
  }
  j["weights"] = std::move(cols);
  std::vector<double> bias(m.classes());
  for (std::size_t k = 0; k < m.classes(); ++k) bias[k] = m.bias(k);
  j["bias"] = bias;
  j["train_log"] = model.train_log();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model to " + path.string());
  out << j.dump() << '\n';
}

LogisticClassifier load_model(const std::filesystem::path& path,
                              std::shared_ptr<const embedding::WordVectorTable> table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model " + path.string());
  json j;
  try {
    in >> j;
    if (j.at("format") != "policyal-linear" || j.at("version") != 1) {
      throw ParseError("unsupported checkpoint format in " + path.string());
    }
    const auto classes = j.at("class_count").get<std::size_t>();
    const auto bits = j.at("hash_bits").get<unsigned>();
    const auto vdim = j.at("vector_dim").get<std::size_t>();
    const std::size_t have = table ? table->dimension() : 0;
    if (vdim != have) {
      throw ParseError("checkpoint expects word vectors of dimension " + std::to_string(vdim) +
                       ", got " + std::to_string(have));
    }
    Featurizer f(bits, std::move(table));
    LinearParams p(classes, f.dimension());
    for (const auto& col : j.at("weights")) {
      const auto i = col.at(0).get<std::size_t>();
      if (i >= p.dim || col.size() != classes + 1) throw ParseError("bad weight column");
      for (std::size_t k = 0; k < classes; ++k) p.weights[k * p.dim + i] = col.at(k + 1).get<double>();
    }
    p.bias = j.at("bias").get<std::vector<double>>();
    LogisticClassifier model(std::move(f), LinearModel(p));
    if (j.contains("train_log")) model.mutable_train_log() = j["train_log"].get<std::vector<double>>();
    return model;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<LabeledText> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<LabeledText> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("text").get<std::string>(), j.at("class").get<std::size_t>()});
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(std::span<const LabeledText> data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : data) out << json{{"text", d.text}, {"class", d.label}}.dump() << '\n';
}

}  // namespace policyal::textmodel
