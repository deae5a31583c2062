#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "policyal/embedding.hpp"

namespace policyal::textmodel {

// Sparse features: hashed unigrams and bigrams (L2-normalized as a block)
// followed by the dense mean word vector of the text.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index, unique

  bool is_zero() const;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

class Featurizer {
 public:
  explicit Featurizer(unsigned hash_bits = 18,
                      std::shared_ptr<const embedding::WordVectorTable> table = nullptr);

  FeatureVector operator()(std::string_view text) const;

  std::size_t dimension() const { return hash_size() + vector_dim(); }
  std::size_t hash_size() const { return std::size_t{1} << hash_bits_; }
  std::size_t vector_dim() const { return table_ ? table_->dimension() : 0; }
  unsigned hash_bits() const { return hash_bits_; }
  const std::shared_ptr<const embedding::WordVectorTable>& table() const { return table_; }

  std::uint32_t unigram_index(std::string_view token) const;
  std::uint32_t bigram_index(std::string_view first, std::string_view second) const;

 private:
  unsigned hash_bits_;
  std::shared_ptr<const embedding::WordVectorTable> table_;
};

struct LabeledText {
  std::string text;
  std::size_t label = 0;
};

struct LabeledFeatures {
  FeatureVector x;
  std::size_t label = 0;
};

// Dense view of a linear softmax model; used for checkpoints and gradient checks.
struct LinearParams {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes x dim, row-major
  std::vector<double> bias;     // classes

  LinearParams() = default;
  LinearParams(std::size_t k, std::size_t d) : classes(k), dim(d), weights(k * d), bias(k) {}
};

// Multinomial logistic regression with lazily scaled weights, so L2 decay
// costs O(1) per step instead of O(classes * dim).
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(std::size_t classes, std::size_t dim);
  explicit LinearModel(const LinearParams& params);

  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return dim_; }

  std::vector<double> scores(const FeatureVector& x) const;
  std::vector<double> predict_proba(const FeatureVector& x) const;
  void predict_proba_into(const FeatureVector& x, std::span<double> out) const;

  double weight(std::size_t k, std::size_t i) const { return scale_ * w_[k * dim_ + i]; }
  double bias(std::size_t k) const { return bias_[k]; }
  double squared_norm() const { return scale_ * scale_ * sq_norm_; }
  LinearParams params() const;

  // One mini-batch gradient step on mean cross-entropy + (l2/2)||W||^2.
  void step(std::span<const LabeledFeatures* const> batch, double learning_rate, double l2);

  // Mean cross-entropy + (l2/2)||W||^2 over a dataset.
  double loss(std::span<const LabeledFeatures> data, double l2) const;

  // Data part of the batch gradient (mean over the batch), as sparse
  // (class, index, value) triples plus the bias gradient.
  struct SparseGradient {
    std::vector<std::tuple<std::size_t, std::uint32_t, double>> weights;
    std::vector<double> bias;
  };
  SparseGradient data_gradient(std::span<const LabeledFeatures* const> batch) const;

 private:
  void renormalize();

  std::size_t classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> w_;
  std::vector<double> bias_;
  double scale_ = 1.0;
  double sq_norm_ = 0.0;  // of the stored (unscaled) weights
};

class TextClassifier {
 public:
  virtual ~TextClassifier() = default;
  virtual std::size_t class_count() const = 0;
  virtual std::vector<double> predict_proba(std::string_view text) const = 0;
};

class LogisticClassifier final : public TextClassifier {
 public:
  LogisticClassifier(Featurizer featurizer, std::size_t classes);
  LogisticClassifier(Featurizer featurizer, LinearModel model);

  std::size_t class_count() const override { return model_.classes(); }
  std::vector<double> predict_proba(std::string_view text) const override;
  std::vector<double> predict_proba(const FeatureVector& x) const { return model_.predict_proba(x); }
  std::size_t predict(const FeatureVector& x) const;

  const Featurizer& featurizer() const { return featurizer_; }
  const LinearModel& model() const { return model_; }
  LinearModel& mutable_model() { return model_; }
  const std::vector<double>& train_log() const { return train_log_; }
  std::vector<double>& mutable_train_log() { return train_log_; }

 private:
  Featurizer featurizer_;
  LinearModel model_;
  std::vector<double> train_log_;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1.0;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

// Fits from zero weights. Warns (does not fail) on single-class data; throws
// TrainingDiverged on a non-finite loss and InvalidArgument on bad labels.
LogisticClassifier train(const Featurizer& featurizer, std::size_t classes,
                         std::span<const LabeledFeatures> data, const TrainConfig& config);
LogisticClassifier train(const Featurizer& featurizer, std::size_t classes,
                         std::span<const LabeledText> data, const TrainConfig& config);

// Continues gradient descent from the current weights (incremental update).
void continue_training(LogisticClassifier& model, std::span<const LabeledFeatures> data,
                       const TrainConfig& config);

// Full objective and its analytic gradient, dense.
std::pair<double, LinearParams> loss_and_gradient(const LinearParams& params,
                                                  std::span<const LabeledFeatures> data,
                                                  double l2);

struct EvalMetrics {
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::size_t> support;
  double weighted_f1 = 0.0;
  double balanced_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][pred]
};

EvalMetrics metrics_from_predictions(std::span<const std::size_t> truth,
                                     std::span<const std::size_t> predicted, std::size_t classes);
EvalMetrics evaluate(const TextClassifier& model, std::span<const LabeledText> testset);
EvalMetrics evaluate(const LogisticClassifier& model, std::span<const LabeledFeatures> testset);

// JSON checkpoint: {format, version, class_count, hash_bits, vector_dim,
// weights: [[index, w_0 .. w_{k-1}], ...] (non-zero columns), bias}.
void save_model(const LogisticClassifier& model, const std::filesystem::path& path);
LogisticClassifier load_model(const std::filesystem::path& path,
                              std::shared_ptr<const embedding::WordVectorTable> table);

// JSON Lines {text, class}.
std::vector<LabeledText> load_dataset(const std::filesystem::path& path);
void save_dataset(std::span<const LabeledText> data, const std::filesystem::path& path);

}  // namespace policyal::textmodel
