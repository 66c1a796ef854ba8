#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightrdl/dense.hpp"
#include "lightrdl/features.hpp"
#include "lightrdl/gbdt.hpp"

namespace lightrdl {

struct DistillConfig {
  double alpha = 0.5;
  double temperature = 2.0;
  double learning_rate = 0.01;
  double dropout = 0.1;
  int epochs = 30;
  int batch_size = 128;
  std::vector<int> hidden{64};  // trunk widths before the embedding layer
  int embedding_dim = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Teacher probabilities softened by a temperature (length 2), or the teacher's
/// scalar for regression (length 1).
struct SoftTarget {
  std::vector<double> probs;
};

inline constexpr double kProbClamp = 1e-12;

/// softmax(log([1 - p, p]) / F) with p clamped to [1e-12, 1 - 1e-12].
SoftTarget soften(double teacher_prob, double temperature);

/// Summed cross-entropy of class distributions (n x 2) against 0/1 labels.
double hard_loss(const Matrix& probs, std::span<const double> labels);
/// Mean absolute error for the regression head.
double hard_loss(std::span<const double> preds, std::span<const double> labels);

/// Summed cross-entropy -sum_v sum_c teacher_vc log student_vc.
double soft_loss(const Matrix& student, const Matrix& teacher);
/// Regression variant: mean absolute error against the teacher's scalar outputs.
double soft_loss(std::span<const double> student, std::span<const double> teacher);

/// alpha * hard + (1 - alpha) * F^2 * soft.
double total_loss(double hard, double soft, double alpha, double temperature);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shared ReLU trunk with two affine heads. The trunk output is the embedding.
class DistillMlp {
 public:
  DistillMlp() = default;
  DistillMlp(TaskKind kind, std::size_t input_dim, const std::vector<int>& hidden, int embedding_dim,
             double temperature, std::mt19937_64& rng);

  TaskKind kind() const { return kind_; }
  double temperature() const { return temperature_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(input_mean_.size()); }
  std::size_t embedding_dim() const { return static_cast<std::size_t>(trunk_w_.back().value.rows()); }
  std::size_t classes() const { return kind_ == TaskKind::kRegression ? 1 : 2; }

  /// z-score statistics applied to raw features before the trunk.
  void set_normalization(Vector mean, Vector scale);

  /// Penultimate-layer activations, one row per input row. Dropout is never applied.
  Matrix embed(const Matrix& raw) const;
  std::vector<double> embed(const FeatureVector& f) const;
  /// Classification: softmax class distributions. Regression: n x 1 values.
  Matrix hard_output(const Matrix& raw) const;
  /// Classification: softmax(z / F). Regression: n x 1 values.
  Matrix soft_output(const Matrix& raw) const;

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  std::string to_json() const;
  static DistillMlp from_json(std::string_view text);

 private:
  friend struct MlpPass;

  TaskKind kind_ = TaskKind::kBinaryClassification;
  double temperature_ = 1.0;
  Vector input_mean_;
  Vector input_scale_;
  std::vector<Param> trunk_w_;  // out x in
  std::vector<Param> trunk_b_;  // 1 x out
  Param hard_w_, hard_b_, soft_w_, soft_b_;
};

struct LossSpec {
  double alpha = 0.5;
  double temperature = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double hard = 0.0;
  double soft = 0.0;
};

/// One forward and reverse pass over a batch. Gradients are written into the
/// parameters' `grad` fields (overwriting). `teacher` holds soft targets (n x 2) for
/// classification or teacher scalars (n x 1) for regression. Dropout is applied only
/// when `rng` is given and `dropout` > 0.
LossBreakdown mlp_forward_backward(DistillMlp& mlp, const Matrix& raw, std::span<const double> labels,
                                   const Matrix& teacher, const LossSpec& loss, double dropout = 0.0,
                                   std::mt19937_64* rng = nullptr);

/// Teacher targets for a dataset: soft targets (classification) or raw outputs.
Matrix teacher_targets(const GbdtModel& teacher, const TabularDataset& ds, double temperature);

Matrix to_matrix(const TabularDataset& ds);

/// Trains trunk and heads by mini-batch Adam on the blended loss. Teacher targets
/// are computed once before training.
DistillMlp train_distill_mlp(const TabularDataset& ds, const GbdtModel& teacher, const DistillConfig& cfg,
                             std::vector<double>* epoch_losses = nullptr);

}  // namespace lightrdl
