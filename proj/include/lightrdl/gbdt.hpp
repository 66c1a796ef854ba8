#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lightrdl/features.hpp"
#include "lightrdl/task.hpp"

namespace lightrdl {

/// Gradient-boosting hyperparameters. `validate` enforces what the trainer needs;
/// `in_search_space` reports whether the values lie in the tuning grid.
struct GbdtConfig {
  int max_depth = 6;
  double learning_rate = 0.1;
  int num_leaves = 31;
  double subsample = 1.0;
  double colsample = 1.0;
  int min_data_in_leaf = 20;
  double l1 = 1e-9;
  double l2 = 1.0;
  int n_rounds = 100;
  double min_split_gain = 0.0;

  void validate() const;
  bool in_search_space() const;
};

struct RegressionTree {
  // Node arrays; feature < 0 marks a leaf. Rows with x[feature] <= threshold go left.
  std::vector<std::int32_t> feature;
  std::vector<double> threshold;
  std::vector<std::int32_t> left;
  std::vector<std::int32_t> right;
  std::vector<double> value;

  double predict(std::span<const double> x) const;
  int depth() const;
};

/// The tabular teacher: boosted regression trees over engineered features.
class GbdtModel {
 public:
  TaskKind kind = TaskKind::kBinaryClassification;
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  bool degenerate = false;  // labels carried no signal; only base_score is used
  std::vector<RegressionTree> trees;
  FeatureConfig feature_config;

  /// Sum of base score and tree outputs.
  double raw(std::span<const double> x) const;
  /// Regression: raw sum. Classification: sigmoid of the raw sum clamped to [-30, 30].
  double predict(std::span<const double> x) const;
  double predict(const FeatureVector& f) const { return predict(std::span<const double>(f.values)); }

  std::string to_json() const;
  static GbdtModel from_json(std::string_view text);
};

inline constexpr double kRawClamp = 30.0;

double sigmoid(double z);

GbdtModel train_gbdt(const TabularDataset& ds, const GbdtConfig& cfg, std::uint64_t seed);

/// Model output for every row of a dataset.
std::vector<double> gbdt_predict_all(const GbdtModel& model, const TabularDataset& ds);

}  // namespace lightrdl
