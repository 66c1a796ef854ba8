#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lightrdl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A trainable tensor with its gradient and adaptive-moment state.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols) { resize(rows, cols); }
  void resize(Eigen::Index rows, Eigen::Index cols);
  void zero_grad() { grad.setZero(); }
};

/// Uniform Glorot initialisation.
void glorot_init(Param& p, std::mt19937_64& rng);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(const std::vector<Param*>& params);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

void relu_inplace(Matrix& x);

/// Inverted dropout: zeroes entries with probability `rate` and rescales the rest.
/// Returns the scaled mask that was applied.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace lightrdl
