#include "lightrdl/dense.hpp"

#include <cmath>
#include <stdexcept>

namespace lightrdl {

void Param::resize(Eigen::Index rows, Eigen::Index cols) {
  value = Matrix::Zero(rows, cols);
  grad = Matrix::Zero(rows, cols);
  m = Matrix::Zero(rows, cols);
  v = Matrix::Zero(rows, cols);
}

void glorot_init(Param& p, std::mt19937_64& rng) {
  const double fan = static_cast<double>(p.value.rows() + p.value.cols());
  const double limit = fan > 0 ? std::sqrt(6.0 / fan) : 0.0;
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
}

void Adam::step(const std::vector<Param*>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
    p->v = cfg_.beta2 * p->v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -=
        cfg_.learning_rate * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + cfg_.epsilon);
  }
}

void relu_inplace(Matrix& x) { x = x.cwiseMax(0.0); }

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Matrix mask(rows, cols);
  if (rate <= 0.0) {
    mask.setOnes();
    return mask;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return mask;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> flat(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw std::invalid_argument("matrix size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = flat[static_cast<std::size_t>(i)];
  return m;
}

}  // namespace lightrdl
