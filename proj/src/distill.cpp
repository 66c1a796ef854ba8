#include "lightrdl/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lightrdl {

void DistillConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("distill config: " + what); };
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
  if (!(temperature >= 1.0)) fail("temperature must be >= 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (embedding_dim < 1) fail("embedding_dim must be >= 1");
  for (int h : hidden)
    if (h < 1) fail("hidden widths must be >= 1");
}

SoftTarget soften(double teacher_prob, double temperature) {
  if (!std::isfinite(teacher_prob) || !std::isfinite(temperature))
    throw std::invalid_argument("soften: non-finite input");
  if (temperature < 1.0) throw std::invalid_argument("soften: temperature must be >= 1");
  const double p = std::clamp(teacher_prob, kProbClamp, 1.0 - kProbClamp);
  const double z0 = std::log(1.0 - p) / temperature;
  const double z1 = std::log(p) / temperature;
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  return {{e0 / (e0 + e1), e1 / (e0 + e1)}};
}

double hard_loss(const Matrix& probs, std::span<const double> labels) {
  if (probs.cols() != 2 || static_cast<std::size_t>(probs.rows()) != labels.size())
    throw std::invalid_argument("hard_loss: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i] == 1.0 ? 1 : 0;
    loss -= std::log(std::max(probs(static_cast<Eigen::Index>(i), c), kProbClamp));
  }
  return loss;
}

double hard_loss(std::span<const double> preds, std::span<const double> labels) {
  if (preds.size() != labels.size() || preds.empty()) throw std::invalid_argument("hard_loss: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i] - labels[i]);
  return sum / static_cast<double>(preds.size());
}

double soft_loss(const Matrix& student, const Matrix& teacher) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw std::invalid_argument("soft_loss: shape mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < student.rows(); ++i)
    for (Eigen::Index c = 0; c < student.cols(); ++c)
      loss -= teacher(i, c) * std::log(std::max(student(i, c), kProbClamp));
  return loss;
}

double soft_loss(std::span<const double> student, std::span<const double> teacher) {
  if (student.size() != teacher.size() || student.empty()) throw std::invalid_argument("soft_loss: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < student.size(); ++i) sum += std::abs(student[i] - teacher[i]);
  return sum / static_cast<double>(student.size());
}

double total_loss(double hard, double soft, double alpha, double temperature) {
  return alpha * hard + (1.0 - alpha) * temperature * temperature * soft;
}

namespace {

void softmax_rows(Matrix& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
}

Matrix log_softmax_rows(const Matrix& z) {
  Matrix out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

Matrix affine(const Matrix& a, const Param& w, const Param& b) {
  Matrix z = a * w.value.transpose();
  z.rowwise() += b.value.row(0);
  return z;
}

}  // namespace

DistillMlp::DistillMlp(TaskKind kind, std::size_t input_dim, const std::vector<int>& hidden, int embedding_dim,
                       double temperature, std::mt19937_64& rng)
    : kind_(kind), temperature_(temperature) {
  input_mean_ = Vector::Zero(static_cast<Eigen::Index>(input_dim));
  input_scale_ = Vector::Ones(static_cast<Eigen::Index>(input_dim));
  std::vector<int> widths = hidden;
  widths.push_back(embedding_dim);
  Eigen::Index in = static_cast<Eigen::Index>(input_dim);
  for (int w : widths) {
    trunk_w_.emplace_back(w, in);
    glorot_init(trunk_w_.back(), rng);
    trunk_b_.emplace_back(1, w);
    in = w;
  }
  const Eigen::Index c = static_cast<Eigen::Index>(classes());
  hard_w_.resize(c, in);
  soft_w_.resize(c, in);
  glorot_init(hard_w_, rng);
  glorot_init(soft_w_, rng);
  hard_b_.resize(1, c);
  soft_b_.resize(1, c);
}

void DistillMlp::set_normalization(Vector mean, Vector scale) {
  if (mean.size() != input_mean_.size() || scale.size() != input_scale_.size())
    throw std::invalid_argument("normalization width mismatch");
  input_mean_ = std::move(mean);
  input_scale_ = std::move(scale);
}

std::vector<Param*> DistillMlp::parameters() {
  std::vector<Param*> out;
  for (std::size_t l = 0; l < trunk_w_.size(); ++l) {
    out.push_back(&trunk_w_[l]);
    out.push_back(&trunk_b_[l]);
  }
  out.insert(out.end(), {&hard_w_, &hard_b_, &soft_w_, &soft_b_});
  return out;
}

std::vector<const Param*> DistillMlp::parameters() const {
  std::vector<const Param*> out;
  for (Param* p : const_cast<DistillMlp*>(this)->parameters()) out.push_back(p);
  return out;
}

/// Forward pass with the intermediate values needed for the reverse pass.
struct MlpPass {
  std::vector<Matrix> acts;  // acts[0] = normalised input, acts[l + 1] = trunk layer l output
  std::vector<Matrix> masks;
  Matrix hard_z, soft_z;

  static Matrix normalise(const DistillMlp& mlp, const Matrix& raw) {
    if (raw.cols() != mlp.input_mean_.size())
      throw std::invalid_argument("distill mlp: expected " + std::to_string(mlp.input_mean_.size()) +
                                  " features, got " + std::to_string(raw.cols()));
    Matrix x = raw;
    x.rowwise() -= mlp.input_mean_.transpose();
    x.array().rowwise() /= mlp.input_scale_.transpose().array();
    return x;
  }

  static MlpPass run(const DistillMlp& mlp, const Matrix& raw, double dropout, std::mt19937_64* rng) {
    MlpPass pass;
    pass.acts.push_back(normalise(mlp, raw));
    for (std::size_t l = 0; l < mlp.trunk_w_.size(); ++l) {
      Matrix a = affine(pass.acts.back(), mlp.trunk_w_[l], mlp.trunk_b_[l]);
      relu_inplace(a);
      if (rng && dropout > 0.0) {
        pass.masks.push_back(dropout_mask(a.rows(), a.cols(), dropout, *rng));
        a.array() *= pass.masks.back().array();
      }
      pass.acts.push_back(std::move(a));
    }
    pass.hard_z = affine(pass.acts.back(), mlp.hard_w_, mlp.hard_b_);
    pass.soft_z = affine(pass.acts.back(), mlp.soft_w_, mlp.soft_b_);
    return pass;
  }

  static LossBreakdown backward(DistillMlp& mlp, MlpPass& pass, std::span<const double> labels,
                                const Matrix& teacher, const LossSpec& spec) {
    const Eigen::Index n = pass.hard_z.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n || teacher.rows() != n ||
        teacher.cols() != static_cast<Eigen::Index>(mlp.classes()))
      throw std::invalid_argument("mlp_forward_backward: shape mismatch");
    LossBreakdown out;
    Matrix d_hard, d_soft;
    if (mlp.kind_ == TaskKind::kRegression) {
      const double inv_n = 1.0 / static_cast<double>(n);
      d_hard = Matrix::Zero(n, 1);
      d_soft = Matrix::Zero(n, 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double rh = pass.hard_z(i, 0) - labels[static_cast<std::size_t>(i)];
        const double rs = pass.soft_z(i, 0) - teacher(i, 0);
        out.hard += std::abs(rh) * inv_n;
        out.soft += std::abs(rs) * inv_n;
        d_hard(i, 0) = spec.alpha * inv_n * ((rh > 0) - (rh < 0));
        d_soft(i, 0) = (1.0 - spec.alpha) * inv_n * ((rs > 0) - (rs < 0));
      }
      out.total = total_loss(out.hard, out.soft, spec.alpha, 1.0);
    } else {
      const double f = spec.temperature;
      const Matrix log_p = log_softmax_rows(pass.hard_z);
      const Matrix log_q = log_softmax_rows(pass.soft_z / f);
      d_hard = log_p.array().exp();
      d_soft = log_q.array().exp();
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index y = labels[static_cast<std::size_t>(i)] == 1.0 ? 1 : 0;
        out.hard -= log_p(i, y);
        d_hard(i, y) -= 1.0;
        for (Eigen::Index c = 0; c < 2; ++c) out.soft -= teacher(i, c) * log_q(i, c);
      }
      out.total = total_loss(out.hard, out.soft, spec.alpha, f);
      d_hard *= spec.alpha;
      // d soft / d z = (q - p) / F, scaled by (1 - alpha) F^2.
      d_soft -= teacher;
      d_soft *= (1.0 - spec.alpha) * f;
    }

    const Matrix& emb = pass.acts.back();
    mlp.hard_w_.grad = d_hard.transpose() * emb;
    mlp.hard_b_.grad = d_hard.colwise().sum();
    mlp.soft_w_.grad = d_soft.transpose() * emb;
    mlp.soft_b_.grad = d_soft.colwise().sum();
    Matrix d_act = d_hard * mlp.hard_w_.value + d_soft * mlp.soft_w_.value;
    for (std::size_t l = mlp.trunk_w_.size(); l-- > 0;) {
      if (!pass.masks.empty()) d_act.array() *= pass.masks[l].array();
      // relu'(z) = 1 where the (pre-dropout) activation is positive; masked zeros already have no gradient.
      Matrix d_z = d_act;
      const Matrix& a = pass.acts[l + 1];
      for (Eigen::Index k = 0; k < d_z.size(); ++k)
        if (!(a.data()[k] > 0.0)) d_z.data()[k] = 0.0;
      mlp.trunk_w_[l].grad = d_z.transpose() * pass.acts[l];
      mlp.trunk_b_[l].grad = d_z.colwise().sum();
      if (l > 0) d_act = d_z * mlp.trunk_w_[l].value;
    }
    return out;
  }
};

Matrix DistillMlp::embed(const Matrix& raw) const {
  MlpPass pass = MlpPass::run(*this, raw, 0.0, nullptr);
  return std::move(pass.acts.back());
}

std::vector<double> DistillMlp::embed(const FeatureVector& f) const {
  Matrix raw(1, static_cast<Eigen::Index>(f.values.size()));
  for (std::size_t i = 0; i < f.values.size(); ++i) raw(0, static_cast<Eigen::Index>(i)) = f.values[i];
  const Matrix e = embed(raw);
  return {e.data(), e.data() + e.size()};
}

Matrix DistillMlp::hard_output(const Matrix& raw) const {
  MlpPass pass = MlpPass::run(*this, raw, 0.0, nullptr);
  if (kind_ == TaskKind::kBinaryClassification) softmax_rows(pass.hard_z);
  return pass.hard_z;
}

Matrix DistillMlp::soft_output(const Matrix& raw) const {
  MlpPass pass = MlpPass::run(*this, raw, 0.0, nullptr);
  if (kind_ == TaskKind::kBinaryClassification) {
    pass.soft_z /= temperature_;
    softmax_rows(pass.soft_z);
  }
  return pass.soft_z;
}

LossBreakdown mlp_forward_backward(DistillMlp& mlp, const Matrix& raw, std::span<const double> labels,
                                   const Matrix& teacher, const LossSpec& loss, double dropout,
                                   std::mt19937_64* rng) {
  if (raw.rows() == 0) throw std::invalid_argument("mlp_forward_backward: empty batch");
  MlpPass pass = MlpPass::run(mlp, raw, dropout, rng);
  for (const Matrix& a : pass.acts)
    if (!a.allFinite()) throw DivergenceError("distill mlp: non-finite activations");
  return MlpPass::backward(mlp, pass, labels, teacher, loss);
}

Matrix to_matrix(const TabularDataset& ds) {
  Matrix m(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.dim()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t f = 0; f < ds.dim(); ++f)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = ds.rows[i].values[f];
  return m;
}

Matrix teacher_targets(const GbdtModel& teacher, const TabularDataset& ds, double temperature) {
  const bool regression = ds.kind == TaskKind::kRegression;
  Matrix t(static_cast<Eigen::Index>(ds.size()), regression ? 1 : 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double y = teacher.predict(ds.rows[i]);
    const auto r = static_cast<Eigen::Index>(i);
    if (regression) {
      t(r, 0) = y;
    } else {
      const SoftTarget s = soften(y, temperature);
      t(r, 0) = s.probs[0];
      t(r, 1) = s.probs[1];
    }
  }
  return t;
}

DistillMlp train_distill_mlp(const TabularDataset& ds, const GbdtModel& teacher, const DistillConfig& cfg,
                             std::vector<double>* epoch_losses) {
  cfg.validate();
  if (ds.size() == 0) throw std::invalid_argument("train_distill_mlp: empty dataset");
  if (teacher.n_features != ds.dim())
    throw std::invalid_argument("train_distill_mlp: teacher trained on a different feature space");
  const double temperature = ds.kind == TaskKind::kRegression ? 1.0 : cfg.temperature;
  const Matrix x = to_matrix(ds);
  const Matrix targets = teacher_targets(teacher, ds, temperature);

  std::mt19937_64 rng(cfg.seed);
  DistillMlp mlp(ds.kind, ds.dim(), cfg.hidden, cfg.embedding_dim, temperature, rng);
  Vector mean = x.colwise().mean().transpose();
  Vector scale(mean.size());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    const double var = (x.col(f).array() - mean(f)).square().mean();
    scale(f) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  mlp.set_normalization(mean, scale);

  Adam adam({cfg.learning_rate});
  const LossSpec spec{cfg.alpha, temperature};
  const auto params = mlp.parameters();
  if (ds.kind == TaskKind::kRegression) {
    // Start both heads at their target means; L1 steps are too small to travel there.
    double label_mean = 0.0;
    for (double y : ds.labels) label_mean += y;
    label_mean /= static_cast<double>(ds.size());
    params[params.size() - 3]->value.setConstant(label_mean);
    params.back()->value.setConstant(targets.mean());
  }
  const std::size_t n = ds.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix xb, tb;
  std::vector<double> yb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      xb.resize(static_cast<Eigen::Index>(m), x.cols());
      tb.resize(static_cast<Eigen::Index>(m), targets.cols());
      yb.resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        const auto src = static_cast<Eigen::Index>(order[start + k]);
        xb.row(static_cast<Eigen::Index>(k)) = x.row(src);
        tb.row(static_cast<Eigen::Index>(k)) = targets.row(src);
        yb[k] = ds.labels[order[start + k]];
      }
      const LossBreakdown loss = mlp_forward_backward(mlp, xb, yb, tb, spec, cfg.dropout, &rng);
      if (!std::isfinite(loss.total))
        throw DivergenceError("distillation diverged at epoch " + std::to_string(epoch) + ", batch starting " +
                              std::to_string(start) + " (hard " + std::to_string(loss.hard) + ", soft " +
                              std::to_string(loss.soft) + ")");
      adam.step(params);
      epoch_loss += loss.total;
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss);
  }
  return mlp;
}

std::string DistillMlp::to_json() const {
  nlohmann::json trunk = nlohmann::json::array();
  for (std::size_t l = 0; l < trunk_w_.size(); ++l)
    trunk.push_back({{"weight", matrix_to_json(trunk_w_[l].value)}, {"bias", matrix_to_json(trunk_b_[l].value)}});
  nlohmann::json doc = {
      {"format", "lightrdl-distill-mlp"},
      {"task_kind", std::string(to_string(kind_))},
      {"temperature", temperature_},
      {"input_mean", std::vector<double>(input_mean_.data(), input_mean_.data() + input_mean_.size())},
      {"input_scale", std::vector<double>(input_scale_.data(), input_scale_.data() + input_scale_.size())},
      {"trunk", trunk},
      {"hard_head", {{"weight", matrix_to_json(hard_w_.value)}, {"bias", matrix_to_json(hard_b_.value)}}},
      {"soft_head", {{"weight", matrix_to_json(soft_w_.value)}, {"bias", matrix_to_json(soft_b_.value)}}}};
  return doc.dump(1) + "\n";
}

DistillMlp DistillMlp::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("format", "") != "lightrdl-distill-mlp") throw std::invalid_argument("not a distill mlp document");
  DistillMlp mlp;
  mlp.kind_ = parse_task_kind(doc.at("task_kind").get<std::string>());
  mlp.temperature_ = doc.at("temperature").get<double>();
  const auto mean = doc.at("input_mean").get<std::vector<double>>();
  const auto scale = doc.at("input_scale").get<std::vector<double>>();
  mlp.input_mean_ = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  mlp.input_scale_ = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  auto load = [](Param& p, const nlohmann::json& j) {
    Matrix m = matrix_from_json(j);
    p.resize(m.rows(), m.cols());
    p.value = std::move(m);
  };
  for (const auto& layer : doc.at("trunk")) {
    mlp.trunk_w_.emplace_back();
    mlp.trunk_b_.emplace_back();
    load(mlp.trunk_w_.back(), layer.at("weight"));
    load(mlp.trunk_b_.back(), layer.at("bias"));
  }
  if (mlp.trunk_w_.empty()) throw std::invalid_argument("distill mlp without trunk layers");
  load(mlp.hard_w_, doc.at("hard_head").at("weight"));
  load(mlp.hard_b_, doc.at("hard_head").at("bias"));
  load(mlp.soft_w_, doc.at("soft_head").at("weight"));
  load(mlp.soft_b_, doc.at("soft_head").at("bias"));
  return mlp;
}

}  // namespace lightrdl
