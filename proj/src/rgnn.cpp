#include "lightrdl/rgnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "csv.hpp"
#include "lightrdl/metrics.hpp"
#include "lightrdl/timing.hpp"

namespace lightrdl {

std::string_view to_string(NodeInitMode mode) {
  switch (mode) {
    case NodeInitMode::kDistilled: return "distilled";
    case NodeInitMode::kRaw: return "raw";
    case NodeInitMode::kWithPred: return "with-pred";
  }
  return "?";
}

NodeInitMode parse_node_init_mode(std::string_view text) {
  if (text == "distilled") return NodeInitMode::kDistilled;
  if (text == "raw") return NodeInitMode::kRaw;
  if (text == "with-pred" || text == "with_pred") return NodeInitMode::kWithPred;
  throw std::invalid_argument("unknown node init mode '" + std::string(text) + "'");
}

Matrix injected_columns(NodeInitMode mode, const Matrix& target_features, const DistillMlp* mlp,
                        const GbdtModel* teacher) {
  switch (mode) {
    case NodeInitMode::kRaw:
      return Matrix(target_features.rows(), 0);
    case NodeInitMode::kDistilled:
      if (!mlp) throw std::invalid_argument("distilled node init needs a distilled MLP");
      return mlp->embed(target_features);
    case NodeInitMode::kWithPred: {
      if (!teacher) throw std::invalid_argument("with-pred node init needs a teacher model");
      Matrix out(target_features.rows(), 1);
      for (Eigen::Index i = 0; i < target_features.rows(); ++i)
        out(i, 0) = teacher->predict(std::span<const double>(target_features.row(i).data(),
                                                             static_cast<std::size_t>(target_features.cols())));
      return out;
    }
  }
  throw std::logic_error("unhandled node init mode");
}

Matrix injected_columns(const HeteroGraph& g, TableId target, NodeInitMode mode, const FeatureEngineer& fe,
                        Timestamp t, const DistillMlp* mlp, const GbdtModel* teacher) {
  const auto [first, last] = g.nodes_of(target);
  Matrix rows(static_cast<Eigen::Index>(last - first), static_cast<Eigen::Index>(fe.dim()));
  if (mode != NodeInitMode::kRaw) {
    for (NodeId v = first; v < last; ++v) {
      const FeatureVector f = fe.compute(g.pk(v), t);
      for (std::size_t c = 0; c < f.values.size(); ++c)
        rows(static_cast<Eigen::Index>(v - first), static_cast<Eigen::Index>(c)) = f.values[c];
    }
  }
  return injected_columns(mode, rows, mlp, teacher);
}

NodeFeatures assemble_h0(const HeteroGraph& g, TableId target, const Matrix& injected) {
  NodeFeatures h0;
  h0.tables.resize(g.table_count());
  for (TableId t = 0; t < g.table_count(); ++t) {
    const auto n = static_cast<Eigen::Index>(g.count_of(t));
    const auto d = static_cast<Eigen::Index>(g.feature_dim(t));
    const auto x = Eigen::Map<const Matrix>(g.table_features(t).data(), n, d);
    if (t != target) {
      h0.tables[t] = x;
      continue;
    }
    if (injected.rows() != n)
      throw std::invalid_argument("injected columns cover " + std::to_string(injected.rows()) + " rows, graph has " +
                                  std::to_string(n) + " target nodes");
    Matrix& h = h0.tables[t];
    h.resize(n, injected.cols() + d);
    h << injected, x;
  }
  return h0;
}

NodeFeatures init_node_features(const HeteroGraph& g, TableId target, NodeInitMode mode, const FeatureEngineer& fe,
                                Timestamp t, const DistillMlp* mlp, const GbdtModel* teacher) {
  return assemble_h0(g, target, injected_columns(g, target, mode, fe, t, mlp, teacher));
}

std::vector<RelationKey> schema_relations(const RelationalDatabase& db) {
  std::vector<RelationKey> out;
  for (TableId dst = 0; dst < db.table_count(); ++dst)
    for (TableId src : db.table(dst).def.fk_targets()) {
      out.push_back({src, dst, false});
      out.push_back({src, dst, true});
    }
  std::sort(out.begin(), out.end());
  return out;
}

void SageConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("gnn config: " + what); };
  if (hidden < 1) fail("hidden must be >= 1");
  if (depth < 1) fail("depth must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (epochs < 1) fail("epochs must be >= 1");
}

HeteroSageModel::HeteroSageModel(TaskKind kind, std::vector<std::size_t> input_widths,
                                 std::vector<RelationKey> relations, TableId target, const SageConfig& cfg,
                                 std::mt19937_64& rng)
    : kind_(kind), target_(target), hidden_(cfg.hidden), dropout_(cfg.dropout), relations_(std::move(relations)) {
  cfg.validate();
  const std::size_t n_tables = input_widths.size();
  if (target >= n_tables) throw std::invalid_argument("target table out of range");
  for (const RelationKey& r : relations_)
    if (r.src >= n_tables || r.dst >= n_tables) throw std::invalid_argument("relation refers to an unknown table");
  const Eigen::Index h = hidden_;
  for (std::size_t w : input_widths) {
    input_w_.emplace_back(h, static_cast<Eigen::Index>(w));
    glorot_init(input_w_.back(), rng);
    input_b_.emplace_back(1, h);
    input_mean_.push_back(Vector::Zero(static_cast<Eigen::Index>(w)));
    input_scale_.push_back(Vector::Ones(static_cast<Eigen::Index>(w)));
  }
  layers_.resize(static_cast<std::size_t>(cfg.depth));
  for (Layer& layer : layers_) {
    for (std::size_t t = 0; t < n_tables; ++t) {
      layer.self_w.emplace_back(h, h);
      glorot_init(layer.self_w.back(), rng);
      layer.self_b.emplace_back(1, h);
    }
    for (std::size_t r = 0; r < relations_.size(); ++r) {
      layer.rel_w.emplace_back(h, h);
      glorot_init(layer.rel_w.back(), rng);
    }
  }
  head_w_.resize(1, h);
  glorot_init(head_w_, rng);
  head_b_.resize(1, 1);
}

void HeteroSageModel::fit_normalization(std::span<const NodeFeatures* const> samples) {
  for (std::size_t t = 0; t < input_w_.size(); ++t) {
    const Eigen::Index w = input_w_[t].value.cols();
    Vector sum = Vector::Zero(w), sq = Vector::Zero(w);
    double n = 0.0;
    for (const NodeFeatures* s : samples) {
      const Matrix& x = s->tables.at(t);
      if (x.cols() != w) throw std::invalid_argument("h0 width mismatch for table " + std::to_string(t));
      sum += x.colwise().sum().transpose();
      n += static_cast<double>(x.rows());
    }
    Vector mean = n > 0 ? Vector(sum / n) : Vector::Zero(w);
    for (const NodeFeatures* s : samples) {
      const Matrix& x = s->tables[t];
      sq += (x.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    Vector scale(w);
    for (Eigen::Index c = 0; c < w; ++c) {
      const double var = n > 0 ? sq(c) / n : 0.0;
      scale(c) = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    input_mean_[t] = std::move(mean);
    input_scale_[t] = std::move(scale);
  }
}

std::vector<Param*> HeteroSageModel::parameters() {
  std::vector<Param*> out;
  for (std::size_t t = 0; t < input_w_.size(); ++t) {
    out.push_back(&input_w_[t]);
    out.push_back(&input_b_[t]);
  }
  for (Layer& layer : layers_) {
    for (std::size_t t = 0; t < layer.self_w.size(); ++t) {
      out.push_back(&layer.self_w[t]);
      out.push_back(&layer.self_b[t]);
    }
    for (Param& w : layer.rel_w) out.push_back(&w);
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

/// Forward pass over a whole graph, keeping what the reverse pass needs.
struct SagePass {
  struct Channel {
    std::size_t weight = 0;  // index into the model's relations
    const Relation* rel = nullptr;
  };

  std::vector<Channel> channels;
  std::vector<Matrix> x;                               // normalised h0 per table
  std::vector<std::vector<Matrix>> h;                  // h[l][table], l = 0 is the input projection
  std::vector<std::vector<Matrix>> msgs;               // msgs[l][channel]
  std::vector<std::vector<Matrix>> masks;              // dropout masks per hidden layer and table
  Vector out;

  static std::vector<Channel> bind(const HeteroSageModel& m, const HeteroGraph& g) {
    std::vector<Channel> out;
    for (const Relation& r : g.relations()) {
      const RelationKey key{r.type.src, r.type.dst, r.reverse};
      auto it = std::lower_bound(m.relations_.begin(), m.relations_.end(), key);
      if (it == m.relations_.end() || *it != key)
        throw std::invalid_argument("graph relation " + std::to_string(key.src) + "->" + std::to_string(key.dst) +
                                    " is unknown to the model");
      out.push_back({static_cast<std::size_t>(it - m.relations_.begin()), &r});
    }
    return out;
  }

  static Matrix scatter(const Relation& r, const Matrix& from, Eigen::Index n_to) {
    Matrix agg = Matrix::Zero(n_to, from.cols());
    for (const auto& [recv, send] : r.pairs) agg.row(recv) += from.row(send);
    return agg;
  }

  static SagePass run(const HeteroSageModel& m, const HeteroGraph& g, const NodeFeatures& h0, std::mt19937_64* rng) {
    const std::size_t n_tables = m.input_w_.size();
    if (g.table_count() != n_tables || h0.tables.size() != n_tables)
      throw std::invalid_argument("graph has " + std::to_string(g.table_count()) + " tables, model expects " +
                                  std::to_string(n_tables));
    SagePass p;
    p.channels = bind(m, g);
    p.h.resize(m.layers_.size() + 1);
    for (TableId t = 0; t < n_tables; ++t) {
      const Matrix& raw = h0.tables[t];
      if (raw.cols() != m.input_w_[t].value.cols())
        throw std::invalid_argument("h0 width " + std::to_string(raw.cols()) + " for table " + std::to_string(t) +
                                    ", model expects " + std::to_string(m.input_w_[t].value.cols()));
      if (raw.rows() != static_cast<Eigen::Index>(g.count_of(t)))
        throw std::invalid_argument("h0 rows do not match the graph");
      Matrix xn = raw;
      xn.rowwise() -= m.input_mean_[t].transpose();
      xn.array().rowwise() /= m.input_scale_[t].transpose().array();
      Matrix h = xn * m.input_w_[t].value.transpose();
      h.rowwise() += m.input_b_[t].value.row(0);
      p.x.push_back(std::move(xn));
      p.h[0].push_back(std::move(h));
    }
    const bool train_dropout = rng && m.dropout_ > 0.0;
    for (std::size_t l = 0; l < m.layers_.size(); ++l) {
      const auto& layer = m.layers_[l];
      const bool last = l + 1 == m.layers_.size();
      std::vector<Matrix> z(n_tables);
      for (TableId t = 0; t < n_tables; ++t) {
        z[t] = p.h[l][t] * layer.self_w[t].value.transpose();
        z[t].rowwise() += layer.self_b[t].value.row(0);
      }
      p.msgs.emplace_back();
      for (const Channel& c : p.channels) {
        Matrix agg = scatter(*c.rel, p.h[l][c.rel->from], z[c.rel->to].rows());
        z[c.rel->to].noalias() += agg * layer.rel_w[c.weight].value.transpose();
        p.msgs[l].push_back(std::move(agg));
      }
      if (!last) {
        p.masks.emplace_back();
        for (TableId t = 0; t < n_tables; ++t) {
          relu_inplace(z[t]);
          if (train_dropout) {
            p.masks[l].push_back(dropout_mask(z[t].rows(), z[t].cols(), m.dropout_, *rng));
            z[t].array() *= p.masks[l].back().array();
          }
        }
      }
      p.h[l + 1] = std::move(z);
    }
    const Matrix& top = p.h.back()[m.target_];
    p.out = (top * m.head_w_.value.transpose()).col(0).array() + m.head_b_.value(0, 0);
    return p;
  }

  void backward(HeteroSageModel& m, const Vector& d_out) const {
    const std::size_t n_tables = m.input_w_.size();
    const std::size_t depth = m.layers_.size();
    const Matrix& top = h.back()[m.target_];
    m.head_w_.grad = d_out.transpose() * top;
    m.head_b_.grad(0, 0) = d_out.sum();

    std::vector<Matrix> d_h(n_tables);
    for (TableId t = 0; t < n_tables; ++t) d_h[t] = Matrix::Zero(h.back()[t].rows(), h.back()[t].cols());
    d_h[m.target_] = d_out * m.head_w_.value;

    for (std::size_t l = depth; l-- > 0;) {
      auto& layer = m.layers_[l];
      const bool last = l + 1 == depth;
      std::vector<Matrix>& d_z = d_h;
      if (!last) {
        for (TableId t = 0; t < n_tables; ++t) {
          if (!masks[l].empty()) d_z[t].array() *= masks[l][t].array();
          const Matrix& a = h[l + 1][t];
          for (Eigen::Index k = 0; k < a.size(); ++k)
            if (!(a.data()[k] > 0.0)) d_z[t].data()[k] = 0.0;
        }
      }
      std::vector<Matrix> d_prev(n_tables);
      for (TableId t = 0; t < n_tables; ++t) {
        layer.self_w[t].grad = d_z[t].transpose() * h[l][t];
        layer.self_b[t].grad = d_z[t].colwise().sum();
        d_prev[t] = d_z[t] * layer.self_w[t].value;
      }
      for (Param& w : layer.rel_w) w.grad.setZero();
      for (std::size_t c = 0; c < channels.size(); ++c) {
        const Relation& r = *channels[c].rel;
        Param& w = layer.rel_w[channels[c].weight];
        w.grad.noalias() += d_z[r.to].transpose() * msgs[l][c];
        const Matrix d_msg = d_z[r.to] * w.value;
        for (const auto& [recv, send] : r.pairs) d_prev[r.from].row(send) += d_msg.row(recv);
      }
      d_h = std::move(d_prev);
    }
    for (TableId t = 0; t < n_tables; ++t) {
      m.input_w_[t].grad = d_h[t].transpose() * x[t];
      m.input_b_[t].grad = d_h[t].colwise().sum();
    }
  }
};

Vector HeteroSageModel::forward(const HeteroGraph& g, const NodeFeatures& h0) const {
  return SagePass::run(*this, g, h0, nullptr).out;
}

std::vector<double> HeteroSageModel::predict(const HeteroGraph& g, const NodeFeatures& h0,
                                             std::span<const PrimaryKey> targets) const {
  const Vector out = forward(g, h0);
  const NodeId first = g.nodes_of(target_).first;
  std::vector<double> preds;
  preds.reserve(targets.size());
  for (PrimaryKey pk : targets) {
    auto v = g.node_id({target_, pk});
    if (!v) throw std::out_of_range("target entity " + std::to_string(pk) + " is not in the graph");
    preds.push_back(out(static_cast<Eigen::Index>(*v - first)));
  }
  return preds;
}

std::vector<std::pair<std::uint32_t, double>> graph_labels(const HeteroGraph& g, const TaskSpec& task,
                                                           Timestamp seed_time) {
  std::vector<std::pair<std::uint32_t, double>> out;
  const NodeId first = g.nodes_of(task.target_table).first;
  for (const auto& [pk, label] : task.labels_at(seed_time)) {
    auto v = g.node_id({task.target_table, pk});
    if (!v)
      throw std::out_of_range("labeled entity " + std::to_string(pk) + " at seed time " +
                              std::to_string(seed_time) + " is not in the graph");
    out.emplace_back(*v - first, label);
  }
  return out;
}

namespace {

double bce_with_logits(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double loss_with_grad(TaskKind kind, const Vector& out, std::span<const std::pair<std::uint32_t, double>> labels,
                      Vector* d_out) {
  if (labels.empty()) throw std::invalid_argument("graph sample without labels");
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  double loss = 0.0;
  if (d_out) *d_out = Vector::Zero(out.size());
  for (const auto& [i, y] : labels) {
    const double z = out(i);
    if (kind == TaskKind::kRegression) {
      loss += std::abs(z - y) * inv_n;
      if (d_out) (*d_out)(i) += inv_n * static_cast<double>((z > y) - (z < y));
    } else {
      loss += bce_with_logits(z, y) * inv_n;
      if (d_out) (*d_out)(i) += inv_n * (logistic(z) - y);
    }
  }
  return loss;
}

}  // namespace

double gnn_loss_and_grad(HeteroSageModel& model, const GraphSample& sample, std::mt19937_64* rng) {
  const SagePass pass = SagePass::run(model, *sample.graph, sample.h0, rng);
  Vector d_out;
  const double loss = loss_with_grad(model.kind(), pass.out, sample.labels, &d_out);
  pass.backward(model, d_out);
  return loss;
}

double gnn_loss(const HeteroSageModel& model, const GraphSample& sample) {
  return loss_with_grad(model.kind(), model.forward(*sample.graph, sample.h0), sample.labels, nullptr);
}

std::string TrainRun::to_csv() const {
  std::string out = "epoch,train_loss,val_metric,seconds\n";
  for (const EpochRecord& e : epochs)
    out += std::to_string(e.epoch) + ',' + csv::format_real(e.train_loss) + ',' + csv::format_real(e.val_metric) +
           ',' + csv::format_real(e.seconds) + '\n';
  return out;
}

double TrainRun::mean_epoch_seconds() const {
  if (epochs.empty()) return 0.0;
  double s = 0.0;
  for (const EpochRecord& e : epochs) s += e.seconds;
  return s / static_cast<double>(epochs.size());
}

double validation_metric(const HeteroSageModel& model, std::span<const GraphSample> samples) {
  std::vector<double> preds, labels;
  double loss = 0.0;
  for (const GraphSample& s : samples) {
    const Vector out = model.forward(*s.graph, s.h0);
    loss += loss_with_grad(model.kind(), out, s.labels, nullptr);
    for (const auto& [i, y] : s.labels) {
      preds.push_back(out(i));
      labels.push_back(y);
    }
  }
  if (preds.empty()) throw std::invalid_argument("validation set without labels");
  if (model.kind() == TaskKind::kRegression) return mae(preds, labels);
  const bool both = std::find(labels.begin(), labels.end(), 0.0) != labels.end() &&
                    std::find(labels.begin(), labels.end(), 1.0) != labels.end();
  return both ? rocauc(preds, labels) : -loss / static_cast<double>(samples.size());
}

bool metric_improves(TaskKind kind, double candidate, double best) {
  return kind == TaskKind::kRegression ? candidate < best : candidate > best;
}

TrainRun train_gnn(HeteroSageModel& model, std::span<const GraphSample> train, std::span<const GraphSample> val,
                   const SageConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_gnn needs at least one training graph");
  std::mt19937_64 rng(cfg.seed);
  Adam adam({cfg.learning_rate});
  const auto params = model.parameters();
  TrainRun run;
  run.seed = cfg.seed;
  std::vector<Matrix> best;
  double best_metric = 0.0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Stopwatch clock;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t i : order) {
      const double loss = gnn_loss_and_grad(model, train[i], cfg.dropout > 0.0 ? &rng : nullptr);
      if (!std::isfinite(loss))
        throw DivergenceError("gnn training diverged at epoch " + std::to_string(epoch) + " on the graph at seed time " +
                              std::to_string(train[i].seed_time));
      adam.step(params);
      total += loss;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.seconds = clock.seconds();
    rec.train_loss = total / static_cast<double>(train.size());
    if (!val.empty())
      rec.val_metric = validation_metric(model, val);
    else
      rec.val_metric = model.kind() == TaskKind::kRegression ? rec.train_loss : -rec.train_loss;
    run.epochs.push_back(rec);
    if (best.empty() || metric_improves(model.kind(), rec.val_metric, best_metric)) {
      best_metric = rec.val_metric;
      run.best_epoch = epoch;
      best.clear();
      for (const Param* p : params) best.push_back(p->value);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return run;
}

TimedPredictions infer_timed(const HeteroSageModel& model, const HeteroGraph& g, const Matrix& injected,
                             std::span<const PrimaryKey> targets, int repeats) {
  if (repeats < 3) throw std::invalid_argument("infer_timed needs at least 3 repeats");
  TimedPredictions out;
  out.seconds = time_median(repeats, [&] {
    const NodeFeatures h0 = assemble_h0(g, model.target(), injected);
    out.predictions = model.predict(g, h0, targets);
  });
  return out;
}

namespace {

nlohmann::json param_json(const Param& p) { return matrix_to_json(p.value); }

void load_param(Param& p, const nlohmann::json& j) {
  Matrix m = matrix_from_json(j);
  p.resize(m.rows(), m.cols());
  p.value = std::move(m);
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string HeteroSageModel::to_json() const {
  nlohmann::json rels = nlohmann::json::array();
  for (const RelationKey& r : relations_) rels.push_back({{"src", r.src}, {"dst", r.dst}, {"reverse", r.reverse}});
  nlohmann::json inputs = nlohmann::json::array();
  for (std::size_t t = 0; t < input_w_.size(); ++t)
    inputs.push_back({{"mean", to_std(input_mean_[t])},
                      {"scale", to_std(input_scale_[t])},
                      {"weight", param_json(input_w_[t])},
                      {"bias", param_json(input_b_[t])}});
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : layers_) {
    nlohmann::json self = nlohmann::json::array();
    for (std::size_t t = 0; t < layer.self_w.size(); ++t)
      self.push_back({{"weight", param_json(layer.self_w[t])}, {"bias", param_json(layer.self_b[t])}});
    nlohmann::json rel = nlohmann::json::array();
    for (const Param& w : layer.rel_w) rel.push_back(param_json(w));
    layers.push_back({{"self", self}, {"relations", rel}});
  }
  nlohmann::json doc = {{"format", "lightrdl-hetero-sage"},
                        {"task_kind", std::string(to_string(kind_))},
                        {"target_table", target_},
                        {"hidden", hidden_},
                        {"dropout", dropout_},
                        {"relations", rels},
                        {"inputs", inputs},
                        {"layers", layers},
                        {"head", {{"weight", param_json(head_w_)}, {"bias", param_json(head_b_)}}}};
  return doc.dump(1) + "\n";
}

HeteroSageModel HeteroSageModel::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("format", "") != "lightrdl-hetero-sage") throw std::invalid_argument("not a hetero-sage document");
  HeteroSageModel m;
  m.kind_ = parse_task_kind(doc.at("task_kind").get<std::string>());
  m.target_ = doc.at("target_table").get<TableId>();
  m.hidden_ = doc.at("hidden").get<int>();
  m.dropout_ = doc.at("dropout").get<double>();
  for (const auto& r : doc.at("relations"))
    m.relations_.push_back({r.at("src").get<TableId>(), r.at("dst").get<TableId>(), r.at("reverse").get<bool>()});
  for (const auto& in : doc.at("inputs")) {
    m.input_mean_.push_back(from_std(in.at("mean").get<std::vector<double>>()));
    m.input_scale_.push_back(from_std(in.at("scale").get<std::vector<double>>()));
    load_param(m.input_w_.emplace_back(), in.at("weight"));
    load_param(m.input_b_.emplace_back(), in.at("bias"));
  }
  for (const auto& l : doc.at("layers")) {
    Layer& layer = m.layers_.emplace_back();
    for (const auto& s : l.at("self")) {
      load_param(layer.self_w.emplace_back(), s.at("weight"));
      load_param(layer.self_b.emplace_back(), s.at("bias"));
    }
    for (const auto& w : l.at("relations")) load_param(layer.rel_w.emplace_back(), w);
    if (layer.self_w.size() != m.input_w_.size() || layer.rel_w.size() != m.relations_.size())
      throw std::invalid_argument("hetero-sage layer shape mismatch");
  }
  if (m.layers_.empty()) throw std::invalid_argument("hetero-sage model without layers");
  load_param(m.head_w_, doc.at("head").at("weight"));
  load_param(m.head_b_, doc.at("head").at("bias"));
  return m;
}

}  // namespace lightrdl
