#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lightrdl/dense.hpp"
#include "lightrdl/distill.hpp"
#include "lightrdl/features.hpp"
#include "lightrdl/gbdt.hpp"
#include "lightrdl/graph_builder.hpp"

namespace lightrdl {

/// How target-table nodes are initialised: distilled embedding ∥ x, x alone, or the
/// teacher's prediction ∥ x. Other tables always start from x.
enum class NodeInitMode { kDistilled, kRaw, kWithPred };

std::string_view to_string(NodeInitMode mode);
NodeInitMode parse_node_init_mode(std::string_view text);

/// Initial node states, one row-major matrix per table (rows follow the graph's node order).
struct NodeFeatures {
  std::vector<Matrix> tables;

  std::size_t width(TableId t) const { return static_cast<std::size_t>(tables[t].cols()); }
};

/// Columns prepended to target-table rows: embeddings (n x d_e), teacher outputs
/// (n x 1), or nothing for raw mode. Rows follow the graph's target-node order.
/// Embeddings and predictions use features computed over the full history up to t.
Matrix injected_columns(const HeteroGraph& g, TableId target, NodeInitMode mode, const FeatureEngineer& fe,
                        Timestamp t, const DistillMlp* mlp, const GbdtModel* teacher);

/// Same, from feature rows already computed for every target node.
Matrix injected_columns(NodeInitMode mode, const Matrix& target_features, const DistillMlp* mlp,
                        const GbdtModel* teacher);

/// h0 = injected ∥ x on the target table, x elsewhere.
NodeFeatures assemble_h0(const HeteroGraph& g, TableId target, const Matrix& injected);

/// Convenience wrapper: injected_columns followed by assemble_h0.
NodeFeatures init_node_features(const HeteroGraph& g, TableId target, NodeInitMode mode, const FeatureEngineer& fe,
                                Timestamp t, const DistillMlp* mlp = nullptr, const GbdtModel* teacher = nullptr);

/// A message channel in the schema: fk matches between `src` (referenced) and `dst`
/// (referencing), read forward (src -> dst) or in reverse.
struct RelationKey {
  TableId src = 0;
  TableId dst = 0;
  bool reverse = false;

  auto operator<=>(const RelationKey&) const = default;
  TableId from() const { return reverse ? dst : src; }
  TableId to() const { return reverse ? src : dst; }
};

/// Both directions of every fk declared in the schema.
std::vector<RelationKey> schema_relations(const RelationalDatabase& db);

struct SageConfig {
  int hidden = 64;
  int depth = 2;
  double dropout = 0.0;
  double learning_rate = 0.01;
  int epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

class HeteroSageModel {
 public:
  HeteroSageModel() = default;
  HeteroSageModel(TaskKind kind, std::vector<std::size_t> input_widths, std::vector<RelationKey> relations,
                  TableId target, const SageConfig& cfg, std::mt19937_64& rng);

  TaskKind kind() const { return kind_; }
  TableId target() const { return target_; }
  int hidden() const { return hidden_; }
  int depth() const { return static_cast<int>(layers_.size()); }
  std::size_t input_width(TableId t) const { return static_cast<std::size_t>(input_w_[t].value.cols()); }
  std::span<const RelationKey> relations() const { return relations_; }

  /// Per-table z-score of h0 columns, estimated from the given samples.
  void fit_normalization(std::span<const NodeFeatures* const> samples);

  /// Logits (classification) or values (regression), one per target node of `g`.
  Vector forward(const HeteroGraph& g, const NodeFeatures& h0) const;

  /// Output for the listed target entities. Throws std::out_of_range for an entity
  /// that is not in the graph.
  std::vector<double> predict(const HeteroGraph& g, const NodeFeatures& h0,
                              std::span<const PrimaryKey> targets) const;

  std::vector<Param*> parameters();

  std::string to_json() const;
  static HeteroSageModel from_json(std::string_view text);

 private:
  friend struct SagePass;

  struct Layer {
    std::vector<Param> self_w;  // per table, hidden x hidden
    std::vector<Param> self_b;  // per table, 1 x hidden
    std::vector<Param> rel_w;   // per relation, hidden x hidden
  };

  TaskKind kind_ = TaskKind::kBinaryClassification;
  TableId target_ = 0;
  int hidden_ = 0;
  double dropout_ = 0.0;
  std::vector<RelationKey> relations_;
  std::vector<Vector> input_mean_, input_scale_;
  std::vector<Param> input_w_;  // per table, hidden x width
  std::vector<Param> input_b_;  // per table, 1 x hidden
  std::vector<Layer> layers_;
  Param head_w_, head_b_;  // 1 x hidden, 1 x 1
};

/// One snapshot (or cumulative graph) with its initial states and labels.
struct GraphSample {
  const HeteroGraph* graph = nullptr;
  NodeFeatures h0;
  Timestamp seed_time = 0;
  /// (target-table node offset, label).
  std::vector<std::pair<std::uint32_t, double>> labels;
};

/// Labels of `task` at the sample's seed time mapped onto the graph's target nodes.
/// Labeled entities missing from the graph raise std::out_of_range.
std::vector<std::pair<std::uint32_t, double>> graph_labels(const HeteroGraph& g, const TaskSpec& task,
                                                           Timestamp seed_time);

/// Mean BCE-with-logits (classification) or mean absolute error (regression) over the
/// labeled nodes; gradients overwrite the parameters' `grad` fields. Dropout is
/// applied to hidden states when `rng` is given.
double gnn_loss_and_grad(HeteroSageModel& model, const GraphSample& sample, std::mt19937_64* rng = nullptr);

/// Loss only, without dropout.
double gnn_loss(const HeteroSageModel& model, const GraphSample& sample);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double seconds = 0.0;
};

struct TrainRun {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double test_metric = 0.0;

  /// epoch,train_loss,val_metric,seconds
  std::string to_csv() const;
  double mean_epoch_seconds() const;
};

/// Validation metric: ROC-AUC (higher is better) or MAE (lower is better). Falls back
/// to the negated loss when a classification sample has a single class.
double validation_metric(const HeteroSageModel& model, std::span<const GraphSample> samples);
bool metric_improves(TaskKind kind, double candidate, double best);

/// Adam over whole graphs: one step per training sample, samples shuffled per epoch.
/// Parameters of the best validation epoch are restored at the end.
TrainRun train_gnn(HeteroSageModel& model, std::span<const GraphSample> train, std::span<const GraphSample> val,
                   const SageConfig& cfg);

struct TimedPredictions {
  std::vector<double> predictions;
  double seconds = 0.0;
};

/// Median wall time (after one discarded warm-up) of h0 assembly from precomputed
/// injected columns plus the forward pass. Graph construction is not timed.
TimedPredictions infer_timed(const HeteroSageModel& model, const HeteroGraph& g, const Matrix& injected,
                             std::span<const PrimaryKey> targets, int repeats);

}  // namespace lightrdl
