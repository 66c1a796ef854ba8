#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lightrdl/distill.hpp"
#include "lightrdl/features.hpp"
#include "lightrdl/gbdt.hpp"
#include "lightrdl/graph_builder.hpp"
#include "lightrdl/metrics.hpp"
#include "lightrdl/rgnn.hpp"
#include "lightrdl/synthgen.hpp"

namespace lightrdl {

/// lightrdl: snapshot graph + distilled embeddings. rdl-baseline: cumulative graph,
/// raw features. no-time: snapshot graph, raw features. with-pred: snapshot graph,
/// teacher prediction injected instead of the embedding.
enum class PipelineMode { kLightRdl, kRdlBaseline, kNoTime, kWithPred };

std::string_view to_string(PipelineMode mode);
PipelineMode parse_pipeline_mode(std::string_view text);
NodeInitMode node_init_mode(PipelineMode mode);
bool uses_snapshot(PipelineMode mode);
bool needs_teacher(PipelineMode mode);

/// Invalid configuration or inputs (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage failed (CLI exit code 2). The message starts with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct SplitConfig {
  std::size_t train = 8;
  std::size_t val = 2;
  std::size_t test = 2;
};

struct PipelineConfig {
  // Either a data directory (schema.json, table CSVs, tasks.json) or a synthetic spec.
  std::filesystem::path data_dir;
  std::filesystem::path schema;  // defaults to data_dir / "schema.json"
  std::optional<SynthConfig> synth;
  std::string task = "user-churn";
  std::filesystem::path output = "lightrdl-out";

  PipelineMode mode = PipelineMode::kLightRdl;
  Timestamp window = 0;  // 0 means the task horizon
  SplitConfig split;
  FeatureConfig features;
  GbdtConfig gbdt;
  DistillConfig distill;
  SageConfig gnn;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int bench_repeats = 3;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Relative paths are resolved against `base_dir`. Unknown keys raise ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

PipelineConfig load_pipeline_config(const std::filesystem::path& file);

/// Database, task and chronological split for one configuration.
struct TaskData {
  RelationalDatabase db;
  TaskSpec task;
  TimeSplit split;
  Timestamp window = 1;
};

TaskData prepare_task_data(const PipelineConfig& cfg);

/// Graph for one seed time under a mode: the snapshot over (t - window, t] with every
/// labeled entity included, or the cumulative graph up to t.
HeteroGraph build_mode_graph(const TaskData& data, PipelineMode mode, Timestamp t);

struct StageTimes {
  double gbdt_train = 0.0;
  double distill_train = 0.0;
  double graph_build = 0.0;  // all graphs of the run; not part of training time
  double gnn_train = 0.0;
  double epoch_mean = 0.0;

  double training_total() const { return gbdt_train + distill_train + gnn_train; }
};

struct Prediction {
  Timestamp seed_time = 0;
  PrimaryKey entity = 0;
  double score = 0.0;  // logit for classification, value for regression
  double label = 0.0;
};

struct TrainedPipeline {
  PipelineMode mode = PipelineMode::kLightRdl;
  std::uint64_t seed = 0;
  std::optional<GbdtModel> teacher;
  std::optional<DistillMlp> student;
  HeteroSageModel gnn;
  TrainRun run;
  std::vector<Prediction> test_predictions;
  MetricReport test_metric;
  StageTimes times;
};

/// Teacher trained on the pooled training seed times.
GbdtModel train_teacher(const TaskData& data, const FeatureEngineer& fe, const PipelineConfig& cfg,
                        std::uint64_t seed);
DistillMlp train_student(const TaskData& data, const FeatureEngineer& fe, const GbdtModel& teacher,
                         const PipelineConfig& cfg, std::uint64_t seed);

/// Initial states for a graph at seed time t under the pipeline's mode.
NodeFeatures pipeline_h0(const HeteroGraph& g, const TaskData& data, const FeatureEngineer& fe, PipelineMode mode,
                         Timestamp t, const DistillMlp* student, const GbdtModel* teacher);

/// All stages for one seed. Throws StageError tagged with the failing stage.
TrainedPipeline train_pipeline(const TaskData& data, const PipelineConfig& cfg, std::uint64_t seed);

/// Predictions of a trained pipeline on the given seed times.
std::vector<Prediction> predict_pipeline(const TaskData& data, const PipelineConfig& cfg, const TrainedPipeline& tp,
                                         const std::vector<Timestamp>& seed_times);

MetricReport score_predictions(TaskKind kind, const std::vector<Prediction>& preds);

std::string predictions_to_csv(const std::vector<Prediction>& preds);
std::vector<Prediction> predictions_from_csv(std::string_view text);

struct SeedMetric {
  std::uint64_t seed = 0;
  MetricReport report;
};

struct EvalSummary {
  std::string metric;
  std::vector<SeedMetric> per_seed;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed

  nlohmann::json to_json() const;
};

EvalSummary summarize(const std::vector<SeedMetric>& per_seed);

/// Trains every seed and writes the bundle: config.json, and per seed gbdt.json,
/// distill.json, gnn.json, train_run.csv, predictions.csv, metrics.json; plus
/// summary.json. Returns the bundle directory.
std::filesystem::path run_train(const PipelineConfig& cfg);

/// Reloads a bundle, rebuilds the test graphs, recomputes predictions and checks
/// them against the persisted ones. Writes eval.json into the bundle.
EvalSummary run_eval(const std::filesystem::path& bundle);

struct BenchEntry {
  PipelineMode mode = PipelineMode::kLightRdl;
  double build_seconds = 0.0;      // one test graph, median
  double train_seconds = 0.0;      // GBDT + distillation + GNN
  double epoch_seconds = 0.0;      // mean GNN epoch
  double embed_seconds = 0.0;      // injected columns from precomputed features, median
  double gnn_seconds = 0.0;        // h0 assembly + forward, median
  double inference_seconds = 0.0;  // embed + gnn
  std::size_t graph_nodes = 0;
  std::size_t graph_edges = 0;
  MetricReport metric;
};

struct BenchReport {
  std::vector<BenchEntry> entries;
  PipelineMode baseline = PipelineMode::kRdlBaseline;
  int repeats = 3;

  const BenchEntry& entry(PipelineMode mode) const;
  /// baseline / candidate for inference, build, training and per-epoch time.
  nlohmann::json speedups(PipelineMode candidate) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Trains each mode with the first configured seed and times build, training and
/// inference on the last test seed time. The baseline is rdl-baseline when listed,
/// otherwise the last mode.
BenchReport run_bench(const PipelineConfig& cfg, const std::vector<PipelineMode>& modes);

struct AblationRow {
  PipelineMode mode = PipelineMode::kLightRdl;
  EvalSummary summary;
};

/// Test metrics over all configured seeds for each mode.
std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, const std::vector<PipelineMode>& modes);

/// Writes the generator output (schema.json, CSVs, tasks.json, synth.json) into `out`.
/// Refuses to write into a non-empty directory unless `force` is set.
void run_synth(const SynthConfig& cfg, const std::filesystem::path& out, bool force);

}  // namespace lightrdl
