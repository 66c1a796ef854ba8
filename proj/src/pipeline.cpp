#include "lightrdl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "lightrdl/timing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lightrdl {

std::string_view to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kLightRdl: return "lightrdl";
    case PipelineMode::kRdlBaseline: return "rdl-baseline";
    case PipelineMode::kNoTime: return "no-time";
    case PipelineMode::kWithPred: return "with-pred";
  }
  return "?";
}

PipelineMode parse_pipeline_mode(std::string_view text) {
  for (PipelineMode m : {PipelineMode::kLightRdl, PipelineMode::kRdlBaseline, PipelineMode::kNoTime,
                         PipelineMode::kWithPred})
    if (text == to_string(m)) return m;
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected lightrdl, rdl-baseline, no-time or with-pred)");
}

NodeInitMode node_init_mode(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kLightRdl: return NodeInitMode::kDistilled;
    case PipelineMode::kWithPred: return NodeInitMode::kWithPred;
    default: return NodeInitMode::kRaw;
  }
}

bool uses_snapshot(PipelineMode mode) { return mode != PipelineMode::kRdlBaseline; }

bool needs_teacher(PipelineMode mode) { return mode == PipelineMode::kLightRdl || mode == PipelineMode::kWithPred; }

namespace {

// Reads known keys of a JSON object into fields; anything else is a ConfigError.
class KeyReader {
 public:
  KeyReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
  }
  template <typename T>
  void read(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config '" + section_ + "." + key + "': " + e.what());
    }
  }
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("config section '" + section_ + "': unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

json gbdt_to_json(const GbdtConfig& c) {
  return {{"max_depth", c.max_depth}, {"learning_rate", c.learning_rate}, {"num_leaves", c.num_leaves},
          {"subsample", c.subsample}, {"colsample", c.colsample},         {"min_data_in_leaf", c.min_data_in_leaf},
          {"l1", c.l1},               {"l2", c.l2},                       {"n_rounds", c.n_rounds},
          {"min_split_gain", c.min_split_gain}};
}

GbdtConfig gbdt_from_json(const json& j) {
  GbdtConfig c;
  KeyReader r(j, "gbdt");
  r.read("max_depth", c.max_depth);
  r.read("learning_rate", c.learning_rate);
  r.read("num_leaves", c.num_leaves);
  r.read("subsample", c.subsample);
  r.read("colsample", c.colsample);
  r.read("min_data_in_leaf", c.min_data_in_leaf);
  r.read("l1", c.l1);
  r.read("l2", c.l2);
  r.read("n_rounds", c.n_rounds);
  r.read("min_split_gain", c.min_split_gain);
  r.finish();
  return c;
}

json distill_to_json(const DistillConfig& c) {
  return {{"alpha", c.alpha},   {"temperature", c.temperature}, {"learning_rate", c.learning_rate},
          {"dropout", c.dropout}, {"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"hidden", c.hidden}, {"embedding_dim", c.embedding_dim}};
}

DistillConfig distill_from_json(const json& j) {
  DistillConfig c;
  KeyReader r(j, "distill");
  r.read("alpha", c.alpha);
  r.read("temperature", c.temperature);
  r.read("learning_rate", c.learning_rate);
  r.read("dropout", c.dropout);
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("hidden", c.hidden);
  r.read("embedding_dim", c.embedding_dim);
  r.finish();
  return c;
}

json gnn_to_json(const SageConfig& c) {
  return {{"hidden", c.hidden}, {"depth", c.depth}, {"dropout", c.dropout}, {"learning_rate", c.learning_rate},
          {"epochs", c.epochs}};
}

SageConfig gnn_from_json(const json& j) {
  SageConfig c;
  KeyReader r(j, "gnn");
  r.read("hidden", c.hidden);
  r.read("depth", c.depth);
  r.read("dropout", c.dropout);
  r.read("learning_rate", c.learning_rate);
  r.read("epochs", c.epochs);
  r.finish();
  return c;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

// Runs one stage, re-throwing failures as StageError tagged with the stage name.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<EntityRef> labeled_entities(const TaskSpec& task, Timestamp t) {
  std::vector<EntityRef> out;
  for (const auto& [pk, label] : task.labels_at(t)) out.push_back({task.target_table, pk});
  return out;
}

std::vector<PrimaryKey> labeled_keys(const TaskSpec& task, Timestamp t) {
  std::vector<PrimaryKey> out;
  for (const auto& [pk, label] : task.labels_at(t)) out.push_back(pk);
  return out;
}

json metric_to_json(const MetricReport& m) {
  return {{"metric", m.metric}, {"value", m.value}, {"n", m.n}, {"seed_times", m.seed_times}};
}

fs::path seed_dir(const fs::path& bundle, std::uint64_t seed) { return bundle / ("seed-" + std::to_string(seed)); }

}  // namespace

void PipelineConfig::validate() const {
  if (!synth && data_dir.empty()) throw ConfigError("config needs either 'data_dir' or 'synth'");
  if (synth && !data_dir.empty()) throw ConfigError("config sets both 'data_dir' and 'synth'");
  if (task.empty()) throw ConfigError("config 'task' is empty");
  if (window < 0) throw ConfigError("config 'window' must be >= 1 (or 0 for the task horizon)");
  if (split.train < 1 || split.test < 1) throw ConfigError("split needs at least one train and one test seed time");
  if (seeds.empty()) throw ConfigError("config 'seeds' is empty");
  if (bench_repeats < 3) throw ConfigError("bench repeats must be >= 3");
  for (Timestamp w : features.windows)
    if (w < 0) throw ConfigError("feature windows must be >= 0");
  try {
    if (synth) synth->validate();
    gbdt.validate();
    distill.validate();
    gnn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json PipelineConfig::to_json() const {
  json j;
  if (synth) {
    j["synth"] = synth->to_json();
  } else {
    j["data_dir"] = data_dir.string();
    j["schema"] = schema.string();
  }
  j["task"] = task;
  j["output"] = output.string();
  j["mode"] = std::string(lightrdl::to_string(mode));
  j["window"] = window;
  j["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
  j["features"] = {{"windows", features.windows}};
  j["gbdt"] = gbdt_to_json(gbdt);
  j["distill"] = distill_to_json(distill);
  j["gnn"] = gnn_to_json(gnn);
  j["seeds"] = seeds;
  j["bench"] = {{"repeats", bench_repeats}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  KeyReader r(j, "config");
  std::string data_dir, schema, output, mode;
  r.read("data_dir", data_dir);
  r.read("schema", schema);
  r.read("task", c.task);
  r.read("output", output);
  r.read("mode", mode);
  r.read("window", c.window);
  r.read("seeds", c.seeds);
  json synth, split, features, gbdt, distill, gnn, bench;
  r.read("synth", synth);
  r.read("split", split);
  r.read("features", features);
  r.read("gbdt", gbdt);
  r.read("distill", distill);
  r.read("gnn", gnn);
  r.read("bench", bench);
  r.finish();

  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };
  if (!data_dir.empty()) c.data_dir = resolve(data_dir);
  if (!schema.empty()) c.schema = resolve(schema);
  else if (!data_dir.empty()) c.schema = c.data_dir / "schema.json";
  if (!output.empty()) c.output = resolve(output);
  if (!mode.empty()) c.mode = parse_pipeline_mode(mode);
  try {
    if (!synth.is_null()) c.synth = SynthConfig::from_json(synth);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!split.is_null()) {
    KeyReader s(split, "split");
    s.read("train", c.split.train);
    s.read("val", c.split.val);
    s.read("test", c.split.test);
    s.finish();
  }
  if (!features.is_null()) {
    KeyReader f(features, "features");
    f.read("windows", c.features.windows);
    f.finish();
  }
  if (!gbdt.is_null()) c.gbdt = gbdt_from_json(gbdt);
  if (!distill.is_null()) c.distill = distill_from_json(distill);
  if (!gnn.is_null()) c.gnn = gnn_from_json(gnn);
  if (!bench.is_null()) {
    KeyReader b(bench, "bench");
    b.read("repeats", c.bench_repeats);
    b.finish();
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& file) {
  json j;
  try {
    j = json::parse(read_text(file));
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + file.string() + ": " + e.what());
  }
  // Anchor relative paths at the config file so a saved bundle config resolves from anywhere.
  return PipelineConfig::from_json(j, fs::absolute(file).parent_path());
}

TaskData prepare_task_data(const PipelineConfig& cfg) {
  cfg.validate();
  TaskData data;
  stage("load", [&] {
    if (cfg.synth) {
      SynthData synth = generate(*cfg.synth);
      if (cfg.task == synth.churn.name) data.task = std::move(synth.churn);
      else if (cfg.task == synth.sales.name) data.task = std::move(synth.sales);
      else throw ConfigError("synthetic data has no task '" + cfg.task + "' (user-churn, item-sales)");
      data.db = std::move(synth.db);
    } else {
      data.db = load_database(cfg.schema, cfg.data_dir);
      data.task = load_task(cfg.data_dir, cfg.task, data.db);
    }
    const auto problems = validate_task(data.task, data.db);
    if (!problems.empty()) throw ConfigError("task '" + data.task.name + "': " + problems.front());
  });
  try {
    data.split = split_times(data.task, cfg.split.train, cfg.split.val, cfg.split.test);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  data.window = cfg.window > 0 ? cfg.window : data.task.horizon;
  return data;
}

HeteroGraph build_mode_graph(const TaskData& data, PipelineMode mode, Timestamp t) {
  if (!uses_snapshot(mode)) return build_cumulative_graph(data.db, t);
  const auto include = labeled_entities(data.task, t);
  return build_snapshot_graph(data.db, t, data.window, include);
}

GbdtModel train_teacher(const TaskData& data, const FeatureEngineer& fe, const PipelineConfig& cfg,
                        std::uint64_t seed) {
  const TabularDataset ds = build_dataset(fe, data.task, data.split.train);
  GbdtModel model = train_gbdt(ds, cfg.gbdt, seed);
  model.feature_config = cfg.features;
  return model;
}

DistillMlp train_student(const TaskData& data, const FeatureEngineer& fe, const GbdtModel& teacher,
                         const PipelineConfig& cfg, std::uint64_t seed) {
  const TabularDataset ds = build_dataset(fe, data.task, data.split.train);
  DistillConfig dc = cfg.distill;
  dc.seed = seed;
  return train_distill_mlp(ds, teacher, dc);
}

NodeFeatures pipeline_h0(const HeteroGraph& g, const TaskData& data, const FeatureEngineer& fe, PipelineMode mode,
                         Timestamp t, const DistillMlp* student, const GbdtModel* teacher) {
  return init_node_features(g, data.task.target_table, node_init_mode(mode), fe, t, student, teacher);
}

TrainedPipeline train_pipeline(const TaskData& data, const PipelineConfig& cfg, std::uint64_t seed) {
  TrainedPipeline tp;
  tp.mode = cfg.mode;
  tp.seed = seed;
  const FeatureEngineer fe(data.db, data.task.target_table, cfg.features);

  if (needs_teacher(cfg.mode)) {
    Stopwatch clock;
    tp.teacher = stage("teacher", [&] { return train_teacher(data, fe, cfg, seed); });
    tp.times.gbdt_train = clock.seconds();
  }
  if (cfg.mode == PipelineMode::kLightRdl) {
    Stopwatch clock;
    tp.student = stage("distill", [&] { return train_student(data, fe, *tp.teacher, cfg, seed); });
    tp.times.distill_train = clock.seconds();
  }

  const DistillMlp* student = tp.student ? &*tp.student : nullptr;
  const GbdtModel* teacher = tp.teacher ? &*tp.teacher : nullptr;
  std::vector<Timestamp> times = data.split.train;
  times.insert(times.end(), data.split.val.begin(), data.split.val.end());
  std::vector<HeteroGraph> graphs;
  graphs.reserve(times.size());
  stage("graphs", [&] {
    for (Timestamp t : times) {
      graphs.push_back(build_mode_graph(data, cfg.mode, t));
      tp.times.graph_build += graphs.back().build_seconds();
    }
  });
  std::vector<GraphSample> samples;
  stage("h0", [&] {
    for (std::size_t i = 0; i < times.size(); ++i) {
      GraphSample s;
      s.graph = &graphs[i];
      s.seed_time = times[i];
      s.h0 = pipeline_h0(graphs[i], data, fe, cfg.mode, times[i], student, teacher);
      s.labels = graph_labels(graphs[i], data.task, times[i]);
      samples.push_back(std::move(s));
    }
  });
  const std::span<const GraphSample> train(samples.data(), data.split.train.size());
  const std::span<const GraphSample> val(samples.data() + data.split.train.size(), data.split.val.size());

  stage("gnn", [&] {
    SageConfig gc = cfg.gnn;
    gc.seed = seed;
    std::vector<std::size_t> widths;
    for (const Matrix& m : samples.front().h0.tables) widths.push_back(static_cast<std::size_t>(m.cols()));
    std::mt19937_64 rng(seed);
    tp.gnn = HeteroSageModel(data.task.kind, widths, schema_relations(data.db), data.task.target_table, gc, rng);
    std::vector<const NodeFeatures*> h0s;
    for (const GraphSample& s : train) h0s.push_back(&s.h0);
    tp.gnn.fit_normalization(h0s);
    tp.run = train_gnn(tp.gnn, train, val, gc);
    for (const EpochRecord& e : tp.run.epochs) tp.times.gnn_train += e.seconds;
    tp.times.epoch_mean = tp.run.mean_epoch_seconds();
  });

  stage("test", [&] {
    tp.test_predictions = predict_pipeline(data, cfg, tp, data.split.test);
    tp.test_metric = score_predictions(data.task.kind, tp.test_predictions);
    tp.run.test_metric = tp.test_metric.value;
  });
  return tp;
}

std::vector<Prediction> predict_pipeline(const TaskData& data, const PipelineConfig& cfg, const TrainedPipeline& tp,
                                         const std::vector<Timestamp>& seed_times) {
  const FeatureEngineer fe(data.db, data.task.target_table, cfg.features);
  const DistillMlp* student = tp.student ? &*tp.student : nullptr;
  const GbdtModel* teacher = tp.teacher ? &*tp.teacher : nullptr;
  std::vector<Prediction> out;
  for (Timestamp t : seed_times) {
    const HeteroGraph g = build_mode_graph(data, tp.mode, t);
    const NodeFeatures h0 = pipeline_h0(g, data, fe, tp.mode, t, student, teacher);
    const auto labels = data.task.labels_at(t);
    const auto keys = labeled_keys(data.task, t);
    const auto scores = tp.gnn.predict(g, h0, keys);
    for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({t, labels[i].first, scores[i], labels[i].second});
  }
  return out;
}

MetricReport score_predictions(TaskKind kind, const std::vector<Prediction>& preds) {
  std::vector<double> scores, labels;
  std::set<Timestamp> times;
  for (const Prediction& p : preds) {
    scores.push_back(p.score);
    labels.push_back(p.label);
    times.insert(p.seed_time);
  }
  MetricReport m;
  m.metric = kind == TaskKind::kRegression ? "mae" : "rocauc";
  m.value = kind == TaskKind::kRegression ? mae(scores, labels) : rocauc(scores, labels);
  m.n = preds.size();
  m.seed_times.assign(times.begin(), times.end());
  return m;
}

std::string predictions_to_csv(const std::vector<Prediction>& preds) {
  std::string out = "seed_time,entity,score,label\n";
  for (const Prediction& p : preds)
    out += std::to_string(p.seed_time) + ',' + std::to_string(p.entity) + ',' + csv::format_real(p.score) + ',' +
           csv::format_real(p.label) + '\n';
  return out;
}

std::vector<Prediction> predictions_from_csv(std::string_view text) {
  std::vector<Prediction> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::getline(in, line);
  if (csv::trim(line) != "seed_time,entity,score,label") throw std::runtime_error("unexpected predictions header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != 4) throw std::runtime_error("predictions line " + std::to_string(line_no) + ": expected 4 cells");
    try {
      out.push_back({std::stoll(cells[0]), std::stoll(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
    } catch (const std::exception&) {
      throw std::runtime_error("predictions line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return out;
}

json EvalSummary::to_json() const {
  json seeds = json::array();
  for (const SeedMetric& s : per_seed) {
    json m = metric_to_json(s.report);
    m["seed"] = s.seed;
    seeds.push_back(m);
  }
  return {{"metric", metric}, {"per_seed", seeds}, {"mean", mean}, {"std", std}};
}

EvalSummary summarize(const std::vector<SeedMetric>& per_seed) {
  if (per_seed.empty()) throw std::invalid_argument("no seeds to summarize");
  EvalSummary s;
  s.metric = per_seed.front().report.metric;
  s.per_seed = per_seed;
  double sum = 0.0;
  for (const SeedMetric& m : per_seed) sum += m.report.value;
  s.mean = sum / static_cast<double>(per_seed.size());
  if (per_seed.size() > 1) {
    double sq = 0.0;
    for (const SeedMetric& m : per_seed) sq += (m.report.value - s.mean) * (m.report.value - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(per_seed.size() - 1));
  }
  return s;
}

fs::path run_train(const PipelineConfig& cfg) {
  const TaskData data = prepare_task_data(cfg);
  const fs::path bundle = cfg.output;
  fs::create_directories(bundle);
  write_text(bundle / "config.json", cfg.to_json().dump(2) + "\n");
  std::vector<SeedMetric> metrics;
  for (std::uint64_t seed : cfg.seeds) {
    const TrainedPipeline tp = train_pipeline(data, cfg, seed);
    stage("persist", [&] {
      const fs::path dir = seed_dir(bundle, seed);
      fs::create_directories(dir);
      for (const char* stale : {"gbdt.json", "distill.json"}) fs::remove(dir / stale);
      if (tp.teacher) write_text(dir / "gbdt.json", tp.teacher->to_json());
      if (tp.student) write_text(dir / "distill.json", tp.student->to_json());
      write_text(dir / "gnn.json", tp.gnn.to_json());
      write_text(dir / "train_run.csv", tp.run.to_csv());
      write_text(dir / "predictions.csv", predictions_to_csv(tp.test_predictions));
      write_text(dir / "metrics.json", metric_to_json(tp.test_metric).dump(2) + "\n");
    });
    metrics.push_back({seed, tp.test_metric});
  }
  write_text(bundle / "summary.json", summarize(metrics).to_json().dump(2) + "\n");
  return bundle;
}

EvalSummary run_eval(const fs::path& bundle) {
  if (!fs::is_regular_file(bundle / "config.json"))
    throw ConfigError("no trained bundle at " + bundle.string() + " (config.json missing)");
  PipelineConfig cfg = load_pipeline_config(bundle / "config.json");
  const TaskData data = prepare_task_data(cfg);
  std::vector<SeedMetric> metrics;
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = seed_dir(bundle, seed);
    TrainedPipeline tp = stage("load-bundle", [&] {
      TrainedPipeline loaded;
      loaded.mode = cfg.mode;
      loaded.seed = seed;
      if (needs_teacher(cfg.mode)) loaded.teacher = GbdtModel::from_json(read_text(dir / "gbdt.json"));
      if (cfg.mode == PipelineMode::kLightRdl) loaded.student = DistillMlp::from_json(read_text(dir / "distill.json"));
      loaded.gnn = HeteroSageModel::from_json(read_text(dir / "gnn.json"));
      return loaded;
    });
    const auto persisted = stage("load-bundle", [&] { return predictions_from_csv(read_text(dir / "predictions.csv")); });
    const auto live = stage("eval", [&] { return predict_pipeline(data, cfg, tp, data.split.test); });
    stage("eval", [&] {
      if (live.size() != persisted.size())
        throw std::runtime_error("seed " + std::to_string(seed) + ": " + std::to_string(live.size()) +
                                 " live predictions vs " + std::to_string(persisted.size()) + " persisted");
      for (std::size_t i = 0; i < live.size(); ++i) {
        const Prediction& a = live[i];
        const Prediction& b = persisted[i];
        if (a.seed_time != b.seed_time || a.entity != b.entity || a.label != b.label ||
            std::abs(a.score - b.score) > 1e-9 * (1.0 + std::abs(b.score)))
          throw std::runtime_error("seed " + std::to_string(seed) + ": prediction for entity " +
                                   std::to_string(a.entity) + " at t=" + std::to_string(a.seed_time) +
                                   " differs from the persisted one");
      }
    });
    metrics.push_back({seed, score_predictions(data.task.kind, live)});
  }
  EvalSummary summary = summarize(metrics);
  write_text(bundle / "eval.json", summary.to_json().dump(2) + "\n");
  return summary;
}

const BenchEntry& BenchReport::entry(PipelineMode mode) const {
  for (const BenchEntry& e : entries)
    if (e.mode == mode) return e;
  throw std::out_of_range("mode " + std::string(to_string(mode)) + " is not in the report");
}

json BenchReport::speedups(PipelineMode candidate) const {
  const BenchEntry& b = entry(baseline);
  const BenchEntry& c = entry(candidate);
  auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  return {{"inference", ratio(b.inference_seconds, c.inference_seconds)},
          {"build", ratio(b.build_seconds, c.build_seconds)},
          {"training", ratio(b.train_seconds, c.train_seconds)},
          {"epoch", ratio(b.epoch_seconds, c.epoch_seconds)}};
}

json BenchReport::to_json() const {
  json modes = json::array();
  for (const BenchEntry& e : entries) {
    json m = {{"mode", std::string(to_string(e.mode))},
              {"build_seconds", e.build_seconds},
              {"train_seconds", e.train_seconds},
              {"epoch_seconds", e.epoch_seconds},
              {"embed_seconds", e.embed_seconds},
              {"gnn_seconds", e.gnn_seconds},
              {"inference_seconds", e.inference_seconds},
              {"graph_nodes", e.graph_nodes},
              {"graph_edges", e.graph_edges},
              {"metric", metric_to_json(e.metric)}};
    if (e.mode != baseline) m["speedup_vs_baseline"] = speedups(e.mode);
    modes.push_back(m);
  }
  return {{"baseline", std::string(to_string(baseline))}, {"repeats", repeats}, {"modes", modes}};
}

std::string BenchReport::to_table() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-13s %9s %9s %11s %11s %11s %11s %9s\n", "mode", "nodes", "edges", "build s",
                "train s", "epoch s", "infer s", "metric");
  out += buf;
  for (const BenchEntry& e : entries) {
    std::snprintf(buf, sizeof buf, "%-13s %9zu %9zu %11.6f %11.6f %11.6f %11.6f %9.4f\n",
                  std::string(to_string(e.mode)).c_str(), e.graph_nodes, e.graph_edges, e.build_seconds,
                  e.train_seconds, e.epoch_seconds, e.inference_seconds, e.metric.value);
    out += buf;
  }
  for (const BenchEntry& e : entries) {
    if (e.mode == baseline) continue;
    const json s = speedups(e.mode);
    std::snprintf(buf, sizeof buf, "%s vs %s: inference %.2fx, build %.2fx, training %.2fx, epoch %.2fx\n",
                  std::string(to_string(e.mode)).c_str(), std::string(to_string(baseline)).c_str(),
                  s["inference"].get<double>(), s["build"].get<double>(), s["training"].get<double>(),
                  s["epoch"].get<double>());
    out += buf;
  }
  return out;
}

BenchReport run_bench(const PipelineConfig& cfg, const std::vector<PipelineMode>& modes) {
  if (modes.empty()) throw ConfigError("bench needs at least one mode");
  const TaskData data = prepare_task_data(cfg);
  BenchReport report;
  report.repeats = cfg.bench_repeats;
  report.baseline = std::find(modes.begin(), modes.end(), PipelineMode::kRdlBaseline) != modes.end()
                        ? PipelineMode::kRdlBaseline
                        : modes.back();
  const std::uint64_t seed = cfg.seeds.front();
  const Timestamp t = data.split.test.back();
  const FeatureEngineer fe(data.db, data.task.target_table, cfg.features);
  for (PipelineMode mode : modes) {
    PipelineConfig mc = cfg;
    mc.mode = mode;
    const TrainedPipeline tp = train_pipeline(data, mc, seed);
    BenchEntry e;
    e.mode = mode;
    e.train_seconds = tp.times.training_total();
    e.epoch_seconds = tp.times.epoch_mean;
    e.metric = tp.test_metric;
    stage("bench", [&] {
      e.build_seconds = time_median(cfg.bench_repeats, [&] { (void)build_mode_graph(data, mode, t); });
      const HeteroGraph g = build_mode_graph(data, mode, t);
      e.graph_nodes = g.node_count();
      e.graph_edges = g.edge_count();
      const TableId target = data.task.target_table;
      const auto [first, last] = g.nodes_of(target);
      // Full-history feature rows are an input to serving, computed before timing.
      Matrix features(static_cast<Eigen::Index>(last - first), static_cast<Eigen::Index>(fe.dim()));
      for (NodeId v = first; v < last; ++v) {
        const FeatureVector f = fe.compute(g.pk(v), t);
        for (std::size_t c = 0; c < f.values.size(); ++c)
          features(static_cast<Eigen::Index>(v - first), static_cast<Eigen::Index>(c)) = f.values[c];
      }
      const NodeInitMode init = node_init_mode(mode);
      const DistillMlp* student = tp.student ? &*tp.student : nullptr;
      const GbdtModel* teacher = tp.teacher ? &*tp.teacher : nullptr;
      Matrix injected = injected_columns(init, features, student, teacher);
      if (init != NodeInitMode::kRaw)
        e.embed_seconds = time_median(cfg.bench_repeats, [&] { injected = injected_columns(init, features, student, teacher); });
      const auto keys = labeled_keys(data.task, t);
      e.gnn_seconds = infer_timed(tp.gnn, g, injected, keys, cfg.bench_repeats).seconds;
      e.inference_seconds = e.embed_seconds + e.gnn_seconds;
    });
    report.entries.push_back(e);
  }
  return report;
}

std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, const std::vector<PipelineMode>& modes) {
  const TaskData data = prepare_task_data(cfg);
  std::vector<AblationRow> rows;
  for (PipelineMode mode : modes) {
    PipelineConfig mc = cfg;
    mc.mode = mode;
    std::vector<SeedMetric> metrics;
    for (std::uint64_t seed : cfg.seeds) metrics.push_back({seed, train_pipeline(data, mc, seed).test_metric});
    rows.push_back({mode, summarize(metrics)});
  }
  return rows;
}

void run_synth(const SynthConfig& cfg, const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) throw ConfigError(out.string() + " exists and is not a directory");
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw ConfigError(out.string() + " is not empty; pass --force to overwrite");
  const SynthData data = stage("synth", [&] { return generate(cfg); });
  stage("write", [&] {
    fs::create_directories(out);
    save_database(data.db, out);
    save_task_index({data.churn, data.sales}, data.db, out);
    write_text(out / "synth.json", cfg.to_json().dump(2) + "\n");
  });
}

}  // namespace lightrdl
