#include "lightrdl/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace lightrdl {

void GbdtConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("gbdt config: " + what); };
  if (max_depth < 1) fail("max_depth must be >= 1");
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) fail("learning_rate must lie in [0, 1]");
  if (num_leaves < 2) fail("num_leaves must be >= 2");
  if (!(subsample > 0.0 && subsample <= 1.0)) fail("subsample must lie in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) fail("colsample must lie in (0, 1]");
  if (min_data_in_leaf < 1) fail("min_data_in_leaf must be >= 1");
  if (!(l1 >= 0.0) || !(l2 >= 0.0)) fail("l1 and l2 must be >= 0");
  if (n_rounds < 0) fail("n_rounds must be >= 0");
}

bool GbdtConfig::in_search_space() const {
  return max_depth >= 3 && max_depth <= 11 && learning_rate >= 1e-3 && learning_rate <= 0.1 &&
         num_leaves >= 2 && num_leaves <= 1024 && subsample >= 0.05 && subsample <= 1.0 &&
         colsample >= 0.05 && colsample <= 1.0 && min_data_in_leaf >= 1 && min_data_in_leaf <= 100 &&
         l1 >= 1e-9 && l1 <= 10.0 && l2 >= 1e-9 && l2 <= 10.0;
}

double RegressionTree::predict(std::span<const double> x) const {
  std::int32_t node = 0;
  while (feature[node] >= 0) node = x[feature[node]] <= threshold[node] ? left[node] : right[node];
  return value[node];
}

int RegressionTree::depth() const {
  if (feature.empty()) return 0;
  std::vector<int> d(feature.size(), 0);
  int best = 0;
  for (std::size_t n = 0; n < feature.size(); ++n) {  // children always follow their parent
    best = std::max(best, d[n]);
    if (feature[n] >= 0) d[left[n]] = d[right[n]] = d[n] + 1;
  }
  return best;
}

double sigmoid(double z) {
  z = std::clamp(z, -kRawClamp, kRawClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

double GbdtModel::raw(std::span<const double> x) const {
  if (x.size() != n_features)
    throw std::invalid_argument("gbdt: expected " + std::to_string(n_features) + " features, got " +
                                std::to_string(x.size()));
  double sum = base_score;
  for (const auto& tree : trees) sum += tree.predict(x);
  return sum;
}

double GbdtModel::predict(std::span<const double> x) const {
  const double r = raw(x);
  return kind == TaskKind::kRegression ? r : sigmoid(r);
}

std::string GbdtModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& t : trees)
    trees_json.push_back({{"feature", t.feature},
                          {"threshold", t.threshold},
                          {"left", t.left},
                          {"right", t.right},
                          {"value", t.value}});
  nlohmann::json doc = {{"format", "lightrdl-gbdt"},
                        {"task_kind", std::string(to_string(kind))},
                        {"base_score", base_score},
                        {"learning_rate", learning_rate},
                        {"n_features", n_features},
                        {"degenerate", degenerate},
                        {"feature_config", {{"windows", feature_config.windows}}},
                        {"trees", trees_json}};
  return doc.dump(1) + "\n";
}

GbdtModel GbdtModel::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("format", "") != "lightrdl-gbdt") throw std::invalid_argument("not a gbdt model document");
  GbdtModel m;
  m.kind = parse_task_kind(doc.at("task_kind").get<std::string>());
  m.base_score = doc.at("base_score").get<double>();
  m.learning_rate = doc.at("learning_rate").get<double>();
  m.n_features = doc.at("n_features").get<std::size_t>();
  m.degenerate = doc.at("degenerate").get<bool>();
  m.feature_config.windows = doc.at("feature_config").at("windows").get<std::vector<Timestamp>>();
  for (const auto& t : doc.at("trees")) {
    RegressionTree tree;
    tree.feature = t.at("feature").get<std::vector<std::int32_t>>();
    tree.threshold = t.at("threshold").get<std::vector<double>>();
    tree.left = t.at("left").get<std::vector<std::int32_t>>();
    tree.right = t.at("right").get<std::vector<std::int32_t>>();
    tree.value = t.at("value").get<std::vector<double>>();
    m.trees.push_back(std::move(tree));
  }
  return m;
}

namespace {

double soft_threshold(double g, double l1) {
  if (g > l1) return g - l1;
  if (g < -l1) return g + l1;
  return 0.0;
}

struct NodeStats {
  double grad = 0.0;
  double hess = 0.0;
  std::size_t count = 0;
};

struct SplitCandidate {
  double gain = -std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  double threshold = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const std::vector<std::vector<double>>& columns,
             const std::vector<std::vector<std::uint32_t>>& sorted, const GbdtConfig& cfg)
      : columns_(columns), sorted_(sorted), cfg_(cfg) {}

  RegressionTree grow(const std::vector<double>& grad, const std::vector<double>& hess,
                      const std::vector<char>& in_bag, const std::vector<std::int32_t>& features) {
    const std::size_t n = grad.size();
    RegressionTree tree;
    std::vector<NodeStats> stats(1);
    node_of_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_bag[i]) continue;
      node_of_[i] = 0;
      stats[0].grad += grad[i];
      stats[0].hess += hess[i];
      ++stats[0].count;
    }
    add_leaf(tree);
    std::vector<std::int32_t> frontier{0};
    int leaves = 1;
    for (int depth = 0; depth < cfg_.max_depth && !frontier.empty() && leaves < cfg_.num_leaves; ++depth) {
      std::vector<std::int32_t> slot(tree.feature.size(), -1);
      for (std::size_t k = 0; k < frontier.size(); ++k) slot[frontier[k]] = static_cast<std::int32_t>(k);
      std::vector<SplitCandidate> best(frontier.size());
      for (std::int32_t f : features) scan_feature(f, grad, hess, frontier, slot, stats, best);

      std::vector<std::size_t> accepted;
      for (std::size_t k = 0; k < frontier.size(); ++k)
        if (best[k].feature >= 0 && best[k].gain >= cfg_.min_split_gain) accepted.push_back(k);
      std::stable_sort(accepted.begin(), accepted.end(),
                       [&](std::size_t a, std::size_t b) { return best[a].gain > best[b].gain; });
      std::vector<std::int32_t> next;
      std::vector<std::int32_t> split_of(tree.feature.size(), -1);
      for (std::size_t k : accepted) {
        if (leaves >= cfg_.num_leaves) break;
        const std::int32_t node = frontier[k];
        tree.feature[node] = best[k].feature;
        tree.threshold[node] = best[k].threshold;
        tree.left[node] = add_leaf(tree);
        tree.right[node] = add_leaf(tree);
        stats.resize(tree.feature.size());
        split_of[node] = node;
        next.push_back(tree.left[node]);
        next.push_back(tree.right[node]);
        ++leaves;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t node = node_of_[i];
        if (node < 0 || split_of[node] < 0) continue;
        const std::int32_t child =
            columns_[tree.feature[node]][i] <= tree.threshold[node] ? tree.left[node] : tree.right[node];
        node_of_[i] = child;
        stats[child].grad += grad[i];
        stats[child].hess += hess[i];
        ++stats[child].count;
      }
      std::sort(next.begin(), next.end());
      frontier = std::move(next);
    }
    for (std::size_t node = 0; node < tree.feature.size(); ++node) {
      if (tree.feature[node] >= 0) continue;
      const NodeStats& s = stats[node];
      const double denom = s.hess + cfg_.l2;
      tree.value[node] = denom > 0.0 ? -soft_threshold(s.grad, cfg_.l1) / denom * cfg_.learning_rate : 0.0;
    }
    return tree;
  }

 private:
  static std::int32_t add_leaf(RegressionTree& tree) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(0.0);
    return static_cast<std::int32_t>(tree.feature.size() - 1);
  }

  double score(double g, double h) const {
    const double denom = h + cfg_.l2;
    if (denom <= 0.0) return 0.0;
    const double t = soft_threshold(g, cfg_.l1);
    return t * t / denom;
  }

  void scan_feature(std::int32_t f, const std::vector<double>& grad, const std::vector<double>& hess,
                    const std::vector<std::int32_t>& frontier, const std::vector<std::int32_t>& slot,
                    const std::vector<NodeStats>& stats, std::vector<SplitCandidate>& best) const {
    struct Running {
      double grad = 0.0, hess = 0.0, last = 0.0;
      std::size_t count = 0;
    };
    std::vector<Running> run(frontier.size());
    const auto& col = columns_[f];
    const std::size_t min_leaf = static_cast<std::size_t>(cfg_.min_data_in_leaf);
    for (std::uint32_t i : sorted_[f]) {
      const std::int32_t node = node_of_[i];
      if (node < 0 || node >= static_cast<std::int32_t>(slot.size()) || slot[node] < 0) continue;
      const std::size_t k = static_cast<std::size_t>(slot[node]);
      Running& r = run[k];
      const double v = col[i];
      const NodeStats& total = stats[node];
      if (r.count >= min_leaf && v > r.last && total.count - r.count >= min_leaf) {
        const double gain = score(r.grad, r.hess) + score(total.grad - r.grad, total.hess - r.hess) -
                            score(total.grad, total.hess);
        if (gain > best[k].gain) {
          double mid = r.last + (v - r.last) / 2.0;
          if (!(mid < v)) mid = r.last;
          best[k] = {gain, f, mid};
        }
      }
      r.grad += grad[i];
      r.hess += hess[i];
      r.last = v;
      ++r.count;
    }
  }

  const std::vector<std::vector<double>>& columns_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  const GbdtConfig& cfg_;
  std::vector<std::int32_t> node_of_;
};

}  // namespace

GbdtModel train_gbdt(const TabularDataset& ds, const GbdtConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (ds.size() == 0) throw std::invalid_argument("train_gbdt: empty dataset");
  const std::size_t n = ds.size();
  const std::size_t d = ds.dim();
  if (d == 0) throw std::invalid_argument("train_gbdt: zero-width features");
  for (const auto& row : ds.rows)
    if (row.values.size() != d) throw std::invalid_argument("train_gbdt: inconsistent feature width");

  GbdtModel model;
  model.kind = ds.kind;
  model.learning_rate = cfg.learning_rate;
  model.n_features = d;

  const auto [lo, hi] = std::minmax_element(ds.labels.begin(), ds.labels.end());
  const double mean = std::accumulate(ds.labels.begin(), ds.labels.end(), 0.0) / static_cast<double>(n);
  if (ds.kind == TaskKind::kRegression) {
    model.base_score = mean;
  } else {
    const double p = std::clamp(mean, sigmoid(-kRawClamp), sigmoid(kRawClamp));
    model.base_score = std::clamp(std::log(p / (1.0 - p)), -kRawClamp, kRawClamp);
  }
  if (*lo == *hi) {
    model.degenerate = true;
    return model;
  }

  std::vector<std::vector<double>> columns(d, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < d; ++f) columns[f][i] = ds.rows[i].values[f];
  std::vector<std::vector<std::uint32_t>> sorted(d, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < d; ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0u);
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return columns[f][a] < columns[f][b]; });
  }

  std::mt19937_64 rng(seed);
  std::vector<double> raw(n, model.base_score), grad(n), hess(n);
  std::vector<char> in_bag(n, 1);
  std::vector<std::uint32_t> row_perm(n);
  std::vector<std::int32_t> all_features(d);
  std::iota(all_features.begin(), all_features.end(), 0);
  const std::size_t bag_size = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.subsample * static_cast<double>(n)));
  const std::size_t col_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.colsample * static_cast<double>(d))), 1, d);

  TreeGrower grower(columns, sorted, cfg);
  std::vector<double> x(d);
  for (int round = 0; round < cfg.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (ds.kind == TaskKind::kRegression) {
        grad[i] = raw[i] - ds.labels[i];
        hess[i] = 1.0;
      } else {
        const double p = sigmoid(raw[i]);
        grad[i] = p - ds.labels[i];
        hess[i] = std::max(p * (1.0 - p), 1e-16);
      }
    }
    if (bag_size < n) {
      std::iota(row_perm.begin(), row_perm.end(), 0u);
      std::shuffle(row_perm.begin(), row_perm.end(), rng);
      std::fill(in_bag.begin(), in_bag.end(), 0);
      for (std::size_t k = 0; k < bag_size; ++k) in_bag[row_perm[k]] = 1;
    }
    std::vector<std::int32_t> features = all_features;
    if (col_count < d) {
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(col_count);
      std::sort(features.begin(), features.end());
    }
    RegressionTree tree = grower.grow(grad, hess, in_bag, features);
    for (std::size_t i = 0; i < n; ++i) raw[i] += tree.predict(ds.rows[i].values);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

std::vector<double> gbdt_predict_all(const GbdtModel& model, const TabularDataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& row : ds.rows) out.push_back(model.predict(row));
  return out;
}

}  // namespace lightrdl
