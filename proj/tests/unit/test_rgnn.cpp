#include <doctest.h>

#include <cmath>
#include <deque>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "lightrdl/metrics.hpp"
#include "lightrdl/rgnn.hpp"

using namespace lightrdl;
using fixtures::kProducts;
using fixtures::kTx;
using fixtures::kUsers;

namespace {

std::vector<std::size_t> raw_widths(const RelationalDatabase& db) {
  std::vector<std::size_t> out;
  for (TableId t = 0; t < db.table_count(); ++t) out.push_back(db.table(t).def.feature_dim());
  return out;
}

NodeFeatures raw_h0(const HeteroGraph& g, TableId target) {
  return assemble_h0(g, target, Matrix(static_cast<Eigen::Index>(g.count_of(target)), 0));
}

void randomize(HeteroSageModel& model, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.4);
  for (Param* p : model.parameters())
    for (Eigen::Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = normal(rng);
}

// Node-by-node message passing straight from the edge list: every edge u -> v sends h_u
// to v on the forward channel and h_v to u on the reverse channel.
std::vector<double> oracle_forward(HeteroSageModel& model, const HeteroGraph& g, const NodeFeatures& h0) {
  const std::size_t n_tables = g.table_count();
  const auto params = model.parameters();
  const auto rels = model.relations();
  const std::size_t n_rel = rels.size();
  const auto hidden = static_cast<std::size_t>(model.hidden());
  auto matvec = [&](const Matrix& w, const std::vector<double>& x, std::vector<double>& acc) {
    for (Eigen::Index o = 0; o < w.rows(); ++o)
      for (Eigen::Index k = 0; k < w.cols(); ++k) acc[static_cast<std::size_t>(o)] += w(o, k) * x[static_cast<std::size_t>(k)];
  };
  std::vector<std::vector<double>> h(g.node_count(), std::vector<double>(hidden));
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const TableId t = g.table_of(v);
    const Matrix& x = h0.tables[t];
    const auto row = static_cast<Eigen::Index>(v - g.nodes_of(t).first);
    std::vector<double> in(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) in[static_cast<std::size_t>(c)] = x(row, c);
    for (std::size_t o = 0; o < hidden; ++o) h[v][o] = params[2 * t + 1]->value(0, static_cast<Eigen::Index>(o));
    matvec(params[2 * t]->value, in, h[v]);
  }
  auto rel_index = [&](RelationKey key) {
    for (std::size_t r = 0; r < n_rel; ++r)
      if (rels[r] == key) return r;
    throw std::logic_error("relation missing");
  };
  std::size_t base = 2 * n_tables;
  for (int l = 0; l < model.depth(); ++l) {
    const bool last = l + 1 == model.depth();
    std::vector<std::vector<double>> next(g.node_count(), std::vector<double>(hidden));
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const TableId t = g.table_of(v);
      for (std::size_t o = 0; o < hidden; ++o) next[v][o] = params[base + 2 * t + 1]->value(0, static_cast<Eigen::Index>(o));
      matvec(params[base + 2 * t]->value, h[v], next[v]);
    }
    for (const Edge& e : g.edges()) {
      const TableId ts = g.table_of(e.src), td = g.table_of(e.dst);
      matvec(params[base + 2 * n_tables + rel_index({ts, td, false})]->value, h[e.src], next[e.dst]);
      matvec(params[base + 2 * n_tables + rel_index({ts, td, true})]->value, h[e.dst], next[e.src]);
    }
    if (!last)
      for (auto& row : next)
        for (double& a : row) a = std::max(0.0, a);
    h = std::move(next);
    base += 2 * n_tables + n_rel;
  }
  std::vector<double> out;
  const auto [first, end] = g.nodes_of(model.target());
  for (NodeId v = first; v < end; ++v) {
    double s = params[base + 1]->value(0, 0);
    for (std::size_t o = 0; o < hidden; ++o) s += params[base]->value(0, static_cast<Eigen::Index>(o)) * h[v][o];
    out.push_back(s);
  }
  return out;
}

GraphSample labeled_sample(const HeteroGraph& g, TableId target, TaskKind kind, std::mt19937_64& rng) {
  GraphSample s{&g, raw_h0(g, target), 0, {}};
  std::normal_distribution<double> normal;
  for (std::uint32_t i = 0; i < g.count_of(target); ++i)
    s.labels.emplace_back(i, kind == TaskKind::kRegression ? normal(rng) : (i % 2 == 0 ? 1.0 : 0.0));
  return s;
}

// Undirected hop distances from one node.
std::vector<int> hops_from(const HeteroGraph& g, NodeId source) {
  std::vector<std::vector<NodeId>> adj(g.node_count());
  for (const Edge& e : g.edges()) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<int> dist(g.node_count(), -1);
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId u : adj[v])
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
  }
  return dist;
}

// Random database in which the first table has features and is referenced by some other table.
RelationalDatabase random_linked_db(std::mt19937_64& rng) {
  for (;;) {
    RelationalDatabase db = fixtures::random_db(rng, 80);
    bool referenced = false;
    for (TableId t = 1; t < db.table_count(); ++t) referenced = referenced || db.table(t).def.fk_targets().contains(0);
    if (referenced && !db.table(0).rows.empty()) return db;
  }
}

}  // namespace

TEST_SUITE("rgnn") {
  TEST_CASE("schema relations cover both directions, sorted") {
    const auto db = fixtures::star(1, 1, {});
    const auto rels = schema_relations(db);
    CHECK(rels == std::vector<RelationKey>{{kUsers, kTx, false}, {kUsers, kTx, true}, {kProducts, kTx, false},
                                           {kProducts, kTx, true}});
    CHECK(rels[1].from() == kTx);
    CHECK(rels[1].to() == kUsers);
  }

  TEST_CASE("forward matches the edge-list oracle on random graphs") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
      const auto db = random_linked_db(rng);
      const HeteroGraph g = build_cumulative_graph(db, 9);
      SageConfig cfg;
      cfg.hidden = 5;
      cfg.depth = 1 + trial % 3;
      HeteroSageModel model(TaskKind::kRegression, raw_widths(db), schema_relations(db), 0, cfg, rng);
      randomize(model, rng);
      const NodeFeatures h0 = raw_h0(g, 0);
      const Vector got = model.forward(g, h0);
      const auto want = oracle_forward(model, g, h0);
      REQUIRE(static_cast<std::size_t>(got.size()) == want.size());
      for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got(static_cast<Eigen::Index>(i)) == doctest::Approx(want[i]).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("gradients agree with central differences") {
    std::mt19937_64 rng(5);
    for (TaskKind kind : {TaskKind::kBinaryClassification, TaskKind::kRegression}) {
      const auto db = fixtures::star(4, 3, {{1, 1, 1, 1, 0.5}, {2, 2, 1, 2, -1.0}, {3, 1, 3, 2, 2.0}, {4, 3, 2, 3, 0.1}});
      const HeteroGraph g = build_cumulative_graph(db, 3);
      SageConfig cfg;
      cfg.hidden = 4;
      cfg.depth = 2;
      HeteroSageModel model(kind, raw_widths(db), schema_relations(db), kUsers, cfg, rng);
      randomize(model, rng);
      const GraphSample sample = labeled_sample(g, kUsers, kind, rng);
      gnn_loss_and_grad(model, sample);
      double worst = 0.0;
      const double h = 1e-6;
      for (Param* p : model.parameters()) {
        const Matrix analytic = p->grad;
        for (Eigen::Index k = 0; k < p->value.size(); ++k) {
          const double keep = p->value.data()[k];
          p->value.data()[k] = keep + h;
          const double up = gnn_loss(model, sample);
          p->value.data()[k] = keep - h;
          const double down = gnn_loss(model, sample);
          p->value.data()[k] = keep;
          const double numeric = (up - down) / (2.0 * h);
          const double a = analytic.data()[k];
          worst = std::max(worst, std::abs(a - numeric) / std::max(1e-3, std::abs(a) + std::abs(numeric)));
        }
      }
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("loss values by hand") {
    const auto db = fixtures::star(2, 1, {});
    const HeteroGraph g = build_cumulative_graph(db, 0);
    std::mt19937_64 rng(0);
    SageConfig cfg;
    cfg.hidden = 2;
    cfg.depth = 1;
    HeteroSageModel model(TaskKind::kBinaryClassification, raw_widths(db), schema_relations(db), kUsers, cfg, rng);
    for (Param* p : model.parameters()) p->value.setZero();
    model.parameters().back()->value(0, 0) = 0.7;  // head bias: every logit is 0.7
    GraphSample s{&g, raw_h0(g, kUsers), 0, {{0, 1.0}, {1, 0.0}}};
    const double want = 0.5 * (std::log1p(std::exp(-0.7)) + std::log1p(std::exp(0.7)));
    CHECK(gnn_loss(model, s) == doctest::Approx(want).epsilon(1e-12));
  }

  TEST_CASE("sum aggregation: two identical neighbours send twice the message of one") {
    // Users 1, 2, 3 with 0, 1 and 2 identical transactions on the same product.
    const auto db = fixtures::star(3, 1, {{1, 2, 1, 1, 4.0}, {2, 3, 1, 1, 4.0}, {3, 3, 1, 1, 4.0}});
    const HeteroGraph g = build_cumulative_graph(db, 1);
    NodeFeatures h0 = raw_h0(g, kUsers);
    h0.tables[kUsers].setConstant(1.0);  // identical users
    std::mt19937_64 rng(2);
    SageConfig cfg;
    cfg.hidden = 3;
    cfg.depth = 1;
    HeteroSageModel model(TaskKind::kRegression, raw_widths(db), schema_relations(db), kUsers, cfg, rng);
    randomize(model, rng);
    const Vector out = model.forward(g, h0);
    CHECK(out(2) - out(0) == doctest::Approx(2.0 * (out(1) - out(0))).epsilon(1e-12));
    CHECK(std::abs(out(1) - out(0)) > 1e-6);
  }

  TEST_CASE("outputs depend only on nodes within depth hops") {
    std::mt19937_64 rng(13);
    int far_checks = 0;
    for (int trial = 0; trial < 30; ++trial) {
      const auto db = random_linked_db(rng);
      const HeteroGraph g = build_cumulative_graph(db, 12);
      SageConfig cfg;
      cfg.hidden = 4;
      cfg.depth = 1 + trial % 2;
      HeteroSageModel model(TaskKind::kRegression, raw_widths(db), schema_relations(db), 0, cfg, rng);
      randomize(model, rng);
      const NodeFeatures h0 = raw_h0(g, 0);
      const Vector before = model.forward(g, h0);
      const auto [first, end] = g.nodes_of(0);
      for (NodeId v = 0; v < g.node_count(); ++v) {
        const TableId t = g.table_of(v);
        if (h0.tables[t].cols() == 0) continue;
        NodeFeatures moved = h0;
        moved.tables[t].row(static_cast<Eigen::Index>(v - g.nodes_of(t).first)).array() += 3.0;
        const Vector after = model.forward(g, moved);
        for (NodeId target = first; target < end; ++target) {
          const int d = hops_from(g, target)[v];
          if (d < 0 || d > cfg.depth) {
            CHECK(after(target - first) == before(target - first));
            ++far_checks;
          }
        }
      }
    }
    CHECK(far_checks > 0);
  }

  TEST_CASE("relabelling primary keys permutes outputs and nothing else") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 15; ++trial) {
      const auto db = random_linked_db(rng);
      // New pks: a random bijection per table, applied to pks and to every fk pointing at the table.
      std::vector<std::map<PrimaryKey, PrimaryKey>> remap(db.table_count());
      for (TableId t = 0; t < db.table_count(); ++t) {
        std::vector<PrimaryKey> fresh;
        for (std::size_t r = 0; r < db.table(t).rows.size(); ++r) fresh.push_back(static_cast<PrimaryKey>(1000 + 7 * r));
        std::shuffle(fresh.begin(), fresh.end(), rng);
        for (std::size_t r = 0; r < db.table(t).rows.size(); ++r) remap[t][db.table(t).rows[r].pk] = fresh[r];
      }
      std::vector<Table> tables;
      for (TableId t = 0; t < db.table_count(); ++t) {
        Table copy = db.table(t);
        for (EntityRow& row : copy.rows) {
          row.pk = remap[t][row.pk];
          for (TableId j = 0; j < row.fks.size(); ++j)
            if (row.fks[j] != 0) row.fks[j] = remap[j].at(row.fks[j]);
        }
        tables.push_back(std::move(copy));
      }
      const RelationalDatabase relabelled(std::move(tables));
      const HeteroGraph g1 = build_cumulative_graph(db, 12), g2 = build_cumulative_graph(relabelled, 12);
      SageConfig cfg;
      cfg.hidden = 4;
      HeteroSageModel model(TaskKind::kRegression, raw_widths(db), schema_relations(db), 0, cfg, rng);
      randomize(model, rng);
      const NodeFeatures h1 = raw_h0(g1, 0), h2 = raw_h0(g2, 0);
      std::vector<PrimaryKey> pks1, pks2;
      for (const EntityRow& r : db.table(0).rows) {
        pks1.push_back(r.pk);
        pks2.push_back(remap[0][r.pk]);
      }
      const auto a = model.predict(g1, h1, pks1);
      const auto b = model.predict(g2, h2, pks2);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10).scale(1.0));
    }
  }

  TEST_CASE("fitted normalisation makes outputs invariant to column affine maps") {
    const auto db = fixtures::star(5, 3, {{1, 1, 1, 1, 0.5}, {2, 2, 2, 1, 3.0}, {3, 5, 3, 1, -2.0}});
    const HeteroGraph g = build_cumulative_graph(db, 1);
    const NodeFeatures h0 = raw_h0(g, kUsers);
    NodeFeatures shifted = h0;
    for (Matrix& m : shifted.tables) m = (m.array() * 4.0 + 100.0).matrix();
    std::mt19937_64 rng(6);
    SageConfig cfg;
    cfg.hidden = 3;
    HeteroSageModel a(TaskKind::kRegression, raw_widths(db), schema_relations(db), kUsers, cfg, rng);
    randomize(a, rng);
    HeteroSageModel b = a;
    const NodeFeatures* pa[] = {&h0};
    const NodeFeatures* pb[] = {&shifted};
    a.fit_normalization(pa);
    b.fit_normalization(pb);
    const Vector ya = a.forward(g, h0), yb = b.forward(g, shifted);
    for (Eigen::Index i = 0; i < ya.size(); ++i) CHECK(ya(i) == doctest::Approx(yb(i)).epsilon(1e-9));
  }

  TEST_CASE("node init modes set the target width") {
    const auto db = fixtures::star(4, 2, {{1, 1, 1, 1}, {2, 2, 2, 1}, {3, 3, 1, 2}, {4, 1, 2, 2}});
    const HeteroGraph g = build_cumulative_graph(db, 2);
    const FeatureEngineer fe(db, kUsers);
    TaskSpec task{"churn", kUsers, TaskKind::kBinaryClassification, {1}, 1, {}};
    for (PrimaryKey u = 1; u <= 4; ++u) task.labels[{1, u}] = u % 2;
    const TabularDataset ds = build_dataset(fe, task, {1});
    GbdtConfig gc;
    gc.n_rounds = 2;
    gc.min_data_in_leaf = 1;
    const GbdtModel teacher = train_gbdt(ds, gc, 0);
    DistillConfig dc;
    dc.epochs = 1;
    dc.embedding_dim = 6;
    const DistillMlp mlp = train_distill_mlp(ds, teacher, dc);

    const NodeFeatures raw = init_node_features(g, kUsers, NodeInitMode::kRaw, fe, 2);
    const NodeFeatures distilled = init_node_features(g, kUsers, NodeInitMode::kDistilled, fe, 2, &mlp);
    const NodeFeatures pred = init_node_features(g, kUsers, NodeInitMode::kWithPred, fe, 2, nullptr, &teacher);
    CHECK(raw.width(kUsers) == 1);
    CHECK(distilled.width(kUsers) == 7);
    CHECK(pred.width(kUsers) == 2);
    for (const NodeFeatures* h : {&raw, &distilled, &pred}) {
      CHECK(h->width(kProducts) == 1);
      CHECK(h->width(kTx) == 1);
      CHECK(h->tables[kUsers].rightCols(1) == raw.tables[kUsers]);
    }
    // Injected columns are the embedding / prediction of the features at t.
    const auto e3 = mlp.embed(fe.compute(3, 2));
    for (std::size_t k = 0; k < e3.size(); ++k)
      CHECK(distilled.tables[kUsers](2, static_cast<Eigen::Index>(k)) == doctest::Approx(e3[k]).epsilon(1e-12));
    CHECK(pred.tables[kUsers](2, 0) == teacher.predict(fe.compute(3, 2)));
    CHECK_THROWS_AS(init_node_features(g, kUsers, NodeInitMode::kDistilled, fe, 2), std::invalid_argument);
    CHECK(parse_node_init_mode("with-pred") == NodeInitMode::kWithPred);
    CHECK(to_string(NodeInitMode::kDistilled) == "distilled");
    CHECK_THROWS_AS(parse_node_init_mode("bogus"), std::invalid_argument);
  }

  TEST_CASE("graph labels map entities to target offsets") {
    const auto db = fixtures::star(3, 1, {{1, 2, 1, 1}});
    const HeteroGraph snap = build_snapshot_graph(db, 1, 1);
    TaskSpec task{"churn", kUsers, TaskKind::kBinaryClassification, {1}, 1, {}};
    task.labels[{1, 2}] = 1.0;
    const auto labels = graph_labels(snap, task, 1);
    REQUIRE(labels.size() == 1);
    CHECK(labels[0] == std::pair<std::uint32_t, double>{0, 1.0});
    task.labels[{1, 3}] = 0.0;  // user 3 is not in the snapshot
    CHECK_THROWS_AS(graph_labels(snap, task, 1), std::out_of_range);
  }

  TEST_CASE("predict rejects entities outside the graph and mismatched inputs") {
    const auto db = fixtures::star(2, 1, {{1, 1, 1, 1}});
    const HeteroGraph g = build_snapshot_graph(db, 1, 1);
    std::mt19937_64 rng(0);
    HeteroSageModel model(TaskKind::kRegression, raw_widths(db), schema_relations(db), kUsers, {}, rng);
    const NodeFeatures h0 = raw_h0(g, kUsers);
    CHECK(model.predict(g, h0, std::vector<PrimaryKey>{1}).size() == 1);
    CHECK_THROWS_AS(model.predict(g, h0, std::vector<PrimaryKey>{2}), std::out_of_range);
    NodeFeatures wide = h0;
    wide.tables[kUsers] = Matrix::Zero(1, 3);
    CHECK_THROWS_AS(model.forward(g, wide), std::invalid_argument);
    HeteroSageModel no_rel(TaskKind::kRegression, raw_widths(db), {}, kUsers, {}, rng);
    CHECK_THROWS_AS(no_rel.forward(g, h0), std::invalid_argument);
  }

  TEST_CASE("training fits a learnable target and restores the best epoch") {
    // Label: whether the user bought anything in the graph, which needs one hop.
    std::mt19937_64 data_rng(3);
    std::vector<fixtures::TxSpec> txs;
    PrimaryKey pk = 1;
    for (Timestamp t = 0; t < 12; ++t)
      for (PrimaryKey u = 1; u <= 20; ++u)
        if (std::bernoulli_distribution(0.3)(data_rng)) txs.push_back({pk++, u, 1 + u % 3, t, 1.0});
    const auto db = fixtures::star(20, 3, txs);
    std::vector<HeteroGraph> graphs;
    std::vector<GraphSample> samples;
    // Every user is included so users without purchases in the window are negatives.
    std::vector<EntityRef> everyone;
    for (PrimaryKey u = 1; u <= 20; ++u) everyone.push_back({kUsers, u});
    for (Timestamp t = 0; t < 12; ++t) graphs.push_back(build_snapshot_graph(db, t, 1, everyone));
    for (Timestamp t = 0; t < 12; ++t) {
      const HeteroGraph& g = graphs[static_cast<std::size_t>(t)];
      GraphSample s{&g, raw_h0(g, kUsers), t, {}};
      std::vector<int> bought(21, 0);
      for (const auto& tx : txs)
        if (tx.t == t) bought[static_cast<std::size_t>(tx.user)] = 1;
      const auto [first, end] = g.nodes_of(kUsers);
      for (NodeId v = first; v < end; ++v) s.labels.emplace_back(v - first, bought[static_cast<std::size_t>(g.pk(v))]);
      samples.push_back(std::move(s));
    }
    const std::span<const GraphSample> train(samples.data(), 8), val(samples.data() + 8, 4);
    SageConfig cfg;
    cfg.hidden = 8;
    cfg.depth = 1;
    cfg.epochs = 60;
    cfg.learning_rate = 0.02;
    std::mt19937_64 rng(cfg.seed);
    HeteroSageModel model(TaskKind::kBinaryClassification, raw_widths(db), schema_relations(db), kUsers, cfg, rng);
    std::vector<const NodeFeatures*> h0s;
    for (const auto& s : train) h0s.push_back(&s.h0);
    model.fit_normalization(h0s);
    const TrainRun run = train_gnn(model, train, val, cfg);
    REQUIRE(run.epochs.size() == 60);
    CHECK(run.epochs.back().train_loss < run.epochs.front().train_loss);
    CHECK(validation_metric(model, val) == run.epochs[static_cast<std::size_t>(run.best_epoch)].val_metric);
    for (const auto& e : run.epochs) CHECK(e.val_metric <= run.epochs[static_cast<std::size_t>(run.best_epoch)].val_metric);
    CHECK(validation_metric(model, val) > 0.95);
    CHECK(run.mean_epoch_seconds() > 0.0);
    const std::string csv = run.to_csv();
    CHECK(csv.rfind("epoch,train_loss,val_metric,seconds\n", 0) == 0);

    // Same seed, same data: identical parameters.
    std::mt19937_64 rng2(cfg.seed);
    HeteroSageModel again(TaskKind::kBinaryClassification, raw_widths(db), schema_relations(db), kUsers, cfg, rng2);
    again.fit_normalization(h0s);
    train_gnn(again, train, val, cfg);
    CHECK(again.to_json() == model.to_json());

    const HeteroSageModel back = HeteroSageModel::from_json(model.to_json());
    CHECK(back.forward(*val[0].graph, val[0].h0) == model.forward(*val[0].graph, val[0].h0));

    const Matrix injected(static_cast<Eigen::Index>(val[0].graph->count_of(kUsers)), 0);
    std::vector<PrimaryKey> targets{1, 2, 3};
    const TimedPredictions timed = infer_timed(model, *val[0].graph, injected, targets, 3);
    CHECK(timed.predictions == model.predict(*val[0].graph, val[0].h0, targets));
    CHECK(timed.seconds > 0.0);
  }

  TEST_CASE("metric direction") {
    CHECK(metric_improves(TaskKind::kBinaryClassification, 0.8, 0.7));
    CHECK_FALSE(metric_improves(TaskKind::kBinaryClassification, 0.7, 0.7));
    CHECK(metric_improves(TaskKind::kRegression, 0.5, 0.7));
  }
}
