#include "lightrdl/graph_builder.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "csv.hpp"
#include "lightrdl/timing.hpp"

namespace lightrdl {

TableId HeteroGraph::table_of(NodeId v) const {
  auto it = std::upper_bound(type_offsets_.begin(), type_offsets_.end(), v);
  return static_cast<TableId>(it - type_offsets_.begin()) - 1;
}

std::span<const double> HeteroGraph::features(NodeId v) const {
  const TableId t = table_of(v);
  const std::size_t d = feature_dims_[t];
  return std::span<const double>(features_[t]).subspan((v - type_offsets_[t]) * d, d);
}

std::optional<NodeId> HeteroGraph::node_id(EntityRef ref) const {
  if (ref.table >= table_count()) return std::nullopt;
  const auto first = pks_.begin() + type_offsets_[ref.table];
  const auto last = pks_.begin() + type_offsets_[ref.table + 1];
  auto it = std::lower_bound(first, last, ref.pk);
  if (it == last || *it != ref.pk) return std::nullopt;
  return static_cast<NodeId>(it - pks_.begin());
}

std::string HeteroGraph::canonical() const {
  std::string out = "lightrdl-graph v1\n";
  for (NodeId v = 0; v < node_count(); ++v) {
    out += "node " + std::to_string(table_of(v)) + ' ' + std::to_string(pks_[v]) + ' ' +
           std::to_string(timestamps_[v]);
    for (double x : features(v)) {
      out += ' ';
      out += csv::format_real(x);
    }
    out += '\n';
  }
  for (const Edge& e : edges_) {
    const EntityRef a = entity(e.src);
    const EntityRef b = entity(e.dst);
    out += "edge " + std::to_string(a.table) + ' ' + std::to_string(a.pk) + ' ' + std::to_string(b.table) +
           ' ' + std::to_string(b.pk) + '\n';
  }
  return out;
}

std::size_t HeteroGraph::memory_bytes() const {
  std::size_t bytes = type_offsets_.size() * sizeof(NodeId) + pks_.size() * sizeof(PrimaryKey) +
                      timestamps_.size() * sizeof(Timestamp) + edges_.size() * sizeof(Edge);
  for (const auto& f : features_) bytes += f.size() * sizeof(double);
  for (const auto& r : relations_) bytes += r.pairs.size() * sizeof(r.pairs[0]);
  return bytes;
}

/// Turns per-table row selections into a HeteroGraph.
class GraphAssembler {
 public:
  explicit GraphAssembler(const RelationalDatabase& db) : db_(db), selected_(db.table_count()) {}

  void select(TableId table, std::size_t row) { selected_[table].push_back(row); }

  template <typename EdgePredicate>
  HeteroGraph assemble(EdgePredicate&& keep_edge) {
    HeteroGraph g;
    const std::size_t n_tables = db_.table_count();
    g.type_offsets_.assign(n_tables + 1, 0);
    g.feature_dims_.resize(n_tables);
    g.features_.resize(n_tables);

    std::size_t total = 0;
    for (TableId t = 0; t < n_tables; ++t) {
      auto& rows = selected_[t];
      const auto& table_rows = db_.table(t).rows;
      std::sort(rows.begin(), rows.end(),
                [&](std::size_t a, std::size_t b) { return table_rows[a].pk < table_rows[b].pk; });
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      total += rows.size();
    }
    g.pks_.reserve(total);
    g.timestamps_.reserve(total);
    for (TableId t = 0; t < n_tables; ++t) {
      const Table& table = db_.table(t);
      g.type_offsets_[t] = static_cast<NodeId>(g.pks_.size());
      g.feature_dims_[t] = table.def.feature_dim();
      auto& feats = g.features_[t];
      feats.reserve(selected_[t].size() * table.def.feature_dim());
      for (std::size_t r : selected_[t]) {
        const EntityRow& row = table.rows[r];
        g.pks_.push_back(row.pk);
        g.timestamps_.push_back(row.timestamp);
        feats.insert(feats.end(), row.features.begin(), row.features.end());
      }
    }
    g.type_offsets_[n_tables] = static_cast<NodeId>(g.pks_.size());

    // v2 (referencing, table i) -> v1 (referenced, table j) gives edge v1 -> v2 of type (j, i).
    std::map<EdgeType, std::uint32_t> type_index;
    std::vector<std::pair<EdgeType, std::pair<NodeId, NodeId>>> found;
    for (TableId i = 0; i < n_tables; ++i) {
      const Table& table = db_.table(i);
      const auto targets = table.def.fk_targets();
      if (targets.empty()) continue;
      for (std::size_t k = 0; k < selected_[i].size(); ++k) {
        const EntityRow& v2 = table.rows[selected_[i][k]];
        const NodeId v2_id = g.type_offsets_[i] + static_cast<NodeId>(k);
        for (TableId j : targets) {
          const PrimaryKey fk = v2.fks[j];
          if (fk == 0) continue;
          auto v1_id = g.node_id({j, fk});
          if (!v1_id) continue;
          const EntityRow& v1 = db_.table(j).rows[selected_[j][*v1_id - g.type_offsets_[j]]];
          if (!keep_edge(v1, v2)) continue;
          found.push_back({EdgeType{j, i}, {*v1_id, v2_id}});
        }
      }
    }
    for (const auto& f : found) type_index.emplace(f.first, 0);
    std::uint32_t next = 0;
    for (auto& [type, idx] : type_index) {
      idx = next++;
      g.edge_types_.push_back(type);
    }
    g.edges_.reserve(found.size());
    for (const auto& [type, ends] : found) g.edges_.push_back({ends.first, ends.second, type_index[type]});
    std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& a, const Edge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });

    for (std::uint32_t k = 0; k < g.edge_types_.size(); ++k) {
      const EdgeType type = g.edge_types_[k];
      Relation fwd{type, false, type.src, type.dst, {}};
      Relation rev{type, true, type.dst, type.src, {}};
      for (const Edge& e : g.edges_) {
        if (e.type != k) continue;
        const auto src_local = e.src - g.type_offsets_[type.src];
        const auto dst_local = e.dst - g.type_offsets_[type.dst];
        fwd.pairs.emplace_back(dst_local, src_local);
        rev.pairs.emplace_back(src_local, dst_local);
      }
      std::sort(fwd.pairs.begin(), fwd.pairs.end());
      std::sort(rev.pairs.begin(), rev.pairs.end());
      g.relations_.push_back(std::move(fwd));
      g.relations_.push_back(std::move(rev));
    }
    return g;
  }

  static void stamp(HeteroGraph& g, double seconds) { g.build_seconds_ = seconds; }

 private:
  const RelationalDatabase& db_;
  std::vector<std::vector<std::size_t>> selected_;
};

HeteroGraph build_cumulative_graph(const RelationalDatabase& db, Timestamp t) {
  Stopwatch clock;
  GraphAssembler assembler(db);
  for (TableId i = 0; i < db.table_count(); ++i) {
    const auto& rows = db.table(i).rows;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (rows[r].timestamp <= t) assembler.select(i, r);
  }
  HeteroGraph g = assembler.assemble([](const EntityRow& v1, const EntityRow& v2) {
    if (v1.timestamp == kStaticTimestamp || v2.timestamp == kStaticTimestamp) return true;
    return v2.timestamp <= v1.timestamp;
  });
  GraphAssembler::stamp(g, clock.seconds());
  return g;
}

HeteroGraph build_snapshot_graph(const RelationalDatabase& db, Timestamp t, Timestamp window,
                                 std::span<const EntityRef> include) {
  if (window < 1) throw std::invalid_argument("snapshot window must be >= 1");
  Stopwatch clock;
  GraphAssembler assembler(db);
  const std::size_t n_tables = db.table_count();
  // Dynamic rows inside (t - window, t], found through the time-ordered index.
  std::vector<std::vector<std::size_t>> in_window(n_tables);
  for (TableId i = 0; i < n_tables; ++i) {
    const Table& table = db.table(i);
    if (table.def.is_static) continue;
    const auto order = db.time_order(i);
    auto first = std::partition_point(order.begin(), order.end(),
                                      [&](std::size_t r) { return table.rows[r].timestamp <= t - window; });
    auto last = std::partition_point(first, order.end(),
                                     [&](std::size_t r) { return table.rows[r].timestamp <= t; });
    in_window[i].assign(first, last);
    for (std::size_t r : in_window[i]) assembler.select(i, r);
  }
  // Static rows referenced by an included dynamic row.
  for (TableId i = 0; i < n_tables; ++i) {
    for (std::size_t r : in_window[i]) {
      const EntityRow& row = db.table(i).rows[r];
      for (TableId j = 0; j < row.fks.size(); ++j) {
        if (row.fks[j] == 0 || !db.table(j).def.is_static) continue;
        if (auto s = db.row_index({j, row.fks[j]})) assembler.select(j, *s);
      }
    }
  }
  // Static rows referencing an included dynamic row.
  for (TableId s = 0; s < n_tables; ++s) {
    const Table& table = db.table(s);
    if (!table.def.is_static) continue;
    std::vector<TableId> dynamic_targets;
    for (TableId j : table.def.fk_targets())
      if (!db.table(j).def.is_static && !in_window[j].empty()) dynamic_targets.push_back(j);
    if (dynamic_targets.empty()) continue;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      for (TableId j : dynamic_targets) {
        const PrimaryKey fk = table.rows[r].fks[j];
        if (fk == 0) continue;
        auto target = db.find({j, fk});
        if (target && target->timestamp > t - window && target->timestamp <= t) assembler.select(s, r);
      }
    }
  }
  for (const EntityRef& ref : include) {
    if (auto r = db.row_index(ref)) assembler.select(ref.table, *r);
  }
  HeteroGraph g = assembler.assemble([](const EntityRow&, const EntityRow&) { return true; });
  GraphAssembler::stamp(g, clock.seconds());
  return g;
}

EdgeType edge_type_of(const HeteroGraph& g, NodeId src, NodeId dst) {
  const auto edges = g.edges();
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{src, dst}, [](const Edge& e, const auto& key) {
    return e.src != key.first ? e.src < key.first : e.dst < key.second;
  });
  if (it == edges.end() || it->src != src || it->dst != dst)
    throw std::out_of_range("no edge " + std::to_string(src) + " -> " + std::to_string(dst));
  return g.edge_types()[it->type];
}

GraphStats graph_stats(const HeteroGraph& g) {
  GraphStats stats;
  for (TableId t = 0; t < g.table_count(); ++t) stats.nodes_per_table.push_back(g.count_of(t));
  for (const EdgeType& type : g.edge_types()) stats.edges_per_type.emplace_back(type, 0);
  for (const Edge& e : g.edges()) ++stats.edges_per_type[e.type].second;
  stats.total_nodes = g.node_count();
  stats.total_edges = g.edge_count();
  stats.build_seconds = g.build_seconds();
  return stats;
}

}  // namespace lightrdl
