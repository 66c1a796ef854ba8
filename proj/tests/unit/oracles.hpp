#pragma once

// Brute-force reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <set>
#include <tuple>
#include <vector>

#include "lightrdl/graph_builder.hpp"

namespace oracles {

using namespace lightrdl;

using EdgeKey = std::tuple<TableId, PrimaryKey, TableId, PrimaryKey>;

struct OracleNode {
  TableId table;
  const EntityRow* row;
};

inline std::set<EntityRef> node_set(const HeteroGraph& g) {
  std::set<EntityRef> out;
  for (NodeId v = 0; v < g.node_count(); ++v) out.insert(g.entity(v));
  return out;
}

inline std::set<EdgeKey> edge_set(const HeteroGraph& g) {
  std::set<EdgeKey> out;
  for (const Edge& e : g.edges()) {
    const EntityRef a = g.entity(e.src), b = g.entity(e.dst);
    out.emplace(a.table, a.pk, b.table, b.pk);
  }
  return out;
}

// Every ordered pair of selected rows where the second holds the first's pk as its fk.
inline std::set<EdgeKey> oracle_edges(const std::vector<OracleNode>& nodes, bool time_rule) {
  std::set<EdgeKey> out;
  for (const OracleNode& v1 : nodes)
    for (const OracleNode& v2 : nodes) {
      if (v2.row->fks[v1.table] != v1.row->pk) continue;
      const bool is_static = v1.row->timestamp == kStaticTimestamp || v2.row->timestamp == kStaticTimestamp;
      if (time_rule && !is_static && v2.row->timestamp > v1.row->timestamp) continue;
      out.emplace(v1.table, v1.row->pk, v2.table, v2.row->pk);
    }
  return out;
}

inline std::vector<OracleNode> oracle_cumulative_nodes(const RelationalDatabase& db, Timestamp t) {
  std::vector<OracleNode> out;
  for (TableId i = 0; i < db.table_count(); ++i)
    for (const EntityRow& r : db.table(i).rows)
      if (db.table(i).def.is_static || r.timestamp <= t) out.push_back({i, &r});
  return out;
}

inline std::vector<OracleNode> oracle_snapshot_nodes(const RelationalDatabase& db, Timestamp t, Timestamp w,
                                              const std::vector<EntityRef>& include) {
  std::vector<OracleNode> window, out;
  for (TableId i = 0; i < db.table_count(); ++i)
    for (const EntityRow& r : db.table(i).rows)
      if (!db.table(i).def.is_static && r.timestamp > t - w && r.timestamp <= t) window.push_back({i, &r});
  out = window;
  for (TableId i = 0; i < db.table_count(); ++i) {
    if (!db.table(i).def.is_static) continue;
    for (const EntityRow& s : db.table(i).rows) {
      bool keep = std::find(include.begin(), include.end(), EntityRef{i, s.pk}) != include.end();
      for (const OracleNode& d : window)
        keep = keep || d.row->fks[i] == s.pk || s.fks[d.table] == d.row->pk;
      if (keep) out.push_back({i, &s});
    }
  }
  for (const EntityRef& ref : include)
    if (!db.table(ref.table).def.is_static) {
      const EntityRow* r = db.find(ref);
      bool present = false;
      for (const OracleNode& n : out) present = present || (n.table == ref.table && n.row->pk == ref.pk);
      if (r && !present) out.push_back({ref.table, r});
    }
  return out;
}

inline std::set<EntityRef> refs(const std::vector<OracleNode>& nodes) {
  std::set<EntityRef> out;
  for (const OracleNode& n : nodes) out.insert({n.table, n.row->pk});
  return out;
}


// Pairwise AUC with integer win counts: 2 per strict win, 1 per tie.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<double>& y) {
  unsigned long long twice = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1.0) ++pos; else ++neg;
    if (y[i] != 1.0) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0.0) continue;
      if (s[i] > s[j]) twice += 2;
      else if (s[i] == s[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace oracles
