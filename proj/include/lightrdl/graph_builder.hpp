#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lightrdl/relational_store.hpp"

namespace lightrdl {

using NodeId = std::uint32_t;

/// (φ(v1), φ(v2)) for an edge v1 -> v2 where v2 holds the fk into v1.
struct EdgeType {
  TableId src = 0;
  TableId dst = 0;

  auto operator<=>(const EdgeType&) const = default;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint32_t type = 0;  // index into HeteroGraph::edge_types()
};

/// A message channel for message passing. Forward channels carry v1 -> v2 along
/// an edge type; reverse channels carry v2 -> v1 and are flagged, not new types.
struct Relation {
  EdgeType type;
  bool reverse = false;
  TableId from = 0;
  TableId to = 0;
  /// (receiver, sender) pairs, as node offsets local to their tables, sorted.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
};

class HeteroGraph {
 public:
  std::size_t node_count() const { return pks_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t table_count() const { return type_offsets_.empty() ? 0 : type_offsets_.size() - 1; }

  /// Nodes of a table occupy the dense id range [first, last).
  std::pair<NodeId, NodeId> nodes_of(TableId table) const {
    return {type_offsets_[table], type_offsets_[table + 1]};
  }
  std::size_t count_of(TableId table) const { return type_offsets_[table + 1] - type_offsets_[table]; }
  std::size_t feature_dim(TableId table) const { return feature_dims_[table]; }

  TableId table_of(NodeId v) const;
  PrimaryKey pk(NodeId v) const { return pks_[v]; }
  Timestamp timestamp(NodeId v) const { return timestamps_[v]; }
  EntityRef entity(NodeId v) const { return {table_of(v), pks_[v]}; }
  std::span<const double> features(NodeId v) const;
  /// Row-major features of all nodes of a table.
  std::span<const double> table_features(TableId table) const { return features_[table]; }

  std::optional<NodeId> node_id(EntityRef ref) const;

  std::span<const Edge> edges() const { return edges_; }
  std::span<const EdgeType> edge_types() const { return edge_types_; }
  std::span<const Relation> relations() const { return relations_; }

  double build_seconds() const { return build_seconds_; }

  /// Line-oriented text: nodes sorted, then edges sorted. Used for byte comparisons.
  std::string canonical() const;
  /// Rough heap footprint in bytes.
  std::size_t memory_bytes() const;

 private:
  friend class GraphAssembler;

  std::vector<NodeId> type_offsets_;
  std::vector<std::size_t> feature_dims_;
  std::vector<PrimaryKey> pks_;
  std::vector<Timestamp> timestamps_;
  std::vector<std::vector<double>> features_;
  std::vector<Edge> edges_;
  std::vector<EdgeType> edge_types_;
  std::vector<Relation> relations_;
  double build_seconds_ = 0.0;
};

/// G(V≤t): every row with timestamp <= t (static rows included) and every fk match
/// (v1, v2) with t_{v2} <= t_{v1}. Static endpoints satisfy the time condition.
HeteroGraph build_cumulative_graph(const RelationalDatabase& db, Timestamp t);

/// G(V_t) over the half-open window (t - window, t]: dynamic rows inside it, static
/// rows linked to them, and every entity in `include`. Edges are all fk matches
/// among the selected nodes.
HeteroGraph build_snapshot_graph(const RelationalDatabase& db, Timestamp t, Timestamp window,
                                 std::span<const EntityRef> include = {});

/// Type of the edge src -> dst. Throws std::out_of_range when there is no such edge.
EdgeType edge_type_of(const HeteroGraph& g, NodeId src, NodeId dst);

struct GraphStats {
  std::vector<std::size_t> nodes_per_table;
  std::vector<std::pair<EdgeType, std::size_t>> edges_per_type;
  std::size_t total_nodes = 0;
  std::size_t total_edges = 0;
  double build_seconds = 0.0;
};

GraphStats graph_stats(const HeteroGraph& g);

}  // namespace lightrdl
