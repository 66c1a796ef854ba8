#pragma once

#include <string>
#include <vector>

#include "lightrdl/relational_store.hpp"
#include "lightrdl/task.hpp"

namespace lightrdl {

/// Lag windows in ticks; 0 stands for the whole history.
struct FeatureConfig {
  std::vector<Timestamp> windows{1, 4, 16, 0};

  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  EntityRef entity;
  Timestamp seed_time = 0;
};

/// Temporal aggregates of the rows that reference an entity, computed from rows with
/// timestamp <= t only. Layout: the entity's own features, then for every table
/// holding an fk into the entity table and every window: count, per-feature sums,
/// per-feature means; then ticks since the most recent linked row (t + 1 if none).
class FeatureEngineer {
 public:
  FeatureEngineer(const RelationalDatabase& db, TableId entity_table, FeatureConfig config = {});

  std::size_t dim() const { return dim_; }
  std::vector<std::string> names() const;
  /// Throws std::out_of_range for an unknown entity.
  FeatureVector compute(PrimaryKey pk, Timestamp t) const;

 private:
  struct LinkedRows {
    TableId table;
    std::size_t feature_dim;
    // Per entity row: timestamps ascending and prefix sums ((n + 1) x feature_dim).
    std::vector<std::vector<Timestamp>> times;
    std::vector<std::vector<double>> prefix;
  };

  const RelationalDatabase& db_;
  TableId entity_table_;
  FeatureConfig config_;
  std::vector<LinkedRows> linked_;
  std::size_t dim_ = 0;
};

FeatureVector engineer_features(const RelationalDatabase& db, EntityRef entity, Timestamp t,
                                const FeatureConfig& config = {});

struct TabularDataset {
  TaskKind kind = TaskKind::kBinaryClassification;
  std::vector<FeatureVector> rows;
  std::vector<double> labels;

  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().values.size(); }
};

/// Feature rows for every labeled entity at each of the given seed times.
TabularDataset build_dataset(const FeatureEngineer& fe, const TaskSpec& task,
                             const std::vector<Timestamp>& seed_times);

}  // namespace lightrdl
