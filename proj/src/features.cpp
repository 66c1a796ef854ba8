#include "lightrdl/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace lightrdl {

FeatureEngineer::FeatureEngineer(const RelationalDatabase& db, TableId entity_table, FeatureConfig config)
    : db_(db), entity_table_(entity_table), config_(std::move(config)) {
  if (entity_table >= db.table_count()) throw std::out_of_range("feature engineer: unknown entity table");
  const std::size_t n_entities = db.table(entity_table).rows.size();
  for (TableId i = 0; i < db.table_count(); ++i) {
    const Table& table = db.table(i);
    if (!table.def.fk_targets().contains(entity_table)) continue;
    LinkedRows linked{i, table.def.feature_dim(), {}, {}};
    linked.times.resize(n_entities);
    linked.prefix.resize(n_entities);
    const std::size_t d = linked.feature_dim;
    for (auto& p : linked.prefix) p.assign(d, 0.0);
    for (std::size_t r : db.time_order(i)) {
      const EntityRow& row = table.rows[r];
      const PrimaryKey fk = row.fks[entity_table];
      if (fk == 0) continue;
      auto target = db.row_index({entity_table, fk});
      if (!target) continue;
      linked.times[*target].push_back(row.timestamp);
      auto& prefix = linked.prefix[*target];
      const std::size_t base = prefix.size() - d;
      for (std::size_t f = 0; f < d; ++f) prefix.push_back(prefix[base + f] + row.features[f]);
    }
    linked_.push_back(std::move(linked));
  }
  dim_ = db.table(entity_table).def.feature_dim();
  for (const auto& l : linked_) dim_ += config_.windows.size() * (1 + 2 * l.feature_dim) + 1;
}

std::vector<std::string> FeatureEngineer::names() const {
  std::vector<std::string> out;
  const TableDef& def = db_.table(entity_table_).def;
  for (const auto& c : def.feature_columns) out.push_back(def.name + "." + c);
  for (const auto& l : linked_) {
    const TableDef& ldef = db_.table(l.table).def;
    for (Timestamp w : config_.windows) {
      const std::string tag = ldef.name + "[" + (w == 0 ? std::string("all") : std::to_string(w)) + "]";
      out.push_back(tag + ".count");
      for (const auto& c : ldef.feature_columns) out.push_back(tag + ".sum_" + c);
      for (const auto& c : ldef.feature_columns) out.push_back(tag + ".mean_" + c);
    }
    out.push_back(ldef.name + ".recency");
  }
  return out;
}

FeatureVector FeatureEngineer::compute(PrimaryKey pk, Timestamp t) const {
  auto row_idx = db_.row_index({entity_table_, pk});
  if (!row_idx) throw std::out_of_range("feature engineer: unknown entity " + std::to_string(pk));
  const EntityRow& row = db_.table(entity_table_).rows[*row_idx];
  FeatureVector fv{{}, {entity_table_, pk}, t};
  fv.values.reserve(dim_);
  fv.values.insert(fv.values.end(), row.features.begin(), row.features.end());
  for (const auto& l : linked_) {
    const auto& times = l.times[*row_idx];
    const auto& prefix = l.prefix[*row_idx];
    const std::size_t d = l.feature_dim;
    const auto upto = [&](Timestamp limit) {
      return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), limit) - times.begin());
    };
    const std::size_t hi = upto(t);
    for (Timestamp w : config_.windows) {
      const std::size_t lo = w == 0 ? 0 : upto(t - w);
      const double count = static_cast<double>(hi - lo);
      fv.values.push_back(count);
      for (std::size_t f = 0; f < d; ++f) fv.values.push_back(prefix[hi * d + f] - prefix[lo * d + f]);
      for (std::size_t f = 0; f < d; ++f)
        fv.values.push_back(hi > lo ? (prefix[hi * d + f] - prefix[lo * d + f]) / count : 0.0);
    }
    fv.values.push_back(hi == 0 ? static_cast<double>(t + 1) : static_cast<double>(t - times[hi - 1]));
  }
  return fv;
}

FeatureVector engineer_features(const RelationalDatabase& db, EntityRef entity, Timestamp t,
                                const FeatureConfig& config) {
  return FeatureEngineer(db, entity.table, config).compute(entity.pk, t);
}

TabularDataset build_dataset(const FeatureEngineer& fe, const TaskSpec& task,
                             const std::vector<Timestamp>& seed_times) {
  TabularDataset ds;
  ds.kind = task.kind;
  for (Timestamp t : seed_times) {
    for (const auto& [pk, label] : task.labels_at(t)) {
      ds.rows.push_back(fe.compute(pk, t));
      ds.labels.push_back(label);
    }
  }
  return ds;
}

}  // namespace lightrdl
