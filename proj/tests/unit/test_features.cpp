#include <doctest.h>

#include "fixtures.hpp"
#include "lightrdl/features.hpp"

using namespace lightrdl;
using fixtures::kProducts;
using fixtures::kTx;
using fixtures::kUsers;

namespace {

// Direct scan over the raw table: per linked table and window, count / sums / means, then recency.
std::vector<double> oracle_features(const RelationalDatabase& db, EntityRef entity, Timestamp t,
                                    const std::vector<Timestamp>& windows) {
  const EntityRow* row = db.find(entity);
  std::vector<double> out(row->features.begin(), row->features.end());
  for (TableId i = 0; i < db.table_count(); ++i) {
    const Table& table = db.table(i);
    if (!table.def.fk_targets().contains(entity.table)) continue;
    const std::size_t d = table.def.feature_dim();
    for (Timestamp w : windows) {
      double count = 0.0;
      std::vector<double> sums(d, 0.0);
      for (const EntityRow& r : table.rows) {
        if (r.fks[entity.table] != entity.pk || r.timestamp > t) continue;
        if (w != 0 && r.timestamp <= t - w) continue;
        count += 1.0;
        for (std::size_t f = 0; f < d; ++f) sums[f] += r.features[f];
      }
      out.push_back(count);
      out.insert(out.end(), sums.begin(), sums.end());
      for (double s : sums) out.push_back(count > 0.0 ? s / count : 0.0);
    }
    Timestamp latest = -1;
    for (const EntityRow& r : table.rows)
      if (r.fks[entity.table] == entity.pk && r.timestamp <= t) latest = std::max(latest, r.timestamp);
    out.push_back(latest < 0 ? static_cast<double>(t + 1) : static_cast<double>(t - latest));
  }
  return out;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("hand-computed user features") {
    const auto db = fixtures::star(2, 1, {{1, 1, 1, 1, 2.0}, {2, 1, 1, 3, 4.0}, {3, 2, 1, 3, 8.0}, {4, 1, 1, 6, 1.0}});
    const FeatureEngineer fe(db, kUsers, FeatureConfig{{2, 0}});
    CHECK(fe.dim() == 1 + 2 * 3 + 1);
    const FeatureVector fv = fe.compute(1, 4);
    // age, [2]: count sum mean, [all]: count sum mean, recency
    CHECK(fv.values == std::vector<double>{21.0, 1.0, 4.0, 4.0, 2.0, 6.0, 3.0, 1.0});
    CHECK(fv.entity == EntityRef{kUsers, 1});
    CHECK(fv.seed_time == 4);
    // No linked rows yet: zero aggregates and recency t + 1.
    CHECK(fe.compute(2, 2).values == std::vector<double>{22.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0});
  }

  TEST_CASE("names line up with values") {
    const auto db = fixtures::star(1, 1, {});
    const FeatureEngineer fe(db, kUsers, FeatureConfig{{1, 0}});
    const auto names = fe.names();
    CHECK(names.size() == fe.dim());
    CHECK(names.front() == "users.age");
    CHECK(names[1] == "transactions[1].count");
    CHECK(names.back() == "transactions.recency");
  }

  TEST_CASE("tables without an fk into the entity contribute nothing") {
    const auto db = fixtures::star(1, 1, {{1, 1, 1, 0}});
    const FeatureEngineer fe(db, kTx);
    CHECK(fe.dim() == 1);
    CHECK(fe.compute(1, 3).values == std::vector<double>{1.0});
  }

  TEST_CASE("unknown entity throws") {
    const auto db = fixtures::star(1, 1, {});
    CHECK_THROWS_AS(FeatureEngineer(db, kUsers).compute(42, 0), std::out_of_range);
    CHECK_THROWS_AS(FeatureEngineer(db, 7), std::out_of_range);
  }

  TEST_CASE("matches the direct scan on random databases") {
    std::mt19937_64 rng(17);
    const std::vector<Timestamp> windows{1, 3, 0};
    for (int trial = 0; trial < 40; ++trial) {
      const auto db = fixtures::random_db(rng, 150);
      for (TableId table = 0; table < db.table_count(); ++table) {
        const FeatureEngineer fe(db, table, FeatureConfig{windows});
        for (const EntityRow& r : db.table(table).rows) {
          for (Timestamp t : {0, 5, 12}) {
            const auto got = fe.compute(r.pk, t).values;
            const auto want = oracle_features(db, {table, r.pk}, t, windows);
            REQUIRE(got.size() == want.size());
            CHECK(got.size() == fe.dim());
            for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
          }
        }
      }
    }
  }

  TEST_CASE("features at t ignore rows after t") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
      const auto db = fixtures::random_db(rng, 150);
      for (Timestamp t : {2, 7}) {
        const RelationalDatabase past = slice_history(db, t);
        for (TableId table = 0; table < db.table_count(); ++table) {
          const FeatureEngineer full(db, table), sliced(past, table);
          for (const EntityRow& r : past.table(table).rows)
            CHECK(full.compute(r.pk, t).values == sliced.compute(r.pk, t).values);
        }
      }
    }
  }

  TEST_CASE("build_dataset pools labeled entities over seed times") {
    const auto db = fixtures::star(3, 1, {{1, 1, 1, 1}, {2, 2, 1, 2}});
    TaskSpec task{"churn", kUsers, TaskKind::kBinaryClassification, {1, 2}, 1, {}};
    task.labels[{1, 1}] = 0.0;
    task.labels[{1, 3}] = 1.0;
    task.labels[{2, 2}] = 1.0;
    const FeatureEngineer fe(db, kUsers);
    const TabularDataset ds = build_dataset(fe, task, {1, 2});
    REQUIRE(ds.size() == 3);
    CHECK(ds.labels == std::vector<double>{0.0, 1.0, 1.0});
    CHECK(ds.rows[1].entity.pk == 3);
    CHECK(ds.rows[2].seed_time == 2);
    CHECK(ds.dim() == fe.dim());
    CHECK(engineer_features(db, {kUsers, 2}, 2).values == fe.compute(2, 2).values);
    CHECK(build_dataset(fe, task, {7}).size() == 0);
    (void)kProducts;
  }
}
