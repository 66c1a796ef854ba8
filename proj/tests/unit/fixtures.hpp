#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lightrdl/relational_store.hpp"

namespace fixtures {

using namespace lightrdl;

inline constexpr TableId kUsers = 0;
inline constexpr TableId kProducts = 1;
inline constexpr TableId kTx = 2;

inline TableDef users_def() { return {"users", "id", "", {"age"}, {}, true}; }
inline TableDef products_def() { return {"products", "id", "", {"price"}, {}, true}; }
inline TableDef tx_def() {
  return {"transactions", "id", "t", {"amount"}, {{"user_id", kUsers}, {"product_id", kProducts}}, false};
}

struct TxSpec {
  PrimaryKey pk, user, product;
  Timestamp t;
  double amount = 1.0;
};

/// users/products/transactions star with `n_users` users and `n_products` products.
inline RelationalDatabase star(int n_users, int n_products, const std::vector<TxSpec>& txs) {
  Table users{users_def(), {}}, products{products_def(), {}}, tx{tx_def(), {}};
  for (int u = 1; u <= n_users; ++u) users.rows.push_back({u, {0, 0, 0}, {20.0 + u}, kStaticTimestamp});
  for (int p = 1; p <= n_products; ++p) products.rows.push_back({p, {0, 0, 0}, {1.5 * p}, kStaticTimestamp});
  for (const TxSpec& s : txs) tx.rows.push_back({s.pk, {s.user, s.product, 0}, {s.amount}, s.t});
  return RelationalDatabase({users, products, tx});
}

/// Random schema-valid database: 1-2 static tables then 1-3 dynamic tables, each
/// with fks into earlier tables (some left 0), at most `max_rows` rows in total.
inline RelationalDatabase random_db(std::mt19937_64& rng, int max_rows = 200) {
  std::uniform_int_distribution<int> n_static(1, 2), n_dynamic(1, 3);
  const int ns = n_static(rng);
  const int nd = n_dynamic(rng);
  const int n = ns + nd;
  std::vector<Table> tables;
  std::uniform_real_distribution<double> feat(-5.0, 5.0);
  std::uniform_int_distribution<Timestamp> ts(0, 12);
  const int per_table = std::max(1, max_rows / n);
  std::uniform_int_distribution<int> rows_dist(1, per_table);
  std::vector<int> row_counts;
  for (int i = 0; i < n; ++i) {
    TableDef def;
    def.name = "t" + std::to_string(i);
    def.is_static = i < ns;
    def.timestamp_column = def.is_static ? "" : "ts";
    const int d = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int f = 0; f < d; ++f) def.feature_columns.push_back("f" + std::to_string(f));
    for (int j = 0; j < i; ++j)
      if (std::bernoulli_distribution(0.7)(rng)) def.fk_columns["fk" + std::to_string(j)] = static_cast<TableId>(j);
    tables.push_back({def, {}});
    row_counts.push_back(rows_dist(rng));
  }
  for (int i = 0; i < n; ++i) {
    Table& table = tables[static_cast<std::size_t>(i)];
    // Sparse, shuffled pks so node order is not insertion order.
    std::vector<PrimaryKey> pks;
    for (int r = 0; r < row_counts[static_cast<std::size_t>(i)]; ++r) pks.push_back(3 * r + 1 + (r % 2));
    std::shuffle(pks.begin(), pks.end(), rng);
    for (PrimaryKey pk : pks) {
      EntityRow row;
      row.pk = pk;
      row.fks.assign(static_cast<std::size_t>(n), 0);
      for (const auto& [col, target] : table.def.fk_columns) {
        const int target_rows = row_counts[target];
        std::uniform_int_distribution<int> pick(-1, target_rows - 1);
        const int k = pick(rng);
        if (k >= 0) row.fks[target] = 3 * k + 1 + (k % 2);
      }
      for (std::size_t f = 0; f < table.def.feature_dim(); ++f) row.features.push_back(feat(rng));
      row.timestamp = table.def.is_static ? kStaticTimestamp : ts(rng);
      table.rows.push_back(std::move(row));
    }
  }
  return RelationalDatabase(std::move(tables));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(LIGHTRDL_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
