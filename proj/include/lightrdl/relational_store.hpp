#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lightrdl {

using Timestamp = std::int64_t;
using PrimaryKey = std::int64_t;
using TableId = std::size_t;

/// Timestamp carried by rows of static tables. A static row is present at every time.
inline constexpr Timestamp kStaticTimestamp = -1;

/// One row of a table: primary key, one foreign key slot per table (0 means no
/// link), numeric features and the time the row appears.
struct EntityRow {
  PrimaryKey pk = 0;
  std::vector<PrimaryKey> fks;
  std::vector<double> features;
  Timestamp timestamp = 0;

  bool operator==(const EntityRow&) const = default;
};

struct TableDef {
  std::string name;
  std::string pk_column = "id";
  std::string timestamp_column;  // empty for static tables
  std::vector<std::string> feature_columns;
  std::map<std::string, TableId> fk_columns;  // column name -> referenced table
  bool is_static = false;

  std::size_t feature_dim() const { return feature_columns.size(); }
  std::set<TableId> fk_targets() const;
  /// Column name holding the fk into `target`, or empty.
  std::string fk_column_for(TableId target) const;

  bool operator==(const TableDef&) const = default;
};

struct Table {
  TableDef def;
  std::vector<EntityRow> rows;
};

struct EntityRef {
  TableId table = 0;
  PrimaryKey pk = 0;

  auto operator<=>(const EntityRef&) const = default;
};

using Link = std::pair<TableId, TableId>;

enum class ViolationKind {
  kPkNonPositive,
  kPkDuplicate,
  kFkArity,
  kFkUndeclared,
  kDanglingFk,
  kFeatureArity,
  kNonFiniteFeature,
  kNegativeTimestamp,
  kStaticTimestamp,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  TableId table = 0;
  std::size_t row = 0;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

/// Typed tables plus the derived entity index and link set. Immutable once built.
class RelationalDatabase {
 public:
  RelationalDatabase() = default;
  explicit RelationalDatabase(std::vector<Table> tables);

  std::size_t table_count() const { return tables_.size(); }
  const Table& table(TableId id) const { return tables_.at(id); }
  std::span<const Table> tables() const { return tables_; }
  std::optional<TableId> table_id(std::string_view name) const;
  TableId require_table(std::string_view name) const;

  const EntityRow* find(EntityRef ref) const;
  std::optional<std::size_t> row_index(EntityRef ref) const;

  /// Pairs (i, j) such that some row of table i holds a resolving fk into table j.
  const std::set<Link>& links() const { return links_; }

  /// Row indices of a table ordered by (timestamp, pk).
  std::span<const std::size_t> time_order(TableId id) const { return time_order_.at(id); }

  /// Largest dynamic timestamp, or kStaticTimestamp when there is none.
  Timestamp max_timestamp() const { return max_timestamp_; }
  std::size_t total_rows() const;

 private:
  friend RelationalDatabase slice_history(const RelationalDatabase&, Timestamp,
                                          ValidationReport*);
  void build_indices();

  std::vector<Table> tables_;
  std::vector<std::unordered_map<PrimaryKey, std::size_t>> index_;
  std::vector<std::vector<std::size_t>> time_order_;
  std::set<Link> links_;
  Timestamp max_timestamp_ = kStaticTimestamp;
};

/// Checks every database invariant. Never throws.
ValidationReport validate(const RelationalDatabase& db);

/// Keeps rows with timestamp <= t (static rows always). Schema and links are kept;
/// fks left dangling by the cut are zeroed and, if `zeroed` is given, recorded there.
RelationalDatabase slice_history(const RelationalDatabase& db, Timestamp t,
                                 ValidationReport* zeroed = nullptr);

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the schema document (see README for the format).
std::vector<TableDef> parse_schema(std::string_view json_text);
std::string schema_to_json(std::span<const TableDef> defs);

/// Loads `<data_dir>/<table name>.csv` for every table in the schema and validates.
RelationalDatabase load_database(const std::filesystem::path& schema_path,
                                 const std::filesystem::path& data_dir);
RelationalDatabase load_database_from_schema(std::vector<TableDef> defs,
                                             const std::filesystem::path& data_dir);

/// Writes schema.json and one CSV per table. Reals use 17 significant digits.
void save_database(const RelationalDatabase& db, const std::filesystem::path& dir);

}  // namespace lightrdl
