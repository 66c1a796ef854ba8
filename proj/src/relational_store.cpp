#include "lightrdl/relational_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"

namespace lightrdl {

using nlohmann::json;

std::set<TableId> TableDef::fk_targets() const {
  std::set<TableId> out;
  for (const auto& [col, target] : fk_columns) out.insert(target);
  return out;
}

std::string TableDef::fk_column_for(TableId target) const {
  for (const auto& [col, t] : fk_columns)
    if (t == target) return col;
  return {};
}

RelationalDatabase::RelationalDatabase(std::vector<Table> tables) : tables_(std::move(tables)) {
  build_indices();
  for (TableId i = 0; i < tables_.size(); ++i) {
    for (const auto& row : tables_[i].rows) {
      for (TableId j = 0; j < row.fks.size() && j < tables_.size(); ++j) {
        if (row.fks[j] != 0 && index_[j].contains(row.fks[j])) links_.emplace(i, j);
      }
    }
  }
}

void RelationalDatabase::build_indices() {
  index_.assign(tables_.size(), {});
  time_order_.assign(tables_.size(), {});
  max_timestamp_ = kStaticTimestamp;
  for (TableId i = 0; i < tables_.size(); ++i) {
    const auto& rows = tables_[i].rows;
    auto& idx = index_[i];
    idx.reserve(rows.size());
    auto& order = time_order_[i];
    order.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      idx.emplace(rows[r].pk, r);  // first occurrence wins; duplicates are reported by validate
      order[r] = r;
      if (!tables_[i].def.is_static) max_timestamp_ = std::max(max_timestamp_, rows[r].timestamp);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (rows[a].timestamp != rows[b].timestamp) return rows[a].timestamp < rows[b].timestamp;
      if (rows[a].pk != rows[b].pk) return rows[a].pk < rows[b].pk;
      return a < b;
    });
  }
}

std::optional<TableId> RelationalDatabase::table_id(std::string_view name) const {
  for (TableId i = 0; i < tables_.size(); ++i)
    if (tables_[i].def.name == name) return i;
  return std::nullopt;
}

TableId RelationalDatabase::require_table(std::string_view name) const {
  auto id = table_id(name);
  if (!id) throw std::out_of_range("unknown table '" + std::string(name) + "'");
  return *id;
}

std::optional<std::size_t> RelationalDatabase::row_index(EntityRef ref) const {
  if (ref.table >= index_.size()) return std::nullopt;
  auto it = index_[ref.table].find(ref.pk);
  if (it == index_[ref.table].end()) return std::nullopt;
  return it->second;
}

const EntityRow* RelationalDatabase::find(EntityRef ref) const {
  auto r = row_index(ref);
  return r ? &tables_[ref.table].rows[*r] : nullptr;
}

std::size_t RelationalDatabase::total_rows() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.rows.size();
  return n;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kPkNonPositive: return "pk-non-positive";
    case ViolationKind::kPkDuplicate: return "pk-duplicate";
    case ViolationKind::kFkArity: return "fk-arity";
    case ViolationKind::kFkUndeclared: return "fk-undeclared";
    case ViolationKind::kDanglingFk: return "dangling-fk";
    case ViolationKind::kFeatureArity: return "feature-arity";
    case ViolationKind::kNonFiniteFeature: return "non-finite-feature";
    case ViolationKind::kNegativeTimestamp: return "negative-timestamp";
    case ViolationKind::kStaticTimestamp: return "static-timestamp";
  }
  return "unknown";
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [&](const Violation& v) { return v.kind == kind; }));
}

namespace {

std::string location(const Table& table, std::size_t row) {
  return "table '" + table.def.name + "' row " + std::to_string(row);
}

}  // namespace

ValidationReport validate(const RelationalDatabase& db) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, TableId t, std::size_t r, std::string msg) {
    report.violations.push_back({kind, t, r, location(db.table(t), r) + ": " + std::move(msg)});
  };
  const std::size_t n_tables = db.table_count();
  for (TableId t = 0; t < n_tables; ++t) {
    const Table& table = db.table(t);
    const auto targets = table.def.fk_targets();
    std::unordered_map<PrimaryKey, std::size_t> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const EntityRow& row = table.rows[r];
      if (row.pk < 1) add(ViolationKind::kPkNonPositive, t, r, "pk " + std::to_string(row.pk) + " < 1");
      if (auto [it, fresh] = seen.emplace(row.pk, r); !fresh)
        add(ViolationKind::kPkDuplicate, t, r,
            "pk " + std::to_string(row.pk) + " already used by row " + std::to_string(it->second));
      if (row.fks.size() != n_tables) {
        add(ViolationKind::kFkArity, t, r,
            "fk vector has " + std::to_string(row.fks.size()) + " entries, expected " +
                std::to_string(n_tables));
      } else {
        for (TableId j = 0; j < n_tables; ++j) {
          const PrimaryKey fk = row.fks[j];
          if (fk == 0) continue;
          if (!targets.contains(j)) {
            add(ViolationKind::kFkUndeclared, t, r,
                "fk into undeclared table '" + db.table(j).def.name + "'");
          } else if (!db.find({j, fk})) {
            add(ViolationKind::kDanglingFk, t, r,
                "fk " + std::to_string(fk) + " has no match in '" + db.table(j).def.name + "'");
          }
        }
      }
      if (row.features.size() != table.def.feature_dim())
        add(ViolationKind::kFeatureArity, t, r,
            std::to_string(row.features.size()) + " features, expected " +
                std::to_string(table.def.feature_dim()));
      for (std::size_t f = 0; f < row.features.size(); ++f)
        if (!std::isfinite(row.features[f]))
          add(ViolationKind::kNonFiniteFeature, t, r, "feature " + std::to_string(f) + " is not finite");
      if (table.def.is_static) {
        if (row.timestamp != kStaticTimestamp)
          add(ViolationKind::kStaticTimestamp, t, r, "static row with timestamp " + std::to_string(row.timestamp));
      } else if (row.timestamp < 0) {
        add(ViolationKind::kNegativeTimestamp, t, r, "timestamp " + std::to_string(row.timestamp) + " < 0");
      }
    }
  }
  return report;
}

RelationalDatabase slice_history(const RelationalDatabase& db, Timestamp t, ValidationReport* zeroed) {
  std::vector<Table> tables;
  tables.reserve(db.table_count());
  for (const Table& table : db.tables()) {
    Table kept{table.def, {}};
    for (const EntityRow& row : table.rows)
      if (table.def.is_static || row.timestamp <= t) kept.rows.push_back(row);
    tables.push_back(std::move(kept));
  }
  RelationalDatabase out;
  out.tables_ = std::move(tables);
  out.build_indices();
  for (TableId i = 0; i < out.tables_.size(); ++i) {
    auto& rows = out.tables_[i].rows;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (TableId j = 0; j < rows[r].fks.size() && j < out.tables_.size(); ++j) {
        PrimaryKey& fk = rows[r].fks[j];
        if (fk == 0 || out.index_[j].contains(fk)) continue;
        if (zeroed)
          zeroed->violations.push_back({ViolationKind::kDanglingFk, i, r,
                                        location(out.tables_[i], r) + ": fk " + std::to_string(fk) +
                                            " into '" + out.tables_[j].def.name + "' cut by slice"});
        fk = 0;
      }
    }
  }
  out.links_ = db.links_;
  return out;
}

std::vector<TableDef> parse_schema(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("schema: ") + e.what());
  }
  if (!doc.contains("tables") || !doc["tables"].is_array()) throw LoadError("schema: missing 'tables' array");
  const auto& arr = doc["tables"];
  std::vector<TableDef> defs;
  std::map<std::string, TableId> by_name;
  for (const auto& t : arr) {
    TableDef def;
    def.name = t.at("name").get<std::string>();
    def.pk_column = t.value("pk_col", std::string("id"));
    def.is_static = t.value("static", false);
    if (t.contains("timestamp_col") && !t["timestamp_col"].is_null())
      def.timestamp_column = t["timestamp_col"].get<std::string>();
    if (!def.is_static && def.timestamp_column.empty())
      throw LoadError("schema: dynamic table '" + def.name + "' has no timestamp_col");
    def.feature_columns = t.value("feature_cols", std::vector<std::string>{});
    if (!by_name.emplace(def.name, defs.size()).second)
      throw LoadError("schema: duplicate table name '" + def.name + "'");
    defs.push_back(std::move(def));
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].contains("fk_cols")) continue;
    std::set<TableId> used;
    for (const auto& [col, target] : arr[i]["fk_cols"].items()) {
      const std::string target_name = target.get<std::string>();
      auto it = by_name.find(target_name);
      if (it == by_name.end())
        throw LoadError("schema: table '" + defs[i].name + "' column '" + col +
                        "' references unknown table '" + target_name + "'");
      if (!used.insert(it->second).second)
        throw LoadError("schema: table '" + defs[i].name + "' has two fk columns into '" + target_name + "'");
      defs[i].fk_columns.emplace(col, it->second);
    }
  }
  return defs;
}

std::string schema_to_json(std::span<const TableDef> defs) {
  json tables = json::array();
  for (const auto& def : defs) {
    json fk = json::object();
    for (const auto& [col, target] : def.fk_columns) fk[col] = defs[target].name;
    json t = {{"name", def.name},
              {"pk_col", def.pk_column},
              {"fk_cols", fk},
              {"feature_cols", def.feature_columns},
              {"static", def.is_static}};
    t["timestamp_col"] = def.is_static ? json(nullptr) : json(def.timestamp_column);
    tables.push_back(std::move(t));
  }
  return json{{"tables", tables}}.dump(2) + "\n";
}

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

Table load_table(const TableDef& def, std::size_t n_tables, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("table '" + def.name + "': missing file " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw LoadError("table '" + def.name + "': empty file " + file.string());
  const auto header = csv::split(line);
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw LoadError("table '" + def.name + "': column '" + name + "' missing from " + file.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t pk_col = col(def.pk_column);
  const std::size_t ts_col = def.is_static ? 0 : col(def.timestamp_column);
  std::vector<std::pair<std::size_t, TableId>> fk_cols;
  for (const auto& [name, target] : def.fk_columns) fk_cols.emplace_back(col(name), target);
  std::vector<std::size_t> feat_cols;
  for (const auto& name : def.feature_columns) feat_cols.push_back(col(name));

  Table table{def, {}};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = csv::split(line);
    const std::string where = "table '" + def.name + "' row " + std::to_string(table.rows.size()) +
                              " (" + file.filename().string() + ":" + std::to_string(line_no) + ")";
    if (cells.size() != header.size())
      throw LoadError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    EntityRow row;
    if (!parse_number(cells[pk_col], row.pk)) throw LoadError(where + ": bad pk '" + cells[pk_col] + "'");
    row.fks.assign(n_tables, 0);
    for (const auto& [c, target] : fk_cols) {
      if (cells[c].empty()) continue;
      if (!parse_number(cells[c], row.fks[target]))
        throw LoadError(where + ": bad fk '" + cells[c] + "' in column '" + header[c] + "'");
    }
    for (std::size_t c : feat_cols) {
      double v = 0;
      if (!parse_number(cells[c], v)) throw LoadError(where + ": bad feature '" + cells[c] + "'");
      row.features.push_back(v);
    }
    if (def.is_static) {
      row.timestamp = kStaticTimestamp;
    } else if (!parse_number(cells[ts_col], row.timestamp)) {
      throw LoadError(where + ": bad timestamp '" + cells[ts_col] + "'");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

RelationalDatabase load_database_from_schema(std::vector<TableDef> defs,
                                             const std::filesystem::path& data_dir) {
  std::vector<Table> tables;
  tables.reserve(defs.size());
  for (const auto& def : defs) tables.push_back(load_table(def, defs.size(), data_dir / (def.name + ".csv")));
  RelationalDatabase db(std::move(tables));
  if (auto report = validate(db); !report.empty()) {
    std::string msg = "validation failed (" + std::to_string(report.violations.size()) + " violations): ";
    msg += std::string(to_string(report.violations.front().kind)) + " at " + report.violations.front().message;
    throw LoadError(msg);
  }
  return db;
}

RelationalDatabase load_database(const std::filesystem::path& schema_path,
                                 const std::filesystem::path& data_dir) {
  std::ifstream in(schema_path);
  if (!in) throw LoadError("missing schema file " + schema_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_database_from_schema(parse_schema(ss.str()), data_dir);
}

void save_database(const RelationalDatabase& db, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<TableDef> defs;
  for (const auto& t : db.tables()) defs.push_back(t.def);
  {
    std::ofstream out(dir / "schema.json");
    out << schema_to_json(defs);
  }
  for (const Table& table : db.tables()) {
    const TableDef& def = table.def;
    std::ofstream out(dir / (def.name + ".csv"));
    std::vector<std::string> header{def.pk_column};
    for (const auto& [col, target] : def.fk_columns) header.push_back(col);
    for (const auto& f : def.feature_columns) header.push_back(f);
    if (!def.is_static) header.push_back(def.timestamp_column);
    out << csv::join(header) << '\n';
    std::string line;
    for (const EntityRow& row : table.rows) {
      line = std::to_string(row.pk);
      for (const auto& [col, target] : def.fk_columns) {
        line += ',';
        line += std::to_string(row.fks.at(target));
      }
      for (double v : row.features) {
        line += ',';
        line += csv::format_real(v);
      }
      if (!def.is_static) {
        line += ',';
        line += std::to_string(row.timestamp);
      }
      out << line << '\n';
    }
  }
}

}  // namespace lightrdl
