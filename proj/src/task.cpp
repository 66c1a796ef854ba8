#include "lightrdl/task.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"

namespace lightrdl {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::kRegression ? "regression" : "binary-classification";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "regression") return TaskKind::kRegression;
  if (text == "binary-classification" || text == "classification") return TaskKind::kBinaryClassification;
  throw std::invalid_argument("unknown task kind '" + std::string(text) + "'");
}

std::vector<std::pair<PrimaryKey, double>> TaskSpec::labels_at(Timestamp t) const {
  std::vector<std::pair<PrimaryKey, double>> out;
  for (auto it = labels.lower_bound({t, std::numeric_limits<PrimaryKey>::min()});
       it != labels.end() && it->first.first == t; ++it)
    out.emplace_back(it->first.second, it->second);
  return out;
}

std::vector<std::string> validate_task(const TaskSpec& task, const RelationalDatabase& db) {
  std::vector<std::string> problems;
  if (task.target_table >= db.table_count()) {
    problems.push_back("target table index out of range");
    return problems;
  }
  for (std::size_t i = 1; i < task.seed_times.size(); ++i)
    if (task.seed_times[i] <= task.seed_times[i - 1]) problems.push_back("seed times not strictly increasing");
  if (task.horizon < 1) problems.push_back("horizon must be >= 1");
  const std::set<Timestamp> seeds(task.seed_times.begin(), task.seed_times.end());
  for (const auto& [key, label] : task.labels) {
    const auto& [t, pk] = key;
    if (!seeds.contains(t)) problems.push_back("label at unknown seed time " + std::to_string(t));
    if (!db.find({task.target_table, pk}))
      problems.push_back("label for unknown entity " + std::to_string(pk));
    if (!std::isfinite(label)) problems.push_back("non-finite label for entity " + std::to_string(pk));
    if (task.kind == TaskKind::kBinaryClassification && label != 0.0 && label != 1.0)
      problems.push_back("binary label not in {0,1} for entity " + std::to_string(pk));
  }
  return problems;
}

void save_task_labels(const TaskSpec& task, const std::filesystem::path& file) {
  std::ofstream out(file);
  out << "entity,seed_time,label\n";
  for (const auto& [key, label] : task.labels)
    out << key.second << ',' << key.first << ',' << csv::format_real(label) << '\n';
}

void load_task_labels(TaskSpec& task, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("missing task file " + file.string());
  std::string line;
  std::getline(in, line);
  const auto header = csv::split(line);
  if (header != std::vector<std::string>{"entity", "seed_time", "label"})
    throw LoadError(file.string() + ": expected header entity,seed_time,label");
  std::set<Timestamp> seeds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    try {
      if (cells.size() != 3) throw std::invalid_argument("cell count");
      const PrimaryKey pk = std::stoll(cells[0]);
      const Timestamp t = std::stoll(cells[1]);
      const double label = std::stod(cells[2]);
      task.labels[{t, pk}] = label;
      seeds.insert(t);
    } catch (const std::exception&) {
      throw LoadError(file.string() + ":" + std::to_string(line_no) + ": malformed label row");
    }
  }
  task.seed_times.assign(seeds.begin(), seeds.end());
}

void save_task_index(const std::vector<TaskSpec>& tasks, const RelationalDatabase& db,
                     const std::filesystem::path& dir) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& task : tasks) {
    arr.push_back({{"name", task.name},
                   {"target_table", db.table(task.target_table).def.name},
                   {"kind", std::string(to_string(task.kind))},
                   {"horizon", task.horizon},
                   {"file", task.name + ".csv"}});
    save_task_labels(task, dir / (task.name + ".csv"));
  }
  std::ofstream out(dir / "tasks.json");
  out << nlohmann::json{{"tasks", arr}}.dump(2) << '\n';
}

TaskSpec load_task(const std::filesystem::path& dir, std::string_view name, const RelationalDatabase& db) {
  std::ifstream in(dir / "tasks.json");
  if (!in) throw LoadError("missing task index " + (dir / "tasks.json").string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("tasks.json: ") + e.what());
  }
  for (const auto& t : doc.at("tasks")) {
    if (t.at("name").get<std::string>() != name) continue;
    TaskSpec task;
    task.name = std::string(name);
    task.target_table = db.require_table(t.at("target_table").get<std::string>());
    task.kind = parse_task_kind(t.at("kind").get<std::string>());
    task.horizon = t.at("horizon").get<Timestamp>();
    load_task_labels(task, dir / t.at("file").get<std::string>());
    if (auto problems = validate_task(task, db); !problems.empty())
      throw LoadError("task '" + task.name + "': " + problems.front());
    return task;
  }
  throw LoadError("task '" + std::string(name) + "' not found in tasks.json");
}

}  // namespace lightrdl
