#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lightrdl/relational_store.hpp"

namespace lightrdl {

enum class TaskKind { kBinaryClassification, kRegression };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

/// An entity-level prediction task: which table, what kind of label, and the labels
/// per (seed time, entity). Labels at seed time t describe the window (t, t + horizon].
struct TaskSpec {
  std::string name;
  TableId target_table = 0;
  TaskKind kind = TaskKind::kBinaryClassification;
  std::vector<Timestamp> seed_times;
  Timestamp horizon = 1;
  std::map<std::pair<Timestamp, PrimaryKey>, double> labels;

  /// (pk, label) pairs at one seed time, ordered by pk.
  std::vector<std::pair<PrimaryKey, double>> labels_at(Timestamp t) const;
};

/// Empty when the task is consistent with `db`; otherwise one message per problem.
std::vector<std::string> validate_task(const TaskSpec& task, const RelationalDatabase& db);

/// Task labels as CSV with header `entity,seed_time,label`.
void save_task_labels(const TaskSpec& task, const std::filesystem::path& file);
/// Reads labels into `task`; seed_times are the distinct seed times found in the file.
void load_task_labels(TaskSpec& task, const std::filesystem::path& file);

/// Task descriptors (tasks.json) next to the data: name, target table, kind, horizon, file.
void save_task_index(const std::vector<TaskSpec>& tasks, const RelationalDatabase& db,
                     const std::filesystem::path& dir);
TaskSpec load_task(const std::filesystem::path& dir, std::string_view name, const RelationalDatabase& db);

}  // namespace lightrdl
