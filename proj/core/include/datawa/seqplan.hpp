#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "datawa/types.hpp"

namespace datawa {

/// One kept ordering per feasible task subset; completion_time is the arrival
/// at the last task (t_now for the empty sequence).
struct CatalogSequence {
  std::vector<TaskId> tasks;
  double completion_time = 0.0;
};

/// Per-worker reachable set and maximal valid sequence set.
struct WorkerCatalog {
  WorkerId worker = 0;
  std::vector<TaskId> reachable;          // ascending task ids
  std::vector<CatalogSequence> sequences; // includes the empty sequence, lex order
};

struct SequenceCatalog {
  double t_now = 0.0;
  std::unordered_map<WorkerId, WorkerCatalog> by_worker;

  const WorkerCatalog& at(WorkerId w) const { return by_worker.at(w); }
};

/// Ids of the tasks a worker can begin now: travel time within the task's
/// remaining validity and the worker's availability window, and distance
/// within reach. Result is sorted ascending.
std::vector<TaskId> reachable_tasks(const Worker& w, std::span<const Task> tasks, double t_now,
                                    const TravelModel& model);

/// Enumerates, per task subset of the reachable set up to max_len, the valid
/// ordering with minimal completion time (lexicographically smallest id
/// sequence on ties). Subsets with no valid ordering are absent; the empty
/// sequence is always present. Runs a subset DP over (subset, last task).
std::vector<CatalogSequence> maximal_valid_sequences(const Worker& w,
                                                     std::span<const Task> reachable,
                                                     double t_now, const TravelModel& model,
                                                     int max_len);

/// Convenience: catalogs for every worker over the same task pool.
SequenceCatalog build_catalogs(std::span<const Worker> workers, std::span<const Task> tasks,
                               double t_now, const TravelModel& model, int max_len);

}  // namespace datawa
