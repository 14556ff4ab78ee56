#include "datawa/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "datawa/depgraph.hpp"

namespace datawa {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Fta: return "fta";
    case Strategy::Dta: return "dta";
    case Strategy::DtaTp: return "dta_tp";
    case Strategy::Adaptive: return "adaptive";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "greedy") return Strategy::Greedy;
  if (name == "fta") return Strategy::Fta;
  if (name == "dta") return Strategy::Dta;
  if (name == "dta_tp") return Strategy::DtaTp;
  if (name == "adaptive") return Strategy::Adaptive;
  throw ConfigError("unknown strategy '" + name + "'");
}

PlanningAssignment tpa(std::span<const Worker> workers, std::span<const Task> tasks, double t_now,
                       const EngineConfig& cfg, const TvfScorer* tvf, SearchStats* stats,
                       ExperienceBuffer* experience) {
  PlanningAssignment pa;
  pa.created_at = t_now;
  if (workers.empty()) return pa;

  const SequenceCatalog catalogs = build_catalogs(workers, tasks, t_now, cfg.travel, cfg.max_len);
  const Wdg wdg = build_wdg(workers, catalogs);
  const CliqueSet cliques = mcs_partition(wdg);
  const DependencyTree tree = build_tree(wdg, cliques);

  SearchInstance inst;
  inst.tree = &tree;
  inst.catalogs = &catalogs;
  inst.workers = workers;
  inst.tasks = tasks;
  inst.t_now = t_now;
  inst.travel = cfg.travel;
  inst.features = cfg.features;

  std::vector<std::pair<WorkerId, std::vector<TaskId>>> raw;
  if (tvf) {
    raw = dfsearch_tvf(inst, *tvf, stats);
  } else {
    raw = dfsearch_plan(inst, stats, experience);
  }
  std::sort(raw.begin(), raw.end());

  std::map<TaskId, const Task*> by_id;
  for (const Task& t : tasks) by_id.emplace(t.id, &t);
  std::unordered_map<WorkerId, const Worker*> worker_by_id;
  for (const Worker& w : workers) worker_by_id.emplace(w.id, &w);

  for (auto& [wid, seq_ids] : raw) {
    if (seq_ids.empty()) continue;
    TaskSequence seq;
    seq.worker_id = wid;
    seq.tasks = seq_ids;
    std::vector<Task> objs;
    objs.reserve(seq_ids.size());
    for (TaskId tid : seq_ids) objs.push_back(*by_id.at(tid));
    seq.arrival = arrival_times(*worker_by_id.at(wid), objs, t_now, cfg.travel);
    pa.pairs.emplace_back(wid, std::move(seq));
  }
  return pa;
}

namespace {

struct WorkerState {
  Worker w;
  bool busy = false;
  double busy_until = 0.0;
  Location dest;                 // location applied when the trip completes
  std::deque<TaskId> frozen;     // committed residual plan (freeze strategies)
  TaskSequence executed;         // dispatched real tasks
};

/// Single-threaded deterministic simulation loop shared by every strategy.
class Engine {
 public:
  Engine(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
         const EngineModels& models, RunStats* stats, ExperienceBuffer* experience)
      : strategy_(strategy),
        stream_(stream),
        cfg_(cfg),
        models_(models),
        stats_(stats),
        experience_(experience) {
    use_prediction_ = (strategy == Strategy::DtaTp || strategy == Strategy::Adaptive) &&
                      models.demand != nullptr;
    if (use_prediction_ && !cfg.grid.has_value()) {
      throw ConfigError("engine: prediction requires a configured grid");
    }
    freeze_ = strategy == Strategy::Fta || strategy == Strategy::Greedy;
  }

  Assignment run() {
    for (const Event& e : stream_.events) {
      advance_to(e.t);
      t_now_ = e.t;
      purge();
      if (e.kind == Event::Kind::WorkerArrival) {
        workers_.emplace(e.worker.id, WorkerState{e.worker});
      } else {
        ingest_task(e.task);
      }
      refresh_predictions();
      plan_and_dispatch();
    }
    drain();
    purge();
    for (auto& [wid, ws] : workers_) retire(wid, std::move(ws));
    workers_.clear();

    Assignment out;
    for (auto& [wid, ws] : workers_done_) {
      if (!ws.tasks.empty()) out.pairs.emplace_back(wid, std::move(ws));
    }
    return out;
  }

 private:
  /// Processes completion instants up to and including t.
  void advance_to(double t) {
    while (true) {
      double next = std::numeric_limits<double>::infinity();
      for (const auto& [wid, ws] : workers_) {
        if (ws.busy && ws.busy_until < next) next = ws.busy_until;
      }
      if (next == std::numeric_limits<double>::infinity() || !(next <= t)) break;
      t_now_ = next;
      for (auto& [wid, ws] : workers_) {
        if (ws.busy && ws.busy_until == next) {
          ws.busy = false;
          ws.w.loc = ws.dest;
        }
      }
      purge();
      refresh_predictions();
      plan_and_dispatch();
    }
  }

  /// Runs the clock past the last arrival until all trips finish.
  void drain() {
    advance_to(std::numeric_limits<double>::infinity());
  }

  void purge() {
    for (auto it = open_.begin(); it != open_.end();) {
      if (it->second.exp_time <= t_now_) {
        claimed_.erase(it->first);
        it = open_.erase(it);
      } else {
        ++it;
      }
    }
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (!it->second.busy && it->second.w.off_time <= t_now_) {
        retire(it->first, std::move(it->second));
        it = workers_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void retire(WorkerId wid, WorkerState ws) {
    for (TaskId tid : ws.frozen) claimed_.erase(tid);
    workers_done_.emplace(wid, std::move(ws.executed));
  }

  void ingest_task(const Task& task) {
    if (use_prediction_) consume_prediction(task);
    open_.emplace(task.id, task);
    observed_.push_back(task);
  }

  /// A real arrival in the same cell consumes the nearest-slot prediction.
  void consume_prediction(const Task& real) {
    if (!cfg_.grid->bbox.contains(real.loc)) return;
    const int cell = cfg_.grid->cell_of(real.loc);
    TaskId best = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& [tid, t] : open_) {
      if (t.origin != TaskOrigin::Predicted) continue;
      if (claimed_.count(tid)) continue;
      if (cfg_.grid->cell_of(t.loc) != cell) continue;
      const double gap = std::abs(t.pub_time - real.pub_time);
      if (gap < best_gap || (gap == best_gap && best != 0 && t.pub_time < open_.at(best).pub_time)) {
        best = tid;
        best_gap = gap;
      }
    }
    if (best != 0) {
      open_.erase(best);
      if (stats_) ++stats_->predicted_consumed;
    }
  }

  void refresh_predictions() {
    if (!use_prediction_) return;
    const double window = cfg_.k * cfg_.dt;
    const double boundary = std::floor(t_now_ / window) * window;
    if (boundary <= last_prediction_window_) return;
    if (boundary < cfg_.history * window) return;  // not enough history yet
    last_prediction_window_ = boundary;

    // Drop stale predictions, forecast from the trailing observed windows,
    // and materialize tasks for the window just beginning.
    for (auto it = open_.begin(); it != open_.end();) {
      if (it->second.origin == TaskOrigin::Predicted && !claimed_.count(it->first)) {
        it = open_.erase(it);
      } else {
        ++it;
      }
    }
    const double t0 = boundary - cfg_.history * window;
    const TaskSeries series =
        build_series(observed_, *cfg_.grid, t0, cfg_.k, cfg_.dt, cfg_.history);
    const Prediction pred = forward(series, *models_.demand);
    const std::vector<Task> predicted =
        materialize_predictions(pred, cfg_.predict_threshold, *cfg_.grid, boundary, cfg_.dt,
                                cfg_.predicted_valid, next_predicted_id_);
    // Plan against the earliest predicted slots per cell only: a few advance
    // reservations per hot cell. Feeding every slot's phantom into the search
    // locks whole crews into waiting at a centroid that one scout covers.
    std::map<int, int> cells_taken;
    for (const Task& t : predicted) {
      next_predicted_id_ = std::max(next_predicted_id_, t.id + 1);
      if (t.exp_time <= t_now_) continue;
      if (++cells_taken[cfg_.grid->cell_of(t.loc)] > cfg_.scouts_per_cell) continue;
      open_.emplace(t.id, t);
      if (stats_) ++stats_->predicted_emitted;
    }
  }

  std::vector<Worker> idle_workers(bool unplanned_only) const {
    std::vector<Worker> out;
    for (const auto& [wid, ws] : workers_) {
      if (ws.busy || !ws.w.online(t_now_)) continue;
      if (unplanned_only && !ws.frozen.empty()) continue;
      out.push_back(ws.w);
    }
    return out;
  }

  std::vector<Task> plannable_tasks(bool include_claimed) const {
    std::vector<Task> out;
    for (const auto& [tid, t] : open_) {
      if (!include_claimed && claimed_.count(tid)) continue;
      if (!use_prediction_ && t.origin == TaskOrigin::Predicted) continue;
      out.push_back(t);
    }
    return out;
  }

  void plan_and_dispatch() {
    // Workers continuing a committed plan go first, in id order.
    if (freeze_) {
      for (auto& [wid, ws] : workers_) {
        if (!ws.busy && ws.w.online(t_now_) && !ws.frozen.empty()) dispatch_frozen(ws);
      }
    }
    switch (strategy_) {
      case Strategy::Greedy: plan_greedy(); break;
      case Strategy::Fta: plan_fta(); break;
      case Strategy::Dta:
      case Strategy::DtaTp:
      case Strategy::Adaptive: plan_replan(); break;
    }
  }

  /// Adaptive family: one joint plan over all idle workers, first tasks only.
  void plan_replan() {
    const std::vector<Worker> idle = idle_workers(/*unplanned_only=*/false);
    const std::vector<Task> tasks = plannable_tasks(/*include_claimed=*/true);
    if (idle.empty() || tasks.empty()) return;
    const PlanningAssignment pa = timed_tpa(idle, tasks);
    for (const auto& [wid, seq] : pa.pairs) {
      if (!seq.tasks.empty()) dispatch(workers_.at(wid), seq.tasks.front());
    }
  }

  /// FTA: a joint plan for idle workers without residual plans; sequences are
  /// committed whole and never revised.
  void plan_fta() {
    const std::vector<Worker> idle = idle_workers(/*unplanned_only=*/true);
    const std::vector<Task> tasks = plannable_tasks(/*include_claimed=*/false);
    if (idle.empty() || tasks.empty()) return;
    const PlanningAssignment pa = timed_tpa(idle, tasks);
    for (const auto& [wid, seq] : pa.pairs) {
      WorkerState& ws = workers_.at(wid);
      for (TaskId tid : seq.tasks) {
        ws.frozen.push_back(tid);
        claimed_.insert(tid);
      }
      dispatch_frozen(ws);
    }
  }

  /// Greedy: each idle unplanned worker takes its largest valid sequence from
  /// the unclaimed tasks, in worker id order, committed immediately.
  void plan_greedy() {
    for (auto& [wid, ws] : workers_) {
      if (ws.busy || !ws.w.online(t_now_) || !ws.frozen.empty()) continue;
      const std::vector<Task> tasks = plannable_tasks(/*include_claimed=*/false);
      if (tasks.empty()) break;
      const auto t_start = std::chrono::steady_clock::now();
      const std::vector<TaskId> rs = reachable_tasks(ws.w, tasks, t_now_, cfg_.travel);
      std::vector<Task> rs_tasks;
      for (const Task& t : tasks) {
        if (std::binary_search(rs.begin(), rs.end(), t.id)) rs_tasks.push_back(t);
      }
      const std::vector<CatalogSequence> seqs =
          maximal_valid_sequences(ws.w, rs_tasks, t_now_, cfg_.travel, cfg_.max_len);
      const CatalogSequence* best = nullptr;
      for (const CatalogSequence& s : seqs) {
        if (!best || s.tasks.size() > best->tasks.size() ||
            (s.tasks.size() == best->tasks.size() &&
             s.completion_time < best->completion_time)) {
          best = &s;
        }
      }
      if (stats_) {
        ++stats_->planning_events;
        stats_->plan_wall_ms +=
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
                .count();
      }
      if (!best || best->tasks.empty()) continue;
      for (TaskId tid : best->tasks) {
        ws.frozen.push_back(tid);
        claimed_.insert(tid);
      }
      dispatch_frozen(ws);
    }
  }

  PlanningAssignment timed_tpa(std::span<const Worker> workers, std::span<const Task> tasks) {
    const auto t_start = std::chrono::steady_clock::now();
    SearchStats local;
    const TvfScorer* tvf = strategy_ == Strategy::Adaptive ? models_.tvf : nullptr;
    PlanningAssignment pa = tpa(workers, tasks, t_now_, cfg_, tvf, &local, experience_);
    if (stats_) {
      ++stats_->planning_events;
      stats_->expansions += local.expansions;
      stats_->plan_wall_ms +=
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
              .count();
    }
    return pa;
  }

  /// Pops the first still-open, still-valid item of the frozen plan.
  void dispatch_frozen(WorkerState& ws) {
    while (!ws.frozen.empty()) {
      const TaskId tid = ws.frozen.front();
      const auto it = open_.find(tid);
      if (it == open_.end()) {
        ws.frozen.pop_front();
        claimed_.erase(tid);
        continue;
      }
      if (dispatch(ws, tid)) return;
      ws.frozen.pop_front();
      claimed_.erase(tid);
    }
  }

  /// Sends the worker to the task. Real tasks are recorded in the assignment;
  /// predicted tasks only reserve the worker (a repositioning trip held until
  /// the predicted slot begins). Returns false when the task is gone or no
  /// longer valid for the worker.
  bool dispatch(WorkerState& ws, TaskId tid) {
    const auto it = open_.find(tid);
    if (it == open_.end()) return false;
    const Task task = it->second;
    const std::vector<Task> one{task};
    if (validate_sequence(ws.w, one, t_now_, cfg_.travel).has_value()) return false;
    const double arrival = t_now_ + travel_metrics(ws.w.loc, task.loc, cfg_.travel).time_s;
    open_.erase(it);
    if (!ws.frozen.empty() && ws.frozen.front() == tid) {
      ws.frozen.pop_front();
      claimed_.erase(tid);
    }
    ws.busy = true;
    ws.busy_until = std::max(arrival, task.pub_time);
    ws.dest = task.loc;
    if (task.origin == TaskOrigin::Real) {
      ws.executed.worker_id = ws.w.id;
      ws.executed.tasks.push_back(tid);
      ws.executed.arrival.push_back(arrival);
    }
    return true;
  }

  Strategy strategy_;
  const EventStream& stream_;
  const EngineConfig& cfg_;
  EngineModels models_;
  RunStats* stats_;
  ExperienceBuffer* experience_;
  bool use_prediction_ = false;
  bool freeze_ = false;

  double t_now_ = -std::numeric_limits<double>::infinity();
  std::map<WorkerId, WorkerState> workers_;
  std::map<WorkerId, TaskSequence> workers_done_;
  std::map<TaskId, Task> open_;
  std::set<TaskId> claimed_;
  std::vector<Task> observed_;
  double last_prediction_window_ = -std::numeric_limits<double>::infinity();
  TaskId next_predicted_id_ = TaskId{1} << 40;
};

}  // namespace

Assignment run_strategy(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
                        const EngineModels& models, RunStats* stats,
                        ExperienceBuffer* experience) {
  Engine engine(strategy, stream, cfg, models, stats, experience);
  return engine.run();
}

Assignment adaptive_assign(const EventStream& stream, const EngineConfig& cfg,
                           const EngineModels& models, RunStats* stats) {
  if (!models.tvf) throw ConfigError("adaptive_assign: a task value function is required");
  return run_strategy(Strategy::Adaptive, stream, cfg, models, stats);
}

Assignment baseline_assign(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
                           const EngineModels& models, RunStats* stats) {
  if (strategy == Strategy::Adaptive) {
    return adaptive_assign(stream, cfg, models, stats);
  }
  if (strategy == Strategy::DtaTp && !models.demand) {
    throw ConfigError("baseline_assign: DTA_TP requires demand model parameters");
  }
  return run_strategy(strategy, stream, cfg, models, stats);
}

}  // namespace datawa
