#pragma once

// Shared instance generators and brute-force oracles for the search tests and
// the acceptance suite.

#include <algorithm>
#include <vector>

#include "datawa/depgraph.hpp"
#include "datawa/engine.hpp"
#include "datawa/rng.hpp"
#include "datawa/search.hpp"
#include "datawa/seqplan.hpp"
#include "datawa/stream.hpp"
#include "datawa/types.hpp"

namespace datawa::testing {

struct Instance {
  std::vector<Worker> workers;
  std::vector<Task> tasks;
  double t_now = 0.0;
  TravelModel travel{1.0 / 60.0};  // one minute per kilometer
  int max_len = 4;
};

inline Instance random_instance(Rng& rng, int max_workers, int max_tasks) {
  Instance inst;
  const int n_workers = 1 + static_cast<int>(rng.below(max_workers));
  const int n_tasks = 1 + static_cast<int>(rng.below(max_tasks));
  for (int i = 0; i < n_workers; ++i) {
    Worker w;
    w.id = i + 1;
    w.loc = {rng.uniform(0, 2), rng.uniform(0, 2)};
    w.reach_km = rng.uniform(0.5, 1.6);
    w.on_time = 0.0;
    w.off_time = rng.uniform(60, 600);
    inst.workers.push_back(w);
  }
  for (int i = 0; i < n_tasks; ++i) {
    Task t;
    t.id = i + 1;
    t.loc = {rng.uniform(0, 2), rng.uniform(0, 2)};
    t.pub_time = 0.0;
    t.exp_time = rng.uniform(30, 400);
    inst.tasks.push_back(t);
  }
  return inst;
}

/// Catalogs, dependency graph, and tree for an instance, owning all the
/// storage a SearchInstance points into.
struct Prepared {
  Instance instance;
  SequenceCatalog catalogs;
  DependencyTree tree;

  SearchInstance search_instance() const {
    SearchInstance si;
    si.tree = &tree;
    si.catalogs = &catalogs;
    si.workers = instance.workers;
    si.tasks = instance.tasks;
    si.t_now = instance.t_now;
    si.travel = instance.travel;
    return si;
  }
};

inline Prepared prepare(Instance inst) {
  Prepared p;
  p.catalogs =
      build_catalogs(inst.workers, inst.tasks, inst.t_now, inst.travel, inst.max_len);
  const Wdg wdg = build_wdg(inst.workers, p.catalogs);
  p.tree = build_tree(wdg, mcs_partition(wdg));
  p.instance = std::move(inst);
  return p;
}

/// Enumerates every Definition-4-valid ordered sequence (as task indices) for
/// one worker, up to max_len, including the empty sequence. Valid prefixes
/// compose, so depth-first extension with pruning is exhaustive.
inline std::vector<std::vector<int>> all_valid_sequences(const Worker& w,
                                                         const std::vector<Task>& tasks,
                                                         double t_now, const TravelModel& travel,
                                                         int max_len) {
  std::vector<std::vector<int>> out{{}};
  std::vector<int> path;
  auto extend = [&](auto&& self, double t, const Location& from) -> void {
    if (static_cast<int>(path.size()) == max_len) return;
    for (int i = 0; i < static_cast<int>(tasks.size()); ++i) {
      if (std::find(path.begin(), path.end(), i) != path.end()) continue;
      const Task& s = tasks[i];
      const double arr = t + travel_metrics(from, s.loc, travel).time_s;
      if (!(arr < s.exp_time && arr < w.off_time)) continue;
      if (!(travel_metrics(w.loc, s.loc, travel).distance_km < w.reach_km)) continue;
      path.push_back(i);
      out.push_back(path);
      self(self, arr, s.loc);
      path.pop_back();
    }
  };
  extend(extend, t_now, w.loc);
  return out;
}

/// Three workers, nine tasks, reach 1.2 units at unit speed. Two workers get
/// committed to two-task chains early; short-lived tasks published while they
/// travel reward mid-chain re-planning. A fixed planner assigns 2 + 2 + 1 = 5
/// tasks, an adaptive one 8, and one far task is unassignable for everyone.
inline EventStream fig1_stream() {
  EventStream s;
  auto add_task = [&](TaskId id, double x, double y, double pub, double exp) {
    Event e;
    e.kind = Event::Kind::TaskArrival;
    e.t = pub;
    e.task = Task{id, {x, y}, pub, exp, TaskOrigin::Real};
    s.events.push_back(e);
  };
  auto add_worker = [&](WorkerId id, double x, double y, double on) {
    Event e;
    e.kind = Event::Kind::WorkerArrival;
    e.t = on;
    e.worker = Worker{id, {x, y}, 1.2, on, 100.0};
    s.events.push_back(e);
  };
  add_task(1, 0.5, 0.0, 1.0, 10.0);
  add_task(2, 3.5, 0.0, 1.0, 10.0);
  add_task(3, 1.0, 0.0, 1.0, 20.0);
  add_task(4, 4.0, 0.0, 1.0, 20.0);
  add_task(9, 10.0, 10.0, 1.0, 5.0);
  add_worker(1, 0.0, 0.0, 1.0);
  add_worker(2, 3.0, 0.0, 1.0);
  add_task(5, 0.5, 0.4, 1.3, 2.45);
  add_task(6, 3.5, 0.4, 1.3, 2.45);
  add_task(8, 0.28, 0.75, 1.6, 2.7);
  add_task(7, 6.5, 0.0, 4.0, 10.0);
  add_worker(3, 6.0, 0.0, 4.0);
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return s;
}

inline EngineConfig fig1_config() {
  EngineConfig cfg;
  cfg.travel.speed_km_s = 1.0;  // one unit per second
  cfg.max_len = 4;
  return cfg;
}

/// Flat joint-assignment optimum ignoring the dependency tree entirely.
inline int flat_bruteforce_opt(const Instance& inst) {
  std::vector<std::vector<std::vector<int>>> seqs;
  for (const Worker& w : inst.workers) {
    seqs.push_back(
        all_valid_sequences(w, inst.tasks, inst.t_now, inst.travel, inst.max_len));
  }
  auto rec = [&](auto&& self, std::size_t wi, unsigned used) -> int {
    if (wi == seqs.size()) return 0;
    int best = 0;
    for (const auto& seq : seqs[wi]) {
      unsigned mask = 0;
      bool clash = false;
      for (int i : seq) {
        const unsigned bit = 1u << i;
        if (used & bit) {
          clash = true;
          break;
        }
        mask |= bit;
      }
      if (clash) continue;
      best = std::max(best, self(self, wi + 1, used | mask) + static_cast<int>(seq.size()));
    }
    return best;
  };
  return rec(rec, 0, 0u);
}

}  // namespace datawa::testing
