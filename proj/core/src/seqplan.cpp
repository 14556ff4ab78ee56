#include "datawa/seqplan.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

namespace datawa {

namespace {

struct DpEntry {
  double arrival = 0.0;
  std::vector<int> path;  // indices into the sorted candidate array
};

/// (arrival, lexicographic path) ordering; smaller is better.
bool better(const DpEntry& a, const DpEntry& b) {
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return a.path < b.path;
}

}  // namespace

std::vector<TaskId> reachable_tasks(const Worker& w, std::span<const Task> tasks, double t_now,
                                    const TravelModel& model) {
  std::vector<TaskId> out;
  const double window = w.availability_window(t_now);
  for (const Task& s : tasks) {
    const TravelMetrics tm = travel_metrics(w.loc, s.loc, model);
    if (tm.time_s <= s.exp_time - t_now && tm.time_s <= window && tm.distance_km <= w.reach_km) {
      out.push_back(s.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CatalogSequence> maximal_valid_sequences(const Worker& w,
                                                     std::span<const Task> reachable,
                                                     double t_now, const TravelModel& model,
                                                     int max_len) {
  if (max_len < 1) throw ConfigError("maximal_valid_sequences: max_len must be >= 1");

  // Candidates sorted by id so index order equals lexicographic id order. Tasks
  // at exactly the reach boundary can be in the reachable set but never in a
  // valid sequence (the validity comparison is strict), so they drop out here.
  std::vector<const Task*> cand(reachable.size());
  for (std::size_t i = 0; i < reachable.size(); ++i) cand[i] = &reachable[i];
  std::sort(cand.begin(), cand.end(),
            [](const Task* a, const Task* b) { return a->id < b->id; });
  std::erase_if(cand, [&](const Task* s) {
    return !(travel_metrics(w.loc, s->loc, model).distance_km < w.reach_km);
  });
  const int n = static_cast<int>(cand.size());
  if (n > 62) throw ConfigError("maximal_valid_sequences: reachable set too large");

  const int cap = std::min(max_len, n);
  // DP over (subset, last task): minimal-arrival valid ordering of the subset
  // ending at `last`, with lexicographic tie-breaking. Valid prefixes compose,
  // so extending only stored states is exact.
  std::unordered_map<std::uint64_t, DpEntry> best;
  std::vector<std::uint64_t> frontier;

  auto key = [](std::uint64_t mask, int last) { return (mask << 6) | static_cast<unsigned>(last); };

  auto offer = [&](std::uint64_t mask, int last, DpEntry entry) {
    auto [it, inserted] = best.try_emplace(key(mask, last), std::move(entry));
    if (inserted) {
      frontier.push_back(key(mask, last));
    } else if (!inserted && better(entry, it->second)) {
      it->second = std::move(entry);
    }
  };

  for (int i = 0; i < n; ++i) {
    const double arr = t_now + travel_metrics(w.loc, cand[i]->loc, model).time_s;
    if (arr < cand[i]->exp_time && arr < w.off_time) {
      offer(std::uint64_t{1} << i, i, DpEntry{arr, {i}});
    }
  }

  std::vector<std::uint64_t> current = frontier;
  for (int size = 1; size < cap; ++size) {
    frontier.clear();
    for (std::uint64_t k : current) {
      const DpEntry entry = best.at(k);  // copy: `best` may rehash while extending
      const std::uint64_t mask = k >> 6;
      const int last = static_cast<int>(k & 63);
      for (int j = 0; j < n; ++j) {
        if (mask & (std::uint64_t{1} << j)) continue;
        const double arr =
            entry.arrival + travel_metrics(cand[last]->loc, cand[j]->loc, model).time_s;
        if (!(arr < cand[j]->exp_time && arr < w.off_time)) continue;
        DpEntry next{arr, entry.path};
        next.path.push_back(j);
        offer(mask | (std::uint64_t{1} << j), j, std::move(next));
      }
    }
    current = frontier;
  }

  // Collapse (subset, last) states to one kept ordering per subset.
  std::unordered_map<std::uint64_t, DpEntry> per_subset;
  for (const auto& [k, entry] : best) {
    const std::uint64_t mask = k >> 6;
    auto [it, inserted] = per_subset.try_emplace(mask, entry);
    if (!inserted && better(entry, it->second)) it->second = entry;
  }

  std::vector<CatalogSequence> out;
  out.reserve(per_subset.size() + 1);
  out.push_back(CatalogSequence{{}, t_now});
  for (const auto& [mask, entry] : per_subset) {
    CatalogSequence seq;
    seq.completion_time = entry.arrival;
    seq.tasks.reserve(entry.path.size());
    for (int idx : entry.path) seq.tasks.push_back(cand[idx]->id);
    out.push_back(std::move(seq));
  }
  std::sort(out.begin(), out.end(),
            [](const CatalogSequence& a, const CatalogSequence& b) { return a.tasks < b.tasks; });
  return out;
}

SequenceCatalog build_catalogs(std::span<const Worker> workers, std::span<const Task> tasks,
                               double t_now, const TravelModel& model, int max_len) {
  SequenceCatalog out;
  out.t_now = t_now;
  for (const Worker& w : workers) {
    WorkerCatalog cat;
    cat.worker = w.id;
    cat.reachable = reachable_tasks(w, tasks, t_now, model);
    std::vector<Task> rs;
    rs.reserve(cat.reachable.size());
    for (const Task& s : tasks) {
      if (std::binary_search(cat.reachable.begin(), cat.reachable.end(), s.id)) rs.push_back(s);
    }
    cat.sequences = maximal_valid_sequences(w, rs, t_now, model, max_len);
    out.by_worker.emplace(w.id, std::move(cat));
  }
  return out;
}

}  // namespace datawa
