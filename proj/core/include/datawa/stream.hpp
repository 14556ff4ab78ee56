#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datawa/grid.hpp"
#include "datawa/types.hpp"

namespace datawa {

struct Event {
  enum class Kind { WorkerArrival, TaskArrival };
  Kind kind = Kind::TaskArrival;
  double t = 0.0;
  Worker worker;  // valid when kind == WorkerArrival
  Task task;      // valid when kind == TaskArrival
};

/// Time-ordered arrival events with stable order on ties.
struct EventStream {
  std::vector<Event> events;

  std::size_t task_count() const;
  std::size_t worker_count() const;
};

/// Parses the CSV schema `kind,id,t,x,y,extra1,extra2`:
///   worker rows: extra1 = reach (km), extra2 = off_time (s)
///   task rows:   extra1 = exp_time (s), extra2 empty
/// Rows are sorted by t with stable tie order; unsorted input is accepted
/// with a warning counted in the result. Malformed rows throw IngestError
/// with the line number.
EventStream load_stream(const std::string& path);

/// Writes the same schema with shortest-round-trip number formatting, so a
/// write-then-load cycle reproduces every field bit-identically.
void save_stream(const EventStream& stream, const std::string& path);

/// One demand hotspot: tasks concentrate in `cell` during active windows.
/// Activity is periodic (period/phase, in windows) and lasts `duration`
/// consecutive windows, unless lag_from names another hotspot index, in which
/// case this hotspot fires exactly one window after its source. rate is the
/// task weight per slot while active.
struct HotspotSpec {
  int cell = 1;
  double rate = 1.0;
  int period = 2;
  int phase = 0;
  int duration = 1;
  int lag_from = -1;
  double spread_km = 0.0;  // task radius around the cell centroid; <= 0 fills the cell
};

struct WorkloadConfig {
  int num_workers = 50;
  int num_tasks = 500;
  BBox bbox{0.0, 0.0, 3.0, 3.0};
  double t_start = 0.0;
  double t_end = 7200.0;
  double reach_km = 1.0;      // Table III default
  double avail_s = 3600.0;    // worker off - on
  double valid_s = 40.0;      // task exp - pub
  int grid_rows = 6;
  int grid_cols = 6;
  double dt = 5.0;            // slot length
  int k = 12;                 // slots per window
  double base_rate = 0.05;    // background weight per (cell, slot)
  std::vector<HotspotSpec> hotspots;
  std::uint64_t seed = 1;
};

/// Seeded synthetic stream: worker arrivals uniform over the time range,
/// task slots drawn from the hotspot intensity schedule. Identical seeds and
/// configs produce byte-identical exports.
EventStream synth_workload(const WorkloadConfig& cfg);

}  // namespace datawa
