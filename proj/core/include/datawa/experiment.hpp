#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "datawa/engine.hpp"
#include "datawa/stream.hpp"

namespace datawa {

/// Echo of the workload knobs a run was generated with, for per-axis grouping.
struct ConfigEcho {
  int num_tasks = 0;
  int num_workers = 0;
  double reach_km = 0.0;
  double avail_s = 0.0;
  double valid_s = 0.0;
};

struct RunReport {
  std::string strategy;
  std::uint64_t seed = 0;
  int assigned = 0;
  long long expansions = 0;
  int planning_events = 0;
  double plan_wall_ms = 0.0;
  double mean_plan_ms = 0.0;
  int predicted_emitted = 0;
  int predicted_consumed = 0;
  ConfigEcho cfg;
};

/// Executes a strategy over a stream and gathers the deterministic counters
/// plus wall-clock planning time.
RunReport run_experiment(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
                         const EngineModels& models, std::uint64_t seed,
                         const ConfigEcho& echo = {});

/// True when the two reports agree on every deterministic field (wall time
/// excluded).
bool reports_equal_deterministic(const RunReport& a, const RunReport& b);

std::string report_to_json(const RunReport& r);
RunReport report_from_json(const std::string& text);

/// Writes summary.csv (one row per run), summary.json, and one aggregate CSV
/// per sweep axis (num_tasks, num_workers, reach, avail, valid) holding mean
/// assigned count and mean expansions per (strategy, axis value).
void emit_report(std::span<const RunReport> reports, const std::string& dir);

}  // namespace datawa
