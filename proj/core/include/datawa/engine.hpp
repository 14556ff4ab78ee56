#pragma once

#include <optional>
#include <span>

#include "datawa/ddgnn.hpp"
#include "datawa/grid.hpp"
#include "datawa/search.hpp"
#include "datawa/seqplan.hpp"
#include "datawa/stream.hpp"
#include "datawa/types.hpp"

namespace datawa {

enum class Strategy { Greedy, Fta, Dta, DtaTp, Adaptive };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct EngineConfig {
  TravelModel travel;
  int max_len = 4;
  FeatureConfig features;

  // Demand prediction; grid must be set when a demand model is supplied.
  std::optional<GridSpec> grid;
  double dt = 5.0;
  int k = 12;
  int history = 24;               // observed windows fed to the forecaster
  double predict_threshold = 0.85;
  double predicted_valid = 40.0;  // validity given to materialized tasks
  int scouts_per_cell = 1;        // advance reservations planned per hot cell
};

/// Joint plan produced at one instant; sequences are task-disjoint and valid
/// at created_at.
struct PlanningAssignment {
  double created_at = 0.0;
  std::vector<std::pair<WorkerId, TaskSequence>> pairs;  // ascending worker id
};

struct RunStats {
  long long expansions = 0;
  int planning_events = 0;
  double plan_wall_ms = 0.0;
  int predicted_emitted = 0;
  int predicted_consumed = 0;
};

/// Task planning assignment at one instant: per-worker catalogs, dependency
/// graph, clique decomposition and tree per component, then one tree search.
/// A null scorer selects the exact search; otherwise the scorer guides the
/// non-backtracking pass.
PlanningAssignment tpa(std::span<const Worker> workers, std::span<const Task> tasks, double t_now,
                       const EngineConfig& cfg, const TvfScorer* tvf,
                       SearchStats* stats = nullptr, ExperienceBuffer* experience = nullptr);

struct EngineModels {
  const DemandModel* demand = nullptr;
  const TvfScorer* tvf = nullptr;
};

/// Runs a strategy over the stream. Arrival events and worker completions
/// advance the clock; plans are recomputed per the strategy's policy and idle
/// workers execute the first task of their current plan. Only real tasks count
/// toward the returned assignment.
Assignment run_strategy(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
                        const EngineModels& models = {}, RunStats* stats = nullptr,
                        ExperienceBuffer* experience = nullptr);

/// The demand-aware adaptive path: re-plans on every event with predicted
/// tasks in the pool and the scorer-guided search. Requires a scorer; the
/// demand model is optional (without it no tasks are predicted).
Assignment adaptive_assign(const EventStream& stream, const EngineConfig& cfg,
                           const EngineModels& models, RunStats* stats = nullptr);

/// Greedy / FTA / DTA / DTA_TP reference strategies. DTA_TP requires a demand
/// model and a configured grid.
Assignment baseline_assign(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
                           const EngineModels& models = {}, RunStats* stats = nullptr);

}  // namespace datawa
