#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "datawa/autodiff.hpp"
#include "datawa/depgraph.hpp"
#include "datawa/rng.hpp"
#include "datawa/seqplan.hpp"
#include "datawa/types.hpp"

namespace datawa {

inline constexpr int kFeatureDim = 11;
inline constexpr std::uint32_t kFeatureSchemaVersion = 1;
using FeatureVec = std::array<double, kFeatureDim>;

/// Reference ranges used to scale features into comparable magnitudes.
struct FeatureConfig {
  double ref_workers = 50.0;
  double ref_tasks = 50.0;
  double ref_time = 600.0;  // seconds
  double ref_dist = 5.0;    // kilometers
  double ref_seq = 4.0;
};

/// Deterministic encoding of a (state, action) pair:
///   0 remaining workers, 1 remaining tasks, 2/3/4 mean/min/max task slack,
///   5 actor availability window, 6 sequence length, 7 sequence completion
///   time, 8 sequence travel distance, 9 fraction of tasks covered,
///   10 other workers whose reachable set intersects the sequence.
FeatureVec featurize(std::span<const Worker* const> state_workers,
                     std::span<const Task* const> state_tasks, const Worker& actor,
                     std::span<const Task* const> seq, double t_now, const TravelModel& travel,
                     const FeatureConfig& fc, const SequenceCatalog& catalogs);

/// One recorded (state, action, value) triple. The value is the number of
/// tasks assignable downstream when the action is taken in the state.
struct ExperienceTuple {
  std::vector<WorkerId> state_workers;  // sorted
  std::vector<TaskId> state_tasks;      // sorted
  WorkerId worker = 0;
  std::vector<TaskId> seq;
  double opt = 0.0;
  FeatureVec features{};
};

/// Bounded replay memory; overwrites the oldest tuples once full.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(std::size_t capacity = 1'000'000) : capacity_(capacity) {}

  void push(ExperienceTuple t);
  const std::vector<ExperienceTuple>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ExperienceTuple> data_;
};

void save_experience(const ExperienceBuffer& u, const std::string& path);
ExperienceBuffer load_experience(const std::string& path);

struct SearchStats {
  long long expansions = 0;
};

/// Everything fixed during one tree search at a single planning instant.
struct SearchInstance {
  const DependencyTree* tree = nullptr;
  const SequenceCatalog* catalogs = nullptr;
  std::span<const Worker> workers;  // workers appearing in the tree
  std::span<const Task> tasks;      // the open task universe S
  double t_now = 0.0;
  TravelModel travel;
  FeatureConfig features;
};

/// Exact depth-first search over the dependency forest. Returns the optimal
/// number of assignable tasks; optionally records every explored
/// (state, action, value) tuple and counts state expansions. Memoized per
/// (node, remaining workers, remaining tasks), which leaves recorded values
/// unchanged and only trims repeated work.
int dfsearch(const SearchInstance& inst, ExperienceBuffer* experience = nullptr,
             SearchStats* stats = nullptr);

/// Same search, returning an optimal joint plan (worker, sequence) instead of
/// the count. Deterministic: ties resolve to the lowest worker id and the
/// lexicographically smallest sequence. Optionally records experience like
/// dfsearch does.
std::vector<std::pair<WorkerId, std::vector<TaskId>>> dfsearch_plan(
    const SearchInstance& inst, SearchStats* stats = nullptr,
    ExperienceBuffer* experience = nullptr);

/// Scoring context handed to a task value function: scaled features plus the
/// raw identifiers, so exact table-backed scorers can key on the state.
struct ActionContext {
  const FeatureVec* features = nullptr;
  const std::vector<WorkerId>* state_workers = nullptr;  // sorted
  const std::vector<TaskId>* state_tasks = nullptr;      // sorted
  WorkerId worker = 0;
  std::span<const TaskId> seq;
};

class TvfScorer {
 public:
  virtual ~TvfScorer() = default;
  virtual double score(const ActionContext& ctx) const = 0;
};

/// Greedy non-backtracking search guided by a scorer: the first worker of
/// each node takes its best-scoring sequence, then is removed. Equal scores
/// break toward the lexicographically smallest sequence.
std::vector<std::pair<WorkerId, std::vector<TaskId>>> dfsearch_tvf(const SearchInstance& inst,
                                                                   const TvfScorer& tvf,
                                                                   SearchStats* stats = nullptr);

/// Task value function: one rectified hidden layer over the feature vector.
struct TvfModel {
  Mat w1, b1, w2, b2;  // D x H, 1 x H, H x 1, 1 x 1

  double value(const FeatureVec& f) const;
};

struct TvfHyper {
  int hidden = 32;
  double lr = 0.05;
  int batch = 32;
  int epochs = 300;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct TvfTrainPoint {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TvfTrainResult {
  TvfModel model;  // parameters at minimum held-out loss
  std::vector<TvfTrainPoint> curve;
  int best_epoch = 0;
};

/// Mini-batch gradient descent on the squared error between predicted and
/// recorded values, sampling tuples uniformly. Returns the parameters with
/// the lowest held-out loss. Throws TrainingError on non-finite loss.
TvfTrainResult train_tvf(const ExperienceBuffer& u, const TvfHyper& hyper);

void save_tvf(const TvfModel& model, const std::string& path);
TvfModel load_tvf(const std::string& path);

/// Scores with a trained network; ignores the raw identifiers.
class NetScorer : public TvfScorer {
 public:
  explicit NetScorer(TvfModel model) : model_(std::move(model)) {}
  double score(const ActionContext& ctx) const override { return model_.value(*ctx.features); }
  const TvfModel& model() const { return model_; }

 private:
  TvfModel model_;
};

/// Scores by exact lookup of recorded experience tuples; unseen pairs fall
/// back to the sequence length. Useful as an idealized value function.
class TableScorer : public TvfScorer {
 public:
  explicit TableScorer(const ExperienceBuffer& u);
  double score(const ActionContext& ctx) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, double> table_;
};

}  // namespace datawa
