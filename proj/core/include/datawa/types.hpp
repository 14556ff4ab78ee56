#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace datawa {

// Error hierarchy shared across the library. Everything user-facing derives
// from Error so callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ModelShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& msg, int epoch)
      : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class IngestError : public Error {
 public:
  IngestError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using TaskId = std::int64_t;
using WorkerId = std::int64_t;

/// Planar study-area coordinates in kilometers.
struct Location {
  double x = 0.0;
  double y = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Location&, const Location&) = default;
};

enum class TaskOrigin { Real, Predicted };

/// A spatial task: published at pub_time, gone after exp_time, performed at loc.
struct Task {
  TaskId id = 0;
  Location loc;
  double pub_time = 0.0;  // seconds since epoch
  double exp_time = 0.0;  // seconds since epoch, > pub_time
  TaskOrigin origin = TaskOrigin::Real;
};

/// A worker with a reachable radius and an online interval [on_time, off_time).
struct Worker {
  WorkerId id = 0;
  Location loc;
  double reach_km = 0.0;
  double on_time = 0.0;
  double off_time = 0.0;

  /// Time remaining before the worker goes offline; nonnegative while online.
  double availability_window(double t_now) const { return off_time - t_now; }
  bool online(double t_now) const { return t_now >= on_time && t_now < off_time; }
};

/// Constant-speed travel model over planar Euclidean distance.
struct TravelModel {
  double speed_km_s = 40.0 / 3600.0;  // default 40 km/h
};

struct TravelMetrics {
  double distance_km = 0.0;
  double time_s = 0.0;
};

/// Euclidean distance between a and b plus the travel time at model speed.
/// Symmetric in its endpoints. Throws GeometryError on non-finite input.
TravelMetrics travel_metrics(const Location& a, const Location& b, const TravelModel& model);

/// An ordered task list for one worker together with per-task arrival times.
struct TaskSequence {
  WorkerId worker_id = 0;
  std::vector<TaskId> tasks;
  std::vector<double> arrival;

  std::size_t size() const { return tasks.size(); }
  bool empty() const { return tasks.empty(); }
  /// Arrival at the last task; t_now for the empty sequence is supplied by callers.
  double completion_time(double when_empty) const {
    return arrival.empty() ? when_empty : arrival.back();
  }
};

/// A set of (worker, sequence) pairs; no task id may repeat across pairs.
struct Assignment {
  std::vector<std::pair<WorkerId, TaskSequence>> pairs;

  /// Total number of tasks across all sequences.
  std::size_t task_count() const {
    std::size_t n = 0;
    for (const auto& [w, seq] : pairs) n += seq.tasks.size();
    return n;
  }
};

/// Arrival time of the worker at each task of seq, starting from its current
/// location at t_now. Empty sequence yields an empty list.
std::vector<double> arrival_times(const Worker& w, std::span<const Task> seq, double t_now,
                                  const TravelModel& model);

enum class ViolationKind { Expired, OffTime, Unreachable };

struct Violation {
  ViolationKind kind;
  TaskId task;
};

const char* to_string(ViolationKind kind);

/// Checks the three validity constraints for a sequence: each arrival beats the
/// task expiration, each arrival beats the worker off time, and every task lies
/// within the worker's reach. Returns std::nullopt when valid, otherwise the
/// first violated constraint in task order.
std::optional<Violation> validate_sequence(const Worker& w, std::span<const Task> seq,
                                           double t_now, const TravelModel& model);

}  // namespace datawa
