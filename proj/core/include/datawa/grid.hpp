#pragma once

#include <ostream>
#include <span>
#include <vector>

#include "datawa/types.hpp"

namespace datawa {

/// Axis-aligned study bounding box in kilometers.
struct BBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(const Location& l) const {
    return l.x >= min_x && l.x <= max_x && l.y >= min_y && l.y <= max_y;
  }
};

/// Uniform partition of the study area into rows x cols cells, ids 1..M.
/// Cell 1 is the bottom-left cell; ids advance column-first along each row.
struct GridSpec {
  BBox bbox;
  int rows = 1;
  int cols = 1;

  int cell_count() const { return rows * cols; }
  double cell_width() const { return (bbox.max_x - bbox.min_x) / cols; }
  double cell_height() const { return (bbox.max_y - bbox.min_y) / rows; }

  /// 1-based id of the cell containing l. Boundary points belong to the cell on
  /// their lower-left side; the top and right bbox edges fold into the last
  /// row/column. Throws GeometryError for points outside the bbox.
  int cell_of(const Location& l) const;

  Location centroid(int cell) const;
};

GridSpec build_grid(const BBox& bbox, int rows, int cols);

/// One k-slot occurrence vector; binary when observed, probabilistic when
/// produced by a predictor.
struct DemandVector {
  double t_start = 0.0;
  std::vector<double> values;
};

/// Per-cell sequence of occurrence vectors covering [t0, t0 + P*k*dt).
struct TaskSeries {
  double t0 = 0.0;
  double dt = 0.0;  // slot length in seconds
  int k = 0;        // slots per vector
  int P = 0;        // vectors per cell
  std::vector<std::vector<DemandVector>> per_cell;  // size = grid cell count
  int ignored_tasks = 0;  // tasks outside the time range or the bbox

  double window_length() const { return k * dt; }
  double end_time() const { return t0 + static_cast<double>(P) * window_length(); }
};

/// Builds the binary occurrence series: entry j of cell i's vector at window
/// start t is 1 iff some task in cell i has t + j*dt <= pub_time < t + (j+1)*dt.
/// Tasks outside [t0, t0 + P*k*dt) or outside the grid are counted in
/// ignored_tasks and otherwise skipped.
TaskSeries build_series(std::span<const Task> tasks, const GridSpec& grid, double t0, int k,
                        double dt, int P);

/// CSV export, one row per (cell, vector): cell,t_start,v1..vk with header.
void write_series_csv(const TaskSeries& series, std::ostream& os);

/// Average precision over the fixed threshold sweep 0,0.01,...,1. Classifies
/// score >= threshold as positive, computes the precision-recall point per
/// threshold, and integrates the interpolated precision over recall. Throws
/// MetricError when lengths differ or no positive label exists.
double average_precision(std::span<const double> scores, std::span<const int> labels);

}  // namespace datawa
