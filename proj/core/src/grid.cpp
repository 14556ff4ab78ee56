#include "datawa/grid.hpp"

#include <algorithm>
#include <cmath>

namespace datawa {

int GridSpec::cell_of(const Location& l) const {
  if (!bbox.contains(l)) {
    throw GeometryError("cell_of: location outside the study bounding box");
  }
  int col = static_cast<int>(std::floor((l.x - bbox.min_x) / cell_width()));
  int row = static_cast<int>(std::floor((l.y - bbox.min_y) / cell_height()));
  col = std::min(col, cols - 1);
  row = std::min(row, rows - 1);
  return row * cols + col + 1;
}

Location GridSpec::centroid(int cell) const {
  const int idx = cell - 1;
  const int row = idx / cols;
  const int col = idx % cols;
  return {bbox.min_x + (col + 0.5) * cell_width(), bbox.min_y + (row + 0.5) * cell_height()};
}

GridSpec build_grid(const BBox& bbox, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("build_grid: rows and cols must be >= 1");
  if (!(bbox.max_x > bbox.min_x) || !(bbox.max_y > bbox.min_y)) {
    throw ConfigError("build_grid: degenerate bounding box");
  }
  return GridSpec{bbox, rows, cols};
}

TaskSeries build_series(std::span<const Task> tasks, const GridSpec& grid, double t0, int k,
                        double dt, int P) {
  if (k < 1 || P < 1 || !(dt > 0.0)) throw ConfigError("build_series: k, P >= 1 and dt > 0");
  TaskSeries out;
  out.t0 = t0;
  out.dt = dt;
  out.k = k;
  out.P = P;
  out.per_cell.assign(grid.cell_count(), {});
  for (auto& vecs : out.per_cell) {
    vecs.resize(P);
    for (int p = 0; p < P; ++p) {
      vecs[p].t_start = t0 + static_cast<double>(p) * k * dt;
      vecs[p].values.assign(k, 0.0);
    }
  }
  const double t_end = out.end_time();
  for (const Task& s : tasks) {
    if (s.pub_time < t0 || s.pub_time >= t_end || !grid.bbox.contains(s.loc)) {
      ++out.ignored_tasks;
      continue;
    }
    const int cell = grid.cell_of(s.loc);
    const int slot = static_cast<int>(std::floor((s.pub_time - t0) / dt));
    const int p = slot / k;
    const int j = slot % k;
    out.per_cell[cell - 1][p].values[j] = 1.0;
  }
  return out;
}

void write_series_csv(const TaskSeries& series, std::ostream& os) {
  os << "cell,t_start";
  for (int j = 1; j <= series.k; ++j) os << ",v" << j;
  os << "\n";
  for (std::size_t cell = 0; cell < series.per_cell.size(); ++cell) {
    for (const DemandVector& v : series.per_cell[cell]) {
      os << (cell + 1) << ',' << v.t_start;
      for (double x : v.values) os << ',' << x;
      os << "\n";
    }
  }
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw MetricError("average_precision: scores and labels differ in length");
  }
  std::size_t positives = 0;
  for (int y : labels) positives += (y != 0);
  if (positives == 0) throw MetricError("average_precision: no positive labels");

  struct Point {
    double recall;
    double precision;
  };
  std::vector<Point> pts;
  pts.reserve(101);
  for (int step = 0; step <= 100; ++step) {
    const double thr = step / 100.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= thr) {
        if (labels[i] != 0) ++tp;
        else ++fp;
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    pts.push_back({recall, precision});
  }

  // Interpolated precision: p(r) = max precision among points with recall >= r.
  // The sweep at threshold 0 classifies everything positive, so recall 1 is
  // always covered and the integral spans the full [0, 1] recall range.
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.recall > b.recall;
  });
  double ap = 0.0;
  double running_max = 0.0;
  std::size_t i = 0;
  while (i < pts.size()) {
    const double r = pts[i].recall;
    while (i < pts.size() && pts[i].recall == r) {
      running_max = std::max(running_max, pts[i].precision);
      ++i;
    }
    const double r_lo = (i < pts.size()) ? pts[i].recall : 0.0;
    ap += running_max * (r - r_lo);
  }
  return ap;
}

}  // namespace datawa
