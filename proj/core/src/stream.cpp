#include "datawa/stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "datawa/rng.hpp"

namespace datawa {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IngestError(std::string("load_stream: bad ") + what + " '" + s + "'", line_no);
  }
  return v;
}

std::int64_t parse_id(const std::string& s, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IngestError("load_stream: bad id '" + s + "'", line_no);
  }
  return v;
}

void format_double(std::ostream& os, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, ptr - buf);
  (void)ec;
}

}  // namespace

std::size_t EventStream::task_count() const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(),
                    [](const Event& e) { return e.kind == Event::Kind::TaskArrival; }));
}

std::size_t EventStream::worker_count() const {
  return events.size() - task_count();
}

EventStream load_stream(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("load_stream: cannot open " + path);
  EventStream out;
  std::string line;
  std::size_t line_no = 0;
  bool sorted = true;
  double last_t = -std::numeric_limits<double>::infinity();
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "kind,id,t,x,y,extra1,extra2") {
        throw IngestError("load_stream: unexpected header '" + line + "'", line_no);
      }
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 7) {
      throw IngestError("load_stream: expected 7 fields, got " + std::to_string(fields.size()),
                        line_no);
    }
    Event e;
    e.t = parse_double(fields[2], line_no, "time");
    const double x = parse_double(fields[3], line_no, "x");
    const double y = parse_double(fields[4], line_no, "y");
    if (fields[0] == "worker") {
      e.kind = Event::Kind::WorkerArrival;
      e.worker.id = parse_id(fields[1], line_no);
      e.worker.loc = {x, y};
      e.worker.on_time = e.t;
      e.worker.reach_km = parse_double(fields[5], line_no, "reach");
      e.worker.off_time = parse_double(fields[6], line_no, "off_time");
      if (!(e.worker.off_time > e.worker.on_time) || !(e.worker.reach_km > 0.0)) {
        throw IngestError("load_stream: worker with invalid reach or off_time", line_no);
      }
    } else if (fields[0] == "task") {
      e.kind = Event::Kind::TaskArrival;
      e.task.id = parse_id(fields[1], line_no);
      e.task.loc = {x, y};
      e.task.pub_time = e.t;
      e.task.exp_time = parse_double(fields[5], line_no, "exp_time");
      e.task.origin = TaskOrigin::Real;
      if (!fields[6].empty()) {
        throw IngestError("load_stream: task rows must leave extra2 empty", line_no);
      }
      if (!(e.task.exp_time > e.task.pub_time)) {
        throw IngestError("load_stream: task expires before publication", line_no);
      }
    } else {
      throw IngestError("load_stream: unknown kind '" + fields[0] + "'", line_no);
    }
    if (e.t < last_t) sorted = false;
    last_t = e.t;
    out.events.push_back(std::move(e));
  }
  if (!sorted) {
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
  }
  return out;
}

void save_stream(const EventStream& stream, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("save_stream: cannot open " + path);
  os << "kind,id,t,x,y,extra1,extra2\n";
  for (const Event& e : stream.events) {
    if (e.kind == Event::Kind::WorkerArrival) {
      os << "worker," << e.worker.id << ',';
      format_double(os, e.worker.on_time);
      os << ',';
      format_double(os, e.worker.loc.x);
      os << ',';
      format_double(os, e.worker.loc.y);
      os << ',';
      format_double(os, e.worker.reach_km);
      os << ',';
      format_double(os, e.worker.off_time);
      os << '\n';
    } else {
      os << "task," << e.task.id << ',';
      format_double(os, e.task.pub_time);
      os << ',';
      format_double(os, e.task.loc.x);
      os << ',';
      format_double(os, e.task.loc.y);
      os << ',';
      format_double(os, e.task.exp_time);
      os << ",\n";
    }
  }
  if (!os) throw Error("save_stream: write failed for " + path);
}

EventStream synth_workload(const WorkloadConfig& cfg) {
  if (cfg.num_workers < 0 || cfg.num_tasks < 0 || !(cfg.t_end > cfg.t_start) ||
      !(cfg.avail_s > 0.0) || !(cfg.valid_s > 0.0) || !(cfg.reach_km > 0.0)) {
    throw ConfigError("synth_workload: invalid counts or durations");
  }
  const GridSpec grid = build_grid(cfg.bbox, cfg.grid_rows, cfg.grid_cols);
  Rng rng(cfg.seed);

  EventStream out;
  out.events.reserve(static_cast<std::size_t>(cfg.num_workers + cfg.num_tasks));

  for (int i = 0; i < cfg.num_workers; ++i) {
    Event e;
    e.kind = Event::Kind::WorkerArrival;
    e.worker.id = i + 1;
    e.worker.loc = {rng.uniform(cfg.bbox.min_x, cfg.bbox.max_x),
                    rng.uniform(cfg.bbox.min_y, cfg.bbox.max_y)};
    e.worker.reach_km = cfg.reach_km;
    e.worker.on_time = rng.uniform(cfg.t_start, cfg.t_end);
    e.worker.off_time = e.worker.on_time + cfg.avail_s;
    e.t = e.worker.on_time;
    out.events.push_back(std::move(e));
  }

  // Per-window hotspot activity. A lagged hotspot mirrors its source one
  // window later, which plants the cross-cell dependency the demand learner
  // is meant to pick up.
  const double window = cfg.k * cfg.dt;
  const int n_windows = static_cast<int>(std::ceil((cfg.t_end - cfg.t_start) / window));
  std::vector<std::vector<bool>> active(cfg.hotspots.size(), std::vector<bool>(n_windows, false));
  for (std::size_t h = 0; h < cfg.hotspots.size(); ++h) {
    const HotspotSpec& spec = cfg.hotspots[h];
    if (spec.lag_from >= 0) continue;
    for (int p = 0; p < n_windows; ++p) {
      active[h][p] =
          spec.period <= 1 || ((p + spec.phase) % spec.period) < std::max(1, spec.duration);
    }
  }
  for (std::size_t h = 0; h < cfg.hotspots.size(); ++h) {
    const HotspotSpec& spec = cfg.hotspots[h];
    if (spec.lag_from < 0) continue;
    if (spec.lag_from >= static_cast<int>(cfg.hotspots.size()) ||
        static_cast<std::size_t>(spec.lag_from) == h) {
      throw ConfigError("synth_workload: hotspot lag_from out of range");
    }
    for (int p = 1; p < n_windows; ++p) active[h][p] = active[spec.lag_from][p - 1];
  }

  // Categorical weight per (window, cell): background plus active hotspots.
  const int cells = grid.cell_count();
  std::vector<double> weights(static_cast<std::size_t>(n_windows) * cells, cfg.base_rate);
  for (std::size_t h = 0; h < cfg.hotspots.size(); ++h) {
    const HotspotSpec& spec = cfg.hotspots[h];
    if (spec.cell < 1 || spec.cell > cells) {
      throw ConfigError("synth_workload: hotspot cell out of range");
    }
    for (int p = 0; p < n_windows; ++p) {
      if (active[h][p]) weights[static_cast<std::size_t>(p) * cells + (spec.cell - 1)] += spec.rate;
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  // Zero intensity everywhere: the stream carries only workers.
  const int n_tasks = total > 0.0 ? cfg.num_tasks : 0;

  for (int i = 0; i < n_tasks; ++i) {
    double pick = rng.uniform() * total;
    std::size_t slot = 0;
    while (slot + 1 < weights.size() && pick > weights[slot]) {
      pick -= weights[slot];
      ++slot;
    }
    const int p = static_cast<int>(slot) / cells;
    const int cell = static_cast<int>(slot) % cells + 1;
    const double w_start = cfg.t_start + p * window;
    const double w_end = std::min(cfg.t_end, w_start + window);
    Event e;
    e.kind = Event::Kind::TaskArrival;
    e.task.id = i + 1;
    const int row = (cell - 1) / grid.cols;
    const int col = (cell - 1) % grid.cols;
    // An active hotspot with a positive spread concentrates its tasks around
    // the cell centroid instead of filling the cell.
    double spread = -1.0;
    for (std::size_t h = 0; h < cfg.hotspots.size(); ++h) {
      if (cfg.hotspots[h].cell == cell && cfg.hotspots[h].spread_km > 0.0 && active[h][p]) {
        spread = cfg.hotspots[h].spread_km;
      }
    }
    if (spread > 0.0) {
      const Location c = grid.centroid(cell);
      e.task.loc = {c.x + rng.uniform(-spread, spread), c.y + rng.uniform(-spread, spread)};
      e.task.loc.x = std::clamp(e.task.loc.x, cfg.bbox.min_x, cfg.bbox.max_x);
      e.task.loc.y = std::clamp(e.task.loc.y, cfg.bbox.min_y, cfg.bbox.max_y);
    } else {
      e.task.loc = {cfg.bbox.min_x + (col + rng.uniform()) * grid.cell_width(),
                    cfg.bbox.min_y + (row + rng.uniform()) * grid.cell_height()};
    }
    e.task.pub_time = rng.uniform(w_start, w_end);
    e.task.exp_time = e.task.pub_time + cfg.valid_s;
    e.task.origin = TaskOrigin::Real;
    e.t = e.task.pub_time;
    out.events.push_back(std::move(e));
  }

  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return out;
}

}  // namespace datawa
