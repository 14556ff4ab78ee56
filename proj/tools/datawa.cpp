// Command-line front end: workload synthesis, model training, simulation,
// parameter sweeps, and report aggregation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "datawa/ddgnn.hpp"
#include "datawa/engine.hpp"
#include "datawa/experiment.hpp"
#include "datawa/grid.hpp"
#include "datawa/rng.hpp"
#include "datawa/search.hpp"
#include "datawa/stream.hpp"
#include "json.hpp"

namespace datawa::cli {
namespace {

using nlohmann::json;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw Error("cannot open config file " + path);
  json j;
  is >> j;
  return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

json section(const json& j, const char* key) {
  return j.contains(key) ? j.at(key) : json::object();
}

WorkloadConfig workload_from(const json& cfg) {
  const json w = section(cfg, "workload");
  const json g = section(cfg, "grid");
  const json s = section(cfg, "series");
  WorkloadConfig out;
  out.num_workers = get_or(w, "num_workers", out.num_workers);
  out.num_tasks = get_or(w, "num_tasks", out.num_tasks);
  if (g.contains("bbox")) {
    const auto b = g.at("bbox").get<std::vector<double>>();
    if (b.size() != 4) throw ConfigError("grid.bbox must be [min_x, min_y, max_x, max_y]");
    out.bbox = {b[0], b[1], b[2], b[3]};
  }
  out.t_start = get_or(w, "t_start", out.t_start);
  out.t_end = get_or(w, "t_end", out.t_end);
  out.reach_km = get_or(w, "reach_km", out.reach_km);
  out.avail_s = get_or(w, "avail_s", out.avail_s);
  out.valid_s = get_or(w, "valid_s", out.valid_s);
  out.grid_rows = get_or(g, "rows", out.grid_rows);
  out.grid_cols = get_or(g, "cols", out.grid_cols);
  out.dt = get_or(s, "dt", out.dt);
  out.k = get_or(s, "k", out.k);
  out.base_rate = get_or(w, "base_rate", out.base_rate);
  out.seed = get_or(w, "seed", out.seed);
  if (w.contains("hotspots")) {
    out.hotspots.clear();
    for (const json& h : w.at("hotspots")) {
      HotspotSpec spec;
      spec.cell = get_or(h, "cell", 1);
      spec.rate = get_or(h, "rate", 1.0);
      spec.period = get_or(h, "period", 2);
      spec.phase = get_or(h, "phase", 0);
      spec.duration = get_or(h, "duration", 1);
      spec.lag_from = get_or(h, "lag_from", -1);
      spec.spread_km = get_or(h, "spread_km", 0.0);
      out.hotspots.push_back(spec);
    }
  }
  return out;
}

EngineConfig engine_from(const json& cfg) {
  const json e = section(cfg, "engine");
  const json t = section(cfg, "travel");
  const json s = section(cfg, "series");
  const json f = section(cfg, "features");
  EngineConfig out;
  out.travel.speed_km_s = get_or(t, "speed_kmh", 40.0) / 3600.0;
  out.max_len = get_or(e, "max_len", out.max_len);
  out.predict_threshold = get_or(e, "predict_threshold", out.predict_threshold);
  out.predicted_valid = get_or(e, "predicted_valid", out.predicted_valid);
  out.scouts_per_cell = get_or(e, "scouts_per_cell", out.scouts_per_cell);
  out.dt = get_or(s, "dt", out.dt);
  out.k = get_or(s, "k", out.k);
  out.history = get_or(s, "history", out.history);
  out.features.ref_workers = get_or(f, "ref_workers", out.features.ref_workers);
  out.features.ref_tasks = get_or(f, "ref_tasks", out.features.ref_tasks);
  out.features.ref_time = get_or(f, "ref_time", out.features.ref_time);
  out.features.ref_dist = get_or(f, "ref_dist", out.features.ref_dist);
  out.features.ref_seq = get_or(f, "ref_seq", out.features.ref_seq);
  const json g = section(cfg, "grid");
  if (g.contains("bbox")) {
    const auto b = g.at("bbox").get<std::vector<double>>();
    out.grid = build_grid({b[0], b[1], b[2], b[3]}, get_or(g, "rows", 6), get_or(g, "cols", 6));
  }
  return out;
}

DemandHyper demand_hyper_from(const json& cfg) {
  const json d = section(cfg, "demand_training");
  const json s = section(cfg, "series");
  DemandHyper h;
  h.history = get_or(s, "history", h.history);
  h.k = get_or(s, "k", h.k);
  h.embed_dim = get_or(d, "embed_dim", h.embed_dim);
  h.filter_k = get_or(d, "filter_k", h.filter_k);
  h.dilations = get_or(d, "dilations", h.dilations);
  h.alpha = get_or(d, "alpha", h.alpha);
  h.hops = get_or(d, "hops", h.hops);
  h.lr = get_or(d, "lr", h.lr);
  h.batch = get_or(d, "batch", h.batch);
  h.epochs = get_or(d, "epochs", h.epochs);
  h.seed = get_or(d, "seed", h.seed);
  return h;
}

TvfHyper tvf_hyper_from(const json& cfg) {
  const json t = section(cfg, "tvf_training");
  TvfHyper h;
  h.hidden = get_or(t, "hidden", h.hidden);
  h.lr = get_or(t, "lr", h.lr);
  h.batch = get_or(t, "batch", h.batch);
  h.epochs = get_or(t, "epochs", h.epochs);
  h.val_fraction = get_or(t, "val_fraction", h.val_fraction);
  h.seed = get_or(t, "seed", h.seed);
  return h;
}

std::vector<Task> stream_tasks(const EventStream& s) {
  std::vector<Task> out;
  for (const Event& e : s.events) {
    if (e.kind == Event::Kind::TaskArrival) out.push_back(e.task);
  }
  return out;
}

/// Observed windows of a stream on the configured grid, split into train and
/// validation series by time (first `train_fraction` of complete windows).
std::pair<TaskSeries, TaskSeries> split_series(const EventStream& stream, const GridSpec& grid,
                                               double dt, int k, double train_fraction) {
  const std::vector<Task> tasks = stream_tasks(stream);
  if (tasks.empty()) throw ConfigError("stream contains no tasks");
  double max_pub = 0.0;
  for (const Task& t : tasks) max_pub = std::max(max_pub, t.pub_time);
  const double window = k * dt;
  const int total = static_cast<int>(std::floor(max_pub / window));
  if (total < 4) throw ConfigError("stream too short to split into train and validation windows");
  const int train_windows = std::max(2, static_cast<int>(total * train_fraction));
  const int val_windows = total - train_windows;
  if (val_windows < 2) throw ConfigError("not enough windows left for validation");
  TaskSeries train = build_series(tasks, grid, 0.0, k, dt, train_windows);
  TaskSeries val = build_series(tasks, grid, train_windows * window, k, dt, val_windows);
  return {std::move(train), std::move(val)};
}

/// Random planning-instance parameters for experience collection. Defaults
/// mirror desk-scale fixtures; configs narrow them to the simulated geometry.
struct InstanceSampling {
  int count = 200;
  int max_workers = 4;
  int max_tasks = 6;
  double box_km = 2.0;
  double reach_min_km = 0.5;
  double reach_max_km = 1.6;
  double exp_min_s = 5.0;
  double exp_max_s = 400.0;
  double off_min_s = 60.0;
  double off_max_s = 600.0;
  std::uint64_t seed = 1;
};

InstanceSampling sampling_from(const json& cfg) {
  const json e = section(cfg, "experience");
  InstanceSampling s;
  s.count = get_or(e, "instances", s.count);
  s.max_workers = get_or(e, "max_workers", s.max_workers);
  s.max_tasks = get_or(e, "max_tasks", s.max_tasks);
  s.box_km = get_or(e, "box_km", s.box_km);
  s.reach_min_km = get_or(e, "reach_min_km", s.reach_min_km);
  s.reach_max_km = get_or(e, "reach_max_km", s.reach_max_km);
  s.exp_min_s = get_or(e, "exp_min_s", s.exp_min_s);
  s.exp_max_s = get_or(e, "exp_max_s", s.exp_max_s);
  s.off_min_s = get_or(e, "off_min_s", s.off_min_s);
  s.off_max_s = get_or(e, "off_max_s", s.off_max_s);
  s.seed = get_or(e, "seed", s.seed);
  return s;
}

ExperienceBuffer collect_from_instances(const InstanceSampling& sampling, const EngineConfig& cfg,
                                        std::uint64_t seed, std::size_t capacity) {
  ExperienceBuffer u(capacity);
  Rng rng(seed);
  for (int i = 0; i < sampling.count; ++i) {
    std::vector<Worker> workers;
    std::vector<Task> tasks;
    const int n_workers = 1 + static_cast<int>(rng.below(sampling.max_workers));
    const int n_tasks = 1 + static_cast<int>(rng.below(sampling.max_tasks));
    // Tasks cluster around a demand center with workers split between the
    // cluster and the wider box, the locality profile searches actually face.
    const Location center{rng.uniform(0, sampling.box_km), rng.uniform(0, sampling.box_km)};
    auto near = [&](const Location& base, double radius) {
      return Location{base.x + rng.uniform(-radius, radius),
                      base.y + rng.uniform(-radius, radius)};
    };
    for (int wi = 0; wi < n_workers; ++wi) {
      Worker w;
      w.id = wi + 1;
      w.loc = wi % 2 == 0 ? near(center, 0.3)
                          : Location{rng.uniform(0, sampling.box_km),
                                     rng.uniform(0, sampling.box_km)};
      w.reach_km = rng.uniform(sampling.reach_min_km, sampling.reach_max_km);
      w.off_time = rng.uniform(sampling.off_min_s, sampling.off_max_s);
      workers.push_back(w);
    }
    for (int ti = 0; ti < n_tasks; ++ti) {
      Task t;
      t.id = ti + 1;
      t.loc = rng.uniform() < 0.8 ? near(center, 0.2)
                                  : Location{rng.uniform(0, sampling.box_km),
                                             rng.uniform(0, sampling.box_km)};
      t.exp_time = rng.uniform(sampling.exp_min_s, sampling.exp_max_s);
      tasks.push_back(t);
    }
    SearchStats stats;
    tpa(workers, tasks, 0.0, cfg, nullptr, &stats, &u);
  }
  return u;
}

void write_demand_curve(const TrainResult& r, const std::string& path) {
  std::ofstream os(path);
  os << "epoch,train_loss,val_ap\n";
  for (const auto& p : r.curve) os << p.epoch << ',' << p.train_loss << ',' << p.val_ap << "\n";
}

void write_tvf_curve(const TvfTrainResult& r, const std::string& path) {
  std::ofstream os(path);
  os << "epoch,train_mse,val_mse\n";
  for (const auto& p : r.curve) os << p.epoch << ',' << p.train_mse << ',' << p.val_mse << "\n";
}

ConfigEcho echo_from(const WorkloadConfig& w) {
  return ConfigEcho{w.num_tasks, w.num_workers, w.reach_km, w.avail_s, w.valid_s};
}

int run(int argc, char** argv) {
  CLI::App app{"DATA-WA spatial crowdsourcing assignment engine"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file")->envname("DATAWA_CONFIG");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic event stream CSV");
  std::string synth_out = "stream.csv";
  std::optional<std::uint64_t> synth_seed;
  std::optional<int> synth_tasks, synth_workers;
  synth->add_option("--out", synth_out, "Output stream CSV");
  synth->add_option("--seed", synth_seed, "Override workload seed");
  synth->add_option("--tasks", synth_tasks, "Override task count");
  synth->add_option("--workers", synth_workers, "Override worker count");

  // train-demand
  auto* train_demand_cmd = app.add_subcommand("train-demand", "Train the demand model");
  std::string td_stream, td_out = "demand.bin";
  std::optional<std::uint64_t> td_seed;
  std::optional<int> td_epochs;
  double td_train_fraction = 0.8;
  train_demand_cmd->add_option("--stream", td_stream, "Input stream CSV")->required();
  train_demand_cmd->add_option("--out", td_out, "Output parameter file");
  train_demand_cmd->add_option("--seed", td_seed, "Override training seed");
  train_demand_cmd->add_option("--epochs", td_epochs, "Override epoch count");
  train_demand_cmd->add_option("--train-fraction", td_train_fraction,
                               "Fraction of windows used for training");

  // collect-experience
  auto* collect = app.add_subcommand("collect-experience",
                                     "Record search experience for value training");
  std::string ce_stream, ce_out = "experience.bin";
  int ce_instances = 200;
  std::optional<std::uint64_t> ce_seed;
  collect->add_option("--stream", ce_stream,
                      "Replay this stream with the exact planner instead of sampling instances");
  collect->add_option("--instances", ce_instances, "Number of sampled planning instances");
  collect->add_option("--out", ce_out, "Output experience file");
  collect->add_option("--seed", ce_seed, "Override sampling seed");

  // train-tvf
  auto* train_tvf_cmd = app.add_subcommand("train-tvf", "Train the task value function");
  std::string tt_exp, tt_out = "tvf.bin";
  std::optional<std::uint64_t> tt_seed;
  std::optional<int> tt_epochs;
  train_tvf_cmd->add_option("--experience", tt_exp, "Input experience file")->required();
  train_tvf_cmd->add_option("--out", tt_out, "Output parameter file");
  train_tvf_cmd->add_option("--seed", tt_seed, "Override training seed");
  train_tvf_cmd->add_option("--epochs", tt_epochs, "Override epoch count");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run one strategy over a stream");
  std::string sim_stream, sim_strategy = "dta", sim_demand, sim_tvf, sim_report;
  std::optional<std::uint64_t> sim_seed;
  simulate->add_option("--stream", sim_stream, "Input stream CSV")->required();
  simulate->add_option("--strategy", sim_strategy, "greedy|fta|dta|dta_tp|adaptive");
  simulate->add_option("--demand", sim_demand, "Demand model file (dta_tp, adaptive)");
  simulate->add_option("--tvf", sim_tvf, "Task value function file (adaptive)");
  simulate->add_option("--report", sim_report, "Write the run report JSON here");
  simulate->add_option("--seed", sim_seed, "Seed recorded in the report");

  // bench
  auto* bench = app.add_subcommand("bench", "Sweep workload axes over seeded runs");
  std::string bench_dir = "bench_out";
  std::string bench_demand, bench_tvf;
  int bench_seeds = 5;
  std::vector<std::string> bench_strategies{"greedy", "fta", "dta"};
  bench->add_option("--out-dir", bench_dir, "Report output directory");
  bench->add_option("--seeds", bench_seeds, "Seeds per configuration");
  bench->add_option("--strategies", bench_strategies, "Strategies to run");
  bench->add_option("--demand", bench_demand, "Demand model file");
  bench->add_option("--tvf", bench_tvf, "Task value function file");

  // report
  auto* report = app.add_subcommand("report", "Aggregate run report JSON files");
  std::vector<std::string> report_inputs;
  std::string report_dir = "report_out";
  report->add_option("--in", report_inputs, "Run report JSON files")->required();
  report->add_option("--out-dir", report_dir, "Aggregate output directory");

  CLI11_PARSE(app, argc, argv);
  const json cfg = load_config(config_path);

  if (synth->parsed()) {
    WorkloadConfig wl = workload_from(cfg);
    if (synth_seed) wl.seed = *synth_seed;
    if (synth_tasks) wl.num_tasks = *synth_tasks;
    if (synth_workers) wl.num_workers = *synth_workers;
    save_stream(synth_workload(wl), synth_out);
    std::cout << "wrote " << synth_out << "\n";
    return 0;
  }

  if (train_demand_cmd->parsed()) {
    EngineConfig ecfg = engine_from(cfg);
    if (!ecfg.grid) throw ConfigError("train-demand requires grid.bbox in the config");
    DemandHyper hyper = demand_hyper_from(cfg);
    if (td_seed) hyper.seed = *td_seed;
    if (td_epochs) hyper.epochs = *td_epochs;
    const EventStream stream = load_stream(td_stream);
    auto [train, val] = split_series(stream, *ecfg.grid, ecfg.dt, ecfg.k, td_train_fraction);
    const TrainResult r = train_demand(train, val, hyper);
    save_demand_model(r.model, td_out);
    write_demand_curve(r, td_out + ".curve.csv");
    std::cout << "best epoch " << r.best_epoch << ", val AP "
              << (r.curve.empty() ? 0.0 : r.curve[r.best_epoch - 1].val_ap) << ", wrote " << td_out
              << "\n";
    return 0;
  }

  if (collect->parsed()) {
    const EngineConfig ecfg = engine_from(cfg);
    const json e = section(cfg, "experience");
    const std::size_t capacity = get_or(e, "capacity", std::size_t{1'000'000});
    ExperienceBuffer u(capacity);
    if (!ce_stream.empty()) {
      const EventStream stream = load_stream(ce_stream);
      run_strategy(Strategy::Dta, stream, ecfg, {}, nullptr, &u);
    } else {
      InstanceSampling sampling = sampling_from(cfg);
      sampling.count = ce_instances;
      u = collect_from_instances(sampling, ecfg, ce_seed.value_or(sampling.seed), capacity);
    }
    save_experience(u, ce_out);
    std::cout << "wrote " << u.size() << " tuples to " << ce_out << "\n";
    return 0;
  }

  if (train_tvf_cmd->parsed()) {
    TvfHyper hyper = tvf_hyper_from(cfg);
    if (tt_seed) hyper.seed = *tt_seed;
    if (tt_epochs) hyper.epochs = *tt_epochs;
    const ExperienceBuffer u = load_experience(tt_exp);
    const TvfTrainResult r = train_tvf(u, hyper);
    save_tvf(r.model, tt_out);
    write_tvf_curve(r, tt_out + ".curve.csv");
    std::cout << "best epoch " << r.best_epoch << ", wrote " << tt_out << "\n";
    return 0;
  }

  if (simulate->parsed()) {
    const EngineConfig ecfg = engine_from(cfg);
    const EventStream stream = load_stream(sim_stream);
    const Strategy strategy = strategy_from_string(sim_strategy);

    std::optional<DemandModel> demand;
    if (!sim_demand.empty()) demand = load_demand_model(sim_demand);
    std::optional<NetScorer> scorer;
    if (!sim_tvf.empty()) scorer.emplace(load_tvf(sim_tvf));
    EngineModels models;
    if (demand) models.demand = &*demand;
    if (scorer) models.tvf = &*scorer;

    const WorkloadConfig wl = workload_from(cfg);
    const RunReport r =
        run_experiment(strategy, stream, ecfg, models, sim_seed.value_or(wl.seed), echo_from(wl));
    const std::string text = report_to_json(r);
    if (!sim_report.empty()) {
      std::ofstream os(sim_report);
      os << text << "\n";
    }
    std::cout << text << "\n";
    return 0;
  }

  if (bench->parsed()) {
    const json b = section(cfg, "bench");
    const WorkloadConfig base = workload_from(cfg);
    const EngineConfig ecfg = engine_from(cfg);

    std::optional<DemandModel> demand;
    if (!bench_demand.empty()) demand = load_demand_model(bench_demand);
    std::optional<NetScorer> scorer;
    if (!bench_tvf.empty()) scorer.emplace(load_tvf(bench_tvf));
    EngineModels models;
    if (demand) models.demand = &*demand;
    if (scorer) models.tvf = &*scorer;

    // Axis sweeps: {"num_tasks": [...], "num_workers": [...], "reach_km":
    // [...], "avail_s": [...], "valid_s": [...]}; the base config is one point.
    std::vector<WorkloadConfig> points{base};
    if (b.contains("axes")) {
      points.clear();
      for (const auto& [axis, values] : b.at("axes").items()) {
        for (const json& v : values) {
          WorkloadConfig wl = base;
          if (axis == "num_tasks") wl.num_tasks = v.get<int>();
          else if (axis == "num_workers") wl.num_workers = v.get<int>();
          else if (axis == "reach_km") wl.reach_km = v.get<double>();
          else if (axis == "avail_s") wl.avail_s = v.get<double>();
          else if (axis == "valid_s") wl.valid_s = v.get<double>();
          else throw ConfigError("unknown bench axis '" + axis + "'");
          points.push_back(wl);
        }
      }
    }
    std::vector<RunReport> reports;
    for (const WorkloadConfig& point : points) {
      for (int s = 0; s < bench_seeds; ++s) {
        WorkloadConfig wl = point;
        wl.seed = point.seed + static_cast<std::uint64_t>(s);
        const EventStream stream = synth_workload(wl);
        for (const std::string& name : bench_strategies) {
          reports.push_back(run_experiment(strategy_from_string(name), stream, ecfg, models,
                                           wl.seed, echo_from(wl)));
        }
      }
    }
    emit_report(reports, bench_dir);
    std::cout << "wrote " << reports.size() << " runs to " << bench_dir << "\n";
    return 0;
  }

  if (report->parsed()) {
    std::vector<RunReport> reports;
    for (const std::string& path : report_inputs) {
      std::ifstream is(path);
      if (!is) throw Error("cannot open report " + path);
      std::ostringstream os;
      os << is.rdbuf();
      reports.push_back(report_from_json(os.str()));
    }
    emit_report(reports, report_dir);
    std::cout << "aggregated " << reports.size() << " reports into " << report_dir << "\n";
    return 0;
  }

  return 0;
}

}  // namespace
}  // namespace datawa::cli

int main(int argc, char** argv) {
  try {
    return datawa::cli::run(argc, argv);
  } catch (const datawa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
