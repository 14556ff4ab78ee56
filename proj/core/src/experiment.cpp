#include "datawa/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"

namespace datawa {

RunReport run_experiment(Strategy strategy, const EventStream& stream, const EngineConfig& cfg,
                         const EngineModels& models, std::uint64_t seed, const ConfigEcho& echo) {
  RunStats stats;
  const Assignment a = baseline_assign(strategy, stream, cfg, models, &stats);
  RunReport r;
  r.strategy = to_string(strategy);
  r.seed = seed;
  r.assigned = static_cast<int>(a.task_count());
  r.expansions = stats.expansions;
  r.planning_events = stats.planning_events;
  r.plan_wall_ms = stats.plan_wall_ms;
  r.mean_plan_ms = stats.planning_events ? stats.plan_wall_ms / stats.planning_events : 0.0;
  r.predicted_emitted = stats.predicted_emitted;
  r.predicted_consumed = stats.predicted_consumed;
  r.cfg = echo;
  return r;
}

bool reports_equal_deterministic(const RunReport& a, const RunReport& b) {
  return a.strategy == b.strategy && a.seed == b.seed && a.assigned == b.assigned &&
         a.expansions == b.expansions && a.planning_events == b.planning_events &&
         a.predicted_emitted == b.predicted_emitted &&
         a.predicted_consumed == b.predicted_consumed;
}

namespace {

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["strategy"] = r.strategy;
  j["seed"] = r.seed;
  j["assigned"] = r.assigned;
  j["expansions"] = r.expansions;
  j["planning_events"] = r.planning_events;
  j["plan_wall_ms"] = r.plan_wall_ms;
  j["mean_plan_ms"] = r.mean_plan_ms;
  j["predicted_emitted"] = r.predicted_emitted;
  j["predicted_consumed"] = r.predicted_consumed;
  j["config"] = {{"num_tasks", r.cfg.num_tasks},
                 {"num_workers", r.cfg.num_workers},
                 {"reach_km", r.cfg.reach_km},
                 {"avail_s", r.cfg.avail_s},
                 {"valid_s", r.cfg.valid_s}};
  return j;
}

RunReport from_json(const nlohmann::json& j) {
  RunReport r;
  r.strategy = j.at("strategy").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.assigned = j.at("assigned").get<int>();
  r.expansions = j.at("expansions").get<long long>();
  r.planning_events = j.at("planning_events").get<int>();
  r.plan_wall_ms = j.at("plan_wall_ms").get<double>();
  r.mean_plan_ms = j.at("mean_plan_ms").get<double>();
  r.predicted_emitted = j.at("predicted_emitted").get<int>();
  r.predicted_consumed = j.at("predicted_consumed").get<int>();
  const auto& c = j.at("config");
  r.cfg.num_tasks = c.at("num_tasks").get<int>();
  r.cfg.num_workers = c.at("num_workers").get<int>();
  r.cfg.reach_km = c.at("reach_km").get<double>();
  r.cfg.avail_s = c.at("avail_s").get<double>();
  r.cfg.valid_s = c.at("valid_s").get<double>();
  return r;
}

void write_axis_csv(std::span<const RunReport> reports, const std::string& path,
                    double (*axis)(const RunReport&), const char* axis_name) {
  // (strategy, axis value) -> mean assigned, mean expansions, mean plan ms
  std::map<std::pair<std::string, double>, std::vector<const RunReport*>> groups;
  for (const RunReport& r : reports) groups[{r.strategy, axis(r)}].push_back(&r);
  std::ofstream os(path);
  os << "strategy," << axis_name << ",runs,mean_assigned,mean_expansions,mean_plan_ms\n";
  for (const auto& [key, rs] : groups) {
    double assigned = 0.0, expansions = 0.0, ms = 0.0;
    for (const RunReport* r : rs) {
      assigned += r->assigned;
      expansions += static_cast<double>(r->expansions);
      ms += r->plan_wall_ms;
    }
    const double n = static_cast<double>(rs.size());
    os << key.first << ',' << key.second << ',' << rs.size() << ',' << assigned / n << ','
       << expansions / n << ',' << ms / n << "\n";
  }
}

}  // namespace

std::string report_to_json(const RunReport& r) { return to_json(r).dump(2); }

RunReport report_from_json(const std::string& text) {
  return from_json(nlohmann::json::parse(text));
}

void emit_report(std::span<const RunReport> reports, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir + "/summary.csv");
    if (!os) throw Error("emit_report: cannot write to " + dir);
    os << "strategy,seed,assigned,expansions,planning_events,plan_wall_ms,mean_plan_ms,"
          "predicted_emitted,predicted_consumed,num_tasks,num_workers,reach_km,avail_s,valid_s\n";
    for (const RunReport& r : reports) {
      os << r.strategy << ',' << r.seed << ',' << r.assigned << ',' << r.expansions << ','
         << r.planning_events << ',' << r.plan_wall_ms << ',' << r.mean_plan_ms << ','
         << r.predicted_emitted << ',' << r.predicted_consumed << ',' << r.cfg.num_tasks << ','
         << r.cfg.num_workers << ',' << r.cfg.reach_km << ',' << r.cfg.avail_s << ','
         << r.cfg.valid_s << "\n";
    }
  }
  {
    nlohmann::json j = nlohmann::json::array();
    for (const RunReport& r : reports) j.push_back(to_json(r));
    std::ofstream os(dir + "/summary.json");
    os << j.dump(2) << "\n";
  }
  write_axis_csv(reports, dir + "/by_num_tasks.csv",
                 [](const RunReport& r) { return static_cast<double>(r.cfg.num_tasks); },
                 "num_tasks");
  write_axis_csv(reports, dir + "/by_num_workers.csv",
                 [](const RunReport& r) { return static_cast<double>(r.cfg.num_workers); },
                 "num_workers");
  write_axis_csv(reports, dir + "/by_reach.csv",
                 [](const RunReport& r) { return r.cfg.reach_km; }, "reach_km");
  write_axis_csv(reports, dir + "/by_avail.csv",
                 [](const RunReport& r) { return r.cfg.avail_s; }, "avail_s");
  write_axis_csv(reports, dir + "/by_valid.csv",
                 [](const RunReport& r) { return r.cfg.valid_s; }, "valid_s");
}

}  // namespace datawa
