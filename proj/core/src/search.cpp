#include "datawa/search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace datawa {

namespace {

/// Variable-width bitmask over task indices.
struct TaskMask {
  std::vector<std::uint64_t> words;

  explicit TaskMask(std::size_t bits = 0) : words((bits + 63) / 64, 0) {}
  void set(int i) { words[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(int i) { words[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  bool test(int i) const { return words[i >> 6] & (std::uint64_t{1} << (i & 63)); }
  bool contains(const TaskMask& sub) const {
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (sub.words[w] & ~words[w]) return false;
    }
    return true;
  }
  TaskMask minus(const TaskMask& sub) const {
    TaskMask out = *this;
    for (std::size_t w = 0; w < words.size(); ++w) out.words[w] &= ~sub.words[w];
    return out;
  }
  int count() const {
    int c = 0;
    for (std::uint64_t w : words) c += std::popcount(w);
    return c;
  }
  bool operator==(const TaskMask&) const = default;
};

struct StateKey {
  int node;
  std::uint64_t wmask;
  TaskMask smask;
  bool operator==(const StateKey&) const = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    std::size_t h = std::hash<int>{}(k.node) * 0x9e3779b97f4a7c15ULL + k.wmask;
    for (std::uint64_t w : k.smask.words) h = h * 0x100000001b3ULL ^ w;
    return h;
  }
};

/// A worker's candidate sequence with precomputed task-index mask.
struct Candidate {
  const CatalogSequence* seq = nullptr;
  TaskMask mask;
  std::vector<TaskId> ids;   // copy of seq->tasks
  double duration = 0.0;     // completion_time - t_now; 0 for the empty sequence
};

struct NodeWorker {
  WorkerId id = 0;
  const Worker* worker = nullptr;
  std::vector<Candidate> candidates;  // lexicographic order, empty first
};

struct MemoEntry {
  int opt = 0;
  double cost = 0.0;     // total sequence duration of the kept plan, tie metric
  int best_worker = -1;  // index into node worker list; -1 for child-sum states
  int best_candidate = -1;
};

/// Flattened, index-based view of a SearchInstance.
struct Ctx {
  const SearchInstance* inst = nullptr;
  std::vector<const Task*> tasks_sorted;              // ascending id
  std::vector<std::vector<NodeWorker>> node_workers;  // per tree node
  std::unordered_map<WorkerId, const Worker*> worker_by_id;
  std::unordered_map<StateKey, MemoEntry, StateKeyHash> memo;
  ExperienceBuffer* experience = nullptr;
  SearchStats* stats = nullptr;

  int task_index(TaskId id) const {
    const auto it = std::lower_bound(tasks_sorted.begin(), tasks_sorted.end(), id,
                                     [](const Task* t, TaskId v) { return t->id < v; });
    if (it == tasks_sorted.end() || (*it)->id != id) return -1;
    return static_cast<int>(it - tasks_sorted.begin());
  }
};

Ctx make_ctx(const SearchInstance& inst, ExperienceBuffer* experience, SearchStats* stats) {
  Ctx ctx;
  ctx.inst = &inst;
  ctx.experience = experience;
  ctx.stats = stats;
  ctx.tasks_sorted.reserve(inst.tasks.size());
  for (const Task& t : inst.tasks) ctx.tasks_sorted.push_back(&t);
  std::sort(ctx.tasks_sorted.begin(), ctx.tasks_sorted.end(),
            [](const Task* a, const Task* b) { return a->id < b->id; });

  for (const Worker& w : inst.workers) ctx.worker_by_id.emplace(w.id, &w);

  ctx.node_workers.resize(inst.tree->nodes.size());
  for (const TreeNode& node : inst.tree->nodes) {
    auto& list = ctx.node_workers[node.id];
    if (node.workers.size() > 64) {
      throw ConfigError("dfsearch: tree node exceeds 64 workers");
    }
    for (WorkerId wid : node.workers) {
      NodeWorker nw;
      nw.id = wid;
      nw.worker = ctx.worker_by_id.at(wid);
      for (const CatalogSequence& seq : inst.catalogs->at(wid).sequences) {
        Candidate c;
        c.seq = &seq;
        c.mask = TaskMask(ctx.tasks_sorted.size());
        bool in_universe = true;
        for (TaskId tid : seq.tasks) {
          const int idx = ctx.task_index(tid);
          if (idx < 0) {
            in_universe = false;  // catalog entry mentions a task outside S
            break;
          }
          c.mask.set(idx);
        }
        if (!in_universe) continue;
        c.ids = seq.tasks;
        c.duration = seq.tasks.empty() ? 0.0 : seq.completion_time - inst.t_now;
        // Predicted tasks tie-break as very expensive: equal-count plans then
        // route real demand first and leave phantoms to surplus workers.
        for (TaskId tid : seq.tasks) {
          if (ctx.tasks_sorted[ctx.task_index(tid)]->origin == TaskOrigin::Predicted) {
            c.duration += 1e5;
          }
        }
        nw.candidates.push_back(std::move(c));
      }
      list.push_back(std::move(nw));
    }
  }
  return ctx;
}

/// Sorted worker ids of the state (remaining node workers plus all workers of
/// the direct children).
std::vector<WorkerId> state_worker_ids(const Ctx& ctx, int node, std::uint64_t wmask) {
  std::vector<WorkerId> out;
  const auto& list = ctx.node_workers[node];
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (wmask & (std::uint64_t{1} << i)) out.push_back(list[i].id);
  }
  for (int child : ctx.inst->tree->nodes[node].children) {
    const TreeNode& c = ctx.inst->tree->nodes[child];
    out.insert(out.end(), c.workers.begin(), c.workers.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TaskId> state_task_ids(const Ctx& ctx, const TaskMask& smask) {
  std::vector<TaskId> out;
  for (std::size_t i = 0; i < ctx.tasks_sorted.size(); ++i) {
    if (smask.test(static_cast<int>(i))) out.push_back(ctx.tasks_sorted[i]->id);
  }
  return out;
}

FeatureVec featurize_indexed(const Ctx& ctx, const std::vector<WorkerId>& state_workers,
                             const TaskMask& smask, const NodeWorker& actor,
                             const Candidate& cand) {
  std::vector<const Worker*> wptrs;
  wptrs.reserve(state_workers.size());
  for (WorkerId wid : state_workers) wptrs.push_back(ctx.worker_by_id.at(wid));
  std::vector<const Task*> tptrs;
  for (std::size_t i = 0; i < ctx.tasks_sorted.size(); ++i) {
    if (smask.test(static_cast<int>(i))) tptrs.push_back(ctx.tasks_sorted[i]);
  }
  std::vector<const Task*> seq_ptrs;
  for (TaskId tid : cand.ids) seq_ptrs.push_back(ctx.tasks_sorted[ctx.task_index(tid)]);
  return featurize(wptrs, tptrs, *actor.worker, seq_ptrs, ctx.inst->t_now, ctx.inst->travel,
                   ctx.inst->features, *ctx.inst->catalogs);
}

struct Value {
  int opt = 0;
  double cost = 0.0;
};

Value search_node(Ctx& ctx, int node, std::uint64_t wmask, const TaskMask& smask);

Value search_children(Ctx& ctx, int node, const TaskMask& smask) {
  Value total;
  for (int child : ctx.inst->tree->nodes[node].children) {
    const std::size_t n = ctx.node_workers[child].size();
    const std::uint64_t full = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
    const Value v = search_node(ctx, child, full, smask);
    total.opt += v.opt;
    total.cost += v.cost;
  }
  return total;
}

Value search_node(Ctx& ctx, int node, std::uint64_t wmask, const TaskMask& smask) {
  const StateKey key{node, wmask, smask};
  if (const auto it = ctx.memo.find(key); it != ctx.memo.end()) {
    return {it->second.opt, it->second.cost};
  }
  if (ctx.stats) ++ctx.stats->expansions;

  MemoEntry entry;
  const auto& list = ctx.node_workers[node];
  if (wmask != 0) {
    std::vector<WorkerId> sw;
    if (ctx.experience) sw = state_worker_ids(ctx, node, wmask);
    std::vector<TaskId> st;
    if (ctx.experience) st = state_task_ids(ctx, smask);
    for (std::size_t wi = 0; wi < list.size(); ++wi) {
      if (!(wmask & (std::uint64_t{1} << wi))) continue;
      const std::uint64_t wrest = wmask & ~(std::uint64_t{1} << wi);
      for (std::size_t ci = 0; ci < list[wi].candidates.size(); ++ci) {
        const Candidate& cand = list[wi].candidates[ci];
        if (!smask.contains(cand.mask)) continue;
        const Value below = search_node(ctx, node, wrest, smask.minus(cand.mask));
        const int value = below.opt + static_cast<int>(cand.ids.size());
        const double cost = below.cost + cand.duration;
        // Maximize the count; break ties toward the cheapest total duration so
        // equally large plans prefer nearby workers and short routes.
        if (entry.best_worker < 0 || value > entry.opt ||
            (value == entry.opt && cost < entry.cost)) {
          entry.opt = value;
          entry.cost = cost;
          entry.best_worker = static_cast<int>(wi);
          entry.best_candidate = static_cast<int>(ci);
        }
        if (ctx.experience) {
          ExperienceTuple tup;
          tup.state_workers = sw;
          tup.state_tasks = st;
          tup.worker = list[wi].id;
          tup.seq = cand.ids;
          tup.opt = static_cast<double>(value);
          tup.features = featurize_indexed(ctx, sw, smask, list[wi], cand);
          ctx.experience->push(std::move(tup));
        }
      }
    }
  } else {
    const Value v = search_children(ctx, node, smask);
    entry.opt = v.opt;
    entry.cost = v.cost;
  }
  ctx.memo.emplace(key, entry);
  return {entry.opt, entry.cost};
}

TaskMask full_task_mask(const Ctx& ctx) {
  TaskMask m(ctx.tasks_sorted.size());
  for (std::size_t i = 0; i < ctx.tasks_sorted.size(); ++i) m.set(static_cast<int>(i));
  return m;
}

std::uint64_t full_worker_mask(const Ctx& ctx, int node) {
  const std::size_t n = ctx.node_workers[node].size();
  return n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
}

void extract_plan(Ctx& ctx, int node, std::uint64_t wmask, TaskMask smask,
                  std::vector<std::pair<WorkerId, std::vector<TaskId>>>& out) {
  while (wmask != 0) {
    const MemoEntry& entry = ctx.memo.at(StateKey{node, wmask, smask});
    const NodeWorker& nw = ctx.node_workers[node][entry.best_worker];
    const Candidate& cand = nw.candidates[entry.best_candidate];
    if (!cand.ids.empty()) out.emplace_back(nw.id, cand.ids);
    wmask &= ~(std::uint64_t{1} << entry.best_worker);
    smask = smask.minus(cand.mask);
  }
  for (int child : ctx.inst->tree->nodes[node].children) {
    extract_plan(ctx, child, full_worker_mask(ctx, child), smask, out);
  }
}

void validate_instance(const SearchInstance& inst) {
  if (!inst.tree || !inst.catalogs) throw ConfigError("search: tree and catalogs required");
}

}  // namespace

FeatureVec featurize(std::span<const Worker* const> state_workers,
                     std::span<const Task* const> state_tasks, const Worker& actor,
                     std::span<const Task* const> seq, double t_now, const TravelModel& travel,
                     const FeatureConfig& fc, const SequenceCatalog& catalogs) {
  FeatureVec f{};
  f[0] = static_cast<double>(state_workers.size()) / fc.ref_workers;
  f[1] = static_cast<double>(state_tasks.size()) / fc.ref_tasks;
  if (!state_tasks.empty()) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Task* t : state_tasks) {
      const double slack = t->exp_time - t_now;
      sum += slack;
      lo = std::min(lo, slack);
      hi = std::max(hi, slack);
    }
    f[2] = sum / static_cast<double>(state_tasks.size()) / fc.ref_time;
    f[3] = lo / fc.ref_time;
    f[4] = hi / fc.ref_time;
  }
  f[5] = actor.availability_window(t_now) / fc.ref_time;
  f[6] = static_cast<double>(seq.size()) / fc.ref_seq;
  if (!seq.empty()) {
    double t = 0.0;
    double dist = 0.0;
    Location from = actor.loc;
    for (const Task* s : seq) {
      const TravelMetrics tm = travel_metrics(from, s->loc, travel);
      t += tm.time_s;
      dist += tm.distance_km;
      from = s->loc;
    }
    f[7] = t / fc.ref_time;
    f[8] = dist / fc.ref_dist;
  }
  f[9] = state_tasks.empty()
             ? 0.0
             : static_cast<double>(seq.size()) / static_cast<double>(state_tasks.size());
  int intersecting = 0;
  for (const Worker* w : state_workers) {
    if (w->id == actor.id) continue;
    const auto it = catalogs.by_worker.find(w->id);
    if (it == catalogs.by_worker.end()) continue;
    const auto& rs = it->second.reachable;
    for (const Task* s : seq) {
      if (std::binary_search(rs.begin(), rs.end(), s->id)) {
        ++intersecting;
        break;
      }
    }
  }
  f[10] = static_cast<double>(intersecting) / fc.ref_workers;
  return f;
}

void ExperienceBuffer::push(ExperienceTuple t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

int dfsearch(const SearchInstance& inst, ExperienceBuffer* experience, SearchStats* stats) {
  validate_instance(inst);
  Ctx ctx = make_ctx(inst, experience, stats);
  const TaskMask all = full_task_mask(ctx);
  int total = 0;
  for (int root : inst.tree->roots) {
    total += search_node(ctx, root, full_worker_mask(ctx, root), all).opt;
  }
  return total;
}

std::vector<std::pair<WorkerId, std::vector<TaskId>>> dfsearch_plan(const SearchInstance& inst,
                                                                    SearchStats* stats,
                                                                    ExperienceBuffer* experience) {
  validate_instance(inst);
  Ctx ctx = make_ctx(inst, experience, stats);
  const TaskMask all = full_task_mask(ctx);
  std::vector<std::pair<WorkerId, std::vector<TaskId>>> plan;
  for (int root : inst.tree->roots) {
    search_node(ctx, root, full_worker_mask(ctx, root), all);
    extract_plan(ctx, root, full_worker_mask(ctx, root), all, plan);
  }
  return plan;
}

namespace {

void tvf_node(Ctx& ctx, int node, std::uint64_t wmask, TaskMask smask, const TvfScorer& tvf,
              std::vector<std::pair<WorkerId, std::vector<TaskId>>>& out) {
  if (ctx.stats) ++ctx.stats->expansions;
  const auto& list = ctx.node_workers[node];
  if (wmask != 0) {
    // Lowest worker id first; node worker lists are already id-sorted.
    const int wi = std::countr_zero(wmask);
    const NodeWorker& nw = list[wi];
    const std::vector<WorkerId> sw = state_worker_ids(ctx, node, wmask);
    const std::vector<TaskId> st = state_task_ids(ctx, smask);
    const Candidate* best = nullptr;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const Candidate& cand : nw.candidates) {
      if (!smask.contains(cand.mask)) continue;
      const FeatureVec f = featurize_indexed(ctx, sw, smask, nw, cand);
      ActionContext actx;
      actx.features = &f;
      actx.state_workers = &sw;
      actx.state_tasks = &st;
      actx.worker = nw.id;
      actx.seq = cand.ids;
      const double s = tvf.score(actx);
      // Candidates enumerate in lexicographic order, so strict improvement
      // keeps the lexicographically smallest sequence on ties.
      if (best == nullptr || s > best_score) {
        best = &cand;
        best_score = s;
      }
    }
    if (best && !best->ids.empty()) out.emplace_back(nw.id, best->ids);
    const TaskMask rest = best ? smask.minus(best->mask) : smask;
    tvf_node(ctx, node, wmask & ~(std::uint64_t{1} << wi), rest, tvf, out);
  } else {
    for (int child : ctx.inst->tree->nodes[node].children) {
      tvf_node(ctx, child, full_worker_mask(ctx, child), smask, tvf, out);
    }
  }
}

}  // namespace

std::vector<std::pair<WorkerId, std::vector<TaskId>>> dfsearch_tvf(const SearchInstance& inst,
                                                                   const TvfScorer& tvf,
                                                                   SearchStats* stats) {
  validate_instance(inst);
  Ctx ctx = make_ctx(inst, nullptr, stats);
  std::vector<std::pair<WorkerId, std::vector<TaskId>>> plan;
  for (int root : inst.tree->roots) {
    tvf_node(ctx, root, full_worker_mask(ctx, root), full_task_mask(ctx), tvf, plan);
  }
  return plan;
}

double TvfModel::value(const FeatureVec& f) const {
  double out = b2.v[0];
  for (int h = 0; h < w1.cols; ++h) {
    double acc = b1.v[h];
    for (int i = 0; i < w1.rows; ++i) acc += f[i] * w1.at(i, h);
    if (acc > 0.0) out += acc * w2.at(h, 0);
  }
  return out;
}

TvfTrainResult train_tvf(const ExperienceBuffer& u, const TvfHyper& hyper) {
  const auto& data = u.data();
  if (data.size() < 2) throw ConfigError("train_tvf: not enough experience");
  Rng rng(hyper.seed);

  TvfModel model;
  const double scale = 1.0 / std::sqrt(static_cast<double>(kFeatureDim));
  model.w1 = Mat(kFeatureDim, hyper.hidden);
  for (double& x : model.w1.v) x = scale * rng.normal();
  model.b1 = Mat(1, hyper.hidden);
  model.w2 = Mat(hyper.hidden, 1);
  for (double& x : model.w2.v) x = rng.normal() / std::sqrt(static_cast<double>(hyper.hidden));
  model.b2 = Mat(1, 1);

  // Seeded shuffle, then the tail becomes the held-out split.
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t n_val =
      std::min(data.size() - 1,
               static_cast<std::size_t>(std::ceil(hyper.val_fraction * data.size())));
  std::vector<int> train_idx(order.begin(), order.end() - n_val);
  std::vector<int> val_idx(order.end() - n_val, order.end());

  auto batch_mats = [&](std::span<const int> idx) {
    Mat x(static_cast<int>(idx.size()), kFeatureDim);
    Mat y(static_cast<int>(idx.size()), 1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (int c = 0; c < kFeatureDim; ++c) {
        x.at(static_cast<int>(r), c) = data[idx[r]].features[c];
      }
      y.at(static_cast<int>(r), 0) = data[idx[r]].opt;
    }
    return std::make_pair(std::move(x), std::move(y));
  };

  auto eval_mse = [&](std::span<const int> idx) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    for (int i : idx) {
      const double d = model.value(data[i].features) - data[i].opt;
      acc += d * d;
    }
    return acc / static_cast<double>(idx.size());
  };

  TvfTrainResult result;
  result.model = model;
  double best_val = std::numeric_limits<double>::infinity();
  const int batch = std::max(1, hyper.batch);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    // Uniform replay sampling: one pass of shuffled mini-batches per epoch.
    for (std::size_t i = train_idx.size(); i > 1; --i) {
      std::swap(train_idx[i - 1], train_idx[rng.below(i)]);
    }
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(train_idx.size(), start + batch);
      auto [x, y] = batch_mats(std::span<const int>(train_idx).subspan(start, end - start));
      Tape tape;
      const Tape::Var xv = tape.constant(x);
      const Tape::Var w1 = tape.input(model.w1);
      const Tape::Var b1 = tape.input(model.b1);
      const Tape::Var w2 = tape.input(model.w2);
      const Tape::Var b2 = tape.input(model.b2);
      const Tape::Var hidden = tape.relu(tape.add_rowvec(tape.matmul(xv, w1), b1));
      const Tape::Var pred = tape.add_rowvec(tape.matmul(hidden, w2), b2);
      const Tape::Var loss = tape.mse_mean(pred, y);
      if (!std::isfinite(tape.value(loss).v[0])) {
        throw TrainingError("train_tvf: non-finite loss", epoch);
      }
      tape.backward(loss);
      auto step = [&](Mat& m, Tape::Var v) {
        const Mat& g = tape.grad(v);
        for (std::size_t i = 0; i < m.size(); ++i) m.v[i] -= hyper.lr * g.v[i];
      };
      step(model.w1, w1);
      step(model.b1, b1);
      step(model.w2, w2);
      step(model.b2, b2);
    }
    const double train_mse = eval_mse(train_idx);
    const double val_mse = eval_mse(val_idx);
    result.curve.push_back({epoch, train_mse, val_mse});
    if (val_mse <= best_val) {
      best_val = val_mse;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

namespace {

constexpr char kTvfMagic[4] = {'D', 'W', 'V', 'F'};
constexpr char kExpMagic[4] = {'D', 'W', 'X', 'P'};
constexpr std::uint32_t kTvfVersion = 1;

void write_u32(std::ostream& os, std::uint32_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}

void write_i64(std::ostream& os, std::int64_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::int64_t read_i64(std::istream& is) {
  std::int64_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}

void write_f64(std::ostream& os, double x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

double read_f64(std::istream& is) {
  double x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}

void write_mat(std::ostream& os, const Mat& m) {
  write_u32(os, static_cast<std::uint32_t>(m.rows));
  write_u32(os, static_cast<std::uint32_t>(m.cols));
  os.write(reinterpret_cast<const char*>(m.v.data()),
           static_cast<std::streamsize>(m.v.size() * sizeof(double)));
}

Mat read_mat(std::istream& is) {
  const int rows = static_cast<int>(read_u32(is));
  const int cols = static_cast<int>(read_u32(is));
  Mat m(rows, cols);
  is.read(reinterpret_cast<char*>(m.v.data()),
          static_cast<std::streamsize>(m.v.size() * sizeof(double)));
  return m;
}

std::string table_key(std::span<const WorkerId> sw, std::span<const TaskId> st, WorkerId w,
                      std::span<const TaskId> seq) {
  std::ostringstream os;
  for (WorkerId x : sw) os << x << ',';
  os << '|';
  for (TaskId x : st) os << x << ',';
  os << '|' << w << '|';
  for (TaskId x : seq) os << x << ',';
  return os.str();
}

}  // namespace

void save_tvf(const TvfModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_tvf: cannot open " + path);
  os.write(kTvfMagic, 4);
  write_u32(os, kTvfVersion);
  write_u32(os, kFeatureSchemaVersion);
  write_mat(os, model.w1);
  write_mat(os, model.b1);
  write_mat(os, model.w2);
  write_mat(os, model.b2);
  if (!os) throw Error("save_tvf: write failed for " + path);
  nlohmann::json side;
  side["format_version"] = kTvfVersion;
  side["feature_schema"] = kFeatureSchemaVersion;
  side["feature_dim"] = kFeatureDim;
  side["hidden"] = model.w1.cols;
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

TvfModel load_tvf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_tvf: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kTvfMagic, 4) != 0) throw Error("load_tvf: bad magic");
  if (read_u32(is) != kTvfVersion) throw Error("load_tvf: unsupported version");
  if (read_u32(is) != kFeatureSchemaVersion) {
    throw Error("load_tvf: incompatible feature schema");
  }
  TvfModel model;
  model.w1 = read_mat(is);
  model.b1 = read_mat(is);
  model.w2 = read_mat(is);
  model.b2 = read_mat(is);
  if (!is) throw Error("load_tvf: truncated file " + path);
  return model;
}

void save_experience(const ExperienceBuffer& u, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_experience: cannot open " + path);
  os.write(kExpMagic, 4);
  nlohmann::json header;
  header["count"] = u.size();
  header["feature_dim"] = kFeatureDim;
  header["feature_schema"] = kFeatureSchemaVersion;
  const std::string hs = header.dump();
  write_u32(os, static_cast<std::uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const ExperienceTuple& t : u.data()) {
    write_u32(os, static_cast<std::uint32_t>(t.state_workers.size()));
    for (WorkerId w : t.state_workers) write_i64(os, w);
    write_u32(os, static_cast<std::uint32_t>(t.state_tasks.size()));
    for (TaskId s : t.state_tasks) write_i64(os, s);
    write_i64(os, t.worker);
    write_u32(os, static_cast<std::uint32_t>(t.seq.size()));
    for (TaskId s : t.seq) write_i64(os, s);
    write_f64(os, t.opt);
    for (double f : t.features) write_f64(os, f);
  }
  if (!os) throw Error("save_experience: write failed for " + path);
}

ExperienceBuffer load_experience(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_experience: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kExpMagic, 4) != 0) throw Error("load_experience: bad magic");
  const std::uint32_t hlen = read_u32(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), hlen);
  const nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("feature_schema").get<std::uint32_t>() != kFeatureSchemaVersion) {
    throw Error("load_experience: incompatible feature schema");
  }
  const std::size_t count = header.at("count").get<std::size_t>();
  ExperienceBuffer u(std::max<std::size_t>(count, 1));
  for (std::size_t i = 0; i < count; ++i) {
    ExperienceTuple t;
    t.state_workers.resize(read_u32(is));
    for (auto& w : t.state_workers) w = read_i64(is);
    t.state_tasks.resize(read_u32(is));
    for (auto& s : t.state_tasks) s = read_i64(is);
    t.worker = read_i64(is);
    t.seq.resize(read_u32(is));
    for (auto& s : t.seq) s = read_i64(is);
    t.opt = read_f64(is);
    for (double& f : t.features) f = read_f64(is);
    if (!is) throw Error("load_experience: truncated file " + path);
    u.push(std::move(t));
  }
  return u;
}

TableScorer::TableScorer(const ExperienceBuffer& u) {
  for (const ExperienceTuple& t : u.data()) {
    table_[table_key(t.state_workers, t.state_tasks, t.worker, t.seq)] = t.opt;
  }
}

double TableScorer::score(const ActionContext& ctx) const {
  const auto it =
      table_.find(table_key(*ctx.state_workers, *ctx.state_tasks, ctx.worker, ctx.seq));
  if (it != table_.end()) return it->second;
  return static_cast<double>(ctx.seq.size());
}

}  // namespace datawa
