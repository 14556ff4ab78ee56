#include "datawa/ddgnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace datawa {

namespace {

constexpr char kMagic[4] = {'D', 'W', 'T', 'F'};
constexpr std::uint32_t kFormatVersion = 1;

Mat random_mat(int rows, int cols, double scale, Rng& rng, double mean = 0.0) {
  Mat m(rows, cols);
  for (double& x : m.v) x = mean + scale * rng.normal();
  return m;
}

/// One training/evaluation sample: per-cell flattened histories, the latest
/// window per cell, the target window, and the predicted window start.
struct Sample {
  std::vector<Mat> hists;  // M entries, each 1 x (k * P)
  Mat now;                 // M x k
  Mat target;              // M x k
  double window_start = 0.0;
};

Mat window_mat(const TaskSeries& s, int p) {
  Mat m(static_cast<int>(s.per_cell.size()), s.k);
  for (std::size_t i = 0; i < s.per_cell.size(); ++i) {
    for (int j = 0; j < s.k; ++j) m.at(static_cast<int>(i), j) = s.per_cell[i][p].values[j];
  }
  return m;
}

/// Input windows [t, t+history); target window t+history (may be absent when
/// building a pure inference sample).
Sample make_sample(const TaskSeries& s, int t, int history, bool with_target) {
  Sample out;
  const int cells = static_cast<int>(s.per_cell.size());
  out.hists.reserve(cells);
  for (int i = 0; i < cells; ++i) {
    Mat h(1, s.k * history);
    for (int p = 0; p < history; ++p) {
      for (int j = 0; j < s.k; ++j) h.v[p * s.k + j] = s.per_cell[i][t + p].values[j];
    }
    out.hists.push_back(std::move(h));
  }
  out.now = window_mat(s, t + history - 1);
  if (with_target) out.target = window_mat(s, t + history);
  out.window_start = s.t0 + static_cast<double>(t + history) * s.window_length();
  return out;
}

struct GraphLeaves {
  Tape::Var w1, b1, w2, b2, out_w, out_b;
  std::vector<std::array<Tape::Var, 4>> gates;  // filt_tanh, bias_tanh, filt_sig, bias_sig

  std::vector<Tape::Var> all() const {
    std::vector<Tape::Var> v{w1, b1, w2, b2, out_w, out_b};
    for (const auto& g : gates) v.insert(v.end(), g.begin(), g.end());
    return v;
  }
};

GraphLeaves bind_params(Tape& tape, const DemandModel& m) {
  GraphLeaves l;
  l.w1 = tape.input(m.embed_w1);
  l.b1 = tape.input(m.embed_b1);
  l.w2 = tape.input(m.embed_w2);
  l.b2 = tape.input(m.embed_b2);
  l.out_w = tape.input(m.out_w);
  l.out_b = tape.input(m.out_b);
  for (const auto& g : m.gates) {
    l.gates.push_back({tape.input(g.filt_tanh), tape.input(g.bias_tanh), tape.input(g.filt_sig),
                       tape.input(g.bias_sig)});
  }
  return l;
}

Tape::Var gated_stack(Tape& tape, const GraphLeaves& l, const DemandModel& m,
                      const std::vector<Mat>& hists, int k) {
  std::vector<Tape::Var> rows;
  rows.reserve(hists.size());
  for (const Mat& h : hists) {
    Tape::Var x = tape.constant(h);
    for (std::size_t layer = 0; layer < m.gates.size(); ++layer) {
      const int d = m.gates[layer].dilation;
      const auto& g = l.gates[layer];
      Tape::Var t_branch = tape.tanh_(tape.add_scalar(tape.dilated_conv(x, g[0], d), g[1]));
      Tape::Var s_branch = tape.sigmoid_(tape.add_scalar(tape.dilated_conv(x, g[2], d), g[3]));
      x = tape.mul(t_branch, s_branch);
    }
    rows.push_back(tape.last_cols(x, k));
  }
  return tape.vstack(rows);
}

Tape::Var adjacency_graph(Tape& tape, const GraphLeaves& l, Tape::Var cells_now) {
  Tape::Var m1 = tape.add_rowvec(tape.matmul(cells_now, l.w1), l.b1);
  Tape::Var m2 = tape.add_rowvec(tape.matmul(cells_now, l.w2), l.b2);
  Tape::Var cross = tape.add(tape.matmul_nt(m1, m2), tape.matmul_nt(m2, m1));
  return tape.softmax_rows(tape.tanh_(cross));
}

/// Full forward graph; returns the logits node (M x k).
Tape::Var forward_graph(Tape& tape, const GraphLeaves& l, const DemandModel& m,
                        const Sample& sample, int k) {
  Tape::Var z0 = gated_stack(tape, l, m, sample.hists, k);
  Tape::Var adj = adjacency_graph(tape, l, tape.constant(sample.now));
  // Rows of the learned adjacency sum to one, so the degree matrix of the
  // propagation normalization is exactly 2I and A_hat = (A + I) / 2.
  const int cells = static_cast<int>(sample.hists.size());
  Tape::Var a_hat = tape.scale(tape.add(adj, tape.constant(Mat::identity(cells))), 0.5);
  Tape::Var z = z0;
  for (int h = 0; h + 2 <= m.hops; ++h) {
    z = tape.add(tape.scale(z0, m.alpha), tape.scale(tape.matmul(a_hat, z), 1.0 - m.alpha));
  }
  z = tape.relu(z);
  return tape.add_rowvec(tape.matmul(z, l.out_w), l.out_b);
}

Mat sigmoid_mat(Mat z) {
  for (double& x : z.v) x = 1.0 / (1.0 + std::exp(-x));
  return z;
}

void validate_series_shape(const TaskSeries& series, const DemandModel& model) {
  if (series.per_cell.empty()) throw ModelShapeError("forward: series has no cells");
  if (series.k != model.k()) throw ModelShapeError("forward: series k differs from model k");
  if (series.P < 1) throw ModelShapeError("forward: series needs at least one window");
}

void write_u32(std::ostream& os, std::uint32_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}

void write_mat(std::ostream& os, const std::string& name, const Mat& m) {
  write_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(os, static_cast<std::uint32_t>(m.rows));
  write_u32(os, static_cast<std::uint32_t>(m.cols));
  os.write(reinterpret_cast<const char*>(m.v.data()),
           static_cast<std::streamsize>(m.v.size() * sizeof(double)));
}

std::pair<std::string, Mat> read_mat(std::istream& is) {
  const std::uint32_t name_len = read_u32(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  const int rows = static_cast<int>(read_u32(is));
  const int cols = static_cast<int>(read_u32(is));
  Mat m(rows, cols);
  is.read(reinterpret_cast<char*>(m.v.data()),
          static_cast<std::streamsize>(m.v.size() * sizeof(double)));
  return {std::move(name), std::move(m)};
}

}  // namespace

std::vector<std::pair<std::string, Mat*>> DemandModel::tensors() {
  std::vector<std::pair<std::string, Mat*>> out{
      {"embed_w1", &embed_w1}, {"embed_b1", &embed_b1}, {"embed_w2", &embed_w2},
      {"embed_b2", &embed_b2}, {"out_w", &out_w},       {"out_b", &out_b},
  };
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const std::string p = "gate" + std::to_string(i) + ".";
    out.emplace_back(p + "filt_tanh", &gates[i].filt_tanh);
    out.emplace_back(p + "bias_tanh", &gates[i].bias_tanh);
    out.emplace_back(p + "filt_sig", &gates[i].filt_sig);
    out.emplace_back(p + "bias_sig", &gates[i].bias_sig);
  }
  return out;
}

std::vector<std::pair<std::string, const Mat*>> DemandModel::tensors() const {
  auto mut = const_cast<DemandModel*>(this)->tensors();
  std::vector<std::pair<std::string, const Mat*>> out;
  out.reserve(mut.size());
  for (auto& [name, m] : mut) out.emplace_back(name, m);
  return out;
}

DemandModel init_demand_model(const DemandHyper& hyper, Rng& rng) {
  if (hyper.k < 1 || hyper.embed_dim < 1 || hyper.filter_k < 1 || hyper.hops < 1 ||
      hyper.dilations.empty() || !(hyper.alpha > 0.0 && hyper.alpha <= 1.0)) {
    throw ConfigError("init_demand_model: invalid hyperparameters");
  }
  DemandModel m;
  const double es = 1.0 / std::sqrt(static_cast<double>(hyper.k));
  m.embed_w1 = random_mat(hyper.k, hyper.embed_dim, es, rng);
  m.embed_b1 = random_mat(1, hyper.embed_dim, 0.2, rng);
  m.embed_w2 = random_mat(hyper.k, hyper.embed_dim, es, rng);
  m.embed_b2 = random_mat(1, hyper.embed_dim, 0.2, rng);
  for (int d : hyper.dilations) {
    DemandModel::GateLayer g;
    g.filt_tanh = random_mat(1, hyper.filter_k, 0.5, rng);
    g.filt_sig = random_mat(1, hyper.filter_k, 0.5, rng);
    // Positive-baseline bias keeps gated features above the propagation ReLU
    // kink on all-quiet histories; a zero start parks every feature at the
    // kink and stops all gradients on sparse-occurrence data.
    g.bias_tanh = random_mat(1, 1, 0.1, rng, 0.3);
    g.bias_sig = random_mat(1, 1, 0.1, rng, 0.3);
    g.dilation = d;
    m.gates.push_back(std::move(g));
  }
  m.out_w = random_mat(hyper.k, hyper.k, es, rng);
  m.out_b = Mat(1, hyper.k);
  m.alpha = hyper.alpha;
  m.hops = hyper.hops;
  return m;
}

std::vector<double> dilated_causal_conv(std::span<const double> x, std::span<const double> f,
                                        int dilation) {
  if (dilation < 1) throw ModelShapeError("dilated_causal_conv: dilation must be >= 1");
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(j) -
                                 static_cast<std::ptrdiff_t>(i) * dilation;
      if (src >= 0) acc += f[i] * x[static_cast<std::size_t>(src)];
    }
    y[j] = acc;
  }
  return y;
}

std::vector<double> gated_temporal(std::span<const double> cell_history, int k,
                                   const DemandModel& model) {
  Tape tape;
  Mat h(1, static_cast<int>(cell_history.size()));
  std::copy(cell_history.begin(), cell_history.end(), h.v.begin());
  GraphLeaves l = bind_params(tape, model);
  std::vector<Mat> hists{std::move(h)};
  const Tape::Var z = gated_stack(tape, l, model, hists, k);
  const Mat& row = tape.value(z);
  return {row.v.begin(), row.v.end()};
}

Mat learn_adjacency(const Mat& cells_now, const DemandModel& model) {
  Tape tape;
  GraphLeaves l = bind_params(tape, model);
  return tape.value(adjacency_graph(tape, l, tape.constant(cells_now)));
}

Mat normalize_adjacency(const Mat& a) {
  if (a.rows != a.cols) throw ModelShapeError("normalize_adjacency: matrix must be square");
  const int n = a.rows;
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    double deg = 1.0;
    for (int j = 0; j < n; ++j) deg += a.at(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Mat out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double aij = a.at(i, j) + (i == j ? 1.0 : 0.0);
      out.at(i, j) = inv_sqrt[i] * aij * inv_sqrt[j];
    }
  }
  return out;
}

Mat appnp(const Mat& z0, const Mat& a_hat, double alpha, int hops) {
  if (a_hat.rows != a_hat.cols || a_hat.cols != z0.rows) {
    throw ModelShapeError("appnp: dimension mismatch");
  }
  if (!(alpha > 0.0 && alpha <= 1.0) || hops < 1) throw ModelShapeError("appnp: bad alpha/hops");
  Mat z = z0;
  for (int h = 0; h + 2 <= hops; ++h) {
    Mat az = matmul(a_hat, z);
    for (std::size_t i = 0; i < z.size(); ++i) z.v[i] = alpha * z0.v[i] + (1.0 - alpha) * az.v[i];
  }
  for (double& x : z.v) x = x > 0.0 ? x : 0.0;
  return z;
}

Prediction forward(const TaskSeries& series, const DemandModel& model) {
  validate_series_shape(series, model);
  const Sample sample = make_sample(series, 0, series.P, /*with_target=*/false);
  Tape tape;
  GraphLeaves l = bind_params(tape, model);
  const Tape::Var logits = forward_graph(tape, l, model, sample, model.k());
  Prediction out;
  out.window_start = sample.window_start;
  out.probs = sigmoid_mat(tape.value(logits));
  return out;
}

double demand_loss(const DemandModel& model, const TaskSeries& series, const Mat& target,
                   std::vector<Mat>* gradients) {
  validate_series_shape(series, model);
  const Sample sample = make_sample(series, 0, series.P, /*with_target=*/false);
  Tape tape;
  GraphLeaves l = bind_params(tape, model);
  const Tape::Var logits = forward_graph(tape, l, model, sample, model.k());
  const Tape::Var loss = tape.bce_with_logits_mean(logits, target);
  if (gradients) {
    tape.backward(loss);
    gradients->clear();
    for (Tape::Var v : l.all()) gradients->push_back(tape.grad(v));
  }
  return tape.value(loss).v[0];
}

namespace {

/// Scores every next-window prediction of `series`; appends (score, label)
/// pairs for AP pooling.
void pool_scores(const TaskSeries& series, const DemandModel& model, int history,
                 std::vector<double>& scores, std::vector<int>& labels) {
  for (int t = 0; t + history < series.P; ++t) {
    const Sample s = make_sample(series, t, history, /*with_target=*/true);
    Tape tape;
    GraphLeaves l = bind_params(tape, model);
    const Mat probs = sigmoid_mat(tape.value(forward_graph(tape, l, model, s, model.k())));
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scores.push_back(probs.v[i]);
      labels.push_back(s.target.v[i] > 0.5 ? 1 : 0);
    }
  }
}

}  // namespace

double evaluate_ap(const TaskSeries& series, const DemandModel& model, int history) {
  std::vector<double> scores;
  std::vector<int> labels;
  pool_scores(series, model, history, scores, labels);
  if (scores.empty()) throw MetricError("evaluate_ap: series shorter than history + 1");
  return average_precision(scores, labels);
}

double persistence_ap(const TaskSeries& series, int history) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (int t = 0; t + history < series.P; ++t) {
    const Mat prev = window_mat(series, t + history - 1);
    const Mat next = window_mat(series, t + history);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      scores.push_back(prev.v[i]);
      labels.push_back(next.v[i] > 0.5 ? 1 : 0);
    }
  }
  if (scores.empty()) throw MetricError("persistence_ap: series shorter than history + 1");
  return average_precision(scores, labels);
}

TrainResult train_demand(const TaskSeries& train, const TaskSeries& val,
                         const DemandHyper& hyper) {
  Rng rng(hyper.seed);
  DemandModel model = init_demand_model(hyper, rng);
  validate_series_shape(train, model);
  if (train.P < hyper.history + 1) throw ConfigError("train_demand: train series too short");

  const int n_samples = train.P - hyper.history;
  std::vector<Sample> samples;
  samples.reserve(n_samples);
  for (int t = 0; t < n_samples; ++t) {
    samples.push_back(make_sample(train, t, hyper.history, /*with_target=*/true));
  }

  // Start the output bias at the target log-odds so calibration does not have
  // to be learned before discrimination on sparse-occurrence data.
  double positives = 0.0, total = 0.0;
  for (const Sample& s : samples) {
    for (double y : s.target.v) positives += y;
    total += static_cast<double>(s.target.size());
  }
  const double rate = std::clamp(total > 0 ? positives / total : 0.5, 1e-3, 1.0 - 1e-3);
  for (double& b : model.out_b.v) b = std::log(rate / (1.0 - rate));

  TrainResult result;
  result.model = model;
  double best_ap = -1.0;

  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, hyper.batch);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    // Fisher-Yates with the run RNG keeps batch order reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double epoch_loss = 0.0;
    auto param_views = model.tensors();
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<Mat> grad_acc;
      grad_acc.reserve(param_views.size());
      for (auto& [name, m] : param_views) grad_acc.emplace_back(m->rows, m->cols);
      for (std::size_t s = start; s < end; ++s) {
        const Sample& sample = samples[order[s]];
        Tape tape;
        GraphLeaves l = bind_params(tape, model);
        const Tape::Var logits = forward_graph(tape, l, model, sample, model.k());
        const Tape::Var loss = tape.bce_with_logits_mean(logits, sample.target);
        const double loss_val = tape.value(loss).v[0];
        if (!std::isfinite(loss_val)) {
          throw TrainingError("train_demand: non-finite loss", epoch);
        }
        epoch_loss += loss_val;
        tape.backward(loss);
        const std::vector<Tape::Var> leaves = l.all();
        for (std::size_t p = 0; p < leaves.size(); ++p) {
          const Mat& g = tape.grad(leaves[p]);
          for (std::size_t i = 0; i < g.size(); ++i) grad_acc[p].v[i] += g.v[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t p = 0; p < param_views.size(); ++p) {
        Mat* m = param_views[p].second;
        for (std::size_t i = 0; i < m->size(); ++i) m->v[i] -= hyper.lr * inv * grad_acc[p].v[i];
      }
    }
    epoch_loss /= static_cast<double>(samples.size());

    double val_ap = 0.0;
    if (val.P > hyper.history) {
      std::vector<double> scores;
      std::vector<int> labels;
      pool_scores(val, model, hyper.history, scores, labels);
      const bool has_positive = std::any_of(labels.begin(), labels.end(), [](int y) { return y; });
      val_ap = has_positive ? average_precision(scores, labels) : 0.0;
    }
    result.curve.push_back({epoch, epoch_loss, val_ap});
    if (val_ap >= best_ap) {
      best_ap = val_ap;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::vector<Task> materialize_predictions(const Prediction& pred, double threshold,
                                          const GridSpec& grid, double window_start, double dt,
                                          double default_valid, TaskId first_id) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("materialize_predictions: threshold must lie in (0, 1)");
  }
  std::vector<Task> out;
  TaskId next_id = first_id;
  for (int i = 0; i < pred.probs.rows; ++i) {
    for (int j = 0; j < pred.probs.cols; ++j) {
      if (pred.probs.at(i, j) > threshold) {
        Task t;
        t.id = next_id++;
        t.loc = grid.centroid(i + 1);
        t.pub_time = window_start + static_cast<double>(j) * dt;
        t.exp_time = t.pub_time + default_valid;
        t.origin = TaskOrigin::Predicted;
        out.push_back(t);
      }
    }
  }
  return out;
}

void save_demand_model(const DemandModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_demand_model: cannot open " + path);
  os.write(kMagic, 4);
  write_u32(os, kFormatVersion);
  os.write(reinterpret_cast<const char*>(&model.alpha), sizeof(double));
  write_u32(os, static_cast<std::uint32_t>(model.hops));
  write_u32(os, static_cast<std::uint32_t>(model.gates.size()));
  for (const auto& g : model.gates) write_u32(os, static_cast<std::uint32_t>(g.dilation));
  const auto tensors = model.tensors();
  write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) write_mat(os, name, *m);
  if (!os) throw Error("save_demand_model: write failed for " + path);

  nlohmann::json side;
  side["format_version"] = kFormatVersion;
  side["alpha"] = model.alpha;
  side["hops"] = model.hops;
  side["k"] = model.k();
  side["embed_dim"] = model.embed_dim();
  side["filter_k"] = model.filter_k();
  std::vector<int> dils;
  for (const auto& g : model.gates) dils.push_back(g.dilation);
  side["dilations"] = dils;
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

DemandModel load_demand_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_demand_model: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error("load_demand_model: bad magic");
  if (read_u32(is) != kFormatVersion) throw Error("load_demand_model: unsupported version");
  DemandModel model;
  is.read(reinterpret_cast<char*>(&model.alpha), sizeof(double));
  model.hops = static_cast<int>(read_u32(is));
  model.gates.resize(read_u32(is));
  for (auto& g : model.gates) g.dilation = static_cast<int>(read_u32(is));
  const std::uint32_t n_tensors = read_u32(is);
  std::vector<std::pair<std::string, Mat>> blocks;
  blocks.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) blocks.push_back(read_mat(is));
  if (!is) throw Error("load_demand_model: truncated file " + path);
  auto views = model.tensors();
  if (views.size() != blocks.size()) throw Error("load_demand_model: tensor count mismatch");
  for (auto& [name, m] : views) {
    const auto it = std::find_if(blocks.begin(), blocks.end(),
                                 [&](const auto& b) { return b.first == name; });
    if (it == blocks.end()) throw Error("load_demand_model: missing tensor " + name);
    *m = it->second;
  }
  return model;
}

}  // namespace datawa
