#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "datawa/autodiff.hpp"
#include "datawa/grid.hpp"
#include "datawa/rng.hpp"
#include "datawa/types.hpp"

namespace datawa {

/// Hyperparameters for the demand model and its training loop.
struct DemandHyper {
  int history = 24;             // input windows per sample (P)
  int k = 12;                   // slots per window
  int embed_dim = 16;           // node embedding width E
  int filter_k = 3;             // causal convolution filter width K
  std::vector<int> dilations{1, 2};
  double alpha = 0.1;           // propagation restart probability
  int hops = 3;                 // propagation iterations H
  double lr = 0.01;
  int batch = 16;
  int epochs = 100;
  std::uint64_t seed = 1;
};

/// Trainable parameters. The two embedding maps feed the adjacency learner,
/// the gate layers implement the dilated causal convolutions, and out_w/out_b
/// project propagated features to per-slot logits.
struct DemandModel {
  struct GateLayer {
    Mat filt_tanh;  // 1 x K
    Mat filt_sig;   // 1 x K
    Mat bias_tanh;  // 1 x 1
    Mat bias_sig;   // 1 x 1
    int dilation = 1;
  };

  Mat embed_w1, embed_b1;  // k x E, 1 x E
  Mat embed_w2, embed_b2;
  std::vector<GateLayer> gates;
  Mat out_w, out_b;        // k x k, 1 x k
  double alpha = 0.1;
  int hops = 3;

  int k() const { return embed_w1.rows; }
  int embed_dim() const { return embed_w1.cols; }
  int filter_k() const { return gates.empty() ? 0 : gates.front().filt_tanh.cols; }

  /// Named views over every trainable tensor, in a fixed order.
  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;
};

DemandModel init_demand_model(const DemandHyper& hyper, Rng& rng);

/// y_j = sum_i f(i) * x_{j - i*d} with zero left padding; output length = input length.
std::vector<double> dilated_causal_conv(std::span<const double> x, std::span<const double> f,
                                        int dilation);

/// Gated temporal feature of one cell: composes
/// tanh(conv(x) + b_t) * sigmoid(conv(x) + b_s) over the configured dilation
/// layers and keeps the last k sequence positions. Input is the cell history
/// flattened in time order (length k * P).
std::vector<double> gated_temporal(std::span<const double> cell_history, int k,
                                   const DemandModel& model);

/// A = row_softmax(tanh(M1 M2^T + M2 M1^T)) with M1/M2 affine embeddings of the
/// per-cell current vectors (M x k input). Rows sum to 1.
Mat learn_adjacency(const Mat& cells_now, const DemandModel& model);

/// D^{-1/2} (A + I) D^{-1/2} with D_ii = 1 + sum_j A_ij.
Mat normalize_adjacency(const Mat& a);

/// Iterate Z <- alpha Z0 + (1 - alpha) A_hat Z for hops-1 steps, then ReLU.
Mat appnp(const Mat& z0, const Mat& a_hat, double alpha, int hops);

struct Prediction {
  double window_start = 0.0;  // left boundary of the predicted window
  Mat probs;                  // M x k probabilities
};

/// Full forward pass over a series with P >= 1 windows per cell; predicts the
/// occurrence probabilities of the window following the series.
Prediction forward(const TaskSeries& series, const DemandModel& model);

/// Mean binary cross-entropy of predicting `target` (M x k binary) from the
/// series, with optional reverse-mode gradients for every trainable tensor in
/// the order of DemandModel::tensors(). Shared by training and the gradient
/// checks.
double demand_loss(const DemandModel& model, const TaskSeries& series, const Mat& target,
                   std::vector<Mat>* gradients = nullptr);

struct TrainPoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ap = 0.0;
};

struct TrainResult {
  DemandModel model;  // parameters of the best validation-AP epoch
  std::vector<TrainPoint> curve;
  int best_epoch = 0;
};

/// Mini-batch SGD on mean binary cross-entropy between the forward output and
/// the next observed window. Samples are sliding windows over each series.
/// Returns the parameters of the best validation-AP epoch. Throws
/// TrainingError when the loss turns non-finite.
TrainResult train_demand(const TaskSeries& train, const TaskSeries& val, const DemandHyper& hyper);

/// Validation AP of predicting each next window of `series` with `model`,
/// pooling scores over all cells and slots.
double evaluate_ap(const TaskSeries& series, const DemandModel& model, int history);

/// AP of the persistence baseline that predicts each window as a copy of the
/// previous one, over the same evaluation windows as evaluate_ap.
double persistence_ap(const TaskSeries& series, int history);

/// Emits one predicted task per (cell, slot) entry strictly above threshold,
/// placed at the cell centroid with pub_time = window_start + slot * dt.
/// Ids are assigned sequentially from first_id.
std::vector<Task> materialize_predictions(const Prediction& pred, double threshold,
                                          const GridSpec& grid, double window_start, double dt,
                                          double default_valid, TaskId first_id);

/// Versioned binary parameter file plus a JSON sidecar (path + ".json") echoing
/// the hyperparameters.
void save_demand_model(const DemandModel& model, const std::string& path);
DemandModel load_demand_model(const std::string& path);

}  // namespace datawa
