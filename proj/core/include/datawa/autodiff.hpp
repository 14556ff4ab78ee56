#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "datawa/types.hpp"

namespace datawa {

/// Dense row-major matrix of doubles. Small by design; every tensor in the
/// demand model and the value function fits comfortably in cache.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return v.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  bool finite() const;

  friend bool operator==(const Mat&, const Mat&) = default;
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

/// Reverse-mode autodiff over Mat values. Build the graph through the op
/// methods, call backward() on a scalar output, then read grad() of any leaf.
/// Nodes are identified by insertion index; the tape is single-use per forward
/// pass, which keeps training loops deterministic and allocation-simple.
class Tape {
 public:
  using Var = int;

  /// Leaf with gradient tracking (a trainable parameter).
  Var input(const Mat& value);
  /// Leaf without gradient interest (data).
  Var constant(const Mat& value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var transpose(Var a);
  Var scale(Var a, double c);
  /// Broadcast-add a 1 x cols row vector to every row of m.
  Var add_rowvec(Var m, Var row);
  /// Broadcast-add a 1 x 1 scalar to every entry of m.
  Var add_scalar(Var m, Var scalar);
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var relu(Var a);
  /// Row-wise softmax.
  Var softmax_rows(Var a);
  /// Causal convolution of a 1 x J sequence with a 1 x K filter at dilation d:
  /// y_j = sum_i f_i * x_{j - i*d}, out-of-range x treated as zero.
  Var dilated_conv(Var x, Var f, int dilation);
  /// Last k columns of a 1 x J row.
  Var last_cols(Var a, int k);
  /// Stack 1 x C rows into an N x C matrix.
  Var vstack(std::span<const Var> rows);
  /// Mean binary cross-entropy between sigmoid(logits) and binary targets,
  /// computed from logits for numerical stability. Returns a 1 x 1 scalar.
  Var bce_with_logits_mean(Var logits, const Mat& targets);
  /// Mean squared error against targets. Returns a 1 x 1 scalar.
  Var mse_mean(Var pred, const Mat& targets);

  const Mat& value(Var v) const { return nodes_[v].value; }
  const Mat& grad(Var v) const { return nodes_[v].grad; }

  /// Seeds the scalar output with gradient 1 and propagates to all leaves.
  void backward(Var output);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Var push(Mat value, std::function<void(Tape&)> back);
  Mat& grad_mut(Var v) { return nodes_[v].grad; }

  std::vector<Node> nodes_;
};

}  // namespace datawa
