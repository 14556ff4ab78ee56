#include "datawa/autodiff.hpp"

#include <cmath>
#include <utility>

namespace datawa {

bool Mat::finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ModelShapeError("matmul: inner dimensions differ");
  Mat out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out.at(i, j) += aik * b.at(k, j);
    }
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tape::Var Tape::push(Mat value, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Mat(value.rows, value.cols);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::input(const Mat& value) { return push(value, {}); }
Tape::Var Tape::constant(const Mat& value) { return push(value, {}); }

Tape::Var Tape::add(Var a, Var b) {
  const Mat& x = value(a);
  const Mat& y = value(b);
  if (!x.same_shape(y)) throw ModelShapeError("add: shape mismatch");
  Mat out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += y.v[i];
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, b, id](Tape& t) {
    const Mat& g = t.grad(id);
    Mat& ga = t.grad_mut(a);
    Mat& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  };
  return id;
}

Tape::Var Tape::sub(Var a, Var b) {
  const Mat& x = value(a);
  const Mat& y = value(b);
  if (!x.same_shape(y)) throw ModelShapeError("sub: shape mismatch");
  Mat out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= y.v[i];
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, b, id](Tape& t) {
    const Mat& g = t.grad(id);
    Mat& ga = t.grad_mut(a);
    Mat& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] -= g.v[i];
    }
  };
  return id;
}

Tape::Var Tape::mul(Var a, Var b) {
  const Mat& x = value(a);
  const Mat& y = value(b);
  if (!x.same_shape(y)) throw ModelShapeError("mul: shape mismatch");
  Mat out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= y.v[i];
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, b, id](Tape& t) {
    const Mat& g = t.grad(id);
    const Mat& x = t.value(a);
    const Mat& y = t.value(b);
    Mat& ga = t.grad_mut(a);
    Mat& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i] * y.v[i];
      gb.v[i] += g.v[i] * x.v[i];
    }
  };
  return id;
}

Tape::Var Tape::matmul(Var a, Var b) {
  Mat out = datawa::matmul(value(a), value(b));
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, b, id](Tape& t) {
    const Mat& g = t.grad(id);
    // dA = g * B^T ; dB = A^T * g
    const Mat gbt = datawa::matmul(g, datawa::transpose(t.value(b)));
    const Mat atg = datawa::matmul(datawa::transpose(t.value(a)), g);
    Mat& ga = t.grad_mut(a);
    Mat& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += gbt.v[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb.v[i] += atg.v[i];
  };
  return id;
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
  Mat out = datawa::matmul(value(a), datawa::transpose(value(b)));
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, b, id](Tape& t) {
    const Mat& g = t.grad(id);
    // y = A B^T : dA = g * B ; dB = g^T * A
    const Mat da = datawa::matmul(g, t.value(b));
    const Mat db = datawa::matmul(datawa::transpose(g), t.value(a));
    Mat& ga = t.grad_mut(a);
    Mat& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += da.v[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb.v[i] += db.v[i];
  };
  return id;
}

Tape::Var Tape::transpose(Var a) {
  Var id = push(datawa::transpose(value(a)), nullptr);
  nodes_[id].back = [a, id](Tape& t) {
    const Mat gt = datawa::transpose(t.grad(id));
    Mat& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += gt.v[i];
  };
  return id;
}

Tape::Var Tape::scale(Var a, double c) {
  Mat out = value(a);
  for (double& x : out.v) x *= c;
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, c, id](Tape& t) {
    const Mat& g = t.grad(id);
    Mat& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += c * g.v[i];
  };
  return id;
}

Tape::Var Tape::add_rowvec(Var m, Var row) {
  const Mat& x = value(m);
  const Mat& r = value(row);
  if (r.rows != 1 || r.cols != x.cols) throw ModelShapeError("add_rowvec: bad row shape");
  Mat out = x;
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) out.at(i, j) += r.at(0, j);
  }
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [m, row, id](Tape& t) {
    const Mat& g = t.grad(id);
    Mat& gm = t.grad_mut(m);
    Mat& gr = t.grad_mut(row);
    for (std::size_t i = 0; i < g.size(); ++i) gm.v[i] += g.v[i];
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) gr.at(0, j) += g.at(i, j);
    }
  };
  return id;
}

Tape::Var Tape::add_scalar(Var m, Var scalar) {
  const Mat& x = value(m);
  const Mat& s = value(scalar);
  if (s.rows != 1 || s.cols != 1) throw ModelShapeError("add_scalar: scalar must be 1x1");
  Mat out = x;
  for (double& e : out.v) e += s.v[0];
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [m, scalar, id](Tape& t) {
    const Mat& g = t.grad(id);
    Mat& gm = t.grad_mut(m);
    Mat& gs = t.grad_mut(scalar);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gm.v[i] += g.v[i];
      gs.v[0] += g.v[i];
    }
  };
  return id;
}

Tape::Var Tape::tanh_(Var a) {
  Mat out = value(a);
  for (double& x : out.v) x = std::tanh(x);
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, id](Tape& t) {
    const Mat& g = t.grad(id);
    const Mat& y = t.value(id);
    Mat& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
  };
  return id;
}

Tape::Var Tape::sigmoid_(Var a) {
  Mat out = value(a);
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, id](Tape& t) {
    const Mat& g = t.grad(id);
    const Mat& y = t.value(id);
    Mat& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
  };
  return id;
}

Tape::Var Tape::relu(Var a) {
  Mat out = value(a);
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, id](Tape& t) {
    const Mat& g = t.grad(id);
    const Mat& x = t.value(a);
    Mat& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += x.v[i] > 0.0 ? g.v[i] : 0.0;
  };
  return id;
}

Tape::Var Tape::softmax_rows(Var a) {
  Mat out = value(a);
  for (int i = 0; i < out.rows; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < out.cols; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      sum += out.at(i, j);
    }
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= sum;
  }
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, id](Tape& t) {
    const Mat& g = t.grad(id);
    const Mat& y = t.value(id);
    Mat& ga = t.grad_mut(a);
    for (int i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * y.at(i, j);
      for (int j = 0; j < g.cols; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  };
  return id;
}

Tape::Var Tape::dilated_conv(Var x, Var f, int dilation) {
  const Mat& xs = value(x);
  const Mat& fs = value(f);
  if (xs.rows != 1 || fs.rows != 1) throw ModelShapeError("dilated_conv: expects row vectors");
  if (dilation < 1) throw ModelShapeError("dilated_conv: dilation must be >= 1");
  const int J = xs.cols;
  const int K = fs.cols;
  Mat out(1, J);
  for (int j = 0; j < J; ++j) {
    double acc = 0.0;
    for (int i = 0; i < K; ++i) {
      const int src = j - i * dilation;
      if (src >= 0) acc += fs.v[i] * xs.v[src];
    }
    out.v[j] = acc;
  }
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [x, f, dilation, id](Tape& t) {
    const Mat& g = t.grad(id);
    const Mat& xs = t.value(x);
    const Mat& fs = t.value(f);
    Mat& gx = t.grad_mut(x);
    Mat& gf = t.grad_mut(f);
    const int J = xs.cols;
    const int K = fs.cols;
    for (int j = 0; j < J; ++j) {
      const double gj = g.v[j];
      if (gj == 0.0) continue;
      for (int i = 0; i < K; ++i) {
        const int src = j - i * dilation;
        if (src >= 0) {
          gx.v[src] += gj * fs.v[i];
          gf.v[i] += gj * xs.v[src];
        }
      }
    }
  };
  return id;
}

Tape::Var Tape::last_cols(Var a, int k) {
  const Mat& x = value(a);
  if (x.rows != 1 || k > x.cols) throw ModelShapeError("last_cols: bad slice");
  Mat out(1, k);
  for (int j = 0; j < k; ++j) out.v[j] = x.v[x.cols - k + j];
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [a, k, id](Tape& t) {
    const Mat& g = t.grad(id);
    Mat& ga = t.grad_mut(a);
    for (int j = 0; j < k; ++j) ga.v[ga.cols - k + j] += g.v[j];
  };
  return id;
}

Tape::Var Tape::vstack(std::span<const Var> rows) {
  if (rows.empty()) throw ModelShapeError("vstack: empty input");
  const int cols = value(rows[0]).cols;
  Mat out(static_cast<int>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Mat& x = value(rows[r]);
    if (x.rows != 1 || x.cols != cols) throw ModelShapeError("vstack: inconsistent rows");
    for (int j = 0; j < cols; ++j) out.at(static_cast<int>(r), j) = x.v[j];
  }
  std::vector<Var> captured(rows.begin(), rows.end());
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [captured, id](Tape& t) {
    const Mat& g = t.grad(id);
    for (std::size_t r = 0; r < captured.size(); ++r) {
      Mat& gr = t.grad_mut(captured[r]);
      for (int j = 0; j < g.cols; ++j) gr.v[j] += g.at(static_cast<int>(r), j);
    }
  };
  return id;
}

Tape::Var Tape::bce_with_logits_mean(Var logits, const Mat& targets) {
  const Mat& z = value(logits);
  if (!z.same_shape(targets)) throw ModelShapeError("bce: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z.v[i];
    const double yi = targets.v[i];
    loss += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
  }
  const double n = static_cast<double>(z.size());
  Mat out(1, 1);
  out.v[0] = loss / n;
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [logits, targets, n, id](Tape& t) {
    const double g = t.grad(id).v[0];
    const Mat& z = t.value(logits);
    Mat& gz = t.grad_mut(logits);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z.v[i]));
      gz.v[i] += g * (p - targets.v[i]) / n;
    }
  };
  return id;
}

Tape::Var Tape::mse_mean(Var pred, const Mat& targets) {
  const Mat& p = value(pred);
  if (!p.same_shape(targets)) throw ModelShapeError("mse: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.v[i] - targets.v[i];
    loss += d * d;
  }
  const double n = static_cast<double>(p.size());
  Mat out(1, 1);
  out.v[0] = loss / n;
  Var id = push(std::move(out), nullptr);
  nodes_[id].back = [pred, targets, n, id](Tape& t) {
    const double g = t.grad(id).v[0];
    const Mat& p = t.value(pred);
    Mat& gp = t.grad_mut(pred);
    for (std::size_t i = 0; i < p.size(); ++i) {
      gp.v[i] += g * 2.0 * (p.v[i] - targets.v[i]) / n;
    }
  };
  return id;
}

void Tape::backward(Var output) {
  const Mat& out = value(output);
  if (out.rows != 1 || out.cols != 1) throw ModelShapeError("backward: output must be scalar");
  grad_mut(output).v[0] = 1.0;
  for (int i = output; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

}  // namespace datawa
