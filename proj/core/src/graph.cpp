#include "veil/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace veil {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape) +
                              " and " + shape_str(b.shape));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const char* expect) {
  throw std::invalid_argument(std::string(op) + ": got shape " + shape_str(a.shape) +
                              ", expected " + expect);
}

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool channel_add_case(const Tensor& a, const Tensor& b) {
  return a.rank() == 3 && b.rank() == 1 && b.shape[0] == a.shape[0];
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Scale: return "scale";
    case Op::Mul: return "mul";
    case Op::MatMul: return "matmul";
    case Op::Conv2d: return "conv2d";
    case Op::Upsample2x: return "upsample2x";
    case Op::Silu: return "silu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Linear: return "linear";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Mse: return "mse";
    case Op::L2Norm: return "l2norm";
    case Op::ConcatChannel: return "concat_channel";
  }
  return "?";
}

void Graph::check_var(Var v, const char* what) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument(std::string(what) + ": node id out of range");
  }
}

const Graph::Node& Graph::node(Var v) const {
  check_var(v, "graph");
  return nodes_[static_cast<size_t>(v.id)];
}

Var Graph::push(Node n, const char* what) {
  ensure_finite(n.value, what);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

double Graph::scalar_value(Var v) const {
  const Tensor& t = value(v);
  if (t.numel() != 1) {
    throw std::invalid_argument("scalar_value: node value has shape " + shape_str(t.shape));
  }
  return t[0];
}

Var Graph::input(Tensor t) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(t);
  return push(std::move(n), "input");
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Node n;
  n.op = Op::Add;
  n.in = {a.id, b.id, -1};
  n.n_in = 2;
  if (ta.same_shape(tb)) {
    n.value = ta;
    for (int64_t i = 0; i < tb.numel(); ++i) n.value[i] += tb[i];
  } else if (channel_add_case(ta, tb)) {
    n.value = ta;
    int64_t hw = ta.shape[1] * ta.shape[2];
    for (int64_t c = 0; c < ta.shape[0]; ++c) {
      double bc = tb[c];
      for (int64_t i = 0; i < hw; ++i) n.value[c * hw + i] += bc;
    }
  } else {
    shape_error("add", ta, tb);
  }
  return push(std::move(n), "add");
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
  Node n;
  n.op = Op::Sub;
  n.in = {a.id, b.id, -1};
  n.n_in = 2;
  n.value = ta;
  for (int64_t i = 0; i < tb.numel(); ++i) n.value[i] -= tb[i];
  return push(std::move(n), "sub");
}

Var Graph::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.in = {a.id, -1, -1};
  n.n_in = 1;
  n.scalar = c;
  n.value = value(a);
  for (double& v : n.value.data) v *= c;
  return push(std::move(n), "scale");
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("mul", ta, tb);
  Node n;
  n.op = Op::Mul;
  n.in = {a.id, b.id, -1};
  n.n_in = 2;
  n.value = ta;
  for (int64_t i = 0; i < tb.numel(); ++i) n.value[i] *= tb[i];
  return push(std::move(n), "mul");
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0]) {
    shape_error("matmul", ta, tb);
  }
  int64_t m = ta.shape[0], k = ta.shape[1], p = tb.shape[1];
  Node n;
  n.op = Op::MatMul;
  n.in = {a.id, b.id, -1};
  n.n_in = 2;
  n.value = Tensor::zeros({m, p});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      double av = ta[i * k + l];
      for (int64_t j = 0; j < p; ++j) n.value[i * p + j] += av * tb[l * p + j];
    }
  }
  return push(std::move(n), "matmul");
}

Var Graph::conv2d(Var x, Var w, Var b, int stride) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  if (stride != 1 && stride != 2) {
    throw std::invalid_argument("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
  }
  if (tw.rank() != 4 || tw.shape[2] != tw.shape[3] || (tw.shape[2] != 1 && tw.shape[2] != 3)) {
    shape_error("conv2d", tw, "[Cout,Cin,k,k] with k in {1,3}");
  }
  bool batched = tx.rank() == 4;
  if (!batched && tx.rank() != 3) shape_error("conv2d", tx, "[C,H,W] or [N,C,H,W]");
  int64_t N = batched ? tx.shape[0] : 1;
  int64_t Cin = batched ? tx.shape[1] : tx.shape[0];
  int64_t H = batched ? tx.shape[2] : tx.shape[1];
  int64_t W = batched ? tx.shape[3] : tx.shape[2];
  int64_t Cout = tw.shape[0];
  int64_t k = tw.shape[2];
  if (tw.shape[1] != Cin) shape_error("conv2d", tx, tw);
  if (tb.rank() != 1 || tb.shape[0] != Cout) shape_error("conv2d", tb, "[Cout]");
  int64_t pad = k / 2;
  int64_t Ho = (H + 2 * pad - k) / stride + 1;
  int64_t Wo = (W + 2 * pad - k) / stride + 1;

  Node n;
  n.op = Op::Conv2d;
  n.in = {x.id, w.id, b.id};
  n.n_in = 3;
  n.stride = stride;
  n.value = batched ? Tensor::zeros({N, Cout, Ho, Wo}) : Tensor::zeros({Cout, Ho, Wo});
  double* out = n.value.data.data();
  const double* in = tx.data.data();
  for (int64_t img = 0; img < N; ++img) {
    const double* xi = in + img * Cin * H * W;
    double* oi = out + img * Cout * Ho * Wo;
    for (int64_t oc = 0; oc < Cout; ++oc) {
      double* oc_plane = oi + oc * Ho * Wo;
      for (int64_t i = 0; i < Ho * Wo; ++i) oc_plane[i] = tb[oc];
      for (int64_t ic = 0; ic < Cin; ++ic) {
        const double* ic_plane = xi + ic * H * W;
        for (int64_t ky = 0; ky < k; ++ky) {
          for (int64_t kx = 0; kx < k; ++kx) {
            double wv = tw[((oc * Cin + ic) * k + ky) * k + kx];
            for (int64_t oy = 0; oy < Ho; ++oy) {
              int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const double* row = ic_plane + iy * W;
              double* orow = oc_plane + oy * Wo;
              for (int64_t ox = 0; ox < Wo; ++ox) {
                int64_t ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= W) continue;
                orow[ox] += wv * row[ix];
              }
            }
          }
        }
      }
    }
  }
  return push(std::move(n), "conv2d");
}

Var Graph::upsample2x(Var x) {
  const Tensor& tx = value(x);
  if (tx.rank() != 3) shape_error("upsample2x", tx, "[C,H,W]");
  int64_t C = tx.shape[0], H = tx.shape[1], W = tx.shape[2];
  Node n;
  n.op = Op::Upsample2x;
  n.in = {x.id, -1, -1};
  n.n_in = 1;
  n.value = Tensor::zeros({C, 2 * H, 2 * W});
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t xx = 0; xx < W; ++xx) {
        double v = tx.at(c, y, xx);
        n.value.at(c, 2 * y, 2 * xx) = v;
        n.value.at(c, 2 * y, 2 * xx + 1) = v;
        n.value.at(c, 2 * y + 1, 2 * xx) = v;
        n.value.at(c, 2 * y + 1, 2 * xx + 1) = v;
      }
    }
  }
  return push(std::move(n), "upsample2x");
}

Var Graph::silu(Var x) {
  Node n;
  n.op = Op::Silu;
  n.in = {x.id, -1, -1};
  n.n_in = 1;
  n.value = value(x);
  for (double& v : n.value.data) v *= sigmoid_scalar(v);
  return push(std::move(n), "silu");
}

Var Graph::sigmoid(Var x) {
  Node n;
  n.op = Op::Sigmoid;
  n.in = {x.id, -1, -1};
  n.n_in = 1;
  n.value = value(x);
  for (double& v : n.value.data) v = sigmoid_scalar(v);
  return push(std::move(n), "sigmoid");
}

Var Graph::linear(Var x, Var w, Var b) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  if (tx.rank() != 1 || tw.rank() != 2 || tw.shape[1] != tx.shape[0]) shape_error("linear", tw, tx);
  int64_t out = tw.shape[0], in = tw.shape[1];
  if (tb.rank() != 1 || tb.shape[0] != out) shape_error("linear", tb, "[out]");
  Node n;
  n.op = Op::Linear;
  n.in = {x.id, w.id, b.id};
  n.n_in = 3;
  n.value = Tensor::zeros({out});
  for (int64_t o = 0; o < out; ++o) {
    double acc = tb[o];
    for (int64_t i = 0; i < in; ++i) acc += tw[o * in + i] * tx[i];
    n.value[o] = acc;
  }
  return push(std::move(n), "linear");
}

Var Graph::sum(Var x) {
  double acc = 0.0;
  for (double v : value(x).data) acc += v;
  Node n;
  n.op = Op::Sum;
  n.in = {x.id, -1, -1};
  n.n_in = 1;
  n.value = Tensor::scalar(acc);
  return push(std::move(n), "sum");
}

Var Graph::mean(Var x) {
  const Tensor& tx = value(x);
  double acc = 0.0;
  for (double v : tx.data) acc += v;
  Node n;
  n.op = Op::Mean;
  n.in = {x.id, -1, -1};
  n.n_in = 1;
  n.value = Tensor::scalar(acc / static_cast<double>(tx.numel()));
  return push(std::move(n), "mean");
}

Var Graph::mse(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_error("mse", ta, tb);
  double acc = 0.0;
  for (int64_t i = 0; i < ta.numel(); ++i) {
    double d = ta[i] - tb[i];
    acc += d * d;
  }
  Node n;
  n.op = Op::Mse;
  n.in = {a.id, b.id, -1};
  n.n_in = 2;
  n.value = Tensor::scalar(acc / static_cast<double>(ta.numel()));
  return push(std::move(n), "mse");
}

Var Graph::l2norm(Var x) {
  double acc = 0.0;
  for (double v : value(x).data) acc += v * v;
  Node n;
  n.op = Op::L2Norm;
  n.in = {x.id, -1, -1};
  n.n_in = 1;
  n.value = Tensor::scalar(std::sqrt(acc));
  return push(std::move(n), "l2norm");
}

Var Graph::concat_channel(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 3 || tb.rank() != 3 || ta.shape[1] != tb.shape[1] || ta.shape[2] != tb.shape[2]) {
    shape_error("concat_channel", ta, tb);
  }
  Node n;
  n.op = Op::ConcatChannel;
  n.in = {a.id, b.id, -1};
  n.n_in = 2;
  n.value = Tensor::zeros({ta.shape[0] + tb.shape[0], ta.shape[1], ta.shape[2]});
  std::copy(ta.data.begin(), ta.data.end(), n.value.data.begin());
  std::copy(tb.data.begin(), tb.data.end(), n.value.data.begin() + ta.numel());
  return push(std::move(n), "concat_channel");
}

std::vector<Tensor> Graph::backward(Var loss, const std::vector<Var>& wrt) const {
  check_var(loss, "backward");
  const Node& ln = nodes_[static_cast<size_t>(loss.id)];
  if (ln.value.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(ln.value.shape));
  }
  for (Var w : wrt) check_var(w, "backward");

  // has_wrt_below[i]: some wrt node feeds node i (or i is itself wrt).
  // Gradient work for an input edge is skipped unless the edge can carry
  // gradient toward a requested node.
  std::vector<char> has_wrt_below(nodes_.size(), 0);
  for (Var w : wrt) has_wrt_below[static_cast<size_t>(w.id)] = 1;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (has_wrt_below[i]) continue;
    const Node& n = nodes_[i];
    for (int j = 0; j < n.n_in; ++j) {
      if (has_wrt_below[static_cast<size_t>(n.in[static_cast<size_t>(j)])]) {
        has_wrt_below[i] = 1;
        break;
      }
    }
  }

  std::vector<Tensor> grads(nodes_.size());
  auto slot = [&](int32_t id) -> Tensor& {
    Tensor& g = grads[static_cast<size_t>(id)];
    if (g.data.empty()) g = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape);
    return g;
  };
  auto wants = [&](int32_t id) { return has_wrt_below[static_cast<size_t>(id)] != 0; };

  grads[static_cast<size_t>(loss.id)] = Tensor::scalar(1.0);

  for (int32_t id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = grads[static_cast<size_t>(id)];
    if (g.data.empty() || !wants(id)) continue;
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Add: {
        const Tensor& ta = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tb = nodes_[static_cast<size_t>(n.in[1])].value;
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);
          for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (wants(n.in[1])) {
          Tensor& gb = slot(n.in[1]);
          if (ta.same_shape(tb)) {
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
          } else {  // channel add: reduce over spatial
            int64_t hw = ta.shape[1] * ta.shape[2];
            for (int64_t c = 0; c < tb.shape[0]; ++c) {
              double acc = 0.0;
              for (int64_t i = 0; i < hw; ++i) acc += g[c * hw + i];
              gb[c] += acc;
            }
          }
        }
        break;
      }
      case Op::Sub: {
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);
          for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (wants(n.in[1])) {
          Tensor& gb = slot(n.in[1]);
          for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case Op::Scale: {
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);
          for (int64_t i = 0; i < g.numel(); ++i) ga[i] += n.scalar * g[i];
        }
        break;
      }
      case Op::Mul: {
        const Tensor& ta = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tb = nodes_[static_cast<size_t>(n.in[1])].value;
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);
          for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * tb[i];
        }
        if (wants(n.in[1])) {
          Tensor& gb = slot(n.in[1]);
          for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * ta[i];
        }
        break;
      }
      case Op::MatMul: {
        const Tensor& ta = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tb = nodes_[static_cast<size_t>(n.in[1])].value;
        int64_t m = ta.shape[0], k = ta.shape[1], p = tb.shape[1];
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);  // g [m,p] * b^T [p,k]
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < p; ++j) {
              double gv = g[i * p + j];
              for (int64_t l = 0; l < k; ++l) ga[i * k + l] += gv * tb[l * p + j];
            }
        }
        if (wants(n.in[1])) {
          Tensor& gb = slot(n.in[1]);  // a^T [k,m] * g [m,p]
          for (int64_t i = 0; i < m; ++i)
            for (int64_t l = 0; l < k; ++l) {
              double av = ta[i * k + l];
              for (int64_t j = 0; j < p; ++j) gb[l * p + j] += av * g[i * p + j];
            }
        }
        break;
      }
      case Op::Conv2d: {
        const Tensor& tx = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tw = nodes_[static_cast<size_t>(n.in[1])].value;
        bool batched = tx.rank() == 4;
        int64_t N = batched ? tx.shape[0] : 1;
        int64_t Cin = batched ? tx.shape[1] : tx.shape[0];
        int64_t H = batched ? tx.shape[2] : tx.shape[1];
        int64_t W = batched ? tx.shape[3] : tx.shape[2];
        int64_t Cout = tw.shape[0];
        int64_t k = tw.shape[2];
        int64_t pad = k / 2;
        int64_t Ho = (H + 2 * pad - k) / n.stride + 1;
        int64_t Wo = (W + 2 * pad - k) / n.stride + 1;
        bool wx = wants(n.in[0]), ww = wants(n.in[1]), wb = wants(n.in[2]);
        Tensor* gx = wx ? &slot(n.in[0]) : nullptr;
        Tensor* gw = ww ? &slot(n.in[1]) : nullptr;
        Tensor* gb = wb ? &slot(n.in[2]) : nullptr;
        for (int64_t img = 0; img < N; ++img) {
          const double* gout = g.data.data() + img * Cout * Ho * Wo;
          const double* xin = tx.data.data() + img * Cin * H * W;
          for (int64_t oc = 0; oc < Cout; ++oc) {
            const double* gplane = gout + oc * Ho * Wo;
            if (wb) {
              double acc = 0.0;
              for (int64_t i = 0; i < Ho * Wo; ++i) acc += gplane[i];
              (*gb)[oc] += acc;
            }
            if (!wx && !ww) continue;
            for (int64_t ic = 0; ic < Cin; ++ic) {
              const double* xplane = xin + ic * H * W;
              double* gxplane = wx ? gx->data.data() + img * Cin * H * W + ic * H * W : nullptr;
              for (int64_t ky = 0; ky < k; ++ky) {
                for (int64_t kx = 0; kx < k; ++kx) {
                  double wv = tw[((oc * Cin + ic) * k + ky) * k + kx];
                  double gw_acc = 0.0;
                  for (int64_t oy = 0; oy < Ho; ++oy) {
                    int64_t iy = oy * n.stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    const double* grow = gplane + oy * Wo;
                    for (int64_t ox = 0; ox < Wo; ++ox) {
                      int64_t ix = ox * n.stride + kx - pad;
                      if (ix < 0 || ix >= W) continue;
                      double gv = grow[ox];
                      if (ww) gw_acc += gv * xplane[iy * W + ix];
                      if (wx) gxplane[iy * W + ix] += gv * wv;
                    }
                  }
                  if (ww) (*gw)[((oc * Cin + ic) * k + ky) * k + kx] += gw_acc;
                }
              }
            }
          }
        }
        break;
      }
      case Op::Upsample2x: {
        if (wants(n.in[0])) {
          const Tensor& tx = nodes_[static_cast<size_t>(n.in[0])].value;
          Tensor& gx = slot(n.in[0]);
          int64_t C = tx.shape[0], H = tx.shape[1], W = tx.shape[2];
          for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < H; ++y)
              for (int64_t x = 0; x < W; ++x) {
                gx.at(c, y, x) += g.at(c, 2 * y, 2 * x) + g.at(c, 2 * y, 2 * x + 1) +
                                  g.at(c, 2 * y + 1, 2 * x) + g.at(c, 2 * y + 1, 2 * x + 1);
              }
        }
        break;
      }
      case Op::Silu: {
        if (wants(n.in[0])) {
          const Tensor& tx = nodes_[static_cast<size_t>(n.in[0])].value;
          Tensor& gx = slot(n.in[0]);
          for (int64_t i = 0; i < g.numel(); ++i) {
            double s = sigmoid_scalar(tx[i]);
            gx[i] += g[i] * s * (1.0 + tx[i] * (1.0 - s));
          }
        }
        break;
      }
      case Op::Sigmoid: {
        if (wants(n.in[0])) {
          Tensor& gx = slot(n.in[0]);
          for (int64_t i = 0; i < g.numel(); ++i) {
            double y = n.value[i];
            gx[i] += g[i] * y * (1.0 - y);
          }
        }
        break;
      }
      case Op::Linear: {
        const Tensor& tx = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tw = nodes_[static_cast<size_t>(n.in[1])].value;
        int64_t out = tw.shape[0], in = tw.shape[1];
        if (wants(n.in[0])) {
          Tensor& gx = slot(n.in[0]);
          for (int64_t o = 0; o < out; ++o)
            for (int64_t i = 0; i < in; ++i) gx[i] += g[o] * tw[o * in + i];
        }
        if (wants(n.in[1])) {
          Tensor& gw = slot(n.in[1]);
          for (int64_t o = 0; o < out; ++o)
            for (int64_t i = 0; i < in; ++i) gw[o * in + i] += g[o] * tx[i];
        }
        if (wants(n.in[2])) {
          Tensor& gb = slot(n.in[2]);
          for (int64_t o = 0; o < out; ++o) gb[o] += g[o];
        }
        break;
      }
      case Op::Sum: {
        if (wants(n.in[0])) {
          Tensor& gx = slot(n.in[0]);
          for (double& v : gx.data) v += g[0];
        }
        break;
      }
      case Op::Mean: {
        if (wants(n.in[0])) {
          Tensor& gx = slot(n.in[0]);
          double gv = g[0] / static_cast<double>(gx.numel());
          for (double& v : gx.data) v += gv;
        }
        break;
      }
      case Op::Mse: {
        const Tensor& ta = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tb = nodes_[static_cast<size_t>(n.in[1])].value;
        double c = 2.0 * g[0] / static_cast<double>(ta.numel());
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);
          for (int64_t i = 0; i < ta.numel(); ++i) ga[i] += c * (ta[i] - tb[i]);
        }
        if (wants(n.in[1])) {
          Tensor& gb = slot(n.in[1]);
          for (int64_t i = 0; i < ta.numel(); ++i) gb[i] -= c * (ta[i] - tb[i]);
        }
        break;
      }
      case Op::L2Norm: {
        if (wants(n.in[0])) {
          const Tensor& tx = nodes_[static_cast<size_t>(n.in[0])].value;
          double norm = n.value[0];
          if (norm > 0.0) {  // subgradient 0 at the origin
            Tensor& gx = slot(n.in[0]);
            double c = g[0] / norm;
            for (int64_t i = 0; i < tx.numel(); ++i) gx[i] += c * tx[i];
          } else if (grads[static_cast<size_t>(n.in[0])].data.empty()) {
            slot(n.in[0]);
          }
        }
        break;
      }
      case Op::ConcatChannel: {
        const Tensor& ta = nodes_[static_cast<size_t>(n.in[0])].value;
        if (wants(n.in[0])) {
          Tensor& ga = slot(n.in[0]);
          for (int64_t i = 0; i < ta.numel(); ++i) ga[i] += g[i];
        }
        if (wants(n.in[1])) {
          Tensor& gb = slot(n.in[1]);
          for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += g[ta.numel() + i];
        }
        break;
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    Tensor& g = grads[static_cast<size_t>(w.id)];
    if (g.data.empty()) g = Tensor::zeros(nodes_[static_cast<size_t>(w.id)].value.shape);
    ensure_finite(g, "backward");
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace veil
