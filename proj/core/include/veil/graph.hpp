#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "veil/tensor.hpp"

namespace veil {

enum class Op : uint8_t {
  Input,
  Add,
  Sub,
  Scale,
  Mul,
  MatMul,
  Conv2d,
  Upsample2x,
  Silu,
  Sigmoid,
  Linear,
  Sum,
  Mean,
  Mse,
  L2Norm,
  ConcatChannel,
};

const char* op_name(Op op);

// Handle into a Graph's node table.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so node ids are
// a topological order by construction. Forward values are cached on every
// node; backward replays the tape in reverse. A graph is single-threaded;
// recorded tensors are never mutated.
class Graph {
 public:
  // Leaf holding a caller-provided value.
  Var input(Tensor t);

  // Elementwise a+b. Also accepts a rank-3 [C,H,W] first operand with a
  // rank-1 [C] second operand, added per channel (the one broadcast the
  // model architecture needs).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double c);
  Var mul(Var a, Var b);
  // [m,k] x [k,n] -> [m,n].
  Var matmul(Var a, Var b);
  // x: [C,H,W] or [N,C,H,W]; w: [Cout,Cin,k,k] with k in {1,3}; b: [Cout].
  // Zero padding k/2, stride 1 or 2.
  Var conv2d(Var x, Var w, Var b, int stride);
  // Nearest-neighbor 2x spatial upsample of a rank-3 [C,H,W] tensor.
  Var upsample2x(Var x);
  Var silu(Var x);
  Var sigmoid(Var x);
  // x: [in], w: [out,in], b: [out] -> [out].
  Var linear(Var x, Var w, Var b);
  Var sum(Var x);
  Var mean(Var x);
  // Mean of squared differences over all elements (scalar).
  Var mse(Var a, Var b);
  // Euclidean norm over all elements (scalar). Gradient at the origin is
  // defined as zero (subgradient choice).
  Var l2norm(Var x);
  // [C1,H,W] ++ [C2,H,W] -> [C1+C2,H,W].
  Var concat_channel(Var a, Var b);

  const Tensor& value(Var v) const;
  double scalar_value(Var v) const;

  // Gradients of the scalar `loss` with respect to each node in `wrt`,
  // aligned with `wrt`. A node with no path to the loss gets a zero tensor
  // of its value's shape.
  std::vector<Tensor> backward(Var loss, const std::vector<Var>& wrt) const;

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Op op;
    std::array<int32_t, 3> in{{-1, -1, -1}};
    int n_in = 0;
    double scalar = 0.0;  // Scale factor
    int stride = 1;       // Conv2d stride
    Tensor value;
  };

  std::vector<Node> nodes_;

  Var push(Node n, const char* what);
  const Node& node(Var v) const;
  void check_var(Var v, const char* what) const;
};

}  // namespace veil
