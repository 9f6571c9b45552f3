#pragma once

// Reverse-mode differentiation over a closed set of tensor primitives.
//
// A Graph is a tape: nodes are appended in evaluation order, so every parent
// has a smaller id than its children and backward() is a single reverse sweep.
// Values are immutable once recorded.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "fkmad/tensor.hpp"

namespace fkmad::ad {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;

  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Result of a backward sweep: one gradient per node that requires grad.
class Gradients {
 public:
  /// Gradient of the loss w.r.t. `v`; zeros if no path reached it.
  Tensor operator[](Var v) const;
  bool reached(Var v) const { return v.id() < grads_.size() && !grads_[v.id()].vec().empty(); }

 private:
  friend class Graph;
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
};

class Graph {
 public:
  /// Receives the output gradient and one accumulator per parent (nullptr for
  /// parents that do not require grad). Accumulators are pre-shaped.
  using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor*> parent_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Constant leaf.
  Var input(Tensor value);
  /// Differentiable leaf.
  Var param(Tensor value);
  /// Appends an interior node. `backward` may be empty for non-differentiable
  /// results.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar loss (size-1 tensor); ContractError otherwise.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

// ---- elementwise -----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var add_const(Var a, double c);
Var mul_const(Var a, double c);
/// a * s for a size-1 `s`.
Var scale(Var a, Var s);

Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var silu(Var a);
Var log1p(Var a);
Var exp(Var a);
Var square(Var a);
Var abs(Var a);
/// max(a, 0); the subgradient at 0 is taken as 0.
Var relu(Var a);
/// min(a, c); gradient is 0 where the clamp is active (a >= c).
Var clamp_max(Var a, double c);

// ---- broadcasting over the trailing axis ------------------------------------

/// x[..., n] + b[n]
Var add_bias(Var x, Var b);
/// x[..., n] * v[n]
Var mul_bias(Var x, Var v);
/// x[r, ...] * g[r] where r ranges over all leading positions (x.size()/x.inner()).
Var mul_rows(Var x, Var g);

// ---- linear algebra -------------------------------------------------------

/// [m x k] * [k x n]
Var matmul(Var a, Var b);
/// [m x k] * [n x k]^T
Var matmul_nt(Var a, Var b);

// ---- reductions ------------------------------------------------------------

Var sum(Var a);
Var mean(Var a);
/// Reduces the trailing axis: [..., n] -> [...].
Var sum_last(Var a);
Var mean_last(Var a);

// ---- structural ------------------------------------------------------------

Var reshape(Var a, Shape shape);
/// x[..., start:start+len]
Var slice_last(Var a, std::size_t start, std::size_t len);
/// Flat index selection.
Var gather(Var a, std::vector<std::size_t> indices);

// ---- sequence ops ----------------------------------------------------------

/// Depthwise conv over time. x: [B, L, C], w: [C, K], b: [C].
/// y[b,t,c] = b[c] + sum_k w[c,k] * x[b, t + k - pad_left, c], zero outside [0, L).
/// pad_left = K-1 is causal; pad_left = (K-1)/2 is centred ("same").
Var conv1d_depthwise(Var x, Var w, Var b, std::size_t pad_left);

/// z - mean_t(z) for z: [B, L, C], with the mean held constant under
/// differentiation. If `frozen_mean` ([B, C]) is given it replaces the
/// computed mean; finite-difference checks use this to evaluate the same
/// function the backward pass differentiates.
Var center_time_stopgrad(Var z, const Tensor* frozen_mean = nullptr);

/// Mean over time of z: [B, L, C] -> [B, C] (plain helper, no graph).
Tensor time_mean(const Tensor& z);

}  // namespace fkmad::ad
