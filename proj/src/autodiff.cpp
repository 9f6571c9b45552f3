#include "fkmad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fkmad/errors.hpp"

namespace fkmad::ad {

namespace {

void require_same_graph(Var a, Var b, const char* op) {
  if (!a.valid() || a.graph() != b.graph()) {
    throw ContractError(std::string(op) + ": operands belong to different graphs");
  }
}

void require_same_shape(Var a, Var b, const char* op) {
  require_same_graph(a, b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(Var a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const {
  if (!graph_) throw ContractError("var: null handle");
  return graph_->value(*this);
}

Tensor Gradients::operator[](Var v) const {
  if (reached(v)) return grads_[v.id()];
  return Tensor(v.shape(), 0.0);
}

Var Graph::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (Var p : parents) {
    if (p.graph() != this) throw ContractError("graph: parent from a different graph");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad && backward) {
    n.backward = std::move(backward);
  } else {
    n.requires_grad = false;
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(Var loss) const {
  if (loss.graph() != this) throw ContractError("backward: loss from a different graph");
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(value(loss).shape()));
  }
  Gradients out;
  out.grads_.resize(nodes_.size());
  if (!nodes_[loss.id()].requires_grad) return out;
  out.grads_[loss.id()] = Tensor(value(loss).shape(), 1.0);

  std::vector<Tensor*> pgrads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || out.grads_[id].vec().empty()) continue;
    pgrads.assign(n.parents.size(), nullptr);
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const std::size_t pid = n.parents[i];
      if (!nodes_[pid].requires_grad) continue;
      Tensor& pg = out.grads_[pid];
      if (pg.vec().empty()) pg = Tensor(nodes_[pid].value.shape(), 0.0);
      pgrads[i] = &pg;
    }
    n.backward(out.grads_[id], pgrads);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Elementwise map; the derivative is expressed through input and output values.
template <typename F, typename DF>
Var map_unary(Var a, F f, DF dydx) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const Tensor* xp = &x;
  Tensor ycopy = y;
  return a.graph()->record(
      std::move(y), {a},
      [xp, ycopy = std::move(ycopy), dydx](const Tensor& go, std::span<Tensor*> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * dydx((*xp)[i], ycopy[i]);
      });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  return a.graph()->record(std::move(z), {a, b}, [](const Tensor& go, std::span<Tensor*> pg) {
    for (Tensor* g : pg) {
      if (!g) continue;
      for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += go[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
  return a.graph()->record(std::move(z), {a, b}, [](const Tensor& go, std::span<Tensor*> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i];
    if (pg[1])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[1])[i] -= go[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  const Tensor* xp = &x;
  const Tensor* yp = &y;
  return a.graph()->record(std::move(z), {a, b},
                           [xp, yp](const Tensor& go, std::span<Tensor*> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < go.size(); ++i)
                                 (*pg[0])[i] += go[i] * (*yp)[i];
                             if (pg[1])
                               for (std::size_t i = 0; i < go.size(); ++i)
                                 (*pg[1])[i] += go[i] * (*xp)[i];
                           });
}

Var neg(Var a) { return mul_const(a, -1.0); }

Var add_const(Var a, double c) {
  const Tensor& x = a.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + c;
  return a.graph()->record(std::move(z), {a}, [](const Tensor& go, std::span<Tensor*> pg) {
    for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i];
  });
}

Var mul_const(Var a, double c) {
  const Tensor& x = a.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * c;
  return a.graph()->record(std::move(z), {a}, [c](const Tensor& go, std::span<Tensor*> pg) {
    for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i] * c;
  });
}

Var scale(Var a, Var s) {
  require_same_graph(a, s, "scale");
  if (s.size() != 1) throw ShapeError("scale: factor must be size-1, got " + shape_str(s.shape()));
  const Tensor& x = a.value();
  const double k = s.value()[0];
  Tensor z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * k;
  const Tensor* xp = &x;
  return a.graph()->record(std::move(z), {a, s},
                           [xp, k](const Tensor& go, std::span<Tensor*> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i] * k;
                             if (pg[1]) {
                               double acc = 0.0;
                               for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * (*xp)[i];
                               (*pg[1])[0] += acc;
                             }
                           });
}

Var tanh(Var a) {
  return map_unary(a, [](double x) { return std::tanh(x); },
                   [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return map_unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return map_unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var silu(Var a) {
  return map_unary(a, [](double x) { return x * stable_sigmoid(x); },
                   [](double x, double) {
                     const double s = stable_sigmoid(x);
                     return s * (1.0 + x * (1.0 - s));
                   });
}

Var log1p(Var a) {
  return map_unary(a, [](double x) { return std::log1p(x); },
                   [](double x, double) { return 1.0 / (1.0 + x); });
}

Var exp(Var a) {
  return map_unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a) {
  return map_unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return map_unary(a, [](double x) { return std::abs(x); },
                   [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var relu(Var a) {
  return map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                   [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp_max(Var a, double c) {
  return map_unary(a, [c](double x) { return x < c ? x : c; },
                   [c](double x, double) { return x < c ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------

Var add_bias(Var x, Var b) {
  require_same_graph(x, b, "add_bias");
  const Tensor& xv = x.value();
  const std::size_t n = xv.inner();
  if (b.value().rank() != 1 || b.size() != n) {
    throw ShapeError("add_bias: bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
  }
  const Tensor& bv = b.value();
  Tensor z(xv.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = xv[i] + bv[i % n];
  return x.graph()->record(std::move(z), {x, b}, [n](const Tensor& go, std::span<Tensor*> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i];
    if (pg[1])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[1])[i % n] += go[i];
  });
}

Var mul_bias(Var x, Var v) {
  require_same_graph(x, v, "mul_bias");
  const Tensor& xv = x.value();
  const std::size_t n = xv.inner();
  if (v.value().rank() != 1 || v.size() != n) {
    throw ShapeError("mul_bias: vector " + shape_str(v.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  const Tensor& vv = v.value();
  Tensor z(xv.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = xv[i] * vv[i % n];
  const Tensor* xp = &xv;
  const Tensor* vp = &vv;
  return x.graph()->record(std::move(z), {x, v},
                           [n, xp, vp](const Tensor& go, std::span<Tensor*> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < go.size(); ++i)
                                 (*pg[0])[i] += go[i] * (*vp)[i % n];
                             if (pg[1])
                               for (std::size_t i = 0; i < go.size(); ++i)
                                 (*pg[1])[i % n] += go[i] * (*xp)[i];
                           });
}

Var mul_rows(Var x, Var g) {
  require_same_graph(x, g, "mul_rows");
  const Tensor& xv = x.value();
  const std::size_t n = xv.inner();
  const std::size_t rows = xv.size() / n;
  if (g.size() != rows) {
    throw ShapeError("mul_rows: gate " + shape_str(g.shape()) + " does not cover rows of " +
                     shape_str(x.shape()));
  }
  const Tensor& gv = g.value();
  Tensor z(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) z[r * n + j] = xv[r * n + j] * gv[r];
  const Tensor* xp = &xv;
  const Tensor* gp = &gv;
  return x.graph()->record(std::move(z), {x, g},
                           [n, rows, xp, gp](const Tensor& go, std::span<Tensor*> pg) {
                             for (std::size_t r = 0; r < rows; ++r) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < n; ++j) {
                                 const std::size_t i = r * n + j;
                                 if (pg[0]) (*pg[0])[i] += go[i] * (*gp)[r];
                                 acc += go[i] * (*xp)[i];
                               }
                               if (pg[1]) (*pg[1])[r] += acc;
                             }
                           });
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ " + shape_str(A.shape()) + " * " +
                     shape_str(B.shape()));
  }
  Tensor C({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += aip * B[p * n + j];
    }
  const Tensor* Ap = &A;
  const Tensor* Bp = &B;
  return a.graph()->record(std::move(C), {a, b},
                           [Ap, Bp, m, k, n](const Tensor& go, std::span<Tensor*> pg) {
                             if (pg[0]) {  // dA = dC B^T
                               Tensor& gA = *pg[0];
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t p = 0; p < k; ++p) {
                                   double acc = 0.0;
                                   for (std::size_t j = 0; j < n; ++j)
                                     acc += go[i * n + j] * (*Bp)[p * n + j];
                                   gA[i * k + p] += acc;
                                 }
                             }
                             if (pg[1]) {  // dB = A^T dC
                               Tensor& gB = *pg[1];
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t p = 0; p < k; ++p) {
                                   const double aip = (*Ap)[i * k + p];
                                   for (std::size_t j = 0; j < n; ++j)
                                     gB[p * n + j] += aip * go[i * n + j];
                                 }
                             }
                           });
}

Var matmul_nt(Var a, Var b) {
  require_same_graph(a, b, "matmul_nt");
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(0);
  if (B.dim(1) != k) {
    throw ShapeError("matmul_nt: inner extents differ " + shape_str(A.shape()) + " * " +
                     shape_str(B.shape()) + "^T");
  }
  Tensor C({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
      C[i * n + j] = acc;
    }
  const Tensor* Ap = &A;
  const Tensor* Bp = &B;
  return a.graph()->record(std::move(C), {a, b},
                           [Ap, Bp, m, k, n](const Tensor& go, std::span<Tensor*> pg) {
                             if (pg[0]) {  // dA = dC B
                               Tensor& gA = *pg[0];
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) {
                                   const double g = go[i * n + j];
                                   for (std::size_t p = 0; p < k; ++p)
                                     gA[i * k + p] += g * (*Bp)[j * k + p];
                                 }
                             }
                             if (pg[1]) {  // dB = dC^T A
                               Tensor& gB = *pg[1];
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) {
                                   const double g = go[i * n + j];
                                   for (std::size_t p = 0; p < k; ++p)
                                     gB[j * k + p] += g * (*Ap)[i * k + p];
                                 }
                             }
                           });
}

// ---------------------------------------------------------------------------

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  return a.graph()->record(Tensor::scalar(s), {a}, [](const Tensor& go, std::span<Tensor*> pg) {
    for (double& g : pg[0]->data()) g += go[0];
  });
}

Var mean(Var a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw ContractError("mean: empty tensor");
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  return a.graph()->record(Tensor::scalar(s * inv), {a},
                           [inv](const Tensor& go, std::span<Tensor*> pg) {
                             for (double& g : pg[0]->data()) g += go[0] * inv;
                           });
}

namespace {

Var reduce_last(Var a, bool average) {
  const Tensor& x = a.value();
  if (x.rank() == 0) throw ShapeError("reduce_last: rank-0 input");
  const std::size_t n = x.inner();
  const std::size_t rows = x.size() / n;
  Shape s(x.shape().begin(), x.shape().end() - 1);
  if (s.empty()) s = {1};
  Tensor y(s, 0.0);
  const double w = average ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += x[r * n + j];
    y[r] = acc * w;
  }
  return a.graph()->record(std::move(y), {a},
                           [n, rows, w](const Tensor& go, std::span<Tensor*> pg) {
                             Tensor& g = *pg[0];
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < n; ++j) g[r * n + j] += go[r] * w;
                           });
}

}  // namespace

Var sum_last(Var a) { return reduce_last(a, false); }
Var mean_last(Var a) { return reduce_last(a, true); }

// ---------------------------------------------------------------------------

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return a.graph()->record(std::move(y), {a}, [](const Tensor& go, std::span<Tensor*> pg) {
    for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i];
  });
}

Var slice_last(Var a, std::size_t start, std::size_t len) {
  const Tensor& x = a.value();
  const std::size_t n = x.inner();
  if (start + len > n || len == 0) {
    throw ShapeError("slice_last: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") outside trailing extent " + std::to_string(n));
  }
  const std::size_t rows = x.size() / n;
  Shape s = x.shape();
  s.back() = len;
  Tensor y(s);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < len; ++j) y[r * len + j] = x[r * n + start + j];
  return a.graph()->record(std::move(y), {a},
                           [n, rows, start, len](const Tensor& go, std::span<Tensor*> pg) {
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < len; ++j)
                                 (*pg[0])[r * n + start + j] += go[r * len + j];
                           });
}

Var gather(Var a, std::vector<std::size_t> indices) {
  const Tensor& x = a.value();
  Tensor y({indices.size()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.size()) throw ShapeError("gather: index out of range");
    y[i] = x[indices[i]];
  }
  return a.graph()->record(std::move(y), {a},
                           [idx = std::move(indices)](const Tensor& go, std::span<Tensor*> pg) {
                             for (std::size_t i = 0; i < idx.size(); ++i) (*pg[0])[idx[i]] += go[i];
                           });
}

// ---------------------------------------------------------------------------

Var conv1d_depthwise(Var x, Var w, Var b, std::size_t pad_left) {
  require_same_graph(x, w, "conv1d_depthwise");
  require_same_graph(x, b, "conv1d_depthwise");
  require_rank(x, 3, "conv1d_depthwise");
  require_rank(w, 2, "conv1d_depthwise");
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& Bv = b.value();
  const std::size_t B = X.dim(0), L = X.dim(1), C = X.dim(2), K = W.dim(1);
  if (W.dim(0) != C || Bv.size() != C) {
    throw ShapeError("conv1d_depthwise: kernel " + shape_str(W.shape()) + " / bias " +
                     shape_str(Bv.shape()) + " vs channels " + std::to_string(C));
  }
  if (pad_left >= K) throw ContractError("conv1d_depthwise: pad_left must be < kernel width");
  Tensor Y(X.shape());
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = Bv[c];
        for (std::size_t k = 0; k < K; ++k) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad_left);
          if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
          acc += W[c * K + k] * X[(bi * L + static_cast<std::size_t>(s)) * C + c];
        }
        Y[(bi * L + t) * C + c] = acc;
      }
  const Tensor* Xp = &X;
  const Tensor* Wp = &W;
  return x.graph()->record(
      std::move(Y), {x, w, b},
      [Xp, Wp, B, L, C, K, pad_left](const Tensor& go, std::span<Tensor*> pg) {
        for (std::size_t bi = 0; bi < B; ++bi)
          for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < C; ++c) {
              const double g = go[(bi * L + t) * C + c];
              if (pg[2]) (*pg[2])[c] += g;
              for (std::size_t k = 0; k < K; ++k) {
                const std::ptrdiff_t s =
                    static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad_left);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                const std::size_t xi = (bi * L + static_cast<std::size_t>(s)) * C + c;
                if (pg[0]) (*pg[0])[xi] += g * (*Wp)[c * K + k];
                if (pg[1]) (*pg[1])[c * K + k] += g * (*Xp)[xi];
              }
            }
      });
}

Tensor time_mean(const Tensor& z) {
  if (z.rank() != 3) throw ShapeError("time_mean: expected [B, L, C], got " + shape_str(z.shape()));
  const std::size_t B = z.dim(0), L = z.dim(1), C = z.dim(2);
  if (L == 0) throw ContractError("time_mean: L must be >= 1");
  Tensor m({B, C}, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < C; ++c) m[b * C + c] += z[(b * L + t) * C + c];
  for (double& v : m.data()) v /= static_cast<double>(L);
  return m;
}

Var center_time_stopgrad(Var z, const Tensor* frozen_mean) {
  require_rank(z, 3, "center_time_stopgrad");
  const Tensor& Z = z.value();
  const std::size_t B = Z.dim(0), L = Z.dim(1), C = Z.dim(2);
  Tensor m = frozen_mean ? *frozen_mean : time_mean(Z);
  if (m.size() != B * C) throw ShapeError("center_time_stopgrad: frozen mean has wrong size");
  Tensor Y(Z.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t i = (b * L + t) * C + c;
        Y[i] = Z[i] - m[b * C + c];
      }
  return z.graph()->record(std::move(Y), {z}, [](const Tensor& go, std::span<Tensor*> pg) {
    for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i];
  });
}

}  // namespace fkmad::ad
