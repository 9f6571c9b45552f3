#include <cmath>
#include <functional>

#include "doctest.h"
#include "fkmad/autodiff.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/gradcheck.hpp"
#include "fkmad/rng.hpp"

using namespace fkmad;

namespace {

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

using Builder = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

// Max relative error of backward vs central differences for a scalar loss
// built from `shapes`-shaped parameters.
double primitive_error(const Builder& build, const std::vector<Shape>& shapes, std::uint64_t seed) {
  Rng rng(seed);
  ParamMap params;
  for (std::size_t i = 0; i < shapes.size(); ++i) params["p" + std::to_string(i)] = random_tensor(shapes[i], rng);
  auto loss = [&](const ParamMap& p, ParamMap* grads) {
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (const auto& [name, t] : p) vars.push_back(g.param(t));
    ad::Var out = build(g, vars);
    if (out.size() != 1) out = ad::sum(ad::mul(out, g.input(random_tensor(out.shape(), rng))));
    if (grads) {
      const ad::Gradients gr = g.backward(out);
      std::size_t i = 0;
      for (const auto& [name, t] : p) (*grads)[name] = gr[vars[i++]];
    }
    return out.value().item();
  };
  // The random readout weights must be the same on every evaluation.
  const Rng start = rng;
  ParamMap analytic;
  loss(params, &analytic);
  const ParamMap numeric = fd_gradient(
      [&](const ParamMap& p) {
        rng = start;
        return loss(p, nullptr);
      },
      params, 1e-5);
  return compare_gradients(analytic, numeric).max_rel_error;
}

struct Primitive {
  const char* name;
  std::vector<Shape> shapes;
  Builder build;
};

}  // namespace

TEST_CASE("closed-form primitive values") {
  ad::Graph g;
  CHECK(ad::softplus(g.input(Tensor::scalar(0.0))).value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(ad::tanh(g.input(Tensor::scalar(0.0))).value().item() == 0.0);
  const ad::Var ones = g.input(Tensor({5}, 1.0));
  CHECK(ad::log1p(ad::mean(ad::square(ones))).value().item() == std::log(2.0));
  CHECK(ad::sigmoid(g.input(Tensor::scalar(0.0))).value().item() == 0.5);
}

TEST_CASE("linear and quadratic gradients") {
  ad::Graph g;
  const Tensor W({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor x({3, 1}, std::vector<double>{0.5, -1.0, 2.0});
  const ad::Var w = g.param(W);
  const ad::Var loss = ad::sum(ad::matmul(w, g.input(x)));
  const Tensor gw = g.backward(loss)[w];
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(gw.at(i, j) == x[j]);
  }

  ad::Graph h;
  const Tensor v = Tensor::vector({1.0, -2.0, 0.25, 3.0});
  const ad::Var xv = h.param(v);
  const Tensor gx = h.backward(ad::mean(ad::square(xv)))[xv];
  for (std::size_t i = 0; i < 4; ++i) CHECK(gx[i] == doctest::Approx(2 * v[i] / 4).epsilon(1e-15));
}

TEST_CASE("shape errors and non-scalar backward") {
  ad::Graph g;
  const ad::Var a = g.param(Tensor({2, 3}));
  const ad::Var b = g.param(Tensor({3, 2}));
  CHECK_THROWS_AS(ad::add(a, b), ShapeError);
  CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
  CHECK_THROWS_AS(g.backward(a), ContractError);
}

TEST_CASE("unreached parameters get zero gradients") {
  ad::Graph g;
  const ad::Var a = g.param(Tensor::vector({1.0, 2.0}));
  const ad::Var b = g.param(Tensor::vector({3.0}));
  const ad::Gradients gr = g.backward(ad::sum(a));
  CHECK_FALSE(gr.reached(b));
  CHECK(gr[b] == Tensor({1}, 0.0));
}

TEST_CASE("every primitive matches finite differences over 20 seeds") {
  std::vector<double> frozen;
  const std::vector<Primitive> prims{
      {"add", {{2, 3}, {2, 3}}, [](ad::Graph&, const auto& v) { return ad::add(v[0], v[1]); }},
      {"sub", {{2, 3}, {2, 3}}, [](ad::Graph&, const auto& v) { return ad::sub(v[0], v[1]); }},
      {"mul", {{2, 3}, {2, 3}}, [](ad::Graph&, const auto& v) { return ad::mul(v[0], v[1]); }},
      {"neg", {{4}}, [](ad::Graph&, const auto& v) { return ad::neg(v[0]); }},
      {"add_const", {{4}}, [](ad::Graph&, const auto& v) { return ad::add_const(v[0], 0.7); }},
      {"mul_const", {{4}}, [](ad::Graph&, const auto& v) { return ad::mul_const(v[0], -1.3); }},
      {"scale", {{2, 3}, {1}}, [](ad::Graph&, const auto& v) { return ad::scale(v[0], v[1]); }},
      {"tanh", {{5}}, [](ad::Graph&, const auto& v) { return ad::tanh(v[0]); }},
      {"sigmoid", {{5}}, [](ad::Graph&, const auto& v) { return ad::sigmoid(v[0]); }},
      {"softplus", {{5}}, [](ad::Graph&, const auto& v) { return ad::softplus(v[0]); }},
      {"silu", {{5}}, [](ad::Graph&, const auto& v) { return ad::silu(v[0]); }},
      {"log1p", {{5}}, [](ad::Graph&, const auto& v) { return ad::log1p(ad::square(v[0])); }},
      {"exp", {{5}}, [](ad::Graph&, const auto& v) { return ad::exp(v[0]); }},
      {"square", {{5}}, [](ad::Graph&, const auto& v) { return ad::square(v[0]); }},
      {"abs", {{5}}, [](ad::Graph&, const auto& v) { return ad::abs(v[0]); }},
      {"relu", {{5}}, [](ad::Graph&, const auto& v) { return ad::relu(v[0]); }},
      {"clamp_max", {{5}}, [](ad::Graph&, const auto& v) { return ad::clamp_max(v[0], 0.3); }},
      {"add_bias", {{2, 3, 4}, {4}}, [](ad::Graph&, const auto& v) { return ad::add_bias(v[0], v[1]); }},
      {"mul_bias", {{2, 3, 4}, {4}}, [](ad::Graph&, const auto& v) { return ad::mul_bias(v[0], v[1]); }},
      {"mul_rows", {{2, 3, 4}, {2, 3}}, [](ad::Graph&, const auto& v) { return ad::mul_rows(v[0], v[1]); }},
      {"matmul", {{3, 4}, {4, 2}}, [](ad::Graph&, const auto& v) { return ad::matmul(v[0], v[1]); }},
      {"matmul_nt", {{3, 4}, {2, 4}}, [](ad::Graph&, const auto& v) { return ad::matmul_nt(v[0], v[1]); }},
      {"sum", {{2, 3}}, [](ad::Graph&, const auto& v) { return ad::sum(ad::square(v[0])); }},
      {"mean", {{2, 3}}, [](ad::Graph&, const auto& v) { return ad::mean(ad::square(v[0])); }},
      {"sum_last", {{2, 3, 4}}, [](ad::Graph&, const auto& v) { return ad::sum_last(v[0]); }},
      {"mean_last", {{2, 3, 4}}, [](ad::Graph&, const auto& v) { return ad::mean_last(v[0]); }},
      {"reshape", {{2, 6}}, [](ad::Graph&, const auto& v) { return ad::reshape(v[0], {3, 4}); }},
      {"slice_last", {{2, 5}}, [](ad::Graph&, const auto& v) { return ad::slice_last(v[0], 1, 3); }},
      {"gather", {{6}}, [](ad::Graph&, const auto& v) { return ad::gather(v[0], {5, 0, 0, 3}); }},
      {"conv1d causal", {{2, 6, 3}, {3, 4}, {3}},
       [](ad::Graph&, const auto& v) { return ad::conv1d_depthwise(v[0], v[1], v[2], 3); }},
      {"conv1d same", {{2, 6, 3}, {3, 5}, {3}},
       [](ad::Graph&, const auto& v) { return ad::conv1d_depthwise(v[0], v[1], v[2], 2); }},
      {"center_time_stopgrad", {{2, 5, 3}},
       [&frozen](ad::Graph&, const auto& v) {
         // The mean is held constant: freeze it at the base point (the first,
         // unperturbed evaluation) so both sides see the same function.
         if (frozen.empty()) frozen = ad::time_mean(v[0].value()).vec();
         const Tensor m({v[0].shape()[0], v[0].shape()[2]}, frozen);
         return ad::center_time_stopgrad(v[0], &m);
       }},
  };
  for (const Primitive& p : prims) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      frozen.clear();
      worst = std::max(worst, primitive_error(p.build, p.shapes, seed));
    }
    INFO(std::string(p.name));
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("relu and clamp take the zero subgradient at the kink") {
  ad::Graph g;
  const ad::Var x = g.param(Tensor::vector({0.0, 1.0, -1.0}));
  const Tensor gr = g.backward(ad::sum(ad::relu(x)))[x];
  CHECK(gr == Tensor::vector({0.0, 1.0, 0.0}));
  ad::Graph h;
  const ad::Var y = h.param(Tensor::vector({0.5, 0.2}));
  CHECK(h.backward(ad::sum(ad::clamp_max(y, 0.5)))[y] == Tensor::vector({0.0, 1.0}));
}
