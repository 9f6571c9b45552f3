#include <cmath>

#include "doctest.h"
#include "fkmad/errors.hpp"
#include "fkmad/gradcheck.hpp"
#include "fkmad/losses.hpp"
#include "fkmad/model.hpp"
#include "fkmad/rng.hpp"

using namespace fkmad;

namespace {

ModelConfig toy_config() {
  ModelConfig c;
  c.D = 3;
  c.d_inner = 4;
  c.d_state = 3;
  c.F = 2;
  c.f_max = 2;
  c.window_size = 8;
  return c;
}

Tensor random_input(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(s));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("init is deterministic and has the documented shapes") {
  const ModelConfig c = toy_config();
  const ModelParams a = init_model(c, 7), b = init_model(c, 7);
  CHECK(a.tensors == b.tensors);
  CHECK(a["kan.W_lin"].shape() == Shape{8, 3});
  CHECK(a["kan.V"].shape() == Shape{c.rank(), 12});
  CHECK(a["ssm.W_x"].shape() == Shape{1 + 6, 4});
  const Tensor A = continuous_A(a);
  for (std::size_t n = 0; n < A.size(); ++n) CHECK(A[n] == doctest::Approx(-(double(n) + 1)).epsilon(1e-12));
}

TEST_CASE("forward produces consistent shapes and invariants") {
  const ModelConfig c = toy_config();
  ModelParams p = init_model(c, 3);
  const Tensor x = random_input({2, 8, 3}, 11);
  ad::Graph g;
  ForwardPass fp = forward(g, c, p, x);
  CHECK(fp.recon.shape() == Shape{2, 8, 3});
  ScanTrace tr = make_trace(fp);
  CHECK(tr.x_states.shape() == Shape{2, 9, 4, 3});
  for (std::size_t i = 0; i < 4 * 3; ++i) CHECK(tr.x_states[i] == 0.0);
  for (double d : tr.delta.data()) {
    CHECK(d > 0.0);
    CHECK(d <= c.delta_max);
  }
  const Tensor m = ad::time_mean(tr.z_sharp);
  CHECK(m.max_abs() < 1e-9);
  CHECK_THROWS_AS(forward(g, c, p, random_input({2, 8, 2}, 1)), ShapeError);
}

TEST_CASE("full-model gradient matches finite differences") {
  const ModelConfig c = toy_config();
  LossConfig lc;
  lc.p = lc.q = 50;
  lc.lambda_pass = lc.lambda_mar = lc.lambda_delta = lc.lambda_z = 0.5;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ModelParams p = init_model(c, seed);
    Rng rng(seed * 7919);
    for (auto& [name, t] : p.tensors) {
      if (name == "kan.freqs") continue;
      for (double& v : t.data()) v += rng.normal(0.0, 0.2);
    }
    const Tensor x = random_input({2, 8, 3}, seed + 100);
    ad::Graph g;
    ForwardPass fp = forward(g, c, p, x);
    LossTerms lt = model_loss(fp, lc);
    const ad::Gradients grads = g.backward(lt.total);
    const Tensor frozen = ad::time_mean(fp.z.value());
    ParamMap analytic;
    const ParamMap trainable = p.trainable(c);
    for (const auto& [name, t] : trainable) analytic.emplace(name, grads[fp.params.at(name)]);
    ForwardOptions fo;
    fo.frozen_gate_mean = &frozen;
    const ParamMap numeric = fd_gradient(
        [&](const ParamMap& q) {
          ModelParams pp = p;
          pp.assign(q);
          return evaluate_loss(c, pp, x, lc, fo);
        },
        trainable);
    for (const auto& [name, num] : numeric) {
      ParamMap a1{{name, analytic.at(name)}}, n1{{name, num}};
      const GradCheckResult r = compare_gradients(a1, n1, 1e-6);
      if (r.max_rel_error > 1e-3)
        MESSAGE(seed << " " << name << "[" << r.worst_index << "] rel=" << r.max_rel_error
                     << " a=" << r.worst_analytic << " n=" << r.worst_numeric);
    }
    const GradCheckResult all = compare_gradients(analytic, numeric, 1e-6);
    CHECK(all.max_rel_error <= 1e-3);
  }
}
