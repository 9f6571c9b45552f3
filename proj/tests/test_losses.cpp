#include <cmath>
#include <limits>

#include "doctest.h"
#include "fkmad/errors.hpp"
#include "fkmad/gradcheck.hpp"
#include "fkmad/losses.hpp"
#include "fkmad/rng.hpp"

using namespace fkmad;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("reconstruction error") {
  Rng rng(1);
  const std::vector<double> y = random_vec(12, rng), t = random_vec(12, rng);
  CHECK(recon_loss(y, y) == 0.0);
  std::vector<double> shifted(y);
  for (double& v : shifted) v += 1.0;
  CHECK(recon_loss(shifted, y) == doctest::Approx(1.0).epsilon(1e-15));
  double mse = 0.0, mae = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    mse += (y[i] - t[i]) * (y[i] - t[i]);
    mae += std::abs(y[i] - t[i]);
  }
  CHECK(recon_loss(y, t) == doctest::Approx(mse / 12).epsilon(1e-14));
  CHECK(recon_loss(y, t, ReconNorm::L1) == doctest::Approx(mae / 12).epsilon(1e-14));
}

TEST_CASE("pass hinge") {
  for (double g : {0.5, 1.0, 2.0}) {
    for (double Eu : {0.0, 0.3, 2.0}) {
      CHECK(pass_loss_energy(g * g * Eu, Eu, g) == 0.0);
      CHECK(pass_loss_energy(0.5 * g * g * Eu, Eu, g) == 0.0);
    }
  }
  CHECK(pass_loss(std::log1p(3.0), std::log1p(1.0), 1.0) == doctest::Approx(0.480453).epsilon(1e-6));
  CHECK(pass_loss_energy(3.0, 1.0, 1.0) == doctest::Approx(std::pow(std::log(2.0), 2)).epsilon(1e-14));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) CHECK(pass_loss(rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0.1, 3)) >= 0.0);
}

TEST_CASE("margin hinge") {
  CHECK(margin_loss(std::vector<double>(10, 0.7), 0.5, 10, 10) == 0.5);
  CHECK(margin_loss(std::vector<double>{0, 0, 1, 1}, 2.0, 25, 25) == 1.0);
  CHECK(margin_loss(std::vector<double>{0, 0, 3, 3}, 2.0, 25, 25) == 0.0);
  CHECK_THROWS_AS(margin_loss(std::vector<double>(9, 0.0), 0.5, 10, 10), ContractError);
  // Ties fall back to index order.
  const MarginGroups g = margin_groups(std::vector<double>{1, 1, 1, 1}, 25, 25);
  CHECK(g.bottom == std::vector<std::size_t>{0});
  CHECK(g.top == std::vector<std::size_t>{3});
  Rng rng(2);
  for (int i = 0; i < 100; ++i) CHECK(margin_loss(random_vec(20, rng, 0, 3), 1.0, 10, 20) >= 0.0);
}

TEST_CASE("step regularizers") {
  const StepReg flat = step_reg(std::vector<double>(8, 0.4), 0.4);
  CHECK(flat.small == 0.0);
  CHECK(flat.smooth == 0.0);
  std::vector<double> ramp(9);
  for (std::size_t t = 0; t < 9; ++t) ramp[t] = 0.25 * double(t);
  CHECK(step_reg(ramp, 0.0).smooth == doctest::Approx(8 * 0.0625).epsilon(1e-15));
  Rng rng(3);
  const std::vector<double> d = random_vec(11, rng, 0, 2);
  double small = 0.0, smooth = 0.0;
  for (std::size_t t = 0; t < 11; ++t) small += (d[t] - 0.6) * (d[t] - 0.6);
  for (std::size_t t = 0; t + 1 < 11; ++t) smooth += (d[t + 1] - d[t]) * (d[t + 1] - d[t]);
  const StepReg r = step_reg(d, 0.6);
  CHECK(r.small == doctest::Approx(small).epsilon(1e-14));
  CHECK(r.smooth == doctest::Approx(smooth).epsilon(1e-14));
}

TEST_CASE("gate regularizer") {
  CHECK(gate_reg(std::vector<double>(5, -1e3)) < 1e-300);
  CHECK(gate_reg(std::vector<double>(5, 0.0)) == 0.5);
  Rng rng(9);
  const std::vector<double> z = random_vec(13, rng, -4, 4);
  double s = 0.0;
  for (double v : z) s += 1.0 / (1.0 + std::exp(-v));
  CHECK(gate_reg(z) == doctest::Approx(s / 13).epsilon(1e-14));
  const double ent = gate_reg(std::vector<double>(3, 0.0), GateReg::Entropy);
  CHECK(ent == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("weighted total") {
  LossBreakdown b{0.3, 0.7, 0.11, 0.05, 0.02, 0.4, 0.0};
  LossConfig zero;
  zero.lambda_pass = zero.lambda_mar = zero.lambda_delta = zero.lambda_z = 0.0;
  CHECK(combine(b, zero) == b.recon);
  LossConfig ones;
  ones.lambda_pass = ones.lambda_mar = ones.lambda_delta = ones.lambda_z = 1.0;
  const LossBreakdown unit{1, 1, 1, 1, 1, 1, 0};
  CHECK(combine(unit, ones) == 6.0);
}

TEST_CASE("model loss breakdown identity on random batches with defaults") {
  ModelConfig mc;
  mc.D = 3;
  mc.d_inner = 4;
  mc.d_state = 3;
  mc.window_size = 16;
  const LossConfig lc;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor x({10, 16, 3});
    for (double& v : x.data()) v = rng.uniform(-1, 1);
    ad::Graph g;
    const ForwardPass fp = forward(g, mc, init_model(mc, seed), x);
    const LossTerms lt = model_loss(fp, lc);
    const LossBreakdown& p = lt.parts;
    const double direct = p.recon + lc.lambda_pass * p.pass + lc.lambda_mar * p.margin +
                          lc.lambda_delta * (p.small + p.smooth) + lc.lambda_z * p.gate_reg;
    CHECK(std::abs(lt.total.value().item() - direct) <= 1e-12);
    CHECK(p.total == lt.total.value().item());
  }
}

TEST_CASE("graph hinges: gradients away from the kink, zero on the inactive side") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    ParamMap p{{"e", Tensor::vector(random_vec(10, rng, 0.0, 3.0))}, {"u", Tensor::vector(random_vec(10, rng, 0.0, 1.0))}};
    auto run = [&](const ParamMap& m, ParamMap* grads) {
      ad::Graph g;
      const ad::Var e = g.param(m.at("e")), u = g.param(m.at("u"));
      const ad::Var loss = ad::add(pass_loss(e, u, 1.2), margin_loss(e, 5.0, 20, 20));
      if (grads) {
        const ad::Gradients gr = g.backward(loss);
        (*grads)["e"] = gr[e];
        (*grads)["u"] = gr[u];
      }
      return loss.value().item();
    };
    ParamMap analytic;
    run(p, &analytic);
    const ParamMap numeric = fd_gradient([&](const ParamMap& m) { return run(m, nullptr); }, p);
    CHECK(compare_gradients(analytic, numeric).max_rel_error <= 1e-3);
  }
  ad::Graph g;
  const ad::Var e = g.param(Tensor::vector({0.1, 0.2}));
  const ad::Var u = g.param(Tensor::vector({1.0, 1.0}));
  const ad::Gradients gr = g.backward(pass_loss(e, u, 2.0));
  CHECK(gr[e].max_abs() == 0.0);
  CHECK(gr[u].max_abs() == 0.0);
}

TEST_CASE("config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.p = 60;
  c.q = 50;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LossConfig{};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LossConfig{};
  c.lambda_mar = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(LossConfig{}.min_margin_batch() == 10);
}
