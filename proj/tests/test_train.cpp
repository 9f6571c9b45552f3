#include <cmath>

#include "doctest.h"
#include "fkmad/data.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"
#include "fkmad/train.hpp"

using namespace fkmad;

namespace {

ModelConfig small_model(std::size_t D, std::size_t window) {
  ModelConfig mc;
  mc.D = D;
  mc.d_inner = 4;
  mc.d_state = 4;
  mc.F = 2;
  mc.f_max = 2;
  mc.window_size = window;
  return mc;
}

LossConfig recon_only() {
  LossConfig lc;
  lc.lambda_pass = lc.lambda_mar = lc.lambda_delta = lc.lambda_z = 0.0;
  return lc;
}

double batch_gap(const ModelConfig& mc, const ModelParams& p, const Tensor& w, const LossConfig& lc) {
  ad::Graph g;
  ForwardOptions fo;
  fo.track_params = false;
  const ad::Var e = window_log_energy(forward(g, mc, p, w, fo).y);
  const MarginGroups mg = margin_groups(e.value().data(), lc.p, lc.q);
  double top = 0.0, bot = 0.0;
  for (std::size_t i : mg.top) top += e.value()[i];
  for (std::size_t i : mg.bottom) bot += e.value()[i];
  return top / double(mg.top.size()) - bot / double(mg.bottom.size());
}

}  // namespace

TEST_CASE("Adam first step moves each coordinate by lr against the gradient sign") {
  Adam opt(0.1);
  ParamMap p{{"w", Tensor::vector({1.0, -2.0, 0.5})}};
  opt.step(p, {{"w", Tensor::vector({3.0, -0.01, 0.0})}});
  CHECK(p["w"][0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p["w"][1] == doctest::Approx(-1.9).epsilon(1e-4));
  CHECK(p["w"][2] == 0.5);
  CHECK(opt.steps() == 1);
}

TEST_CASE("zero epochs leaves the parameters unchanged") {
  const ModelConfig mc = small_model(2, 16);
  Rng rng(1);
  Tensor w({20, 16, 2});
  for (double& v : w.data()) v = rng.normal();
  const ModelParams init = init_model(mc, 3);
  LossConfig lc;
  lc.epochs = 0;
  const TrainResult tr = train(w, mc, init, lc, 3);
  CHECK(tr.steps == 0);
  CHECK(tr.history.empty());
  CHECK(tr.params.tensors == init.tensors);
}

TEST_CASE("batches: trailing partial batch dropped, one short batch kept") {
  const ModelConfig mc = small_model(1, 8);
  LossConfig lc = recon_only();
  lc.epochs = 3;
  lc.batch_size = 4;
  CHECK(train(Tensor({10, 8, 1}, 0.5), mc, init_model(mc, 1), lc, 1).steps == 6);
  CHECK(train(Tensor({3, 8, 1}, 0.5), mc, init_model(mc, 1), lc, 1).steps == 3);
}

TEST_CASE("training is deterministic per seed") {
  const ModelConfig mc = small_model(2, 16);
  Rng rng(2);
  Tensor w({24, 16, 2});
  for (double& v : w.data()) v = rng.normal();
  LossConfig lc;
  lc.epochs = 3;
  lc.batch_size = 12;
  const TrainResult a = train(w, mc, init_model(mc, 5), lc, 5), b = train(w, mc, init_model(mc, 5), lc, 5);
  CHECK(a.params.tensors == b.params.tensors);
  const TrainResult c = train(w, mc, init_model(mc, 5), lc, 6);
  CHECK(a.params.tensors != c.params.tensors);
}

TEST_CASE("pure reconstruction fits a linear teacher") {
  const std::size_t T = 512;
  Tensor x({T, 2});
  for (std::size_t t = 0; t < T; ++t) {
    const double s = std::sin(0.05 * double(t));
    x.at(t, 0) = 0.8 * s;
    x.at(t, 1) = -0.4 * s;
  }
  const ModelConfig mc = small_model(2, 32);
  LossConfig lc = recon_only();
  lc.epochs = 300;
  lc.lr = 1e-2;
  const TrainResult tr = train(make_windows(x, 32, 16), mc, init_model(mc, 1), lc, 1);
  CHECK(tr.history.back().loss.recon <= 1e-3);
  // Smoothed history goes down.
  std::vector<double> total;
  for (const StepRecord& r : tr.history) total.push_back(r.loss.total);
  const std::vector<double> sm = smooth(total, 10);
  CHECK(sm.back() < sm.front());
}

TEST_CASE("margin term alone opens the top-bottom gap past m within 200 steps") {
  Rng rng(3);
  const std::size_t W = 32, L = 16;
  Tensor w({W, L, 2});
  for (std::size_t i = 0; i < W; ++i) {
    const double amp = i % 8 == 0 ? 3.0 : 1.0;  // planted high-energy windows
    for (std::size_t k = 0; k < L * 2; ++k) w[i * L * 2 + k] = amp * rng.normal();
  }
  const ModelConfig mc = small_model(2, L);
  LossConfig lc = recon_only();
  lc.lambda_mar = 1.0;
  lc.margin = 2.0;
  lc.batch_size = W;
  lc.epochs = 200;
  lc.lr = 1e-2;
  const ModelParams p0 = init_model(mc, 1);
  CHECK(batch_gap(mc, p0, w, lc) < lc.margin);
  const TrainResult tr = train(w, mc, p0, lc, 1);
  CHECK(tr.steps <= 200);
  CHECK(batch_gap(mc, tr.params, w, lc) >= lc.margin);
}

TEST_CASE("divergence aborts with the step index") {
  const ModelConfig mc = small_model(1, 8);
  LossConfig lc = recon_only();
  lc.epochs = 2;
  lc.batch_size = 2;
  Tensor w({4, 8, 1}, 0.1);
  w[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(w, mc, init_model(mc, 1), lc, 1), NumericError);
}

TEST_CASE("smooth is a trailing moving average") {
  const std::vector<double> s = smooth({1, 2, 3, 4, 5}, 2);
  CHECK(s == std::vector<double>{1, 1.5, 2.5, 3.5, 4.5});
}
