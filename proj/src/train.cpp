#include "fkmad/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"

namespace fkmad {

void Adam::step(ParamMap& params, const ParamMap& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    Tensor& m = m_.try_emplace(name, p.shape(), 0.0).first->second;
    Tensor& v = v_.try_emplace(name, p.shape(), 0.0).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

Tensor gather_windows(const Tensor& windows, const std::vector<std::size_t>& index) {
  if (windows.rank() != 3) throw ShapeError("gather_windows: expected [W, L, D]");
  const std::size_t L = windows.dim(1), D = windows.dim(2), stride = L * D;
  Tensor out({index.size(), L, D});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= windows.dim(0)) throw ContractError("gather_windows: index out of range");
    std::copy_n(windows.data().begin() + static_cast<std::ptrdiff_t>(index[i] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

std::vector<double> smooth(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

TrainResult train(const Tensor& windows, const ModelConfig& mcfg, ModelParams params,
                  const LossConfig& lcfg, std::uint64_t seed, const StepCallback& on_step) {
  mcfg.validate();
  lcfg.validate();
  if (windows.rank() != 3 || windows.dim(2) != mcfg.D) {
    throw ShapeError("train: windows must be [W, L, " + std::to_string(mcfg.D) + "], got " +
                     shape_str(windows.shape()));
  }
  const std::size_t W = windows.dim(0);
  if (W == 0) throw DataError("train: no training windows");
  const std::size_t batch = std::min(lcfg.batch_size, W);
  if (lcfg.lambda_mar > 0.0 && batch < lcfg.min_margin_batch()) {
    throw ContractError("train: batch of " + std::to_string(batch) +
                        " is too small for the margin loss (needs " +
                        std::to_string(lcfg.min_margin_batch()) + ")");
  }
  const std::size_t per_epoch = W / batch;

  TrainResult result;
  Adam opt(lcfg.lr);
  Rng rng(seed);
  std::vector<std::size_t> order(W);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < lcfg.epochs; ++epoch) {
    opt.set_lr(lcfg.lr * std::pow(lcfg.lr_decay, static_cast<double>(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t bi = 0; bi < per_epoch; ++bi) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(bi * batch),
                                   order.begin() + static_cast<std::ptrdiff_t>((bi + 1) * batch));
      const Tensor x = gather_windows(windows, idx);
      ad::Graph g;
      ForwardPass fp;
      LossTerms lt;
      try {
        fp = forward(g, mcfg, params, x);
        lt = model_loss(fp, lcfg);
      } catch (const NumericError& e) {
        throw NumericError(std::string("train: step ") + std::to_string(step) + ": " + e.what(), step);
      }
      if (!std::isfinite(lt.parts.total)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(step), step);
      }
      const ad::Gradients grads = g.backward(lt.total);
      ParamMap pg;
      ParamMap trainable = params.trainable(mcfg);
      for (const auto& [name, t] : trainable) pg.emplace(name, grads[fp.params.at(name)]);
      opt.step(trainable, pg);
      params.assign(trainable);

      StepRecord rec{step, epoch, lt.parts};
      result.history.push_back(rec);
      if (on_step) on_step(rec, fp);
      ++step;
    }
  }
  result.params = std::move(params);
  result.steps = step;
  return result;
}

}  // namespace fkmad
