#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fkmad/gradcheck.hpp"
#include "fkmad/losses.hpp"
#include "fkmad/model.hpp"

namespace fkmad {

/// Adam with bias correction; state is keyed by parameter name.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamMap& params, const ParamMap& grads);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ParamMap m_, v_;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossBreakdown loss;
};

struct TrainResult {
  ModelParams params;
  std::vector<StepRecord> history;
  std::size_t steps = 0;
};

/// Called after every optimizer step; used by tests and the CLI logger.
using StepCallback = std::function<void(const StepRecord&, const ForwardPass&)>;

/// windows: [W, L, D]. Batches are a fresh seeded permutation each epoch;
/// the trailing partial batch is dropped (a single short batch is kept when
/// W < batch_size). NumericError carrying the step index on a non-finite loss.
TrainResult train(const Tensor& windows, const ModelConfig& mcfg, ModelParams params,
                  const LossConfig& lcfg, std::uint64_t seed, const StepCallback& on_step = {});

/// Rows `index` of a [W, L, D] tensor stacked into [index.size(), L, D].
Tensor gather_windows(const Tensor& windows, const std::vector<std::size_t>& index);

/// Moving average of `values` over `window` trailing entries.
std::vector<double> smooth(const std::vector<double>& values, std::size_t window);

}  // namespace fkmad
