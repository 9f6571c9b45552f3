#pragma once

#include <functional>
#include <map>
#include <string>

#include "fkmad/tensor.hpp"

namespace fkmad {

/// Named parameter tensors. Ordered so iteration (and hence any derived
/// output) is deterministic.
using ParamMap = std::map<std::string, Tensor>;

/// Central differences (f(p+h) - f(p-h)) / 2h for every coordinate of every
/// parameter. ContractError if step <= 0.
ParamMap fd_gradient(const std::function<double(const ParamMap&)>& f, const ParamMap& params,
                     double step = 1e-4);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, floor) maximised over all coordinates. `floor`
/// keeps coordinates whose true gradient is ~0 from reporting noise as error.
GradCheckResult compare_gradients(const ParamMap& analytic, const ParamMap& numeric,
                                  double floor = 1e-6);

}  // namespace fkmad
