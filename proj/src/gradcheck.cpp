#include "fkmad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fkmad/errors.hpp"

namespace fkmad {

ParamMap fd_gradient(const std::function<double(const ParamMap&)>& f, const ParamMap& params,
                     double step) {
  if (!(step > 0.0)) throw ContractError("fd_gradient: step must be > 0");
  ParamMap work = params;
  ParamMap grads;
  for (auto& [name, tensor] : work) {
    Tensor g(tensor.shape(), 0.0);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double orig = tensor[i];
      tensor[i] = orig + step;
      const double fp = f(work);
      tensor[i] = orig - step;
      const double fm = f(work);
      tensor[i] = orig;
      g[i] = (fp - fm) / (2.0 * step);
    }
    grads.emplace(name, std::move(g));
  }
  return grads;
}

GradCheckResult compare_gradients(const ParamMap& analytic, const ParamMap& numeric, double floor) {
  GradCheckResult r;
  for (const auto& [name, num] : numeric) {
    auto it = analytic.find(name);
    if (it == analytic.end()) throw ContractError("compare_gradients: missing analytic '" + name + "'");
    const Tensor& an = it->second;
    if (an.size() != num.size()) throw ShapeError("compare_gradients: size mismatch for '" + name + "'");
    for (std::size_t i = 0; i < an.size(); ++i) {
      const double denom = std::max({std::abs(an[i]), std::abs(num[i]), floor});
      const double rel = std::abs(an[i] - num[i]) / denom;
      if (rel > r.max_rel_error || r.worst_param.empty()) {
        r.max_rel_error = rel;
        r.worst_param = name;
        r.worst_index = i;
        r.worst_analytic = an[i];
        r.worst_numeric = num[i];
      }
    }
  }
  return r;
}

}  // namespace fkmad
