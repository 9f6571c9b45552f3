#include "fkmad/fourier_kan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"

namespace fkmad::kan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Tensor uniform_tensor(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void FourierKANParams::validate() const {
  if (W_lin.rank() != 2) throw ContractError("fourier-kan: W_lin must be [H, D]");
  const std::size_t H = out_dim(), D = in_dim(), F = freqs.size();
  if (F == 0) throw ContractError("fourier-kan: need at least one frequency");
  if (!(scale > 0.0)) throw ContractError("fourier-kan: scale s must be > 0");
  if (b_lin.size() != H || b_c.size() != H) throw ShapeError("fourier-kan: bias size != H");
  if (U.rank() != 2 || U.dim(0) != H) throw ShapeError("fourier-kan: U must be [H, r]");
  const std::size_t r = U.dim(1);
  if (V.rank() != 2 || V.dim(0) != r || V.dim(1) != 2 * F * D) {
    throw ShapeError("fourier-kan: V must be [r, 2FD]");
  }
  if (r < 1 || r > std::min(H, 2 * F * D)) {
    throw ContractError("fourier-kan: rank r=" + std::to_string(r) + " outside [1, min(H, 2FD)]");
  }
  for (std::size_t k = 1; k < F; ++k) {
    if (!(freqs[k] > freqs[k - 1])) throw ContractError("fourier-kan: freqs must increase strictly");
  }
}

std::size_t default_rank(std::size_t D, std::size_t H, std::size_t F) {
  return std::min({H, std::size_t{16}, 2 * F * D});
}

FourierKANParams init_params(std::size_t D, std::size_t H, std::size_t F, double f_max,
                             std::size_t r, double s, std::uint64_t seed) {
  if (D == 0 || H == 0) throw ContractError("fourier-kan: D and H must be >= 1");
  if (F == 0) throw ContractError("fourier-kan: F must be >= 1");
  if (!(s > 0.0)) throw ContractError("fourier-kan: s must be > 0");
  if (F == 1 ? f_max != 1.0 : !(f_max > 1.0)) {
    throw ContractError("fourier-kan: f_max must exceed 1 (or equal 1 when F = 1)");
  }
  if (r < 1 || r > std::min(H, 2 * F * D)) {
    throw ContractError("fourier-kan: rank r=" + std::to_string(r) + " outside [1, min(H, 2FD)]");
  }
  Rng rng(seed);
  FourierKANParams p;
  p.W_lin = uniform_tensor({H, D}, D, rng);
  p.b_lin = Tensor({H}, 0.0);
  p.U = uniform_tensor({H, r}, r, rng);
  p.V = uniform_tensor({r, 2 * F * D}, 2 * F * D, rng);
  p.b_c = Tensor({H}, 0.0);
  p.freqs = Tensor({F});
  for (std::size_t k = 0; k < F; ++k) {
    p.freqs[k] = F == 1 ? 1.0
                        : 1.0 + (f_max - 1.0) * static_cast<double>(k) / static_cast<double>(F - 1);
  }
  p.scale = s;
  return p;
}

ad::Var fourier_features(ad::Var x, ad::Var freqs, double scale) {
  const Tensor& X = x.value();
  const Tensor& f = freqs.value();
  if (X.rank() != 2) throw ShapeError("fourier_features: x must be [N, D], got " + shape_str(X.shape()));
  if (!(scale > 0.0)) throw ContractError("fourier_features: scale must be > 0");
  const std::size_t N = X.dim(0), D = X.dim(1), F = f.size();
  const std::size_t W = 2 * F * D;
  Tensor Phi({N, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < D; ++i) {
      const double xs = X[n * D + i] / scale;
      for (std::size_t k = 0; k < F; ++k) {
        const double arg = kTwoPi * f[k] * xs;
        Phi[n * W + i * 2 * F + k] = std::sin(arg);
        Phi[n * W + i * 2 * F + F + k] = std::cos(arg);
      }
    }
  const Tensor* Xp = &X;
  const Tensor* fp = &f;
  return x.graph()->record(
      std::move(Phi), {x, freqs},
      [Xp, fp, N, D, F, W, scale](const Tensor& go, std::span<Tensor*> pg) {
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t i = 0; i < D; ++i) {
            const double xs = (*Xp)[n * D + i] / scale;
            double gx = 0.0;
            for (std::size_t k = 0; k < F; ++k) {
              const double fk = (*fp)[k];
              const double arg = kTwoPi * fk * xs;
              // d/d(arg) of the (sin, cos) pair weighted by the incoming grads.
              const double g = go[n * W + i * 2 * F + k] * std::cos(arg) -
                               go[n * W + i * 2 * F + F + k] * std::sin(arg);
              gx += g * kTwoPi * fk / scale;
              if (pg[1]) (*pg[1])[k] += g * kTwoPi * xs;
            }
            if (pg[0]) (*pg[0])[n * D + i] += gx;
          }
      });
}

ad::Var project(ad::Var x, const KANVars& v, double scale) {
  ad::Var linear = ad::add_bias(ad::matmul_nt(x, v.W_lin), v.b_lin);
  ad::Var phi = fourier_features(x, v.freqs, scale);
  ad::Var fourier = ad::add_bias(ad::matmul_nt(ad::matmul_nt(phi, v.V), v.U), v.b_c);
  return ad::add(linear, fourier);
}

std::vector<double> fourier_basis(std::span<const double> x, const FourierKANParams& p) {
  ad::Graph g;
  ad::Var xv = g.input(Tensor({1, x.size()}, std::vector<double>(x.begin(), x.end())));
  return fourier_features(xv, g.input(p.freqs), p.scale).value().vec();
}

std::vector<double> project(std::span<const double> x, const FourierKANParams& p) {
  if (x.size() != p.in_dim()) throw ShapeError("project: input width != D");
  ad::Graph g;
  ad::Var xv = g.input(Tensor({1, x.size()}, std::vector<double>(x.begin(), x.end())));
  KANVars v{g.input(p.W_lin), g.input(p.b_lin), g.input(p.freqs),
            g.input(p.U),     g.input(p.V),     g.input(p.b_c)};
  return project(xv, v, p.scale).value().vec();
}

}  // namespace fkmad::kan
