#pragma once

// Hybrid input projection: a linear branch plus a low-rank Fourier-series KAN
// branch,
//
//   h = (W_lin x + b_lin) + (U V Phi(x) + b_c),
//   Phi(x) = [phi(x_1); ...; phi(x_D)],
//   phi(x_i) = [sin(2 pi f_1 x_i/s) .. sin(2 pi f_F x_i/s), cos(..f_1..) .. cos(..f_F..)].

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fkmad/autodiff.hpp"
#include "fkmad/tensor.hpp"

namespace fkmad::kan {

struct FourierKANParams {
  Tensor W_lin;  // [H, D]
  Tensor b_lin;  // [H]
  Tensor freqs;  // [F], strictly increasing, freqs[0] == 1
  Tensor U;      // [H, r]
  Tensor V;      // [r, 2FD]
  Tensor b_c;    // [H]
  double scale = 1.0;

  std::size_t in_dim() const { return W_lin.dim(1); }
  std::size_t out_dim() const { return W_lin.dim(0); }
  std::size_t num_freqs() const { return freqs.size(); }
  std::size_t rank() const { return U.dim(1); }

  /// Checks every structural invariant; ContractError on violation.
  void validate() const;
};

/// W_lin, U, V ~ U(+-1/sqrt(fan_in)); biases zero; freqs evenly spaced on
/// [1, f_max]. ContractError for F = 0, s <= 0, or r outside [1, min(H, 2FD)].
FourierKANParams init_params(std::size_t D, std::size_t H, std::size_t F, double f_max,
                             std::size_t r, double s, std::uint64_t seed);

/// Default low-rank width: min(H, 16, 2FD).
std::size_t default_rank(std::size_t D, std::size_t H, std::size_t F);

std::vector<double> fourier_basis(std::span<const double> x, const FourierKANParams& p);
std::vector<double> project(std::span<const double> x, const FourierKANParams& p);

/// Graph handles for the learnable parts of FourierKANParams.
struct KANVars {
  ad::Var W_lin, b_lin, freqs, U, V, b_c;
};

/// Phi for every row of x: [N, D] -> [N, 2FD]. Differentiable in x and freqs.
ad::Var fourier_features(ad::Var x, ad::Var freqs, double scale);

/// Batched projection: [N, D] -> [N, H].
ad::Var project(ad::Var x, const KANVars& v, double scale);

}  // namespace fkmad::kan
