#pragma once

// Selective state-space core.
//
// Per channel c the state h_c in R^N evolves under a shared diagonal A_c < 0
// and a per-(sample, channel, time) step delta:
//
//   h_{t+1,c} = exp(A delta_{t,c}) h_{t,c} + A^{-1}(exp(A delta_{t,c}) - 1) B_t u~_{t,c}
//   y_{t,c}   = C_t . h_{t+1,c} + D_c u~_{t,c}
//
// where u~ = u * (1 + alpha * g_t) is the gated input and B_t, C_t in R^N are
// input-dependent projections. The readout uses the post-update state.
//
// Tensor layouts: sequences are [B, L, C] (sample, time, channel); B/C
// projections are [B, L, N]; states are [B, L+1, C, N].

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fkmad/autodiff.hpp"
#include "fkmad/tensor.hpp"

namespace fkmad::ssm {

inline constexpr double kDefaultDeltaMax = 2.0;
inline constexpr std::size_t kGateWidth = 5;

// ---- step-size and gating path (graph ops) ----------------------------------

/// z' = gamma * (z - stopgrad(mean_t z)), z: [B, L, C], gamma: size-1.
ad::Var sharpen_gate(ad::Var z, ad::Var gamma, const Tensor* frozen_mean = nullptr);

/// delta = min(softplus(pre * delta_r), delta_max), pre: [..., C], delta_r: [C].
ad::Var compute_step(ad::Var pre, ad::Var delta_r, double delta_max = kDefaultDeltaMax);

/// g_t = tanh(conv_5(mean_c delta)_t + bias), zero "same" padding.
/// delta: [B, L, C], kernel: [5], bias: [1]. Returns [B, L].
ad::Var temporal_gate(ad::Var delta, ad::Var kernel, ad::Var bias);

/// x * (1 + alpha * g_t), x: [B, L, C], g: [B, L], alpha: size-1.
ad::Var modulate_input(ad::Var x, ad::Var g, ad::Var alpha);

// Plain-tensor conveniences over the graph ops above.
Tensor sharpen_gate(const Tensor& z, double gamma);
Tensor compute_step(const Tensor& pre, const Tensor& delta_r, double delta_max = kDefaultDeltaMax);
Tensor temporal_gate(const Tensor& delta, const Tensor& kernel, double bias);
Tensor modulate_input(const Tensor& x, const Tensor& g, double alpha);

// ---- selective scan -------------------------------------------------------

struct ScanResult {
  Tensor y;       // [B, L, C]
  Tensor states;  // [B, L+1, C, N], states[:, 0] == 0
};

/// Sequential recurrence. A_c: [N] (all < 0), D_skip: [C].
/// NumericError naming the first timestep whose state is non-finite.
/// `a_scale` multiplies the discrete transition; 1 except in mutation tests.
ScanResult selective_scan(const Tensor& u_eff, const Tensor& delta, const Tensor& Bm,
                          const Tensor& Cm, const Tensor& A_c, const Tensor& D_skip,
                          double a_scale = 1.0);

/// Differentiable scan in all six inputs. The state trajectory is written to
/// `states_out` when non-null.
ad::Var selective_scan(ad::Var u_eff, ad::Var delta, ad::Var Bm, ad::Var Cm, ad::Var A_c,
                       ad::Var D_skip, Tensor* states_out = nullptr);

// ---- discretization -------------------------------------------------------

/// Diagonal A_d (stored as [N]) and B_d ([N, m]).
struct Discrete {
  Tensor A_d;
  Tensor B_d;
};

/// Zero-order hold: A_d = exp(A_c delta), B_d = A_c^{-1}(exp(A_c delta) - I) B_c.
/// A_c: [N] diagonal, B_c: [N, m] (or [N] for m = 1). ContractError if delta <= 0.
Discrete discretize(const Tensor& A_c, const Tensor& B_c, double delta);

/// Second-order expansion: I + dA + d^2 A^2/2 and dB + d^2 A B/2. delta >= 0.
Discrete taylor_discretize(const Tensor& A_c, const Tensor& B_c, double delta);

/// max_n |exp(A_n delta)|.
double spectral_radius(const Tensor& A_c, double delta);

// ---- impulse responses and the time-varying convolution oracle ---------------

/// Kernels H_{t,k} (k = 0..t) of the scan for one parameter trajectory.
/// H_{t,0} = D + C_t . Bbar_t, H_{t,k} = C_t . (prod_{j=t-k+1..t} A_d(delta_j)) Bbar_{t-k}.
/// Each channel is SISO, so a kernel is one scalar per channel.
class LtvKernels {
 public:
  LtvKernels(std::size_t batch, std::size_t length, std::size_t channels);
  double& at(std::size_t b, std::size_t t, std::size_t k, std::size_t c);
  double at(std::size_t b, std::size_t t, std::size_t k, std::size_t c) const;
  std::size_t batch() const { return B_; }
  std::size_t length() const { return L_; }
  std::size_t channels() const { return C_; }

 private:
  std::size_t B_, L_, C_;
  std::vector<double> data_;
};

/// Builds H_{t,k} from the same inputs the scan consumes, using discretize().
LtvKernels impulse_kernels(const Tensor& delta, const Tensor& Bm, const Tensor& Cm,
                           const Tensor& A_c, const Tensor& D_skip);

/// y_t = sum_k H_{t,k} u~_{t-k}. O(L^2) reference for selective_scan.
Tensor ltv_convolve(const Tensor& u_eff, const LtvKernels& kernels);

/// Dense lower-triangular matrix of the operator u~ -> y for sample b,
/// indexed (t*C + c, s*C + c').
Tensor ltv_operator_matrix(const LtvKernels& kernels, std::size_t b);

/// Largest singular value of `m` by power iteration on m^T m.
double operator_norm(const Tensor& m, std::size_t iterations = 500, std::uint64_t seed = 1);

/// Time-invariant impulse response H_0 = D, H_k = C A_d^{k-1} B_d for k >= 1.
/// A_d: [N] diagonal, B_d: [N, m], C: [p, N], D: [p, m]. Returns K+1 kernels [p, m].
std::vector<Tensor> lti_impulse_response(const Tensor& A_d, const Tensor& B_d, const Tensor& C,
                                         const Tensor& D, std::size_t K);

/// LTI output for input u: [L, m] with post-update readout:
/// y_t = H_0 u_t + sum_{k>=1} H_k u_{t-k+1}.
Tensor lti_convolve(const Tensor& u, const std::vector<Tensor>& H);

/// H_k(delta) = C A_d(delta)^{k-1} B_d(delta), k >= 1.
Tensor impulse_kernel(const Tensor& A_c, const Tensor& B_c, const Tensor& C, double delta,
                      std::size_t k);

/// dH_k/d delta = C (sum_{i=0}^{k-2} A_d^i dA_d A_d^{k-2-i}) B_d + C A_d^{k-1} dB_d with
/// dA_d = A_c exp(A_c delta), dB_d = exp(A_c delta) B_c. ContractError for k = 0.
Tensor dHk_ddelta(const Tensor& A_c, const Tensor& B_c, const Tensor& C, double delta,
                  std::size_t k);

// ---- frozen-window energy accounting -----------------------------------------

/// Time-invariant per-channel system: shared A_c, B, C ([N] each), skip and
/// step per channel ([C] each).
struct FrozenSystem {
  Tensor A_c;
  Tensor B;
  Tensor C;
  Tensor D_skip;
  Tensor delta;
};

struct EnergyPair {
  double time_energy = 0.0;
  double freq_energy = 0.0;
};

/// ||y||^2 against (1/n) sum_f sum_c |H_c(w_f)|^2 |U~_c(f)|^2 on the DFT grid.
/// The window is treated as one period of its periodic extension: y is the
/// steady-state response, which is exactly the circular convolution the DFT
/// diagonalises. u_eff: [L, C].
EnergyPair parseval_energy(const FrozenSystem& sys, const Tensor& u_eff);

/// Steady-state periodic response of the frozen system, [L, C].
Tensor frozen_periodic_response(const FrozenSystem& sys, const Tensor& u_eff);

}  // namespace fkmad::ssm
