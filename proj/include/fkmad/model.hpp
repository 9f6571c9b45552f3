#pragma once

// The full detector block: hybrid projection -> split into main branch and
// gate branch -> causal depthwise conv + SiLU -> step-size path -> temporal
// gate and input modulation -> selective scan -> sigmoid(sharpened gate) ->
// output projection back to the input width.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "fkmad/autodiff.hpp"
#include "fkmad/fourier_kan.hpp"
#include "fkmad/gradcheck.hpp"
#include "fkmad/tensor.hpp"

namespace fkmad {

struct ModelConfig {
  std::size_t D = 1;          // input features
  std::size_t d_inner = 16;   // scan channels; projection width H = 2 * d_inner
  std::size_t d_state = 16;   // N
  std::size_t F = 8;          // Fourier frequencies
  double f_max = 8.0;
  std::size_t r = 0;          // low-rank width; 0 selects min(H, 16, 2FD)
  double s = 1.0;             // Fourier input scale
  std::size_t k_main = 4;     // main-branch conv width
  std::size_t dt_rank = 0;    // 0 selects ceil(d_inner / 16)
  std::size_t window_size = 64;
  double delta_max = 2.0;
  bool learnable_freqs = false;

  std::size_t H() const { return 2 * d_inner; }
  std::size_t rank() const;
  std::size_t step_rank() const;
  void validate() const;
};

/// All model tensors keyed by name ("kan.W_lin", "ssm.A_raw", "out.W", ...).
struct ModelParams {
  ParamMap tensors;

  const Tensor& operator[](const std::string& name) const;
  Tensor& operator[](const std::string& name);
  /// Subset updated by the optimizer (frequencies only when learnable).
  ParamMap trainable(const ModelConfig& cfg) const;
  void assign(const ParamMap& updates);

  kan::FourierKANParams fourier_kan(const ModelConfig& cfg) const;
};

/// Deterministic initialisation from `seed`.
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

/// A_c = -softplus(A_raw).
Tensor continuous_A(const ModelParams& p);

struct ForwardOptions {
  /// Stand-in for mean_t(z) of the gate branch, [B, H/2]; see center_time_stopgrad.
  const Tensor* frozen_gate_mean = nullptr;
  /// Register parameters as differentiable leaves.
  bool track_params = true;
};

/// Graph handles for one forward pass over a batch of windows x: [B, L, D].
struct ForwardPass {
  std::map<std::string, ad::Var> params;
  ad::Var x;
  ad::Var hidden;    // projection output [B, L, H]
  ad::Var z;         // gate branch [B, L, d_inner]
  ad::Var u;         // post-conv main input [B, L, d_inner]
  ad::Var B_proj;    // [B, L, N]
  ad::Var C_proj;    // [B, L, N]
  ad::Var delta;     // [B, L, d_inner]
  ad::Var delta_bar; // channel-mean step [B, L]
  ad::Var g;         // temporal gate [B, L]
  ad::Var u_eff;     // modulated scan input [B, L, d_inner]
  ad::Var y;         // scan output [B, L, d_inner]
  ad::Var z_sharp;   // sharpened gate [B, L, d_inner]
  ad::Var gated;     // y * sigmoid(z_sharp)
  ad::Var recon;     // [B, L, D]
  Tensor states;     // [B, L+1, d_inner, N]
};

ForwardPass forward(ad::Graph& graph, const ModelConfig& cfg, const ModelParams& params,
                    const Tensor& x, const ForwardOptions& opts = {});

/// Per-timestep intermediates of one forward pass.
struct ScanTrace {
  Tensor u;        // [B, L, d_inner]
  Tensor z_sharp;  // [B, L, d_inner]
  Tensor delta;    // [B, L, d_inner]
  Tensor g;        // [B, L]
  Tensor x_states; // [B, L+1, d_inner, N]
  Tensor y;        // [B, L, d_inner]
};

ScanTrace make_trace(const ForwardPass& fp);

}  // namespace fkmad
