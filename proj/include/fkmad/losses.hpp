#pragma once

// Unsupervised objective:
//
//   total = recon + l_pass * pass + l_mar * margin + l_delta * (small + smooth) + l_z * gate
//
// Energies are per window and in the log domain, e = log(1 + mean(v^2)).

#include <cstddef>
#include <span>
#include <vector>

#include "fkmad/autodiff.hpp"
#include "fkmad/model.hpp"

namespace fkmad {

enum class ReconNorm { L2, L1 };
enum class GateReg { Sparsity, Entropy };

struct LossConfig {
  double gamma = 2.0;
  double margin = 0.5;
  double p = 10.0;  // top percentage
  double q = 10.0;  // bottom percentage
  double lambda_pass = 0.01;
  double lambda_mar = 0.01;
  double lambda_delta = 1e-3;
  double lambda_z = 1e-3;
  double delta_target = 0.69314718055994530942;  // softplus(0)
  ReconNorm recon_norm = ReconNorm::L2;
  GateReg gate_reg = GateReg::Sparsity;

  // Optimizer schedule.
  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier
  std::size_t epochs = 20;
  std::size_t batch_size = 16;

  void validate() const;
  /// Smallest batch for which both margin groups are nonempty.
  std::size_t min_margin_batch() const;
};

struct LossBreakdown {
  double recon = 0.0;
  double pass = 0.0;
  double margin = 0.0;
  double small = 0.0;
  double smooth = 0.0;
  double gate_reg = 0.0;
  double total = 0.0;
};

/// Weighted sum in the canonical order; the graph total uses the same order,
/// so the two agree bit for bit.
double combine(const LossBreakdown& parts, const LossConfig& cfg);

// ---- plain evaluations -----------------------------------------------------

double recon_loss(std::span<const double> y, std::span<const double> target,
                  ReconNorm norm = ReconNorm::L2);
double log_energy(std::span<const double> v);
double pass_loss(double e_y, double e_u, double gamma);
/// Same hinge from raw mean-square energies; exactly 0 when E_y <= gamma^2 E_u.
double pass_loss_energy(double E_y, double E_u, double gamma);
/// ContractError if fewer than ceil(100 / min(p, q)) entries.
double margin_loss(std::span<const double> e_y, double m, double p, double q);
struct StepReg {
  double small = 0.0;
  double smooth = 0.0;
};
StepReg step_reg(std::span<const double> delta_bar, double target);
double gate_reg(std::span<const double> z_sharp, GateReg kind = GateReg::Sparsity);

/// Indices of the bottom-k and top-k entries under a stable ascending sort.
struct MarginGroups {
  std::vector<std::size_t> bottom;
  std::vector<std::size_t> top;
};
MarginGroups margin_groups(std::span<const double> e_y, double p, double q);

// ---- graph versions -----------------------------------------------------------

ad::Var recon_loss(ad::Var y, ad::Var target, ReconNorm norm = ReconNorm::L2);
/// [B, ...] -> [B] per-window mean square E.
ad::Var window_mean_square(ad::Var v);
/// [B, ...] -> [B] per-window log-energy log1p(E).
ad::Var window_log_energy(ad::Var v);
/// Mean over windows of [e_y - log(1 + gamma^2 E_u)]_+^2, E_u the mean square of u~.
ad::Var pass_loss(ad::Var e_y, ad::Var ms_u, double gamma);
ad::Var margin_loss(ad::Var e_y, double m, double p, double q);
/// delta_bar: [B, L]; both terms averaged over windows.
ad::Var step_small(ad::Var delta_bar, double target);
ad::Var step_smooth(ad::Var delta_bar);
ad::Var gate_reg(ad::Var z_sharp, GateReg kind = GateReg::Sparsity);

struct LossTerms {
  ad::Var total;
  ad::Var e_y;  // [B]
  LossBreakdown parts;
};

/// Builds every term on one forward pass of `target` windows.
LossTerms model_loss(const ForwardPass& fp, const LossConfig& cfg);

/// Forward plus loss in a fresh graph; convenience for finite differences.
double evaluate_loss(const ModelConfig& mcfg, const ModelParams& params, const Tensor& x,
                     const LossConfig& cfg, const ForwardOptions& opts = {});

}  // namespace fkmad
