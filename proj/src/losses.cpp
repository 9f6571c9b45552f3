#include "fkmad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fkmad/errors.hpp"

namespace fkmad {

void LossConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("loss: gamma must be > 0");
  if (!(margin > 0.0)) throw ConfigError("loss: margin must be > 0");
  if (!(p > 0.0) || !(q > 0.0) || p + q > 100.0) {
    throw ConfigError("loss: need 0 < p, q and p + q <= 100");
  }
  for (double l : {lambda_pass, lambda_mar, lambda_delta, lambda_z}) {
    if (!(l >= 0.0)) throw ConfigError("loss: weights must be >= 0");
  }
  if (!(lr > 0.0)) throw ConfigError("loss: lr must be > 0");
  if (!(lr_decay > 0.0)) throw ConfigError("loss: lr_decay must be > 0");
  if (batch_size == 0) throw ConfigError("loss: batch_size must be >= 1");
}

std::size_t LossConfig::min_margin_batch() const {
  return static_cast<std::size_t>(std::ceil(100.0 / std::min(p, q) - 1e-12));
}

double combine(const LossBreakdown& c, const LossConfig& cfg) {
  double t = c.recon;
  t = t + cfg.lambda_pass * c.pass;
  t = t + cfg.lambda_mar * c.margin;
  t = t + cfg.lambda_delta * (c.small + c.smooth);
  t = t + cfg.lambda_z * c.gate_reg;
  return t;
}

// ---- plain ------------------------------------------------------------------

double recon_loss(std::span<const double> y, std::span<const double> target, ReconNorm norm) {
  if (y.size() != target.size()) throw ShapeError("recon_loss: size mismatch");
  if (y.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - target[i];
    s += norm == ReconNorm::L2 ? d * d : std::abs(d);
  }
  return s / static_cast<double>(y.size());
}

double log_energy(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::log1p(s / static_cast<double>(v.size()));
}

double pass_loss_energy(double E_y, double E_u, double gamma) {
  const double h = std::max(std::log1p(E_y) - std::log1p(gamma * gamma * E_u), 0.0);
  return h * h;
}

double pass_loss(double e_y, double e_u, double gamma) {
  const double bound = std::log1p(gamma * gamma * std::expm1(e_u));
  const double h = std::max(e_y - bound, 0.0);
  return h * h;
}

MarginGroups margin_groups(std::span<const double> e, double p, double q) {
  const std::size_t n = e.size();
  const auto need = static_cast<std::size_t>(std::ceil(100.0 / std::min(p, q) - 1e-12));
  if (n < need) {
    throw ContractError("margin_loss: batch of " + std::to_string(n) + " needs at least " +
                        std::to_string(need) + " windows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return e[a] < e[b]; });
  const auto k_top = static_cast<std::size_t>(std::floor(p * static_cast<double>(n) / 100.0 + 1e-12));
  const auto k_bot = static_cast<std::size_t>(std::floor(q * static_cast<double>(n) / 100.0 + 1e-12));
  MarginGroups g;
  g.bottom.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_bot));
  g.top.assign(order.end() - static_cast<std::ptrdiff_t>(k_top), order.end());
  return g;
}

double margin_loss(std::span<const double> e, double m, double p, double q) {
  const MarginGroups g = margin_groups(e, p, q);
  double top = 0.0, bot = 0.0;
  for (std::size_t i : g.top) top += e[i];
  for (std::size_t i : g.bottom) bot += e[i];
  const double gap = top / static_cast<double>(g.top.size()) - bot / static_cast<double>(g.bottom.size());
  return std::max(m - gap, 0.0);
}

StepReg step_reg(std::span<const double> d, double target) {
  if (d.size() < 2) throw ContractError("step_reg: trajectory needs L >= 2");
  StepReg r;
  for (std::size_t t = 0; t < d.size(); ++t) {
    r.small += (d[t] - target) * (d[t] - target);
    if (t + 1 < d.size()) r.smooth += (d[t + 1] - d[t]) * (d[t + 1] - d[t]);
  }
  return r;
}

double gate_reg(std::span<const double> z, GateReg kind) {
  if (z.empty()) return 0.0;
  double s = 0.0;
  for (double v : z) {
    const double sg = 1.0 / (1.0 + std::exp(-v));
    if (kind == GateReg::Sparsity) {
      s += sg;
    } else {
      // Binary entropy via log sigma(v) = -softplus(-v).
      const double sp_pos = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
      const double sp_neg = sp_pos - v;
      s += sg * sp_neg + (1.0 - sg) * sp_pos;
    }
  }
  return s / static_cast<double>(z.size());
}

// ---- graph ----------------------------------------------------------------

ad::Var recon_loss(ad::Var y, ad::Var target, ReconNorm norm) {
  if (y.shape() != target.shape()) {
    throw ShapeError("recon_loss: " + shape_str(y.shape()) + " vs " + shape_str(target.shape()));
  }
  ad::Var d = ad::sub(y, target);
  return ad::mean(norm == ReconNorm::L2 ? ad::square(d) : ad::abs(d));
}

ad::Var window_mean_square(ad::Var v) {
  const std::size_t B = v.shape().at(0);
  return ad::mean_last(ad::square(ad::reshape(v, {B, v.size() / B})));
}

ad::Var window_log_energy(ad::Var v) { return ad::log1p(window_mean_square(v)); }

ad::Var pass_loss(ad::Var e_y, ad::Var ms_u, double gamma) {
  // log(1 + gamma^2 exp(e_u) - gamma^2) == log1p(gamma^2 * E_u).
  ad::Var bound = ad::log1p(ad::mul_const(ms_u, gamma * gamma));
  return ad::mean(ad::square(ad::relu(ad::sub(e_y, bound))));
}

ad::Var margin_loss(ad::Var e_y, double m, double p, double q) {
  const MarginGroups g = margin_groups(e_y.value().data(), p, q);
  ad::Var gap = ad::sub(ad::mean(ad::gather(e_y, g.top)), ad::mean(ad::gather(e_y, g.bottom)));
  return ad::relu(ad::add_const(ad::neg(gap), m));
}

ad::Var step_small(ad::Var delta_bar, double target) {
  const double B = static_cast<double>(delta_bar.shape().at(0));
  return ad::mul_const(ad::sum(ad::square(ad::add_const(delta_bar, -target))), 1.0 / B);
}

ad::Var step_smooth(ad::Var delta_bar) {
  const std::size_t L = delta_bar.shape().at(1);
  if (L < 2) throw ContractError("step_reg: trajectory needs L >= 2");
  const double B = static_cast<double>(delta_bar.shape().at(0));
  ad::Var diff = ad::sub(ad::slice_last(delta_bar, 1, L - 1), ad::slice_last(delta_bar, 0, L - 1));
  return ad::mul_const(ad::sum(ad::square(diff)), 1.0 / B);
}

ad::Var gate_reg(ad::Var z, GateReg kind) {
  ad::Var sg = ad::sigmoid(z);
  if (kind == GateReg::Sparsity) return ad::mean(sg);
  ad::Var sp_pos = ad::softplus(z);
  ad::Var sp_neg = ad::softplus(ad::neg(z));
  ad::Var ent = ad::add(ad::mul(sg, sp_neg), ad::mul(ad::add_const(ad::neg(sg), 1.0), sp_pos));
  return ad::mean(ent);
}

LossTerms model_loss(const ForwardPass& fp, const LossConfig& cfg) {
  LossTerms out;
  ad::Var recon = recon_loss(fp.recon, fp.x, cfg.recon_norm);
  out.e_y = window_log_energy(fp.y);
  ad::Var pass = pass_loss(out.e_y, window_mean_square(fp.u_eff), cfg.gamma);
  ad::Var small = step_small(fp.delta_bar, cfg.delta_target);
  ad::Var smooth = step_smooth(fp.delta_bar);
  ad::Var gate = gate_reg(fp.z_sharp, cfg.gate_reg);

  const std::size_t B = fp.x.shape().at(0);
  ad::Var margin;
  if (B >= cfg.min_margin_batch()) {
    margin = margin_loss(out.e_y, cfg.margin, cfg.p, cfg.q);
  } else if (cfg.lambda_mar > 0.0) {
    // Raises the batch-size contract error.
    margin_loss(out.e_y, cfg.margin, cfg.p, cfg.q);
  }

  ad::Var total = recon;
  total = ad::add(total, ad::mul_const(pass, cfg.lambda_pass));
  if (margin.valid()) total = ad::add(total, ad::mul_const(margin, cfg.lambda_mar));
  total = ad::add(total, ad::mul_const(ad::add(small, smooth), cfg.lambda_delta));
  total = ad::add(total, ad::mul_const(gate, cfg.lambda_z));
  out.total = total;

  LossBreakdown& b = out.parts;
  b.recon = recon.value().item();
  b.pass = pass.value().item();
  b.margin = margin.valid() ? margin.value().item() : 0.0;
  b.small = small.value().item();
  b.smooth = smooth.value().item();
  b.gate_reg = gate.value().item();
  b.total = total.value().item();
  return out;
}

double evaluate_loss(const ModelConfig& mcfg, const ModelParams& params, const Tensor& x,
                     const LossConfig& cfg, const ForwardOptions& opts) {
  ad::Graph g;
  ForwardOptions o = opts;
  o.track_params = false;
  ForwardPass fp = forward(g, mcfg, params, x, o);
  return model_loss(fp, cfg).parts.total;
}

}  // namespace fkmad
