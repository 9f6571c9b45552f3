#include "fkmad/ssm.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "fkmad/dft.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"

namespace fkmad::ssm {

namespace {

struct Extents {
  std::size_t B, L, C, N;
};

Extents scan_extents(const Tensor& u, const Tensor& delta, const Tensor& Bm, const Tensor& Cm,
                     const Tensor& A, const Tensor& D) {
  if (u.rank() != 3) throw ShapeError("selective_scan: u must be [B, L, C], got " + shape_str(u.shape()));
  Extents e{u.dim(0), u.dim(1), u.dim(2), A.size()};
  if (delta.shape() != u.shape()) throw ShapeError("selective_scan: delta shape != u shape");
  const Shape bc{e.B, e.L, e.N};
  if (Bm.shape() != bc || Cm.shape() != bc) {
    throw ShapeError("selective_scan: B/C projections must be " + shape_str(bc));
  }
  if (D.size() != e.C) throw ShapeError("selective_scan: D_skip must have C entries");
  return e;
}

// (exp(a d) - 1) / a with the a -> 0 limit.
double zoh_gain(double a, double d) {
  const double ad = a * d;
  if (std::abs(ad) < 1e-300) return d;
  return std::expm1(ad) / a;
}

// d/da of zoh_gain.
double zoh_gain_da(double a, double d, double ea, double phi) {
  const double ad = a * d;
  if (std::abs(ad) < 1e-4) return d * d * (0.5 + ad / 3.0 + ad * ad / 8.0);
  return (d * ea - phi) / a;
}

Tensor as_matrix(const Tensor& B_c, std::size_t N) {
  if (B_c.rank() == 1) return B_c.reshaped({N, 1});
  return B_c;
}

}  // namespace

// ---------------------------------------------------------------------------

ad::Var sharpen_gate(ad::Var z, ad::Var gamma, const Tensor* frozen_mean) {
  return ad::scale(ad::center_time_stopgrad(z, frozen_mean), gamma);
}

ad::Var compute_step(ad::Var pre, ad::Var delta_r, double delta_max) {
  return ad::clamp_max(ad::softplus(ad::mul_bias(pre, delta_r)), delta_max);
}

ad::Var temporal_gate(ad::Var delta, ad::Var kernel, ad::Var bias) {
  const Tensor& d = delta.value();
  if (d.rank() != 3) throw ShapeError("temporal_gate: delta must be [B, L, C]");
  if (kernel.size() != kGateWidth) throw ShapeError("temporal_gate: kernel must have width 5");
  const std::size_t B = d.dim(0), L = d.dim(1);
  ad::Var mean_c = ad::reshape(ad::mean_last(delta), {B, L, 1});
  ad::Var w = ad::reshape(kernel, {1, kGateWidth});
  ad::Var conv = ad::conv1d_depthwise(mean_c, w, bias, kGateWidth / 2);
  return ad::reshape(ad::tanh(conv), {B, L});
}

ad::Var modulate_input(ad::Var x, ad::Var g, ad::Var alpha) {
  return ad::mul_rows(x, ad::add_const(ad::scale(g, alpha), 1.0));
}

Tensor sharpen_gate(const Tensor& z, double gamma) {
  ad::Graph g;
  return sharpen_gate(g.input(z), g.input(Tensor::scalar(gamma))).value();
}

Tensor compute_step(const Tensor& pre, const Tensor& delta_r, double delta_max) {
  ad::Graph g;
  return compute_step(g.input(pre), g.input(delta_r), delta_max).value();
}

Tensor temporal_gate(const Tensor& delta, const Tensor& kernel, double bias) {
  ad::Graph g;
  return temporal_gate(g.input(delta), g.input(kernel), g.input(Tensor::scalar(bias))).value();
}

Tensor modulate_input(const Tensor& x, const Tensor& gate, double alpha) {
  ad::Graph g;
  return modulate_input(g.input(x), g.input(gate), g.input(Tensor::scalar(alpha))).value();
}

// ---------------------------------------------------------------------------

ScanResult selective_scan(const Tensor& u, const Tensor& delta, const Tensor& Bm,
                          const Tensor& Cm, const Tensor& A, const Tensor& D, double a_scale) {
  const auto [B, L, C, N] = scan_extents(u, delta, Bm, Cm, A, D);
  ScanResult r{Tensor({B, L, C}, 0.0), Tensor({B, L + 1, C, N}, 0.0)};
  const auto sidx = [&](std::size_t b, std::size_t t, std::size_t c) {
    return ((b * (L + 1) + t) * C + c) * N;
  };
  std::size_t first_bad = L;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t i = (b * L + t) * C + c;
        const double d = delta[i];
        const double ue = u[i];
        const double* hp = &r.states[sidx(b, t, c)];
        double* hn = &r.states[sidx(b, t + 1, c)];
        const double* bt = Bm.data().data() + (b * L + t) * N;
        const double* ct = Cm.data().data() + (b * L + t) * N;
        double y = D[c] * ue;
        for (std::size_t n = 0; n < N; ++n) {
          const double a = std::exp(A[n] * d) * a_scale;
          hn[n] = a * hp[n] + zoh_gain(A[n], d) * bt[n] * ue;
          y += ct[n] * hn[n];
        }
        if (!std::isfinite(y) && t < first_bad) first_bad = t;
        r.y[i] = y;
      }
    }
  if (first_bad < L) {
    throw NumericError("selective_scan: state diverged at t=" + std::to_string(first_bad), first_bad);
  }
  return r;
}

ad::Var selective_scan(ad::Var u, ad::Var delta, ad::Var Bm, ad::Var Cm, ad::Var A, ad::Var D,
                       Tensor* states_out) {
  ScanResult fwd = selective_scan(u.value(), delta.value(), Bm.value(), Cm.value(), A.value(),
                                  D.value());
  if (states_out) *states_out = fwd.states;
  const Tensor* up = &u.value();
  const Tensor* dp = &delta.value();
  const Tensor* bp = &Bm.value();
  const Tensor* cp = &Cm.value();
  const Tensor* ap = &A.value();
  const Tensor* Dp = &D.value();
  return u.graph()->record(
      std::move(fwd.y), {u, delta, Bm, Cm, A, D},
      [up, dp, bp, cp, ap, Dp, states = std::move(fwd.states)](const Tensor& go,
                                                                 std::span<Tensor*> pg) {
        const Tensor& U = *up;
        const Tensor& Dl = *dp;
        const Tensor& Bt = *bp;
        const Tensor& Ct = *cp;
        const Tensor& Av = *ap;
        const Tensor& Dv = *Dp;
        const std::size_t B = U.dim(0), L = U.dim(1), C = U.dim(2), N = Av.size();
        std::vector<double> lam(N);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c) {
            std::fill(lam.begin(), lam.end(), 0.0);
            for (std::size_t t = L; t-- > 0;) {
              const std::size_t i = (b * L + t) * C + c;
              const double gy = go[i];
              const double ue = U[i];
              const double d = Dl[i];
              const double* hp = states.data().data() + ((b * (L + 1) + t) * C + c) * N;
              const double* hn = states.data().data() + ((b * (L + 1) + t + 1) * C + c) * N;
              const std::size_t bi = (b * L + t) * N;
              double gue = Dv[c] * gy;
              double gd = 0.0;
              if (pg[5]) (*pg[5])[c] += gy * ue;
              for (std::size_t n = 0; n < N; ++n) {
                // lam_n: total gradient reaching h_{t+1}.
                const double lam_n = lam[n] + Ct[bi + n] * gy;
                if (pg[3]) (*pg[3])[bi + n] += gy * hn[n];
                const double an = Av[n];
                const double ea = std::exp(an * d);
                const double phi = zoh_gain(an, d);
                const double bv = Bt[bi + n];
                const double g_a = lam_n * hp[n];
                const double g_phi = lam_n * bv * ue;
                gue += lam_n * phi * bv;
                if (pg[2]) (*pg[2])[bi + n] += lam_n * phi * ue;
                gd += g_a * an * ea + g_phi * ea;
                if (pg[4]) (*pg[4])[n] += g_a * d * ea + g_phi * zoh_gain_da(an, d, ea, phi);
                lam[n] = lam_n * ea;
              }
              if (pg[0]) (*pg[0])[i] += gue;
              if (pg[1]) (*pg[1])[i] += gd;
            }
          }
      });
}

// ---------------------------------------------------------------------------

Discrete discretize(const Tensor& A_c, const Tensor& B_c, double delta) {
  if (!(delta > 0.0)) throw ContractError("discretize: step must be > 0");
  const std::size_t N = A_c.size();
  Tensor Bm = as_matrix(B_c, N);
  if (Bm.dim(0) != N) throw ShapeError("discretize: B_c rows != state size");
  const std::size_t m = Bm.dim(1);
  Discrete out{Tensor({N}), Tensor({N, m})};
  for (std::size_t n = 0; n < N; ++n) {
    const double a = A_c[n];
    if (!(a < 0.0)) throw ContractError("discretize: A_c must be diagonal negative");
    const double e = std::exp(a * delta);
    out.A_d[n] = e;
    // A^{-1}(exp(A d) - I) for diagonal A.
    const double gain = (e - 1.0) / a;
    for (std::size_t j = 0; j < m; ++j) out.B_d.at(n, j) = gain * Bm.at(n, j);
  }
  return out;
}

Discrete taylor_discretize(const Tensor& A_c, const Tensor& B_c, double delta) {
  if (delta < 0.0) throw ContractError("taylor_discretize: step must be >= 0");
  const std::size_t N = A_c.size();
  Tensor Bm = as_matrix(B_c, N);
  const std::size_t m = Bm.dim(1);
  Discrete out{Tensor({N}), Tensor({N, m})};
  for (std::size_t n = 0; n < N; ++n) {
    const double a = A_c[n];
    out.A_d[n] = 1.0 + delta * a + 0.5 * delta * delta * a * a;
    for (std::size_t j = 0; j < m; ++j) {
      out.B_d.at(n, j) = delta * Bm.at(n, j) + 0.5 * delta * delta * a * Bm.at(n, j);
    }
  }
  return out;
}

double spectral_radius(const Tensor& A_c, double delta) {
  double r = 0.0;
  for (double a : A_c.data()) r = std::max(r, std::abs(std::exp(a * delta)));
  return r;
}

// ---------------------------------------------------------------------------

LtvKernels::LtvKernels(std::size_t batch, std::size_t length, std::size_t channels)
    : B_(batch), L_(length), C_(channels), data_(batch * length * length * channels, 0.0) {}

double& LtvKernels::at(std::size_t b, std::size_t t, std::size_t k, std::size_t c) {
  return data_[((b * L_ + t) * L_ + k) * C_ + c];
}

double LtvKernels::at(std::size_t b, std::size_t t, std::size_t k, std::size_t c) const {
  return data_[((b * L_ + t) * L_ + k) * C_ + c];
}

LtvKernels impulse_kernels(const Tensor& delta, const Tensor& Bm, const Tensor& Cm,
                           const Tensor& A_c, const Tensor& D_skip) {
  const auto [B, L, C, N] = scan_extents(delta, delta, Bm, Cm, A_c, D_skip);
  LtvKernels H(B, L, C);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      // Discretize each step once: A_d(delta_j) and Bbar_j = B_d(delta_j) applied to B_j.
      std::vector<Tensor> Ad(L), Bbar(L);
      for (std::size_t j = 0; j < L; ++j) {
        Tensor Bj({N, 1});
        for (std::size_t n = 0; n < N; ++n) Bj[n] = Bm[(b * L + j) * N + n];
        Discrete dj = discretize(A_c, Bj, delta[(b * L + j) * C + c]);
        Ad[j] = std::move(dj.A_d);
        Bbar[j] = std::move(dj.B_d);
      }
      for (std::size_t t = 0; t < L; ++t) {
        // prod runs over j = t-k+1..t, built as k grows.
        std::vector<double> prod(N, 1.0);
        for (std::size_t k = 0; k <= t; ++k) {
          if (k > 0)
            for (std::size_t n = 0; n < N; ++n) prod[n] *= Ad[t - k + 1][n];
          double h = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            h += Cm[(b * L + t) * N + n] * prod[n] * Bbar[t - k][n];
          }
          if (k == 0) h += D_skip[c];
          H.at(b, t, k, c) = h;
        }
      }
    }
  return H;
}

Tensor ltv_convolve(const Tensor& u, const LtvKernels& H) {
  const std::size_t B = H.batch(), L = H.length(), C = H.channels();
  if (u.shape() != Shape{B, L, C}) throw ShapeError("ltv_convolve: input does not match kernels");
  Tensor y({B, L, C}, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= t; ++k) acc += H.at(b, t, k, c) * u[(b * L + t - k) * C + c];
        y[(b * L + t) * C + c] = acc;
      }
  return y;
}

Tensor ltv_operator_matrix(const LtvKernels& H, std::size_t b) {
  const std::size_t L = H.length(), C = H.channels(), n = L * C;
  Tensor m({n, n}, 0.0);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t k = 0; k <= t; ++k)
      for (std::size_t c = 0; c < C; ++c) m.at(t * C + c, (t - k) * C + c) = H.at(b, t, k, c);
  return m;
}

double operator_norm(const Tensor& m, std::size_t iterations, std::uint64_t seed) {
  if (m.rank() != 2) throw ShapeError("operator_norm: expected a matrix");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Rng rng(seed);
  std::vector<double> v(cols), w(rows);
  for (double& x : v) x = rng.normal();
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    for (std::size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += m.at(i, j) * v[j];
      w[i] = acc;
    }
    double nw = 0.0;
    for (double x : w) nw += x * x;
    sigma = std::sqrt(nw);
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < rows; ++i) acc += m.at(i, j) * w[i];
      v[j] = acc;
    }
  }
  return sigma;
}

// ---------------------------------------------------------------------------

namespace {

// C diag(scale) B for C: [p, N], B: [N, m].
Tensor sandwich(const Tensor& C, const std::vector<double>& diag, const Tensor& B) {
  const std::size_t p = C.dim(0), N = C.dim(1), m = B.dim(1);
  Tensor out({p, m}, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t n = 0; n < N; ++n) {
      const double w = C.at(i, n) * diag[n];
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) += w * B.at(n, j);
    }
  return out;
}

Tensor as_row(const Tensor& C) { return C.rank() == 1 ? C.reshaped({1, C.size()}) : C; }

}  // namespace

std::vector<Tensor> lti_impulse_response(const Tensor& A_d, const Tensor& B_d, const Tensor& C,
                                         const Tensor& D, std::size_t K) {
  const std::size_t N = A_d.size();
  const Tensor Bm = as_matrix(B_d, N);
  const Tensor Cm = as_row(C);
  std::vector<Tensor> H;
  H.reserve(K + 1);
  H.push_back(D.rank() == 2 ? D : D.reshaped({Cm.dim(0), Bm.dim(1)}));
  std::vector<double> pw(N, 1.0);  // A_d^{k-1}
  for (std::size_t k = 1; k <= K; ++k) {
    H.push_back(sandwich(Cm, pw, Bm));
    for (std::size_t n = 0; n < N; ++n) pw[n] *= A_d[n];
  }
  return H;
}

Tensor lti_convolve(const Tensor& u, const std::vector<Tensor>& H) {
  if (u.rank() != 2 || H.empty()) throw ShapeError("lti_convolve: u must be [L, m]");
  const std::size_t L = u.dim(0), m = u.dim(1), p = H[0].dim(0);
  Tensor y({L, p}, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t i = 0; i < p; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += H[0].at(i, j) * u.at(t, j);
      // Post-update readout: H_k sees u_{t-k+1}.
      for (std::size_t k = 1; k < H.size() && k <= t + 1; ++k)
        for (std::size_t j = 0; j < m; ++j) acc += H[k].at(i, j) * u.at(t + 1 - k, j);
      y.at(t, i) = acc;
    }
  }
  return y;
}

Tensor impulse_kernel(const Tensor& A_c, const Tensor& B_c, const Tensor& C, double delta,
                      std::size_t k) {
  if (k == 0) throw ContractError("impulse_kernel: k must be >= 1");
  const Discrete d = discretize(A_c, B_c, delta);
  std::vector<double> pw(A_c.size());
  for (std::size_t n = 0; n < pw.size(); ++n) pw[n] = std::pow(d.A_d[n], static_cast<double>(k - 1));
  return sandwich(as_row(C), pw, d.B_d);
}

Tensor dHk_ddelta(const Tensor& A_c, const Tensor& B_c, const Tensor& C, double delta,
                  std::size_t k) {
  if (k == 0) throw ContractError("dHk_ddelta: k must be >= 1");
  const std::size_t N = A_c.size();
  const Discrete d = discretize(A_c, B_c, delta);
  const Tensor Bc = as_matrix(B_c, N);
  const Tensor Cm = as_row(C);
  std::vector<double> dA(N);
  for (std::size_t n = 0; n < N; ++n) dA[n] = A_c[n] * std::exp(A_c[n] * delta);
  Tensor dB({N, Bc.dim(1)});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t j = 0; j < Bc.dim(1); ++j) dB.at(n, j) = std::exp(A_c[n] * delta) * Bc.at(n, j);

  auto power = [&](std::size_t e) {
    std::vector<double> p(N);
    for (std::size_t n = 0; n < N; ++n) p[n] = std::pow(d.A_d[n], static_cast<double>(e));
    return p;
  };

  // Memory term: sum over the position of the differentiated factor.
  std::vector<double> mem(N, 0.0);
  for (std::size_t i = 0; i + 2 <= k; ++i) {
    const auto left = power(i);
    const auto right = power(k - 2 - i);
    for (std::size_t n = 0; n < N; ++n) mem[n] += left[n] * dA[n] * right[n];
  }
  Tensor out = sandwich(Cm, mem, d.B_d);
  const Tensor gain = sandwich(Cm, power(k - 1), dB);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gain[i];
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_frozen(const FrozenSystem& s, const Tensor& u) {
  const std::size_t N = s.A_c.size();
  if (s.B.size() != N || s.C.size() != N) throw ShapeError("frozen system: B, C must have N entries");
  if (u.rank() != 2 || u.dim(1) != s.delta.size() || s.D_skip.size() != s.delta.size()) {
    throw ShapeError("frozen system: u_eff must be [L, C] with C matching delta / D_skip");
  }
}

}  // namespace

Tensor frozen_periodic_response(const FrozenSystem& sys, const Tensor& u) {
  check_frozen(sys, u);
  const std::size_t L = u.dim(0), C = u.dim(1), N = sys.A_c.size();
  Tensor y({L, C}, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const Discrete d = discretize(sys.A_c, sys.B, sys.delta[c]);
    // One pass from rest gives h_L; the periodic fixed point is h_L / (1 - a^L).
    std::vector<double> h(N, 0.0);
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t n = 0; n < N; ++n) h[n] = d.A_d[n] * h[n] + d.B_d[n] * u.at(t, c);
    for (std::size_t n = 0; n < N; ++n) {
      h[n] /= 1.0 - std::pow(d.A_d[n], static_cast<double>(L));
    }
    for (std::size_t t = 0; t < L; ++t) {
      double acc = sys.D_skip[c] * u.at(t, c);
      for (std::size_t n = 0; n < N; ++n) {
        h[n] = d.A_d[n] * h[n] + d.B_d[n] * u.at(t, c);
        acc += sys.C[n] * h[n];
      }
      y.at(t, c) = acc;
    }
  }
  return y;
}

EnergyPair parseval_energy(const FrozenSystem& sys, const Tensor& u) {
  check_frozen(sys, u);
  const std::size_t L = u.dim(0), C = u.dim(1), N = sys.A_c.size();
  EnergyPair e;
  const Tensor y = frozen_periodic_response(sys, u);
  for (double v : y.data()) e.time_energy += v * v;

  std::vector<double> col(L);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < L; ++t) col[t] = u.at(t, c);
    const Spectrum U = dft(col);
    const Discrete d = discretize(sys.A_c, sys.B, sys.delta[c]);
    for (std::size_t f = 0; f < L; ++f) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(f) / static_cast<double>(L);
      const std::complex<double> z = std::polar(1.0, -w);
      std::complex<double> H = sys.D_skip[c];
      for (std::size_t n = 0; n < N; ++n) H += sys.C[n] * d.B_d[n] / (1.0 - d.A_d[n] * z);
      e.freq_energy += std::norm(H) * U.power(f);
    }
  }
  e.freq_energy /= static_cast<double>(L);
  return e;
}

}  // namespace fkmad::ssm
