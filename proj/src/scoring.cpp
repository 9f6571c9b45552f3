#include "fkmad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "fkmad/dft.hpp"
#include "fkmad/errors.hpp"

namespace fkmad {

void ScoreFusionConfig::validate() const {
  if (w_locality < 0 || w_energy < 0 || w_hfr < 0) throw ConfigError("score: weights must be >= 0");
  if (band == 0) throw ConfigError("score: band must be >= 1");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw ConfigError("score: cutoff must lie in (0, 1)");
  if (hfr_window < 2) throw ConfigError("score: hfr_window must be >= 2");
  if (!(flag_percentile >= 0.0 && flag_percentile <= 100.0)) {
    throw ConfigError("score: flag_percentile must lie in [0, 100]");
  }
}

Tensor similarity_matrix(const Tensor& X) {
  if (X.rank() != 2) throw ShapeError("similarity_matrix: expected [L, D]");
  const std::size_t L = X.dim(0), D = X.dim(1);
  if (L < 2) throw ContractError("similarity_matrix: need L >= 2");
  std::vector<double> norm(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < D; ++d) s += X.at(i, d) * X.at(i, d);
    norm[i] = std::sqrt(s);
  }
  Tensor S({L, L}, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    S.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < L; ++j) {
      double v = 0.0;
      if (norm[i] > 0.0 && norm[j] > 0.0) {
        double dot = 0.0;
        for (std::size_t d = 0; d < D; ++d) dot += X.at(i, d) * X.at(j, d);
        v = dot / (norm[i] * norm[j]);
      }
      S.at(i, j) = v;
      S.at(j, i) = v;
    }
  }
  return S;
}

std::vector<double> locality(const Tensor& S, std::size_t b) {
  if (S.rank() != 2 || S.dim(0) != S.dim(1)) throw ShapeError("locality: S must be square");
  const std::size_t L = S.dim(0);
  if (b < 1 || b >= L) throw ContractError("locality: need 1 <= b < L");
  std::vector<double> out(L, 0.0);
  for (std::size_t j = 0; j < L; ++j) {
    // Sums are taken relative to a neighbour entry, so a constant column gives exactly 0.
    const double pivot = S.at(j == 0 ? 1 : j - 1, j);
    double band = 0.0, off = 0.0;
    std::size_t nb = 0, no = 0;
    for (std::size_t i = 0; i < L; ++i) {
      if (i == j) continue;
      const std::size_t dist = i > j ? i - j : j - i;
      if (dist <= b) {
        band += S.at(i, j) - pivot;
        ++nb;
      } else {
        off += S.at(i, j) - pivot;
        ++no;
      }
    }
    const double band_mean = band / static_cast<double>(nb);
    out[j] = no ? band_mean - off / static_cast<double>(no) : band_mean + pivot;
  }
  return out;
}

double energy(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::log1p(s / static_cast<double>(x.size()));
}

namespace {

std::size_t cutoff_bin(std::size_t n, double cutoff) {
  return static_cast<std::size_t>(std::ceil(cutoff * static_cast<double>(n) / 2.0 - 1e-12));
}

double hfr_from_power(const std::vector<double>& power, std::size_t n, double cutoff) {
  const std::size_t half = n / 2, c0 = cutoff_bin(n, cutoff);
  double total = 0.0, high = 0.0;
  for (std::size_t f = 1; f <= half; ++f) {
    total += power[f];
    if (f >= c0) high += power[f];
  }
  return total > 0.0 ? high / total : 0.0;
}

}  // namespace

double hfr(std::span<const double> w, double cutoff) {
  if (w.size() < 2) throw ContractError("hfr: need n >= 2");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw ContractError("hfr: cutoff must lie in (0, 1)");
  const Spectrum sp = dft(w);
  std::vector<double> power(w.size() / 2 + 1);
  for (std::size_t f = 0; f < power.size(); ++f) power[f] = sp.power(f);
  return hfr_from_power(power, w.size(), cutoff);
}

double hfr(const Tensor& x, double cutoff) {
  if (x.rank() != 2) throw ShapeError("hfr: expected [n, channels]");
  const std::size_t n = x.dim(0), C = x.dim(1);
  if (n < 2) throw ContractError("hfr: need n >= 2");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw ContractError("hfr: cutoff must lie in (0, 1)");
  std::vector<double> power(n / 2 + 1, 0.0), col(n);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < n; ++t) col[t] = x.at(t, c);
    const Spectrum sp = dft(col);
    for (std::size_t f = 0; f < power.size(); ++f) power[f] += sp.power(f);
  }
  return hfr_from_power(power, n, cutoff);
}

// ---- fusion ----------------------------------------------------------------

void RunningStats::push(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double RunningStats::stddev() const { return std::sqrt(variance()); }

namespace {

std::array<double, 3> signed_metrics(const ScoreTriple& s) { return {-s.locality, s.energy, s.hfr}; }

}  // namespace

NormStats fit_stats(std::span<const ScoreTriple> scores) {
  NormStats st;
  if (scores.empty()) return st;
  const double n = static_cast<double>(scores.size());
  for (const ScoreTriple& s : scores) {
    const auto m = signed_metrics(s);
    for (int k = 0; k < 3; ++k) st.mean[k] += m[k];
  }
  for (int k = 0; k < 3; ++k) st.mean[k] /= n;
  for (const ScoreTriple& s : scores) {
    const auto m = signed_metrics(s);
    for (int k = 0; k < 3; ++k) st.stddev[k] += (m[k] - st.mean[k]) * (m[k] - st.mean[k]);
  }
  for (int k = 0; k < 3; ++k) st.stddev[k] = std::sqrt(st.stddev[k] / n);
  return st;
}

double fuse_one(const ScoreTriple& s, const NormStats& st, const ScoreFusionConfig& cfg) {
  static constexpr const char* kNames[3] = {"locality", "energy", "hfr"};
  for (int k = 0; k < 3; ++k) {
    if (!(st.stddev[k] > 0.0)) {
      throw DataError(std::string("fuse: degenerate statistics, ") + kNames[k] + " has zero spread");
    }
  }
  const auto m = signed_metrics(s);
  const double w[3] = {cfg.w_locality, cfg.w_energy, cfg.w_hfr};
  double f = 0.0;
  for (int k = 0; k < 3; ++k) f += w[k] * ((m[k] - st.mean[k]) / st.stddev[k]);
  return f;
}

void fuse(std::span<ScoreTriple> scores, const NormStats& st, const ScoreFusionConfig& cfg) {
  for (ScoreTriple& s : scores) s.fused = fuse_one(s, st, cfg);
}

double StreamingFuser::push(ScoreTriple& s) {
  const auto m = signed_metrics(s);
  for (int k = 0; k < 3; ++k) stats_[k].push(m[k]);
  NormStats st;
  for (int k = 0; k < 3; ++k) {
    st.mean[k] = stats_[k].mean();
    st.stddev[k] = stats_[k].stddev();
    if (!(st.stddev[k] > 0.0)) return s.fused = 0.0;
  }
  return s.fused = fuse_one(s, st, cfg_);
}

// ---- model-driven ----------------------------------------------------------

std::vector<ScoreTriple> window_scores(const Tensor& features, const Tensor& energy_rows,
                                       const ScoreFusionConfig& cfg) {
  if (features.rank() != 2 || energy_rows.rank() != 2 || features.dim(0) != energy_rows.dim(0)) {
    throw ShapeError("window_scores: feature and energy rows must be [L, *] with equal L");
  }
  const std::size_t L = features.dim(0), H = features.dim(1), M = energy_rows.dim(1);
  std::vector<ScoreTriple> out(L);
  Tensor sim_rows = features;
  if (cfg.center_features) {
    for (std::size_t h = 0; h < H; ++h) {
      double m = 0.0;
      for (std::size_t t = 0; t < L; ++t) m += features.at(t, h);
      m /= static_cast<double>(L);
      for (std::size_t t = 0; t < L; ++t) sim_rows.at(t, h) -= m;
    }
  }
  const std::vector<double> loc = locality(similarity_matrix(sim_rows), std::min(cfg.band, L - 1));
  const std::size_t n = std::min(cfg.hfr_window, L);
  std::map<std::size_t, double> hfr_by_start;
  for (std::size_t t = 0; t < L; ++t) {
    ScoreTriple& s = out[t];
    s.locality = loc[t];
    s.energy = energy(energy_rows.data().subspan(t * M, M));
    const std::size_t start = std::min(t >= n / 2 ? t - n / 2 : 0, L - n);
    auto it = hfr_by_start.find(start);
    if (it == hfr_by_start.end()) {
      Tensor sub({n, H});
      std::copy_n(features.data().begin() + static_cast<std::ptrdiff_t>(start * H), n * H,
                  sub.data().begin());
      it = hfr_by_start.emplace(start, hfr(sub, cfg.cutoff)).first;
    }
    s.hfr = it->second;
  }
  return out;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractError("percentile: empty input");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ScoreOutput score_series(const ModelConfig& mcfg, const ModelParams& params, const Tensor& series,
                         const ScoreFusionConfig& cfg) {
  cfg.validate();
  if (series.rank() != 2 || series.dim(1) != mcfg.D) {
    throw DataError("score: series has " + std::to_string(series.rank() == 2 ? series.dim(1) : 0) +
                    " features, model expects " + std::to_string(mcfg.D));
  }
  const std::size_t T = series.dim(0), D = mcfg.D, w = mcfg.window_size;
  const std::size_t stride = cfg.stride ? cfg.stride : std::max<std::size_t>(1, w / 2);
  if (T < w) throw DataError("score: series shorter than one window");
  const std::size_t nwin = (T - w) / stride + 1;
  const std::size_t covered = (nwin - 1) * stride + w;

  // Each timestep is taken from the covering window in which it sits most centrally.
  std::vector<std::size_t> owner(covered, 0);
  for (std::size_t t = 0; t < covered; ++t) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t first = t >= w ? (t - w) / stride + 1 : 0;
    for (std::size_t k = first; k < nwin && k * stride <= t; ++k) {
      const double off = std::abs(static_cast<double>(t - k * stride) - 0.5 * static_cast<double>(w - 1));
      if (off < best) {
        best = off;
        owner[t] = k;
      }
    }
  }

  std::vector<ScoreTriple> triples(covered);
  constexpr std::size_t kBatch = 32;
  for (std::size_t k0 = 0; k0 < nwin; k0 += kBatch) {
    const std::size_t nb = std::min(kBatch, nwin - k0);
    Tensor x({nb, w, D});
    for (std::size_t b = 0; b < nb; ++b) {
      std::copy_n(series.data().begin() + static_cast<std::ptrdiff_t>((k0 + b) * stride * D), w * D,
                  x.data().begin() + static_cast<std::ptrdiff_t>(b * w * D));
    }
    ad::Graph g;
    ForwardOptions fo;
    fo.track_params = false;
    const ForwardPass fp = forward(g, mcfg, params, x, fo);
    const Tensor& hid = fp.hidden.value();
    const Tensor& rec = fp.recon.value();
    const std::size_t H = mcfg.H();
    for (std::size_t b = 0; b < nb; ++b) {
      Tensor feat = cfg.feature_source == FeatureSource::Hidden ? Tensor({w, H}) : Tensor({w, D});
      Tensor erow({w, D});
      for (std::size_t t = 0; t < w; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
          const double xi = x.at(b, t, d);
          const double ri = rec.at(b, t, d);
          erow.at(t, d) = cfg.energy_source == EnergySource::Residual ? xi - ri
                          : cfg.energy_source == EnergySource::Output ? ri
                                                                      : xi;
          if (cfg.feature_source == FeatureSource::Input) feat.at(t, d) = xi;
        }
        if (cfg.feature_source == FeatureSource::Hidden) {
          for (std::size_t h = 0; h < H; ++h) feat.at(t, h) = hid.at(b, t, h);
        }
      }
      const std::vector<ScoreTriple> ws = window_scores(feat, erow, cfg);
      const std::size_t start = (k0 + b) * stride;
      for (std::size_t t = 0; t < w; ++t) {
        if (owner[start + t] == k0 + b) triples[start + t] = ws[t];
      }
    }
  }

  ScoreOutput out;
  const std::size_t ref = cfg.reference_rows ? std::min(cfg.reference_rows, covered) : covered;
  out.stats = fit_stats(std::span<const ScoreTriple>(triples.data(), ref));
  fuse(triples, out.stats, cfg);
  std::vector<double> fused(covered);
  for (std::size_t t = 0; t < covered; ++t) fused[t] = triples[t].fused;
  out.threshold = percentile(fused, cfg.flag_percentile);
  out.records.resize(covered);
  for (std::size_t t = 0; t < covered; ++t) {
    out.records[t] = ScoreRecord{t, triples[t], triples[t].fused > out.threshold};
  }
  return out;
}

}  // namespace fkmad
