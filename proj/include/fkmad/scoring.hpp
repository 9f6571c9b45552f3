#pragma once

// Per-timestep anomaly indicators and their fused score.
//
//   locality: band mean minus off-band mean of cosine similarity (low = odd)
//   energy:   log(1 + mean square) of the chosen feature vector
//   hfr:      share of non-DC spectral power at or above the cutoff bin
//   fused:    weighted sum of z-normalised metrics, locality negated

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fkmad/model.hpp"
#include "fkmad/tensor.hpp"

namespace fkmad {

struct ScoreTriple {
  double locality = 0.0;
  double energy = 0.0;
  double hfr = 0.0;
  double fused = 0.0;
};

enum class EnergySource { Residual, Output, Input };
enum class FeatureSource { Hidden, Input };

struct ScoreFusionConfig {
  double w_locality = 0.45;
  double w_energy = 0.20;
  double w_hfr = 0.05;
  std::size_t band = 5;
  double cutoff = 0.5;
  std::size_t hfr_window = 32;
  EnergySource energy_source = EnergySource::Residual;
  FeatureSource feature_source = FeatureSource::Hidden;
  bool center_features = false;    // subtract the window mean before similarity
  std::size_t stride = 0;          // 0 selects half the window
  std::size_t reference_rows = 0;  // fit fusion stats on rows [0, n) only; 0 = all rows
  double flag_percentile = 99.0;   // threshold flag in score records

  void validate() const;
};

// ---- raw indicators ---------------------------------------------------------

/// Cosine similarity of the rows of X: [L, D]. Zero-norm rows give 0 off the
/// diagonal and 1 on it. ContractError for L < 2.
Tensor similarity_matrix(const Tensor& X);

/// Per column j: mean S_ij over 0 < |i-j| <= b minus mean over |i-j| > b. An
/// empty region contributes 0. ContractError unless 1 <= b < L.
std::vector<double> locality(const Tensor& S, std::size_t band);

double energy(std::span<const double> x);

/// One-sided spectrum over bins 1..floor(n/2); cutoff bin ceil(c n / 2).
/// Returns 0 when there is no non-DC power.
double hfr(std::span<const double> window, double cutoff);

/// Multichannel HFR: powers summed across channels before the ratio.
/// x: [n, channels].
double hfr(const Tensor& x, double cutoff);

// ---- fusion ----------------------------------------------------------------

/// Welford accumulator (population variance).
class RunningStats {
 public:
  void push(double x);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ ? m2_ / static_cast<double>(n_) : 0.0; }
  double stddev() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Means and standard deviations of (-locality, energy, hfr).
struct NormStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

NormStats fit_stats(std::span<const ScoreTriple> scores);

/// Writes `fused` into every triple. DataError when any stddev is 0.
void fuse(std::span<ScoreTriple> scores, const NormStats& stats, const ScoreFusionConfig& cfg);
double fuse_one(const ScoreTriple& s, const NormStats& stats, const ScoreFusionConfig& cfg);

/// Online fusion with running estimates; emits 0 until every metric has
/// nonzero spread.
class StreamingFuser {
 public:
  explicit StreamingFuser(ScoreFusionConfig cfg) : cfg_(cfg) {}
  double push(ScoreTriple& s);

 private:
  ScoreFusionConfig cfg_;
  std::array<RunningStats, 3> stats_;
};

// ---- model-driven scoring ----------------------------------------------------

struct ScoreRecord {
  std::size_t t = 0;
  ScoreTriple s;
  bool flag = false;
};

struct ScoreOutput {
  std::vector<ScoreRecord> records;
  NormStats stats;
  double threshold = 0.0;
};

/// Raw triples for one window given its feature rows [L, H] and energy rows [L, m].
std::vector<ScoreTriple> window_scores(const Tensor& features, const Tensor& energy_rows,
                                       const ScoreFusionConfig& cfg);

/// Scores every timestep covered by windows of `series` ([T, D], already
/// standardised), fuses with statistics over the reference rows, and flags
/// the top tail.
ScoreOutput score_series(const ModelConfig& mcfg, const ModelParams& params, const Tensor& series,
                         const ScoreFusionConfig& cfg);

/// q-th percentile (0..100) with linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

}  // namespace fkmad
