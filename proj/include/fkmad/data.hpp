#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fkmad/tensor.hpp"

namespace fkmad {

struct LabeledSeries {
  Tensor values;                  // [T, D]
  std::vector<int> labels;        // empty, or T entries in {0, 1}
  std::vector<std::string> names; // D feature names
  double interval = 1.0;          // sampling interval in abstract ticks

  std::size_t length() const { return values.rank() ? values.dim(0) : 0; }
  std::size_t features() const { return values.rank() == 2 ? values.dim(1) : 0; }
  bool has_labels() const { return !labels.empty(); }
};

/// Header row of feature names plus an optional integer "label" column.
/// DataError naming the line and column for malformed content.
LabeledSeries load_csv(const std::string& path);
LabeledSeries parse_csv(const std::string& text, const std::string& source = "<memory>");
void write_csv(const std::string& path, const LabeledSeries& series);
std::string format_csv(const LabeledSeries& series);

/// Per-feature standardisation. Features with zero spread keep unit scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Statistics from the first `rows` rows (all rows when 0).
  static Standardizer fit(const Tensor& values, std::size_t rows = 0);
  Tensor apply(const Tensor& values) const;
};

/// First floor(ratio * T) rows; at least one row.
std::size_t split_rows(std::size_t T, double train_ratio);

/// Overlapping windows [W, window, D], W = floor((T - window) / stride) + 1.
/// ContractError when window > T or stride == 0.
Tensor make_windows(const Tensor& values, std::size_t window, std::size_t stride);

/// Inverse of make_windows for stride == window.
Tensor concat_windows(const Tensor& windows);

// ---- synthetic benchmark ------------------------------------------------------

enum class SynthKind { Ar1, Multisine, Mixed };
enum class AnomalyType { Spike, LevelShift, FrequencyShift, VarianceBurst };

SynthKind parse_synth_kind(const std::string& s);
AnomalyType parse_anomaly_type(const std::string& s);
std::string to_string(SynthKind k);
std::string to_string(AnomalyType a);

struct SynthSpec {
  SynthKind kind = SynthKind::Multisine;
  std::size_t T = 4000;
  std::size_t D = 4;
  std::vector<AnomalyType> anomalies{AnomalyType::Spike};
  double density = 0.01;   // fraction of labelled timesteps, < 0.5
  double amplitude = 10.0; // in units of the base noise level
  double noise = 0.1;      // base noise standard deviation
  double rho = 0.9;        // AR(1) coefficient
  std::size_t tones = 3;   // shared tones for multisine
  std::size_t event_min = 8;
  std::size_t event_max = 24; // event length range; spikes are one step
  std::size_t spike_features = 1; // features hit by a spike; 0 means all
  double clean_fraction = 0.0;     // leading share of the series kept anomaly-free
  std::uint64_t seed = 0;

  void validate() const;
};

LabeledSeries synth_benchmark(const SynthSpec& spec);

// ---- evaluation ----------------------------------------------------------------

struct ThresholdPolicy {
  enum class Kind { Fixed, TopK } kind = Kind::TopK;
  double value = 0.01;  // threshold for Fixed, positive fraction for TopK

  static ThresholdPolicy fixed(double t) { return {Kind::Fixed, t}; }
  static ThresholdPolicy top_k(double ratio) { return {Kind::TopK, ratio}; }
};

struct EvalReport {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double pa_precision = 0.0, pa_recall = 0.0, pa_f1 = 0.0;
  double threshold = 0.0;
  std::size_t predicted = 0;
  std::size_t positives = 0;
  bool degenerate_labels = false;
};

/// Binary predictions from `policy`, then raw and point-adjusted metrics.
/// Top-k flags the round(ratio * n) highest scores, ties to the lower index.
EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    const ThresholdPolicy& policy);

/// Metrics for given predictions.
EvalReport evaluate_predictions(std::span<const int> predicted, std::span<const int> labels);

/// Fraction of positive labels.
double label_ratio(std::span<const int> labels);

/// Per-timestep max_d |x - mean_d| / std_d, stats over the whole series.
std::vector<double> zscore_scores(const Tensor& values);

}  // namespace fkmad
