#include "fkmad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fkmad/errors.hpp"
#include "fkmad/rng.hpp"

namespace fkmad {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

}  // namespace

LabeledSeries parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split_commas(line);
      break;
    }
  }
  if (header.empty()) throw DataError(source + ": empty file");

  std::ptrdiff_t label_col = -1;
  LabeledSeries s;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) {
      throw DataError(source + ": line " + std::to_string(lineno) + ": empty name for column " +
                      std::to_string(c + 1));
    }
    if (header[c] == "label") {
      if (label_col >= 0) throw DataError(source + ": duplicate 'label' column");
      label_col = static_cast<std::ptrdiff_t>(c);
    } else {
      s.names.push_back(header[c]);
    }
  }
  if (s.names.empty()) throw DataError(source + ": no feature columns");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == label_col) {
        if (cells[c] != "0" && cells[c] != "1") {
          throw DataError(source + ": line " + std::to_string(lineno) + ", column 'label': expected 0 or 1, got '" +
                          cells[c] + "'");
        }
        s.labels.push_back(cells[c] == "1" ? 1 : 0);
        continue;
      }
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw DataError(source + ": line " + std::to_string(lineno) + ", column '" + header[c] +
                        "': non-numeric cell '" + cells[c] + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(source + ": no data rows");
  s.values = Tensor({rows, s.names.size()}, std::move(values));
  return s;
}

LabeledSeries load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), path);
}

std::string format_csv(const LabeledSeries& s) {
  std::string out;
  for (std::size_t d = 0; d < s.names.size(); ++d) {
    if (d) out += ',';
    out += s.names[d];
  }
  if (s.has_labels()) out += ",label";
  out += '\n';
  char buf[32];
  const std::size_t T = s.length(), D = s.features();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < D; ++d) {
      if (d) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", s.values.at(t, d));
      out += buf;
    }
    if (s.has_labels()) {
      out += ',';
      out += s.labels[t] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const LabeledSeries& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << format_csv(s);
}

// ---- normalisation and windows --------------------------------------------------

Standardizer Standardizer::fit(const Tensor& v, std::size_t rows) {
  if (v.rank() != 2) throw ShapeError("Standardizer: expected [T, D]");
  const std::size_t n = rows ? std::min(rows, v.dim(0)) : v.dim(0), D = v.dim(1);
  if (n == 0) throw DataError("Standardizer: no rows to fit");
  Standardizer st;
  st.mean.assign(D, 0.0);
  st.stddev.assign(D, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < D; ++d) st.mean[d] += v.at(t, d);
  for (double& m : st.mean) m /= static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < D; ++d) st.stddev[d] += (v.at(t, d) - st.mean[d]) * (v.at(t, d) - st.mean[d]);
  for (double& s : st.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) s = 1.0;
  }
  return st;
}

Tensor Standardizer::apply(const Tensor& v) const {
  if (v.rank() != 2 || v.dim(1) != mean.size()) {
    throw DataError("Standardizer: series has " + std::to_string(v.rank() == 2 ? v.dim(1) : 0) +
                    " features, statistics have " + std::to_string(mean.size()));
  }
  Tensor out(v.shape());
  const std::size_t D = mean.size();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean[i % D]) / stddev[i % D];
  return out;
}

std::size_t split_rows(std::size_t T, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("data: split ratio must lie in (0, 1]");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(T))));
}

Tensor make_windows(const Tensor& v, std::size_t window, std::size_t stride) {
  if (v.rank() != 2) throw ShapeError("make_windows: expected [T, D]");
  const std::size_t T = v.dim(0), D = v.dim(1);
  if (window == 0 || window > T) {
    throw ContractError("make_windows: window " + std::to_string(window) + " does not fit T = " +
                        std::to_string(T));
  }
  if (stride == 0) throw ContractError("make_windows: stride must be >= 1");
  const std::size_t W = (T - window) / stride + 1;
  Tensor out({W, window, D});
  for (std::size_t k = 0; k < W; ++k) {
    std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(k * stride * D), window * D,
                out.data().begin() + static_cast<std::ptrdiff_t>(k * window * D));
  }
  return out;
}

Tensor concat_windows(const Tensor& w) {
  if (w.rank() != 3) throw ShapeError("concat_windows: expected [W, L, D]");
  return w.reshaped({w.dim(0) * w.dim(1), w.dim(2)});
}

// ---- synthetic benchmark ------------------------------------------------------

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "ar1") return SynthKind::Ar1;
  if (s == "multisine") return SynthKind::Multisine;
  if (s == "mixed") return SynthKind::Mixed;
  throw ConfigError("synth: unknown kind '" + s + "'");
}

AnomalyType parse_anomaly_type(const std::string& s) {
  if (s == "spike") return AnomalyType::Spike;
  if (s == "level-shift") return AnomalyType::LevelShift;
  if (s == "frequency-shift") return AnomalyType::FrequencyShift;
  if (s == "variance-burst") return AnomalyType::VarianceBurst;
  throw ConfigError("synth: unknown anomaly type '" + s + "'");
}

std::string to_string(SynthKind k) {
  switch (k) {
    case SynthKind::Ar1: return "ar1";
    case SynthKind::Multisine: return "multisine";
    case SynthKind::Mixed: return "mixed";
  }
  return "?";
}

std::string to_string(AnomalyType a) {
  switch (a) {
    case AnomalyType::Spike: return "spike";
    case AnomalyType::LevelShift: return "level-shift";
    case AnomalyType::FrequencyShift: return "frequency-shift";
    case AnomalyType::VarianceBurst: return "variance-burst";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (T < 2 || D < 1) throw ConfigError("synth: need T >= 2 and D >= 1");
  if (!(density >= 0.0) || density >= 0.5) {
    throw ConfigError("synth: anomaly density must lie in [0, 0.5)");
  }
  if (density > 0.0 && anomalies.empty()) throw ConfigError("synth: no anomaly types given");
  if (!(noise > 0.0)) throw ConfigError("synth: noise must be > 0");
  if (!(std::abs(rho) < 1.0)) throw ConfigError("synth: need |rho| < 1");
  if (tones == 0) throw ConfigError("synth: tones must be >= 1");
  if (!(clean_fraction >= 0.0 && clean_fraction < 1.0)) {
    throw ConfigError("synth: clean_fraction must lie in [0, 1)");
  }
  if (event_min == 0 || event_min > event_max) throw ConfigError("synth: bad event length range");
}

namespace {

struct Event {
  std::size_t start = 0, length = 1;
  AnomalyType type = AnomalyType::Spike;
  std::vector<std::size_t> features;
  double sign = 1.0;
};

std::vector<Event> place_events(const SynthSpec& spec, Rng& rng) {
  std::vector<Event> events;
  const auto target = static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(spec.T)));
  std::size_t labelled = 0, attempts = 0;
  while (labelled < target) {
    Event e;
    e.type = spec.anomalies[events.size() % spec.anomalies.size()];
    e.length = e.type == AnomalyType::Spike
                   ? 1
                   : spec.event_min + rng.index(spec.event_max - spec.event_min + 1);
    e.length = std::min(e.length, target - labelled);
    if (e.length == 0 || e.length >= spec.T) break;
    const std::size_t gap = spec.event_max;
    const auto lo = static_cast<std::size_t>(std::floor(spec.clean_fraction * static_cast<double>(spec.T)));
    if (lo + e.length > spec.T) throw ConfigError("synth: no room for anomalies after the clean prefix");
    bool placed = false;
    for (; attempts < 100000 && !placed; ++attempts) {
      const std::size_t start = lo + rng.index(spec.T - lo - e.length + 1);
      placed = std::all_of(events.begin(), events.end(), [&](const Event& o) {
        return start + e.length + gap <= o.start || o.start + o.length + gap <= start;
      });
      if (placed) e.start = start;
    }
    if (!placed) throw ConfigError("synth: cannot place non-overlapping events at this density");
    {
      std::vector<std::size_t> all(spec.D);
      std::iota(all.begin(), all.end(), std::size_t{0});
      rng.shuffle(all);
      std::size_t k = std::max<std::size_t>(1, spec.D / 2);
      if (e.type == AnomalyType::Spike) k = spec.spike_features ? std::min(spec.spike_features, spec.D) : spec.D;
      all.resize(k);
      std::sort(all.begin(), all.end());
      e.features = all;
    }
    e.sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    labelled += e.length;
    events.push_back(std::move(e));
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.start < b.start; });
  return events;
}

}  // namespace

LabeledSeries synth_benchmark(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t T = spec.T, D = spec.D, K = spec.tones;
  const bool sines = spec.kind != SynthKind::Ar1;
  const bool ar = spec.kind != SynthKind::Multisine;

  // Tone periods log-uniform on [16, 128]; channels are unit-norm random mixes.
  std::vector<double> period(K), phase(K), weight(D * K);
  for (std::size_t k = 0; k < K; ++k) {
    period[k] = 16.0 * std::pow(8.0, rng.uniform());
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  for (std::size_t d = 0; d < D; ++d) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      weight[d * K + k] = rng.normal();
      n2 += weight[d * K + k] * weight[d * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) weight[d * K + k] /= std::sqrt(n2);
  }

  const std::vector<Event> events = place_events(spec, rng);

  LabeledSeries s;
  s.values = Tensor({T, D}, 0.0);
  s.labels.assign(T, 0);
  for (std::size_t d = 0; d < D; ++d) s.names.push_back("x" + std::to_string(d));

  std::vector<const Event*> active(T, nullptr);
  for (const Event& e : events)
    for (std::size_t t = e.start; t < e.start + e.length; ++t) {
      active[t] = &e;
      s.labels[t] = 1;
    }

  const double amp = spec.amplitude * spec.noise;
  std::vector<double> ar_state(D, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const Event* e = active[t];
    const bool freq_shift = e && e->type == AnomalyType::FrequencyShift;
    const double noise_sd = e && e->type == AnomalyType::VarianceBurst ? amp : spec.noise;
    for (std::size_t d = 0; d < D; ++d) {
      double v = 0.0;
      if (sines) {
        const double mult = freq_shift ? 2.0 : 1.0;
        for (std::size_t k = 0; k < K; ++k) {
          v += weight[d * K + k] *
               std::sin(2.0 * std::numbers::pi * mult * static_cast<double>(t) / period[k] + phase[k]);
        }
      }
      if (ar) {
        const double rho = freq_shift ? -spec.rho : spec.rho;
        ar_state[d] = rho * ar_state[d] + noise_sd * rng.normal();
        v += ar_state[d];
      } else {
        v += noise_sd * rng.normal();
      }
      s.values.at(t, d) = v;
    }
    if (e && (e->type == AnomalyType::Spike || e->type == AnomalyType::LevelShift)) {
      for (std::size_t d : e->features) s.values.at(t, d) += e->sign * amp;
    }
  }
  return s;
}

// ---- evaluation ----------------------------------------------------------------

double label_ratio(std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::size_t n = 0;
  for (int l : labels) n += l != 0;
  return static_cast<double>(n) / static_cast<double>(labels.size());
}

namespace {

void prf(std::size_t tp, std::size_t fp, std::size_t fn, double& p, double& r, double& f) {
  p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

EvalReport evaluate_predictions(std::span<const int> pred, std::span<const int> labels) {
  if (pred.size() != labels.size()) {
    throw DataError("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                    std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = labels.size();
  EvalReport r;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = labels[i] != 0, p = pred[i] != 0;
    r.positives += y;
    r.predicted += p;
    tp += y && p;
    fp += !y && p;
    fn += y && !p;
  }
  r.degenerate_labels = r.positives == 0 || r.positives == n;
  prf(tp, fp, fn, r.precision, r.recall, r.f1);

  std::vector<int> adj(pred.begin(), pred.end());
  for (std::size_t i = 0; i < n;) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool hit = false;
    for (; j < n && labels[j]; ++j) hit = hit || pred[j] != 0;
    if (hit) std::fill(adj.begin() + static_cast<std::ptrdiff_t>(i), adj.begin() + static_cast<std::ptrdiff_t>(j), 1);
    i = j;
  }
  tp = fp = fn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = labels[i] != 0, p = adj[i] != 0;
    tp += y && p;
    fp += !y && p;
    fn += y && !p;
  }
  prf(tp, fp, fn, r.pa_precision, r.pa_recall, r.pa_f1);
  return r;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    const ThresholdPolicy& policy) {
  if (scores.size() != labels.size()) {
    throw DataError("evaluate: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::vector<int> pred(n, 0);
  double thr = policy.value;
  if (policy.kind == ThresholdPolicy::Kind::Fixed) {
    for (std::size_t i = 0; i < n; ++i) pred[i] = scores[i] > thr;
  } else {
    if (!(policy.value >= 0.0 && policy.value <= 1.0)) {
      throw ContractError("evaluate: top-k ratio must lie in [0, 1]");
    }
    const auto k = static_cast<std::size_t>(std::llround(policy.value * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t i = 0; i < k; ++i) pred[order[i]] = 1;
    thr = k ? scores[order[k - 1]] : std::numeric_limits<double>::infinity();
  }
  EvalReport r = evaluate_predictions(pred, labels);
  r.threshold = thr;
  return r;
}

std::vector<double> zscore_scores(const Tensor& v) {
  const Standardizer st = Standardizer::fit(v);
  const Tensor z = st.apply(v);
  const std::size_t T = v.dim(0), D = v.dim(1);
  std::vector<double> out(T, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) out[t] = std::max(out[t], std::abs(z.at(t, d)));
  return out;
}

}  // namespace fkmad
