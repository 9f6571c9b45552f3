#pragma once

// Run configuration as a flat, sectioned key = value text file:
//
//   [model]
//   d_inner = 16
//   # comment
//
// Every key has a default. Values may be overridden from the environment as
// FKMAD_<SECTION>_<KEY> (upper case), applied after the file.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "fkmad/data.hpp"
#include "fkmad/losses.hpp"
#include "fkmad/model.hpp"
#include "fkmad/scoring.hpp"

namespace fkmad {

struct DataConfig {
  std::string path;          // CSV read by train and score
  std::size_t stride = 16;   // training window stride
  double split = 0.5;        // leading fraction used for training and standardisation
};

enum class ThresholdMode { Oracle, TopK, Fixed };
enum class EvalRows { All, Test };
enum class NormSource { Series, Train };

struct EvalConfig {
  ThresholdMode threshold = ThresholdMode::Oracle;  // oracle = top-k at the true label ratio
  double value = 0.01;                              // ratio for topk, score for fixed
  EvalRows rows = EvalRows::All;                    // test = rows after the training split
};

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;         // model.D == 0 means "take it from the data"
  LossConfig loss;
  ScoreFusionConfig score;
  NormSource norm_stats = NormSource::Series;  // rows the fusion statistics are fitted on
  DataConfig data;
  EvalConfig eval;
  SynthSpec synth;
  std::size_t requested_H = 0;  // model.H as written; must match 2 * d_inner

  RunConfig();
  void validate() const;
};

struct ParsedConfig {
  RunConfig config;
  std::set<std::string> explicit_keys;  // "section.key" set by the file or environment
};

/// ConfigError naming the line and key for unknown sections or keys,
/// malformed lines, duplicates, and unparsable values.
ParsedConfig parse_config(const std::string& text, const std::string& source = "<memory>");
ParsedConfig load_config(const std::string& path);

/// Applies FKMAD_<SECTION>_<KEY> variables found through `getenv`.
void apply_env_overrides(ParsedConfig& parsed, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> environment_overrides();

/// Sets one key from its text form ("loss.lr", "0.001").
void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

/// Text form of one key; ConfigError for an unknown key.
std::string get_config_value(const RunConfig& cfg, const std::string& dotted_key);

/// Canonical text of every key, in a fixed order; parse_config of the result
/// reproduces the same configuration.
std::string format_config(const RunConfig& cfg);

/// Keys of one section, in output order.
std::vector<std::string> config_keys(const std::string& section);

}  // namespace fkmad
