#include "fkmad/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "fkmad/errors.hpp"

extern char** environ;

namespace fkmad {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const char* what) {
  throw ConfigError("config: key '" + key + "': cannot parse '" + v + "' as " + what);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) bad_value(key, v, "a number");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::string fmt(double x) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}
std::string fmt(std::size_t x) { return std::to_string(x); }
std::string fmt(std::uint64_t x, int) { return std::to_string(x); }
std::string fmt(bool b) { return b ? "true" : "false"; }

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> names;

  E parse(const std::string& key, const std::string& v) const {
    for (const auto& [e, n] : names)
      if (v == n) return e;
    std::string opts;
    for (const auto& [e, n] : names) opts += std::string(opts.empty() ? "" : "|") + n;
    bad_value(key, v, opts.c_str());
  }
  std::string name(E e) const {
    for (const auto& [x, n] : names)
      if (x == e) return n;
    return "?";
  }
};

const EnumNames<ReconNorm> kRecon{{{ReconNorm::L2, "l2"}, {ReconNorm::L1, "l1"}}};
const EnumNames<GateReg> kGate{{{GateReg::Sparsity, "sparsity"}, {GateReg::Entropy, "entropy"}}};
const EnumNames<EnergySource> kEnergy{
    {{EnergySource::Residual, "residual"}, {EnergySource::Output, "output"}, {EnergySource::Input, "input"}}};
const EnumNames<FeatureSource> kFeature{{{FeatureSource::Hidden, "hidden"}, {FeatureSource::Input, "input"}}};
const EnumNames<NormSource> kNorm{{{NormSource::Series, "series"}, {NormSource::Train, "train"}}};
const EnumNames<ThresholdMode> kThreshold{
    {{ThresholdMode::Oracle, "oracle"}, {ThresholdMode::TopK, "topk"}, {ThresholdMode::Fixed, "fixed"}}};
const EnumNames<EvalRows> kRows{{{EvalRows::All, "all"}, {EvalRows::Test, "test"}}};

std::vector<AnomalyType> parse_anomalies(const std::string& key, const std::string& v) {
  std::vector<AnomalyType> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(parse_anomaly_type(item));
    } catch (const ConfigError&) {
      bad_value(key, item, "spike|level-shift|frequency-shift|variance-burst");
    }
  }
  return out;
}

struct Field {
  std::string section, key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& dotted, const std::string&)> set;
};

#define FK_SIZE(sec, key_, member)                                                          \
  Field{sec, key_, [](const RunConfig& c) { return fmt(c.member); },                        \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_size(k, v); }}
#define FK_REAL(sec, key_, member)                                                          \
  Field{sec, key_, [](const RunConfig& c) { return fmt(c.member); },                        \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }}
#define FK_BOOL(sec, key_, member)                                                          \
  Field{sec, key_, [](const RunConfig& c) { return fmt(c.member); },                        \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }}
#define FK_ENUM(sec, key_, member, table)                                                   \
  Field{sec, key_, [](const RunConfig& c) { return table.name(c.member); },                 \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = table.parse(k, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"run", "seed", [](const RunConfig& c) { return fmt(c.seed, 0); },
            [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},

      FK_SIZE("model", "D", model.D),
      // H is implied by d_inner; it is accepted only when consistent.
      Field{"model", "H", [](const RunConfig& c) { return fmt(c.model.H()); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.requested_H = to_size(k, v);
            }},
      FK_SIZE("model", "d_inner", model.d_inner),
      FK_SIZE("model", "d_state", model.d_state),
      FK_SIZE("model", "F", model.F),
      FK_REAL("model", "f_max", model.f_max),
      FK_SIZE("model", "r", model.r),
      FK_REAL("model", "s", model.s),
      FK_SIZE("model", "k_main", model.k_main),
      FK_SIZE("model", "dt_rank", model.dt_rank),
      FK_SIZE("model", "window_size", model.window_size),
      FK_REAL("model", "delta_max", model.delta_max),
      FK_BOOL("model", "learnable_freqs", model.learnable_freqs),

      FK_REAL("loss", "gamma", loss.gamma),
      FK_REAL("loss", "margin", loss.margin),
      FK_REAL("loss", "p", loss.p),
      FK_REAL("loss", "q", loss.q),
      FK_REAL("loss", "lambda_pass", loss.lambda_pass),
      FK_REAL("loss", "lambda_mar", loss.lambda_mar),
      FK_REAL("loss", "lambda_delta", loss.lambda_delta),
      FK_REAL("loss", "lambda_z", loss.lambda_z),
      FK_REAL("loss", "delta_target", loss.delta_target),
      FK_ENUM("loss", "recon_norm", loss.recon_norm, kRecon),
      FK_ENUM("loss", "gate_reg", loss.gate_reg, kGate),
      FK_REAL("loss", "lr", loss.lr),
      FK_REAL("loss", "lr_decay", loss.lr_decay),
      FK_SIZE("loss", "epochs", loss.epochs),
      FK_SIZE("loss", "batch_size", loss.batch_size),

      FK_REAL("score", "w_locality", score.w_locality),
      FK_REAL("score", "w_energy", score.w_energy),
      FK_REAL("score", "w_hfr", score.w_hfr),
      FK_SIZE("score", "band", score.band),
      FK_REAL("score", "cutoff", score.cutoff),
      FK_SIZE("score", "hfr_window", score.hfr_window),
      FK_ENUM("score", "energy_source", score.energy_source, kEnergy),
      FK_ENUM("score", "feature_source", score.feature_source, kFeature),
      FK_BOOL("score", "center_features", score.center_features),
      FK_SIZE("score", "stride", score.stride),
      FK_ENUM("score", "norm_stats", norm_stats, kNorm),
      FK_REAL("score", "flag_percentile", score.flag_percentile),

      Field{"data", "path", [](const RunConfig& c) { return c.data.path; },
            [](RunConfig& c, const std::string&, const std::string& v) { c.data.path = v; }},
      FK_SIZE("data", "stride", data.stride),
      FK_REAL("data", "split", data.split),

      FK_ENUM("eval", "threshold", eval.threshold, kThreshold),
      FK_REAL("eval", "value", eval.value),
      FK_ENUM("eval", "rows", eval.rows, kRows),

      Field{"synth", "kind", [](const RunConfig& c) { return to_string(c.synth.kind); },
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.synth.kind = parse_synth_kind(v);
              } catch (const ConfigError&) {
                bad_value(k, v, "ar1|multisine|mixed");
              }
            }},
      FK_SIZE("synth", "T", synth.T),
      FK_SIZE("synth", "D", synth.D),
      Field{"synth", "anomalies",
            [](const RunConfig& c) {
              std::string s;
              for (AnomalyType a : c.synth.anomalies) s += (s.empty() ? "" : ",") + to_string(a);
              return s;
            },
            [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.anomalies = parse_anomalies(k, v); }},
      FK_REAL("synth", "density", synth.density),
      FK_REAL("synth", "amplitude", synth.amplitude),
      FK_REAL("synth", "noise", synth.noise),
      FK_REAL("synth", "rho", synth.rho),
      FK_SIZE("synth", "tones", synth.tones),
      FK_SIZE("synth", "event_min", synth.event_min),
      FK_SIZE("synth", "event_max", synth.event_max),
      FK_SIZE("synth", "spike_features", synth.spike_features),
      FK_REAL("synth", "clean_fraction", synth.clean_fraction),
  };
  return f;
}

#undef FK_SIZE
#undef FK_REAL
#undef FK_BOOL
#undef FK_ENUM

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

bool known_section(const std::string& s) {
  return std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.section == s; });
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

RunConfig::RunConfig() { model.D = 0; }

void RunConfig::validate() const {
  if (requested_H != 0 && requested_H != model.H()) {
    throw ConfigError("model: H = " + std::to_string(requested_H) + " but 2 * d_inner = " +
                      std::to_string(model.H()) + "; set d_inner instead");
  }
  if (model.D != 0) model.validate();
  loss.validate();
  score.validate();
  if (data.stride == 0) throw ConfigError("data: stride must be >= 1");
  if (!(data.split > 0.0 && data.split <= 1.0)) throw ConfigError("data: split must lie in (0, 1]");
  if (eval.threshold == ThresholdMode::TopK && !(eval.value > 0.0 && eval.value <= 1.0)) {
    throw ConfigError("eval: topk value must lie in (0, 1]");
  }
}

void set_config_value(RunConfig& cfg, const std::string& dotted, const std::string& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) throw ConfigError("config: unknown key '" + dotted + "'");
  const Field* f = find_field(dotted.substr(0, dot), dotted.substr(dot + 1));
  if (!f) throw ConfigError("config: unknown key '" + dotted + "'");
  f->set(cfg, dotted, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& dotted) {
  const auto dot = dotted.find('.');
  const Field* f = dot == std::string::npos ? nullptr : find_field(dotted.substr(0, dot), dotted.substr(dot + 1));
  if (!f) throw ConfigError("config: unknown key '" + dotted + "'");
  return f->get(cfg);
}

ParsedConfig parse_config(const std::string& text, const std::string& source) {
  ParsedConfig out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!known_section(section)) throw ConfigError(where + ": unknown section '" + section + "'");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    const std::string dotted = section + "." + key;
    if (!find_field(section, key)) throw ConfigError(where + ": unknown key '" + dotted + "'");
    if (!out.explicit_keys.insert(dotted).second) throw ConfigError(where + ": duplicate key '" + dotted + "'");
    try {
      set_config_value(out.config, dotted, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return out;
}

ParsedConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv = *e;
    if (kv.rfind("FKMAD_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

void apply_env_overrides(ParsedConfig& parsed, const std::map<std::string, std::string>& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind("FKMAD_", 0) != 0) continue;
    const Field* hit = nullptr;
    for (const Field& f : fields()) {
      if ("FKMAD_" + upper(f.section) + "_" + upper(f.key) == name) {
        hit = &f;
        break;
      }
    }
    if (!hit) throw ConfigError("config: environment variable " + name + " names no config key");
    const std::string dotted = hit->section + "." + hit->key;
    try {
      hit->set(parsed.config, dotted, trim(value));
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
    parsed.explicit_keys.insert(dotted);
  }
}

std::string format_config(const RunConfig& cfg) {
  std::string out, section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys(const std::string& section) {
  std::vector<std::string> keys;
  for (const Field& f : fields())
    if (f.section == section) keys.push_back(f.key);
  return keys;
}

}  // namespace fkmad
