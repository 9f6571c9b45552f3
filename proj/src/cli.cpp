#include "fkmad/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fkmad/checkpoint.hpp"
#include "fkmad/config.hpp"
#include "fkmad/data.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/scoring.hpp"
#include "fkmad/train.hpp"
#include "fkmad/verify.hpp"

namespace fkmad {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::string checkpoint;
  std::string data;
  std::string scores;
  std::vector<std::string> sets;
  std::int64_t seed = -1;
};

ParsedConfig resolve_config(const CommonArgs& a) {
  ParsedConfig pc = a.config_path.empty() ? ParsedConfig{} : load_config(a.config_path);
  apply_env_overrides(pc, environment_overrides());
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    set_config_value(pc.config, key, kv.substr(eq + 1));
    pc.explicit_keys.insert(key);
  }
  if (a.seed >= 0) {
    pc.config.seed = static_cast<std::uint64_t>(a.seed);
    pc.explicit_keys.insert("run.seed");
  }
  if (!a.data.empty()) {
    pc.config.data.path = a.data;
    pc.explicit_keys.insert("data.path");
  }
  pc.config.validate();
  return pc;
}

fs::path out_path(const CommonArgs& a, const std::string& name) {
  fs::create_directories(a.out_dir);
  return fs::path(a.out_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + p.string() + "'");
}

LabeledSeries load_data(const RunConfig& cfg) {
  if (cfg.data.path.empty()) throw ConfigError("no data file: pass --data or set data.path");
  return load_csv(cfg.data.path);
}

Tensor leading_rows(const Tensor& values, std::size_t rows) {
  const std::size_t D = values.dim(1);
  return Tensor({rows, D}, std::vector<double>(values.vec().begin(),
                                                values.vec().begin() + static_cast<std::ptrdiff_t>(rows * D)));
}

json loss_json(const StepRecord& r) {
  const LossBreakdown& l = r.loss;
  return json{{"type", "step"},    {"step", r.step},         {"epoch", r.epoch},
              {"recon", l.recon},  {"pass", l.pass},         {"margin", l.margin},
              {"small", l.small},  {"smooth", l.smooth},     {"gate_reg", l.gate_reg},
              {"total", l.total}};
}

int cmd_train(const CommonArgs& a, std::ostream& out) {
  ParsedConfig pc = resolve_config(a);
  RunConfig& cfg = pc.config;
  const LabeledSeries series = load_data(cfg);
  const std::size_t T = series.length(), D = series.features();
  if (cfg.model.D == 0) cfg.model.D = D;
  if (cfg.model.D != D) {
    throw DataError("model.D = " + std::to_string(cfg.model.D) + " but " + cfg.data.path + " has " +
                    std::to_string(D) + " features");
  }
  cfg.validate();

  const std::size_t ntr = split_rows(T, cfg.data.split);
  if (ntr < cfg.model.window_size) {
    throw DataError("training split has " + std::to_string(ntr) + " rows, fewer than one window of " +
                    std::to_string(cfg.model.window_size));
  }
  const Standardizer st = Standardizer::fit(series.values, ntr);
  const Tensor z = st.apply(leading_rows(series.values, ntr));
  const Tensor windows = make_windows(z, cfg.model.window_size, cfg.data.stride);

  const std::string config_text = format_config(cfg);
  std::ostringstream history;
  history << json{{"type", "header"}, {"config", config_text}}.dump() << "\n";
  const TrainResult tr =
      train(windows, cfg.model, init_model(cfg.model, cfg.seed), cfg.loss, cfg.seed,
            [&](const StepRecord& r, const ForwardPass&) { history << loss_json(r).dump() << "\n"; });

  Checkpoint ck;
  ck.step = tr.steps;
  ck.config = config_text;
  ck.tensors = tr.params.tensors;
  ck.tensors["norm.mean"] = Tensor::vector(st.mean);
  ck.tensors["norm.std"] = Tensor::vector(st.stddev);
  save_checkpoint(out_path(a, "checkpoint.bin").string(), ck);
  write_text(out_path(a, "loss_history.jsonl"), history.str());
  write_text(out_path(a, "run_config.ini"), config_text);

  out << "trained " << tr.steps << " steps on " << windows.dim(0) << " windows\n";
  if (!tr.history.empty()) {
    std::vector<double> totals;
    for (const StepRecord& r : tr.history) totals.push_back(r.loss.total);
    const std::vector<double> sm = smooth(totals, 20);
    out << "smoothed loss " << sm.front() << " -> " << sm.back() << "\n";
  }
  out << "wrote " << out_path(a, "checkpoint.bin").string() << "\n";
  return kExitOk;
}

struct LoadedModel {
  RunConfig train_config;
  ModelParams params;
  Standardizer norm;
};

LoadedModel load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  LoadedModel m;
  try {
    m.train_config = parse_config(ck.config, path + " (embedded config)").config;
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config unreadable: ") + e.what());
  }
  for (const char* key : {"norm.mean", "norm.std"}) {
    auto it = ck.tensors.find(key);
    if (it == ck.tensors.end()) throw DataError("checkpoint " + path + " has no " + key);
    auto& dst = std::string(key) == "norm.mean" ? m.norm.mean : m.norm.stddev;
    dst.assign(it->second.vec().begin(), it->second.vec().end());
    ck.tensors.erase(it);
  }
  const ModelParams fresh = init_model(m.train_config.model, 0);
  for (const auto& [name, t] : fresh.tensors) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) throw DataError("checkpoint " + path + " is missing tensor " + name);
    if (it->second.shape() != t.shape()) {
      throw DataError("checkpoint tensor " + name + " has shape " + shape_str(it->second.shape()) +
                      ", config implies " + shape_str(t.shape()));
    }
  }
  if (ck.tensors.size() != fresh.tensors.size()) throw DataError("checkpoint " + path + " has extra tensors");
  m.params.tensors = std::move(ck.tensors);
  return m;
}

std::string checkpoint_path(const CommonArgs& a) {
  return a.checkpoint.empty() ? (fs::path(a.out_dir) / "checkpoint.bin").string() : a.checkpoint;
}

int cmd_score(const CommonArgs& a, std::ostream& out) {
  ParsedConfig pc = resolve_config(a);
  const LoadedModel m = load_model(checkpoint_path(a));
  // The architecture comes from the checkpoint; an explicit conflicting key is an error.
  for (const std::string& key : pc.explicit_keys) {
    if (key.rfind("model.", 0) != 0) continue;
    if (get_config_value(pc.config, key) != get_config_value(m.train_config, key)) {
      throw ConfigError(key + " = " + get_config_value(pc.config, key) + " conflicts with the checkpoint (" +
                        get_config_value(m.train_config, key) + ")");
    }
  }
  RunConfig cfg = pc.config;
  cfg.model = m.train_config.model;
  cfg.requested_H = 0;
  cfg.validate();

  const LabeledSeries series = load_data(cfg);
  if (series.features() != cfg.model.D) {
    throw DataError(cfg.data.path + " has " + std::to_string(series.features()) +
                    " features, checkpoint expects " + std::to_string(cfg.model.D));
  }
  const Tensor z = m.norm.apply(series.values);
  ScoreFusionConfig sc = cfg.score;
  if (cfg.norm_stats == NormSource::Train) sc.reference_rows = split_rows(series.length(), cfg.data.split);
  const ScoreOutput so = score_series(cfg.model, m.params, z, sc);

  std::ostringstream s;
  s << json{{"type", "header"},
            {"config", format_config(cfg)},
            {"records", so.records.size()},
            {"threshold", so.threshold},
            {"stats_mean", so.stats.mean},
            {"stats_std", so.stats.stddev}}
           .dump()
    << "\n";
  for (const ScoreRecord& r : so.records) {
    s << json{{"t", r.t},
              {"locality", r.s.locality},
              {"energy", r.s.energy},
              {"hfr", r.s.hfr},
              {"fused", r.s.fused},
              {"flag", r.flag}}
             .dump()
      << "\n";
  }
  const fs::path p = out_path(a, "scores.jsonl");
  write_text(p, s.str());
  std::size_t flagged = 0;
  for (const ScoreRecord& r : so.records) flagged += r.flag;
  out << "scored " << so.records.size() << " timesteps, " << flagged << " flagged above " << so.threshold << "\n";
  out << "wrote " << p.string() << "\n";
  return kExitOk;
}

std::vector<double> read_scores(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read scores file '" + path + "'");
  std::vector<double> fused;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": not JSON (" + e.what() + ")");
    }
    if (j.contains("type")) continue;
    if (!j.contains("t") || !j.contains("fused")) {
      throw DataError(path + ":" + std::to_string(lineno) + ": record without t/fused");
    }
    if (j["t"].get<std::size_t>() != fused.size()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": records are not consecutive from t = 0");
    }
    fused.push_back(j["fused"].get<double>());
  }
  return fused;
}

int cmd_eval(const CommonArgs& a, std::ostream& out) {
  const ParsedConfig pc = resolve_config(a);
  const RunConfig& cfg = pc.config;
  const std::string scores_path =
      a.scores.empty() ? (fs::path(a.out_dir) / "scores.jsonl").string() : a.scores;
  const std::vector<double> fused = read_scores(scores_path);
  const LabeledSeries series = load_data(cfg);
  if (!series.has_labels()) throw DataError(cfg.data.path + " has no label column");
  const std::size_t T = series.length();
  if (fused.empty() || fused.size() > T) {
    throw DataError("scores cover " + std::to_string(fused.size()) + " timesteps, labels have " +
                    std::to_string(T));
  }
  const std::size_t start = cfg.eval.rows == EvalRows::Test ? split_rows(T, cfg.data.split) : 0;
  if (start >= fused.size()) throw DataError("no scored timesteps after the training split");
  const std::vector<double> s(fused.begin() + static_cast<std::ptrdiff_t>(start), fused.end());
  const std::vector<int> y(series.labels.begin() + static_cast<std::ptrdiff_t>(start),
                           series.labels.begin() + static_cast<std::ptrdiff_t>(fused.size()));

  ThresholdPolicy policy;
  switch (cfg.eval.threshold) {
    case ThresholdMode::Oracle: policy = ThresholdPolicy::top_k(label_ratio(y)); break;
    case ThresholdMode::TopK: policy = ThresholdPolicy::top_k(cfg.eval.value); break;
    case ThresholdMode::Fixed: policy = ThresholdPolicy::fixed(cfg.eval.value); break;
  }
  const EvalReport r = evaluate(s, y, policy);
  const json report = {
      {"config", format_config(cfg)},
      {"rows", {start, fused.size()}},
      {"policy", cfg.eval.threshold == ThresholdMode::Fixed ? "fixed" : "topk"},
      {"policy_value", policy.value},
      {"threshold", r.threshold},
      {"precision", r.precision},
      {"recall", r.recall},
      {"f1", r.f1},
      {"pa_precision", r.pa_precision},
      {"pa_recall", r.pa_recall},
      {"pa_f1", r.pa_f1},
      {"predicted", r.predicted},
      {"positives", r.positives},
      {"degenerate_labels", r.degenerate_labels}};
  const fs::path p = out_path(a, "report.json");
  write_text(p, report.dump(2) + "\n");
  char buf[200];
  std::snprintf(buf, sizeof buf, "raw P %.4f R %.4f F1 %.4f | point-adjusted P %.4f R %.4f F1 %.4f\n",
                r.precision, r.recall, r.f1, r.pa_precision, r.pa_recall, r.pa_f1);
  out << buf;
  if (r.degenerate_labels) out << "warning: labels are all one class\n";
  out << "wrote " << p.string() << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& suite, const CommonArgs& a, double a_scale, std::ostream& out) {
  const ParsedConfig pc = resolve_config(a);
  verify::Options o;
  o.seed = pc.config.seed == 0 ? 1 : pc.config.seed;
  o.a_scale = a_scale;
  const auto results = verify::run_suite(suite, o);
  for (const auto& r : results) out << verify::format(r) << "\n";
  const bool ok = verify::all_passed(results);
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_synth(const CommonArgs& a, std::ostream& out) {
  const ParsedConfig pc = resolve_config(a);
  SynthSpec spec = pc.config.synth;
  spec.seed = pc.config.seed;
  const LabeledSeries s = synth_benchmark(spec);
  const fs::path p = out_path(a, "synth.csv");
  write_csv(p.string(), s);
  out << "wrote " << s.length() << " rows x " << s.features() << " features, "
      << static_cast<std::size_t>(label_ratio(s.labels) * static_cast<double>(s.length()) + 0.5)
      << " labelled, to " << p.string() << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "Configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", a.out_dir, "Output directory");
  cmd->add_option("--data", a.data, "CSV data file (overrides data.path)");
  cmd->add_option("--set", a.sets, "Override one key: section.key=value");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fourier-KAN selective state-space anomaly detector"};
  app.require_subcommand(1);
  CommonArgs a;
  std::string suite = "all";
  double a_scale = 1.0;

  CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train, a);
  CLI::App* score = app.add_subcommand("score", "Score every timestep of a series");
  add_common(score, a);
  score->add_option("--checkpoint", a.checkpoint, "Checkpoint (default OUT/checkpoint.bin)");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate scores against labels");
  add_common(eval, a);
  eval->add_option("--scores", a.scores, "Scores file (default OUT/scores.jsonl)");
  CLI::App* ver = app.add_subcommand("verify", "Run numerical self-checks");
  add_common(ver, a);
  ver->add_option("suite", suite, "all, scan, taylor, dhk, parseval, energy or gradient");
  ver->add_option("--mutate-a", a_scale, "Scale the scan transition (mutation test)")->group("");
  CLI::App* synth = app.add_subcommand("synth", "Write a labelled synthetic series");
  add_common(synth, a);

  std::vector<std::string> argv_s{"fkmad"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_s) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(a, out);
    if (score->parsed()) return cmd_score(a, out);
    if (eval->parsed()) return cmd_eval(a, out);
    if (ver->parsed()) return cmd_verify(suite, a, a_scale, out);
    if (synth->parsed()) return cmd_synth(a, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << " (step " << e.step() << ")\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace fkmad
