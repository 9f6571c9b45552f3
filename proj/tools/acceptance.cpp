// Acceptance suite: one PASS/FAIL line per criterion, followed by indented
// measurements. Exit status 0 only when every selected criterion passes.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#include "fkmad/cli.hpp"
#include "fkmad/config.hpp"
#include "fkmad/data.hpp"
#include "fkmad/losses.hpp"
#include "fkmad/rng.hpp"
#include "fkmad/scoring.hpp"
#include "fkmad/train.hpp"
#include "fkmad/verify.hpp"

#ifndef FKMAD_SOURCE_DIR
#define FKMAD_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace fkmad;

namespace {

struct Outcome {
  bool passed = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& line) {
    passed = passed && ok;
    lines.push_back(std::string(ok ? "ok    " : "FAIL  ") + line);
  }
  void note(const std::string& line) { lines.push_back("      " + line); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Context {
  fs::path config;
  fs::path work;
  std::uint64_t seeds = 5;
};

// ---- 1-6: numerical oracles -------------------------------------------------

Outcome from_suite(const std::string& suite) {
  Outcome o;
  for (const auto& r : verify::run_suite(suite)) o.check(r.passed, verify::format(r));
  return o;
}

// ---- 7: score properties -------------------------------------------------------

Outcome score_properties(const Context&) {
  Outcome o;
  Rng rng(7);

  // hfr is a ratio of powers; a power-of-two scale passes through every
  // operation without rounding, other scales agree to rounding.
  std::size_t exact_fail = 0, cases = 0;
  double worst_rel = 0.0;
  for (std::size_t n : {8u, 32u, 64u, 128u}) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> x(n);
      for (double& v : x) v = rng.normal();
      const double h = hfr(x, 0.5);
      for (double c : {0.25, 2.0, 1024.0, -0.5}) {
        std::vector<double> y(x);
        for (double& v : y) v *= c;
        exact_fail += hfr(y, 0.5) != h;
        ++cases;
      }
      for (double c : {3.7, 1e-3, 123.456}) {
        std::vector<double> y(x);
        for (double& v : y) v *= c;
        worst_rel = std::max(worst_rel, std::abs(hfr(y, 0.5) - h) / h);
      }
    }
  }
  o.check(exact_fail == 0, fmt("hfr(c x) == hfr(x) bit-exact for c in {1/4, 2, 1024, -1/2}: %zu/%zu mismatches",
                               exact_fail, cases));
  o.check(worst_rel <= 1e-14, fmt("hfr(c x) vs hfr(x), c in {3.7, 1e-3, 123.456}: max rel %.2e <= 1e-14", worst_rel));

  bool en_ok = true;
  for (std::size_t n : {1u, 2u, 3u, 7u, 64u, 1000u}) {
    en_ok = en_ok && energy(std::vector<double>(n, 0.0)) == 0.0;
    en_ok = en_ok && energy(std::vector<double>(n, 1.0)) == std::log(2.0);
  }
  o.check(en_ok, "energy(0) == 0 and energy(1) == ln 2 exactly, N in {1, 2, 3, 7, 64, 1000}");

  // Columns whose off-band region is empty keep the band mean alone (the empty
  // side contributes 0), so there the value is c itself.
  std::size_t loc_bad = 0, loc_cases = 0, loc_edge = 0;
  for (double c : {1.0, 0.0, 0.3, -0.7, 1.0 / 3.0}) {
    for (std::size_t L : {2u, 4u, 9u, 16u, 33u}) {
      for (std::size_t b = 1; b < L; ++b) {
        const std::vector<double> loc = locality(Tensor({L, L}, c), b);
        for (std::size_t j = 0; j < L; ++j) {
          const bool off_empty = std::max(j, L - 1 - j) <= b;
          loc_edge += off_empty;
          loc_bad += loc[j] != (off_empty ? c : 0.0);
          ++loc_cases;
        }
      }
    }
  }
  o.check(loc_bad == 0, fmt("locality == 0 exactly on constant S, %zu columns (%zu with no off-band region, "
                            "== c there): %zu mismatches",
                            loc_cases, loc_edge, loc_bad));

  std::size_t fuse_bad = 0;
  const ScoreFusionConfig sc;
  for (int rep = 0; rep < 100; ++rep) {
    NormStats st;
    for (int k = 0; k < 3; ++k) {
      st.mean[k] = rng.normal() * 3.0;
      st.stddev[k] = 0.1 + rng.uniform();
    }
    ScoreTriple t{-st.mean[0], st.mean[1], st.mean[2], 0.0};
    fuse_bad += fuse_one(t, st, sc) != 0.0;
  }
  o.check(fuse_bad == 0, fmt("fused == 0 exactly at the metric means, 100 random stats: %zu nonzero", fuse_bad));
  return o;
}

// ---- 8: loss mechanics ---------------------------------------------------------

Outcome loss_mechanics(const Context&) {
  Outcome o;
  bool boundary = true;
  for (double g : {0.5, 1.0, 2.0, 3.0}) {
    for (double Eu : {0.0, 0.25, 1.0, 7.5}) boundary = boundary && pass_loss_energy(g * g * Eu, Eu, g) == 0.0;
  }
  o.check(boundary, "pass: E(y) == gamma^2 E(u) gives exactly 0");
  bool below = true;
  for (double g : {1.0, 2.0}) {
    for (double Eu : {0.5, 1.0, 4.0}) {
      below = below && pass_loss_energy(0.9 * g * g * Eu, Eu, g) == 0.0;
      below = below && pass_loss(std::log1p(0.9 * g * g * Eu), std::log1p(Eu), g) == 0.0;
    }
  }
  o.check(below, "pass: e_y below the bound gives exactly 0");
  const double ex = pass_loss(std::log1p(3.0), std::log1p(1.0), 1.0);
  const double want = std::pow(std::log(4.0) - std::log(2.0), 2);
  o.check(std::abs(ex - want) <= 1e-15, fmt("pass: gamma 1, E(u) 1, E(y) 3 -> %.15f, want (ln 2)^2 = %.15f", ex, want));

  bool equal = true;
  for (double v : {0.0, 0.3, 2.5}) equal = equal && margin_loss(std::vector<double>(20, v), 0.5, 10, 10) == 0.5;
  o.check(equal, "margin: all e_y equal gives exactly m");
  const double wide = margin_loss(std::vector<double>{0, 0, 0, 0, 0, 5, 5, 5, 5, 5}, 2.0, 50, 50);
  o.check(wide == 0.0, fmt("margin: gap >= m gives exactly 0 (got %g)", wide));
  const double mex = margin_loss(std::vector<double>{0, 0, 1, 1}, 2.0, 25, 25);
  o.check(mex == 1.0, fmt("margin: e_y (0, 0, 1, 1), p = q = 25, m = 2 -> %g, want 1", mex));

  // Breakdown identity over a 500-step run with every weight active.
  SynthSpec sp;
  sp.T = 1200;
  sp.D = 3;
  sp.seed = 8;
  const LabeledSeries s = synth_benchmark(sp);
  const Tensor z = Standardizer::fit(s.values).apply(s.values);
  ModelConfig mc;
  mc.D = 3;
  mc.d_inner = 4;
  mc.d_state = 4;
  mc.window_size = 32;
  const Tensor w = make_windows(z, mc.window_size, 14);  // 84 windows, 5 batches of 16
  LossConfig lc;
  lc.lambda_pass = 0.3;
  lc.lambda_mar = 0.2;
  lc.lambda_delta = 0.05;
  lc.lambda_z = 0.01;
  lc.lr = 3e-3;
  lc.batch_size = 16;
  lc.epochs = 500 / (w.dim(0) / lc.batch_size);
  double worst = 0.0;
  std::size_t steps = 0;
  bool nonneg = true;
  train(w, mc, init_model(mc, 8), lc, 8, [&](const StepRecord& r, const ForwardPass&) {
    const LossBreakdown& b = r.loss;
    const double direct = b.recon + lc.lambda_pass * b.pass + lc.lambda_mar * b.margin +
                          lc.lambda_delta * (b.small + b.smooth) + lc.lambda_z * b.gate_reg;
    worst = std::max(worst, std::abs(b.total - direct));
    nonneg = nonneg && b.recon >= 0 && b.pass >= 0 && b.margin >= 0 && b.small >= 0 && b.smooth >= 0 &&
             b.gate_reg >= 0;
    ++steps;
  });
  o.check(steps >= 500, fmt("training run length %zu steps >= 500", steps));
  o.check(worst <= 1e-12, fmt("total vs weighted sum of components: max abs %.2e <= 1e-12", worst));
  o.check(nonneg, "every logged component is nonnegative");
  return o;
}

// ---- shared benchmark helpers ------------------------------------------------

RunConfig benchmark_config(const Context& ctx) { return load_config(ctx.config.string()).config; }

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << "fkmad " << args.front() << " failed (" << code << "): " << err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- 9: margin efficacy --------------------------------------------------------

double mean_gap(const ModelConfig& mc, const ModelParams& p, const Tensor& windows, const std::vector<int>& anom) {
  ad::Graph g;
  ForwardOptions fo;
  fo.track_params = false;
  const ForwardPass fp = forward(g, mc, p, windows, fo);
  const ad::Var e = window_log_energy(fp.y);
  double a = 0.0, n = 0.0;
  std::size_t na = 0, nn = 0;
  for (std::size_t i = 0; i < anom.size(); ++i) {
    if (anom[i]) {
      a += e.value()[i];
      ++na;
    } else {
      n += e.value()[i];
      ++nn;
    }
  }
  return a / static_cast<double>(na) - n / static_cast<double>(nn);
}

Outcome margin_efficacy(const Context& ctx) {
  Outcome o;
  const RunConfig base = benchmark_config(ctx);
  std::size_t positive = 0;
  for (std::uint64_t seed = 1; seed <= ctx.seeds; ++seed) {
    // Anomalies throughout, so the margin term sees planted windows in every epoch.
    SynthSpec sp = base.synth;
    sp.clean_fraction = 0.0;
    sp.seed = seed;
    const LabeledSeries s = synth_benchmark(sp);
    const Tensor z = Standardizer::fit(s.values).apply(s.values);
    ModelConfig mc = base.model;
    mc.D = sp.D;
    const Tensor w = make_windows(z, mc.window_size, base.data.stride);
    std::vector<int> anom(w.dim(0), 0);
    for (std::size_t k = 0; k < anom.size(); ++k) {
      for (std::size_t t = 0; t < mc.window_size; ++t) anom[k] |= s.labels[k * base.data.stride + t];
    }
    double gap[2];
    for (int r = 0; r < 2; ++r) {
      LossConfig lc = base.loss;
      lc.lambda_mar = r ? 0.01 : 0.0;
      const TrainResult tr = train(w, mc, init_model(mc, seed), lc, seed);
      gap[r] = mean_gap(mc, tr.params, w, anom);
    }
    const double diff = gap[1] - gap[0];
    positive += diff > 0.0;
    o.note(fmt("seed %llu: gap(lambda_mar 0) %+.5f  gap(lambda_mar 0.01) %+.5f  change %+.2e",
               static_cast<unsigned long long>(seed), gap[0], gap[1], diff));
  }
  o.check(positive == ctx.seeds,
          fmt("sign test: %zu of %llu seeds increase the anomalous-vs-normal e_y gap (need all)", positive,
              static_cast<unsigned long long>(ctx.seeds)));
  return o;
}

// ---- 10: end-to-end detection ------------------------------------------------

Outcome end_to_end(const Context& ctx) {
  Outcome o;
  const RunConfig base = benchmark_config(ctx);
  const std::string cfg = ctx.config.string();
  double min_pa = 1.0, min_raw = 1.0;
  bool beats = true;
  for (std::uint64_t seed = 1; seed <= ctx.seeds; ++seed) {
    const fs::path dir = ctx.work / ("e2e_seed" + std::to_string(seed));
    const std::string d = dir.string(), sd = std::to_string(seed);
    const std::string csv = (dir / "synth.csv").string();
    const std::vector<std::string> common{"--config", cfg, "--seed", sd, "--out", d};
    auto with = [&](std::string cmd, std::vector<std::string> extra) {
      std::vector<std::string> a{std::move(cmd)};
      a.insert(a.end(), common.begin(), common.end());
      a.insert(a.end(), extra.begin(), extra.end());
      return a;
    };
    if (cli(with("synth", {})) || cli(with("train", {"--data", csv})) || cli(with("score", {"--data", csv})) ||
        cli(with("eval", {"--data", csv}))) {
      o.check(false, "seed " + sd + ": pipeline failed");
      continue;
    }
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    const double pa = report["pa_f1"].get<double>(), raw = report["f1"].get<double>();

    // Baseline: per-feature z-score magnitude on the same test rows, same oracle ratio.
    const LabeledSeries s = load_csv(csv);
    const std::size_t start = split_rows(s.length(), base.data.split);
    const std::size_t stop = report["rows"][1].get<std::size_t>();
    const std::vector<double> zs = zscore_scores(s.values);
    const std::vector<double> zt(zs.begin() + static_cast<std::ptrdiff_t>(start),
                                 zs.begin() + static_cast<std::ptrdiff_t>(stop));
    const std::vector<int> y(s.labels.begin() + static_cast<std::ptrdiff_t>(start),
                             s.labels.begin() + static_cast<std::ptrdiff_t>(stop));
    const EvalReport zr = evaluate(zt, y, ThresholdPolicy::top_k(label_ratio(y)));

    o.note(fmt("seed %s: model raw F1 %.4f  PA F1 %.4f | z-score raw F1 %.4f  PA F1 %.4f", sd.c_str(), raw, pa,
               zr.f1, zr.pa_f1));
    min_pa = std::min(min_pa, pa);
    min_raw = std::min(min_raw, raw);
    beats = beats && zr.pa_f1 < pa;
  }
  o.check(min_pa >= 0.90, fmt("point-adjusted F1, worst seed %.4f >= 0.90", min_pa));
  o.check(min_raw >= 0.70, fmt("raw F1, worst seed %.4f >= 0.70", min_raw));
  o.check(beats, "z-score baseline scores strictly lower point-adjusted F1 on every seed");
  return o;
}

// ---- 11: determinism -------------------------------------------------------------

Outcome determinism(const Context& ctx) {
  Outcome o;
  const std::string cfg = ctx.config.string();
  const fs::path data_dir = ctx.work / "det_data";
  if (cli({"synth", "--config", cfg, "--out", data_dir.string()})) {
    o.check(false, "synth failed");
    return o;
  }
  const std::string csv = (data_dir / "synth.csv").string();
  fs::path runs[2];
  for (int r = 0; r < 2; ++r) {
    runs[r] = ctx.work / ("det_run" + std::to_string(r));
    fs::remove_all(runs[r]);
    const std::vector<std::string> common{"--config", cfg, "--data", csv, "--out", runs[r].string()};
    std::vector<std::string> train{"train"}, score{"score"};
    train.insert(train.end(), common.begin(), common.end());
    score.insert(score.end(), common.begin(), common.end());
    if (cli(train) || cli(score)) {
      o.check(false, "run " + std::to_string(r) + " failed");
      return o;
    }
  }
  for (const char* f : {"checkpoint.bin", "loss_history.jsonl", "scores.jsonl"}) {
    const std::string a = slurp(runs[0] / f), b = slurp(runs[1] / f);
    o.check(!a.empty() && a == b, fmt("%s byte-identical across runs (%zu bytes)", f, a.size()));
  }
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;  // 0 = no runtime limit
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx;
  ctx.config = fs::path(FKMAD_SOURCE_DIR) / "configs" / "benchmark.ini";
  ctx.work = fs::temp_directory_path() / "fkmad_acceptance";
  std::vector<int> only;
  app.add_option("--config", ctx.config, "Benchmark configuration")->check(CLI::ExistingFile);
  app.add_option("--work", ctx.work, "Scratch directory for benchmark runs");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 11));
  app.add_option("--seeds", ctx.seeds, "Seeds for criteria 9 and 10")->check(CLI::Range(1, 100));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "scan equals time-varying convolution", 10, [](const Context&) { return from_suite("scan"); }},
      {2, "discretization error ratio under step halving", 1, [](const Context&) { return from_suite("taylor"); }},
      {3, "impulse-response derivative vs central differences", 1,
       [](const Context&) { return from_suite("dhk"); }},
      {4, "time vs frequency domain output energy", 5, [](const Context&) { return from_suite("parseval"); }},
      {5, "quadratic energy growth under perturbation", 5, [](const Context&) { return from_suite("energy"); }},
      {6, "full-model gradient vs finite differences", 30, [](const Context&) { return from_suite("gradient"); }},
      {7, "score properties", 0, score_properties},
      {8, "loss mechanics", 0, loss_mechanics},
      {9, "margin term widens the anomalous-vs-normal energy gap", 300, margin_efficacy},
      {10, "end-to-end detection on the planted-spike benchmark", 600, end_to_end},
      {11, "determinism of train and score outputs", 0, determinism},
  };

  fs::create_directories(ctx.work);
  bool all_ok = true;
  for (const Criterion& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(ctx);
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool ok = out.passed && in_time;
    all_ok = all_ok && ok;
    const std::string timing =
        c.budget_s ? fmt("%.2f s < %g s%s", secs, c.budget_s, in_time ? "" : " EXCEEDED") : fmt("%.2f s", secs);
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << (c.id < 10 ? " " : "") << c.id << "  " << c.title
              << "  [" << timing << "]\n";
    for (const std::string& l : out.lines) std::cout << "        " << l << "\n";
    std::cout.flush();
  }
  return all_ok ? 0 : 1;
}
