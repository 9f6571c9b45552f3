#include <string>

#include "doctest.h"
#include "fkmad/config.hpp"
#include "fkmad/errors.hpp"

using namespace fkmad;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "run.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults parse from an empty file") {
  const ParsedConfig p = parse_config("");
  CHECK(p.explicit_keys.empty());
  CHECK(p.config.model.D == 0);
  CHECK(format_config(p.config) == format_config(RunConfig()));
  p.config.validate();
}

TEST_CASE("values, comments and explicit keys") {
  const ParsedConfig p = parse_config(
      "# header\n"
      "[model]\n"
      "d_inner = 4   \n"
      "; other comment\n"
      "[loss]\n"
      "lr=0.0025\n"
      "recon_norm = l2\n");
  CHECK(p.config.model.d_inner == 4);
  CHECK(p.config.model.H() == 8);
  CHECK(p.config.loss.lr == 0.0025);
  CHECK(p.explicit_keys == std::set<std::string>{"model.d_inner", "loss.lr", "loss.recon_norm"});
  CHECK(get_config_value(p.config, "loss.lr") == "0.0025");
}

TEST_CASE("errors name the line and key") {
  const std::string unknown = error_of("[model]\nd_inner = 2\nwidth = 3\n");
  CHECK(unknown.find("run.ini:3") != std::string::npos);
  CHECK(unknown.find("model.width") != std::string::npos);

  CHECK(error_of("[nope]\n").find("'nope'") != std::string::npos);
  CHECK(error_of("[loss]\nlr = fast\n").find("loss.lr") != std::string::npos);
  CHECK(error_of("[loss]\nlr = 1\nlr = 2\n").find("duplicate") != std::string::npos);
  CHECK_FALSE(error_of("lr = 1\n").empty());
  CHECK_FALSE(error_of("[loss\n").empty());
  CHECK_FALSE(error_of("[loss]\nlr\n").empty());
  CHECK_FALSE(error_of("[model]\nd_inner = -1\n").empty());
  CHECK_FALSE(error_of("[model]\nlearnable_freqs = maybe\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);
  RunConfig c;
  CHECK_THROWS_AS(set_config_value(c, "loss", "1"), ConfigError);
  CHECK_THROWS_AS(get_config_value(c, "loss.nothing"), ConfigError);
}

TEST_CASE("environment overrides win over the file") {
  ParsedConfig p = parse_config("[loss]\nlr = 0.1\n");
  apply_env_overrides(p, {{"FKMAD_LOSS_LR", "0.5"}, {"FKMAD_MODEL_D_INNER", " 3 "}, {"OTHER", "x"}});
  CHECK(p.config.loss.lr == 0.5);
  CHECK(p.config.model.d_inner == 3);
  CHECK(p.explicit_keys.count("model.d_inner") == 1);
  CHECK_THROWS_AS(apply_env_overrides(p, {{"FKMAD_LOSS_SPEED", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_env_overrides(p, {{"FKMAD_LOSS_LR", "x"}}), ConfigError);
}

TEST_CASE("format and parse round-trip every key") {
  RunConfig c;
  c.seed = 17;
  c.model.D = 3;
  c.model.d_inner = 5;
  c.loss.lr = 0.1 + 0.2;
  c.loss.lambda_mar = 1.0 / 3.0;
  c.norm_stats = NormSource::Train;
  c.eval.threshold = ThresholdMode::TopK;
  c.eval.rows = EvalRows::Test;
  c.data.path = "series.csv";
  c.synth.anomalies = {AnomalyType::Spike, AnomalyType::VarianceBurst};
  const std::string text = format_config(c);
  const ParsedConfig back = parse_config(text);
  CHECK(format_config(back.config) == text);
  CHECK(back.config.loss.lr == c.loss.lr);
  CHECK(back.config.loss.lambda_mar == c.loss.lambda_mar);
  back.config.validate();
  for (const char* s : {"run", "model", "loss", "score", "data", "eval", "synth"})
    for (const std::string& k : config_keys(s)) CHECK(back.explicit_keys.count(std::string(s) + "." + k) == 1);
}

TEST_CASE("H must agree with d_inner") {
  CHECK_NOTHROW(parse_config("[model]\nd_inner = 4\nH = 8\n").config.validate());
  const RunConfig bad = parse_config("[model]\nd_inner = 4\nH = 6\n").config;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("validation rejects out-of-range settings") {
  for (const char* text : {"[data]\nsplit = 0\n", "[data]\nstride = 0\n", "[data]\nsplit = 1.5\n",
                           "[eval]\nthreshold = topk\nvalue = 0\n", "[loss]\nlr = 0\n"}) {
    INFO(std::string(text));
    CHECK_THROWS_AS(parse_config(text).config.validate(), ConfigError);
  }
}
