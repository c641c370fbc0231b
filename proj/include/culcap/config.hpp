#pragma once

#include <functional>
#include <string>
#include <vector>

#include "culcap/eval.hpp"
#include "culcap/synth.hpp"
#include "culcap/trainer.hpp"

namespace culcap {

struct RunConfig {
  std::string corpus = "data";
  std::string out = "out";
  std::string checkpoint;  // empty: the previous stage under `out`
  std::string language = "both";  // en | zh | both
  std::string backend = "simulated";
  std::string judge_endpoint;
  int judge_timeout_ms = 30000;
  int judge_retries = 1;
  std::size_t judge_max_in_flight = 4;
  std::string embed_backend = "builtin";
  std::string embed_endpoint;
  std::size_t embed_dim = 256;

  TrainConfig train;
  EvalConfig eval;
  double human_fraction = 0.2;
  std::string human_scores;
  std::size_t validation_easy = 50;
  std::size_t validation_hard = 50;
  std::size_t validation_per_image = 4;
  std::string ablation_variants = "base,sft,sft+grpo,sft+grpo+deg,full";

  SynthConfig synth;

  std::uint64_t seed() const { return train.seed; }
  void set_seed(std::uint64_t s) {
    train.seed = s;
    eval.seed = s;
  }
  // Throws kConfig.
  void validate() const;
  // key = value lines for every key, in registry order.
  std::string echo() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

// Every settable key, bound to `config`.
std::vector<ConfigKey> config_keys(RunConfig& config);

// `key = value` lines; '#' starts a comment. Unknown keys and bad values are
// kConfig errors naming the line.
void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin);
void apply_config_file(RunConfig& config, const std::string& path);
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace culcap
