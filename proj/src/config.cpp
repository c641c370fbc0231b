#include "culcap/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace culcap {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCode::kConfig, "'" + v + "' is not a non-negative integer");
  }
  return out;
}

double parse_real(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw Error(ErrorCode::kConfig, "'" + v + "' is not a finite number");
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::kConfig, "'" + v + "' is not a boolean");
}

std::string real_text(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

ConfigKey str_key(std::string name, std::string help, std::string& ref) {
  return {std::move(name), std::move(help), [&ref](const std::string& v) { ref = v; },
          [&ref] { return ref; }};
}

template <typename T>
ConfigKey count_key(std::string name, std::string help, T& ref) {
  return {std::move(name), std::move(help),
          [&ref](const std::string& v) { ref = static_cast<T>(parse_u64(v)); },
          [&ref] { return std::to_string(ref); }};
}

ConfigKey real_key(std::string name, std::string help, double& ref) {
  return {std::move(name), std::move(help), [&ref](const std::string& v) { ref = parse_real(v); },
          [&ref] { return real_text(ref); }};
}

ConfigKey bool_key(std::string name, std::string help, bool& ref) {
  return {std::move(name), std::move(help), [&ref](const std::string& v) { ref = parse_bool(v); },
          [&ref] { return ref ? std::string("true") : std::string("false"); }};
}

}  // namespace

std::vector<ConfigKey> config_keys(RunConfig& c) {
  TrainConfig& t = c.train;
  SynthConfig& s = c.synth;
  std::vector<ConfigKey> keys = {
      str_key("corpus", "corpus directory", c.corpus),
      str_key("out", "output directory", c.out),
      {"seed", "top-level seed", [&c](const std::string& v) { c.set_seed(parse_u64(v)); },
       [&c] { return std::to_string(c.seed()); }},
      str_key("checkpoint", "input checkpoint (default: previous stage under out)",
              c.checkpoint),
      str_key("language", "evaluation language: en, zh or both", c.language),
      str_key("backend", "judge backend: simulated or external", c.backend),
      str_key("judge_endpoint", "external judge URL", c.judge_endpoint),
      count_key("judge_timeout_ms", "external judge timeout", c.judge_timeout_ms),
      count_key("judge_retries", "transport retries per judge request", c.judge_retries),
      count_key("judge_max_in_flight", "concurrent judge requests", c.judge_max_in_flight),
      str_key("embed_backend", "text encoder: builtin or external", c.embed_backend),
      str_key("embed_endpoint", "external embedding URL", c.embed_endpoint),
      count_key("embed_dim", "embedding dimension", c.embed_dim),
      count_key("max_len", "maximum caption length", t.max_len),
      real_key("sft_lr", "stage-1 learning rate", t.sft_lr),
      count_key("sft_batch_size", "SFT batch size (stages 1 and 3)", t.sft_batch_size),
      count_key("stage1_steps", "stage-1 steps", t.stage1_steps),
      real_key("grpo_lr", "stage-2 learning rate", t.grpo_lr),
      count_key("grpo_batch_size", "prompts per GRPO step", t.grpo_batch_size),
      count_key("stage2_steps", "stage-2 steps", t.stage2_steps),
      count_key("K", "rollouts per prompt", t.k),
      real_key("temperature", "rollout sampling temperature", t.temperature),
      real_key("clip_epsilon", "ratio clip range", t.clip_epsilon),
      real_key("kl_beta", "KL weight toward the stage-1 policy", t.kl_beta),
      count_key("reuse_epochs", "updates per sampled batch", t.reuse_epochs),
      real_key("penalty_m", "repulsion cosine threshold", t.penalty.m),
      real_key("penalty_lambda", "repulsion weight", t.penalty.lambda),
      real_key("stage3_lr", "stage-3 learning rate", t.stage3_lr),
      count_key("stage3_steps", "stage-3 steps", t.stage3_steps),
      count_key("stage3_total", "stage-3 mixture size", t.stage3_total),
      real_key("mix_new_eastern", "stage-3 new-Eastern fraction", t.mixture.new_eastern_frac),
      real_key("mix_paired_eastern", "stage-3 paired-Eastern fraction",
               t.mixture.paired_eastern_frac),
      real_key("mix_western_replay", "stage-3 Western replay fraction",
               t.mixture.western_replay_frac),
      bool_key("record_wallclock", "write real step times to transcripts", t.record_wallclock),
      count_key("eval_samples", "captions sampled per image in evaluation",
                c.eval.samples_per_image),
      real_key("eval_temperature", "evaluation sampling temperature", c.eval.temperature),
      real_key("human_fraction", "human-scored share of evaluation samples", c.human_fraction),
      str_key("human_scores", "human score CSV", c.human_scores),
      count_key("validation_easy", "easy judge-validation pairs", c.validation_easy),
      count_key("validation_hard", "hard judge-validation pairs", c.validation_hard),
      count_key("validation_per_image", "low-quality captions per image and culture",
                c.validation_per_image),
      str_key("ablation_variants", "comma-separated ablation rows", c.ablation_variants),
      count_key("synth_train", "synthetic train images", s.splits.train),
      count_key("synth_dev", "synthetic dev images", s.splits.dev),
      count_key("synth_benchmark", "synthetic benchmark images", s.splits.benchmark),
      count_key("synth_content_tokens", "synthetic content vocabulary", s.content_tokens),
      count_key("synth_descriptor_len", "descriptor tokens per image", s.descriptor_len),
      count_key("synth_markers", "marker tokens per culture", s.markers_per_culture),
      real_key("synth_new_image_frac", "train images captioned only in Eastern",
               s.new_image_frac),
      real_key("synth_paired_frac", "stage-1 images also captioned in Eastern", s.paired_frac),
      real_key("synth_refusal_frac", "stage-1 images with refusal targets", s.refusal_frac),
      real_key("synth_annotated_frac", "captioned images with degradation annotations",
               s.annotated_frac),
  };
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (auto& k : config_keys(config)) {
    if (k.name == key) {
      try {
        k.set(value);
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfig, key + ": " + e.what());
      }
      return;
    }
  }
  throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, where + ": expected key = value");
    }
    try {
      set_config_value(config, trim(std::string_view(content).substr(0, eq)),
                       trim(std::string_view(content).substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, where + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::kConfig, "cannot read config " + path);
  }
  apply_config_text(config, text, path);
}

void RunConfig::validate() const {
  train.validate();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  require(backend == "simulated" || backend == "external",
          "backend must be simulated or external");
  require(embed_backend == "builtin" || embed_backend == "external",
          "embed_backend must be builtin or external");
  require(backend != "external" || !judge_endpoint.empty(),
          "external backend needs judge_endpoint");
  require(embed_backend != "external" || !embed_endpoint.empty(),
          "external embeddings need embed_endpoint");
  require(language == "en" || language == "zh" || language == "both",
          "language must be en, zh or both");
  require(embed_dim >= 1, "embed_dim must be positive");
  require(judge_timeout_ms > 0, "judge_timeout_ms must be positive");
  require(judge_max_in_flight >= 1, "judge_max_in_flight must be positive");
  require(eval.samples_per_image >= 1, "eval_samples must be positive");
  require(eval.temperature > 0.0, "eval_temperature must be positive");
  require(human_fraction >= 0.0 && human_fraction <= 1.0, "human_fraction must be in [0, 1]");
  require(!corpus.empty() && !out.empty(), "corpus and out must be set");
}

std::string RunConfig::echo() const {
  RunConfig copy = *this;
  std::string out;
  for (const auto& k : config_keys(copy)) out += k.name + " = " + k.get() + "\n";
  return out;
}

}  // namespace culcap
