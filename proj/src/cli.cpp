#include "culcap/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "culcap/ablation.hpp"
#include "culcap/external_judge.hpp"
#include "json.hpp"

namespace culcap {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingCheckpoint:
    case ErrorCode::kCheckpointMismatch:
      return kExitCheckpoint;
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
      return kExitConfig;
    case ErrorCode::kJudgeProtocol:
    case ErrorCode::kJudgeUnavailable:
    case ErrorCode::kZeroEmbedding:
    case ErrorCode::kEmbeddingUnavailable:
    case ErrorCode::kDegeneratePrototype:
    case ErrorCode::kMissingDirection:
      return kExitBackend;
    case ErrorCode::kEmptySequence:
    case ErrorCode::kNonFiniteGradient:
    case ErrorCode::kShapeMismatch:
      return kExitTraining;
    case ErrorCode::kBenchmarkLeak:
      return kExitBenchmarkLeak;
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitData;
  }
}

std::unique_ptr<JudgeBackend> make_judge(const RunConfig& config, const Lexicon& lexicon) {
  if (config.backend == "simulated") return std::make_unique<SimulatedJudge>(lexicon);
  const char* key = std::getenv("JUDGE_API_KEY");
  ExternalJudgeConfig jc;
  jc.endpoint = config.judge_endpoint;
  jc.timeout_ms = config.judge_timeout_ms;
  jc.retries = config.judge_retries;
  jc.max_in_flight = config.judge_max_in_flight;
  return std::make_unique<ExternalJudge>(
      lexicon, jc, make_http_post(jc.endpoint, jc.timeout_ms, key ? key : ""));
}

std::unique_ptr<TextEncoder> make_encoder(const RunConfig& config, const Vocabulary& vocab) {
  if (config.embed_backend == "builtin") {
    return std::make_unique<HashedNgramEncoder>(vocab, config.embed_dim);
  }
  const char* key = std::getenv("EMBED_API_KEY");
  return std::make_unique<ExternalEncoder>(
      vocab, config.embed_dim,
      make_http_post(config.embed_endpoint, config.judge_timeout_ms, key ? key : ""),
      config.judge_retries);
}

namespace {

struct Outputs {
  std::ostream& out;
  bool dry_run = false;
  std::vector<std::string> planned;

  void write(const std::string& path, std::string_view contents) {
    if (dry_run) {
      planned.push_back(path);
      return;
    }
    write_file(path, contents);
  }
};

std::string join(const std::string& a, const std::string& b) {
  return (fs::path(a) / b).string();
}

CheckpointRecord load_stage_checkpoint(const RunConfig& cfg, const Corpus& corpus,
                                       const std::string& fallback_stage) {
  const std::string path =
      cfg.checkpoint.empty() ? join(join(cfg.out, fallback_stage), "checkpoint.json")
                             : cfg.checkpoint;
  CheckpointRecord rec = load_checkpoint(path, corpus.lexicon.vocab, corpus.content_hash);
  // A transcript next to the checkpoint is checked too.
  const fs::path transcript = fs::path(path).parent_path() / "transcript.jsonl";
  if (fs::exists(transcript)) {
    check_benchmark_hygiene(transcript_images(read_file(transcript.string())), corpus.split);
  }
  check_benchmark_hygiene(rec.trained_images, corpus.split);
  return rec;
}

void write_stage(Outputs& o, const RunConfig& cfg, const StageState& state,
                 const Corpus& corpus) {
  const std::string dir = join(cfg.out, state.stage);
  o.write(join(dir, "checkpoint.json"), dump_checkpoint(state.checkpoint(), corpus.lexicon.vocab));
  o.write(join(dir, "transcript.jsonl"), transcript_jsonl(state));
}

void print_stage_summary(std::ostream& out, const StageState& state) {
  out << state.stage << ": steps " << state.history.size() << ", samples " << state.samples;
  if (!state.history.empty()) {
    out << ", first " << state.history.front().value << ", last " << state.history.back().value;
  }
  out << ", seed " << state.seed << "\n";
}

std::vector<CultureContext> eval_contexts(const RunConfig& cfg) {
  if (cfg.language == "en") return {CultureContext::kWestern};
  if (cfg.language == "zh") return {CultureContext::kEastern};
  return {CultureContext::kWestern, CultureContext::kEastern};
}

int cmd_data(const std::string& sub, const RunConfig& cfg, Outputs& o) {
  if (sub == "validate") {
    const Corpus corpus = load_corpus(cfg.corpus);
    o.out << "corpus " << cfg.corpus << ": images " << corpus.images.size() << ", captions "
          << corpus.captions.size() << ", degradations " << corpus.degradations.size()
          << ", splits " << corpus.split.train_ids.size() << "/" << corpus.split.dev_ids.size()
          << "/" << corpus.split.benchmark_ids.size() << ", vocab "
          << corpus.lexicon.vocab.size() << ", hash " << hex64(corpus.content_hash) << "\n";
    for (const auto& w : corpus.warnings) o.out << "warning: " << w << "\n";
    return kExitOk;
  }
  const Corpus corpus = generate_synthetic_corpus(cfg.synth, cfg.seed());
  for (const auto& [name, text] : serialize_corpus(corpus)) {
    o.write(join(cfg.corpus, name), text);
  }
  json manifest = {{"generator", "culcap synth"},
                   {"seed", cfg.seed()},
                   {"corpus_hash", hex64(corpus.content_hash)}};
  o.write(join(cfg.corpus, "manifest.json"), manifest.dump(2) + "\n");
  o.out << "synthesized " << corpus.images.size() << " images, " << corpus.captions.size()
        << " captions into " << cfg.corpus << " (seed " << cfg.seed() << ", hash "
        << hex64(corpus.content_hash) << ")\n";
  return kExitOk;
}

int cmd_train(const std::string& sub, const RunConfig& cfg, Outputs& o) {
  const Corpus corpus = load_corpus(cfg.corpus);
  StageState state;
  if (sub == "stage1") {
    if (o.dry_run) return kExitOk;
    state = run_stage1_sft(cfg.train, corpus);
  } else if (sub == "stage2") {
    const auto prev = load_stage_checkpoint(cfg, corpus, "stage1");
    if (o.dry_run) return kExitOk;
    auto judge = make_judge(cfg, corpus.lexicon);
    auto encoder = make_encoder(cfg, corpus.lexicon.vocab);
    state = run_stage2_grpo(cfg.train, corpus, StageState::from_checkpoint(prev), *judge,
                            *encoder);
  } else {
    const auto prev = load_stage_checkpoint(cfg, corpus, "stage2");
    if (o.dry_run) return kExitOk;
    state = run_stage3_adapt(cfg.train, corpus, StageState::from_checkpoint(prev));
  }
  write_stage(o, cfg, state, corpus);
  print_stage_summary(o.out, state);
  return kExitOk;
}

int cmd_eval(const std::string& sub, const RunConfig& cfg, Outputs& o) {
  const Corpus corpus = load_corpus(cfg.corpus);
  const std::string dir = join(cfg.out, "eval");
  if (sub == "ablate") {
    std::vector<AblationVariant> variants;
    std::istringstream in(cfg.ablation_variants);
    std::string name;
    while (std::getline(in, name, ',')) variants.push_back(parse_variant(name));
    if (o.dry_run) return kExitOk;
    auto judge = make_judge(cfg, corpus.lexicon);
    auto encoder = make_encoder(cfg, corpus.lexicon.vocab);
    const auto table = run_ablation(variants, cfg.train, corpus, *judge, *encoder, cfg.eval);
    o.write(join(dir, "ablation.json"), report_json(table));
    const std::string text = report_text(table);
    o.write(join(dir, "ablation.txt"), text);
    o.out << text;
    return kExitOk;
  }
  if (sub == "judge-validate") {
    PolicyParams params = PolicyParams::zeros(corpus.lexicon.vocab, cfg.train.max_len);
    if (!cfg.checkpoint.empty()) params = load_stage_checkpoint(cfg, corpus, "").params;
    if (o.dry_run) return kExitOk;
    auto judge = make_judge(cfg, corpus.lexicon);
    const auto pool = sample_low_quality_pool(params, corpus, cfg.validation_per_image,
                                              cfg.eval.temperature, derive_seed(cfg.seed(), {7}));
    const auto pairs = build_validation_pairs(corpus, pool, cfg.validation_easy,
                                              cfg.validation_hard, derive_seed(cfg.seed(), {8}));
    const auto verdicts = judge_pairs(pairs, corpus, *judge, derive_seed(cfg.seed(), {9}));
    const auto report = agreement_rate(pairs, verdicts, judge->name());
    o.write(join(dir, "judge_validation.json"), report_json(report, cfg.seed()));
    const std::string text = report_text(report, cfg.seed());
    o.write(join(dir, "judge_validation.txt"), text);
    o.out << text;
    return kExitOk;
  }

  const auto ckpt = load_stage_checkpoint(cfg, corpus, "stage3");
  if (o.dry_run) return kExitOk;
  auto judge = make_judge(cfg, corpus.lexicon);
  if (sub == "contexts") {
    const auto table = compare_contexts(ckpt, corpus, *judge, cfg.eval);
    o.write(join(dir, "contexts.json"), report_json(table));
    const std::string text = report_text(table);
    o.write(join(dir, "contexts.txt"), text);
    o.out << text;
    return kExitOk;
  }

  std::vector<SampleEvaluation> humans;
  if (!cfg.human_scores.empty()) humans = import_human_scores(cfg.human_scores, corpus);
  json sections = json::array();
  std::string text;
  for (CultureContext ctx : eval_contexts(cfg)) {
    const auto judged = evaluate_policy(ckpt.params, corpus, corpus.split.benchmark_ids, ctx,
                                        ctx, *judge, cfg.eval);
    const std::uint64_t split_seed = derive_seed(cfg.seed(), {static_cast<std::uint64_t>(ctx)});
    std::vector<SampleEvaluation> human_ctx;
    for (const auto& h : humans) {
      if (h.context == ctx) human_ctx.push_back(h);
    }
    const double fraction = cfg.human_scores.empty() ? 0.0 : cfg.human_fraction;
    const auto merged = merge_hybrid(judged, human_ctx, fraction, split_seed);
    const auto report = aggregate_hybrid(merged, fraction, split_seed);
    const std::string lang(language_tag(ctx));
    json section = json::parse(report_json(report, cfg.seed(), lang));
    section["context"] = to_string(ctx);
    section["human_fraction"] = fraction;
    sections.push_back(section);
    text += std::string(to_string(ctx)) + "\n" + report_text(report, cfg.seed(), lang);
  }
  json doc = {{"seed", cfg.seed()}, {"checkpoint_stage", ckpt.stage}, {"sections", sections}};
  o.write(join(dir, "report.json"), doc.dump(2) + "\n");
  o.write(join(dir, "report.txt"), text);
  o.out << text;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"culcap: culture-aware humorous captioning pipeline"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  bool dry_run = false;
  app.add_option("--config", config_path, "key = value config file");
  app.add_flag("--dry-run", dry_run, "echo the resolved config and write nothing");

  std::map<std::string, std::string> overrides;
  std::vector<std::string> key_order;
  for (const auto& k : config_keys(cfg)) {
    key_order.push_back(k.name);
    app.add_option("--" + k.name, overrides[k.name], k.help);
  }

  std::string command, sub;
  auto add_group = [&](const std::string& name, const std::string& help,
                       std::vector<std::pair<std::string, std::string>> subs) {
    auto* group = app.add_subcommand(name, help);
    group->require_subcommand(1);
    for (const auto& [s, about] : subs) {
      group->add_subcommand(s, about)->callback([&command, &sub, name, s] {
        command = name;
        sub = s;
      });
    }
  };
  add_group("data", "validate or synthesize a corpus", {{"validate", "check a corpus directory"}, {"synth", "write a seeded synthetic corpus"}});
  add_group("train", "run one training stage", {{"stage1", "Western SFT"},
                                                      {"stage2", "judge-ranked GRPO with repulsion"},
                                                      {"stage3", "Eastern adaptation with replay"}});
  add_group("eval", "evaluation reports", {{"run", "six-dimension benchmark report"},
                                                  {"contexts", "none / Western / Eastern context table"},
                                                  {"ablate", "train and score the ablation ladder"},
                                                  {"judge-validate", "judge agreement on easy and hard pairs"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error[USAGE]: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& name : key_order) {
      if (app.get_option("--" + name)->count() > 0) {
        set_config_value(cfg, name, overrides[name]);
      }
    }
    cfg.validate();
    Outputs o{out, dry_run, {}};
    if (dry_run) out << "# dry run: " << command << " " << sub << "\n" << cfg.echo();
    int code = kExitOk;
    if (command == "data") code = cmd_data(sub, cfg, o);
    if (command == "train") code = cmd_train(sub, cfg, o);
    if (command == "eval") code = cmd_eval(sub, cfg, o);
    for (const auto& p : o.planned) out << "# would write " << p << "\n";
    return code;
  } catch (const Error& e) {
    err << "error[" << code_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error[INTERNAL]: " << e.what() << "\n";
    return kExitTraining;
  }
}

}  // namespace culcap
