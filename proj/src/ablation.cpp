#include "culcap/ablation.hpp"

#include <cstdio>
#include <optional>

#include "json.hpp"

namespace culcap {

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::kBase: return "base";
    case AblationVariant::kSft: return "sft";
    case AblationVariant::kSftGrpo: return "sft+grpo";
    case AblationVariant::kSftGrpoDeg: return "sft+grpo+deg";
    case AblationVariant::kFull: return "full";
  }
  return "?";
}

AblationVariant parse_variant(std::string_view text) {
  for (auto v : kAllVariants) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorCode::kConfig, "unknown ablation variant '" + std::string(text) + "'");
}

AblationTable run_ablation(std::span<const AblationVariant> variants, const TrainConfig& config,
                           const Corpus& corpus, JudgeBackend& judge, TextEncoder& encoder,
                           const EvalConfig& eval) {
  config.validate();
  std::optional<StageState> sft, grpo, deg, full;
  auto need_sft = [&]() -> const StageState& {
    if (!sft) sft = run_stage1_sft(config, corpus);
    return *sft;
  };
  auto need_deg = [&]() -> const StageState& {
    if (!deg) deg = run_stage2_grpo(config, corpus, need_sft(), judge, encoder);
    return *deg;
  };

  AblationTable table;
  table.seed = config.seed;
  for (AblationVariant v : variants) {
    PolicyParams params;
    switch (v) {
      case AblationVariant::kBase:
        params = PolicyParams::zeros(corpus.lexicon.vocab, config.max_len);
        break;
      case AblationVariant::kSft:
        params = need_sft().params;
        break;
      case AblationVariant::kSftGrpo:
        if (!grpo) {
          TrainConfig no_penalty = config;
          no_penalty.penalty.lambda = 0.0;
          grpo = run_stage2_grpo(no_penalty, corpus, need_sft(), judge, encoder);
        }
        params = grpo->params;
        break;
      case AblationVariant::kSftGrpoDeg:
        params = need_deg().params;
        break;
      case AblationVariant::kFull:
        if (!full) full = run_stage3_adapt(config, corpus, need_deg());
        params = full->params;
        break;
    }
    table.rows.push_back({v, evaluate_benchmark(params, corpus, judge, eval)});
  }
  return table;
}

namespace {

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%-9.3f", v);
  return buf;
}

}  // namespace

std::string report_json(const AblationTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    auto side = [](const DimensionScore& s) {
      return nlohmann::json{{"ir", s.ir}, {"cf", s.cf}, {"hu", s.hu}, {"overall", s.overall()}};
    };
    rows.push_back({{"variant", to_string(r.variant)},
                    {"western", side(r.scores.western)},
                    {"eastern", side(r.scores.eastern)},
                    {"mean_cf", r.scores.mean_cf()}});
  }
  nlohmann::json j = {{"seed", table.seed}, {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string report_text(const AblationTable& table) {
  std::string out = "seed " + std::to_string(table.seed) + "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s%-36s%-36s\n", "", "Western", "Eastern");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-14s%-9s%-9s%-9s%-9s%-9s%-9s%-9s%-9s\n", "variant", "IR",
                "CF", "Hu", "Overall", "IR", "CF", "Hu", "Overall");
  out += buf;
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof(buf), "%-14s", std::string(to_string(r.variant)).c_str());
    out += buf;
    for (const DimensionScore* s : {&r.scores.western, &r.scores.eastern}) {
      out += cell(s->ir) + cell(s->cf) + cell(s->hu) + cell(s->overall());
    }
    out += "\n";
  }
  return out;
}

}  // namespace culcap
