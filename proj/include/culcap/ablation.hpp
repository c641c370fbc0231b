#pragma once

#include <string>
#include <vector>

#include "culcap/eval.hpp"
#include "culcap/trainer.hpp"

namespace culcap {

enum class AblationVariant { kBase, kSft, kSftGrpo, kSftGrpoDeg, kFull };

inline constexpr std::array<AblationVariant, 5> kAllVariants = {
    AblationVariant::kBase, AblationVariant::kSft, AblationVariant::kSftGrpo,
    AblationVariant::kSftGrpoDeg, AblationVariant::kFull};

std::string_view to_string(AblationVariant v);
AblationVariant parse_variant(std::string_view text);

struct AblationRow {
  AblationVariant variant = AblationVariant::kBase;
  CultureScores scores;
};

struct AblationTable {
  std::uint64_t seed = 0;
  std::vector<AblationRow> rows;
};

// Every variant starts from the same seed. sft+grpo trains stage 2 with
// lambda forced to 0; sft+grpo+deg uses the configured penalty; full adds
// stage 3. Shared prefixes are trained once.
AblationTable run_ablation(std::span<const AblationVariant> variants, const TrainConfig& config,
                           const Corpus& corpus, JudgeBackend& judge, TextEncoder& encoder,
                           const EvalConfig& eval);

std::string report_json(const AblationTable& table);
std::string report_text(const AblationTable& table);

}  // namespace culcap
