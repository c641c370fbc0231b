#include "culcap/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace culcap {

using nlohmann::json;

std::string_view to_string(ScoreSource source) {
  return source == ScoreSource::kHuman ? "human" : "judge";
}

std::string_view to_string(Difficulty d) { return d == Difficulty::kEasy ? "easy" : "hard"; }

std::string SampleEvaluation::key() const {
  return image_id + "/" + std::string(culcap::to_string(context));
}

DimensionScore score_sample(JudgeBackend& judge, const Lexicon& lexicon,
                            const ImageRecord& image, CultureContext context,
                            std::span<const TokenId> caption,
                            std::span<const TokenId> reference) {
  if (caption_body(caption, lexicon.vocab.eos()).empty()) {
    throw Error(ErrorCode::kEmptySequence, "cannot score an empty caption");
  }
  return judge.score(image, context, caption, reference);
}

namespace {

DimensionScore scaled(DimensionScore s, double f) {
  for (std::size_t d = 0; d < kNumDimensions; ++d) s[d] *= f;
  return s;
}

DimensionScore plus(DimensionScore a, const DimensionScore& b) {
  for (std::size_t d = 0; d < kNumDimensions; ++d) a[d] += b[d];
  return a;
}

const std::vector<std::string>& require_benchmark_references(const Corpus& corpus) {
  const auto& ids = corpus.split.benchmark_ids;
  for (const auto& id : ids) {
    for (CultureContext c : {CultureContext::kWestern, CultureContext::kEastern}) {
      if (!corpus.reference(id, c)) {
        throw Error(ErrorCode::kMissingReference, "benchmark image " + id + " has no " +
                                                      std::string(to_string(c)) + " reference");
      }
    }
  }
  return ids;
}

}  // namespace

std::vector<SampleEvaluation> evaluate_policy(const PolicyParams& params, const Corpus& corpus,
                                              std::span<const std::string> image_ids,
                                              CultureContext generate, CultureContext target,
                                              JudgeBackend& judge, const EvalConfig& config) {
  if (config.samples_per_image == 0) {
    throw Error(ErrorCode::kConfig, "eval_samples must be positive");
  }
  const std::size_t n = config.samples_per_image;
  std::vector<SampleEvaluation> out;
  out.reserve(image_ids.size());
  for (std::size_t idx = 0; idx < image_ids.size(); ++idx) {
    const ImageRecord& image = corpus.image(image_ids[idx]);
    const auto ref = corpus.reference(image.image_id, target);
    const TokenSeq ref_text = ref ? ref->text : TokenSeq{};
    Condition cond{image.descriptor_tokens, generate};
    auto samples = sample_rollouts(params, cond, std::max<std::size_t>(2, n),
                                   config.temperature, derive_seed(config.seed, {idx}));
    SampleEvaluation ev;
    ev.image_id = image.image_id;
    ev.context = target;
    ev.caption = samples.front().tokens;
    DimensionScore sum;
    for (std::size_t s = 0; s < n; ++s) {
      sum = plus(sum, judge.score(image, target, samples[s].tokens, ref_text));
    }
    ev.scores = scaled(sum, 1.0 / static_cast<double>(n));
    out.push_back(std::move(ev));
  }
  return out;
}

DimensionScore mean_scores(std::span<const SampleEvaluation> evals) {
  DimensionScore sum;
  if (evals.empty()) return sum;
  for (const auto& e : evals) sum = plus(sum, e.scores);
  return scaled(sum, 1.0 / static_cast<double>(evals.size()));
}

std::set<std::string> select_human_subset(std::vector<std::string> keys, double fraction,
                                          std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "human_fraction must be in [0, 1]");
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  const auto count = static_cast<std::size_t>(
      std::llround(static_cast<double>(keys.size()) * fraction));
  Rng rng(seed);
  seeded_shuffle(keys, rng);
  return std::set<std::string>(keys.begin(), keys.begin() + static_cast<long>(count));
}

AggregateReport aggregate_hybrid(std::span<const SampleEvaluation> evals, double human_fraction,
                                 std::uint64_t seed) {
  struct Group {
    std::vector<const SampleEvaluation*> human;
    std::vector<const SampleEvaluation*> judge;
  };
  std::map<std::string, Group> groups;
  for (const auto& e : evals) {
    auto& g = groups[e.key()];
    (e.source == ScoreSource::kHuman ? g.human : g.judge).push_back(&e);
  }
  std::vector<std::string> keys;
  for (const auto& [k, g] : groups) keys.push_back(k);
  const auto subset = select_human_subset(keys, human_fraction, seed);

  AggregateReport report;
  report.records = evals.size();
  DimensionScore sum;
  for (const auto& [key, g] : groups) {
    const bool human = subset.count(key) != 0;
    if (human && (!g.judge.empty() || g.human.empty())) {
      throw Error(ErrorCode::kSourceConflict,
                  "sample " + key + " is in the human subset but has judge scores");
    }
    if (!human && (!g.human.empty() || g.judge.size() != 1)) {
      throw Error(ErrorCode::kSourceConflict,
                  "sample " + key + " must have exactly one judge score and no human score");
    }
    DimensionScore s;
    const auto& records = human ? g.human : g.judge;
    for (const auto* r : records) s = plus(s, r->scores);
    sum = plus(sum, scaled(s, 1.0 / static_cast<double>(records.size())));
    (human ? report.human_samples : report.judge_samples) += 1;
  }
  if (!groups.empty()) report.mean = scaled(sum, 1.0 / static_cast<double>(groups.size()));
  report.overall = report.mean.overall();
  return report;
}

std::vector<SampleEvaluation> merge_hybrid(std::span<const SampleEvaluation> judge_evals,
                                           std::span<const SampleEvaluation> human_evals,
                                           double human_fraction, std::uint64_t seed) {
  std::vector<std::string> keys;
  for (const auto& e : judge_evals) keys.push_back(e.key());
  const auto subset = select_human_subset(keys, human_fraction, seed);
  std::vector<SampleEvaluation> out;
  std::set<std::string> covered;
  for (const auto& h : human_evals) {
    if (subset.count(h.key()) == 0) continue;
    out.push_back(h);
    covered.insert(h.key());
  }
  for (const auto& key : subset) {
    if (covered.count(key) == 0) {
      throw Error(ErrorCode::kSourceConflict, "sample " + key + " has no human score");
    }
  }
  for (const auto& e : judge_evals) {
    if (subset.count(e.key()) == 0) out.push_back(e);
  }
  return out;
}

std::vector<SampleEvaluation> import_human_scores(const std::string& path,
                                                  const Corpus& corpus) {
  return parse_human_scores(read_file(path), corpus, path);
}

std::vector<SampleEvaluation> parse_human_scores(std::string_view text, const Corpus& corpus,
                                                 const std::string& origin) {
  static const std::string kHeader = "image_id,context,ir,cf,sr,ra,hu,cr,annotator";
  std::vector<SampleEvaluation> out;
  std::set<std::tuple<std::string, CultureContext, std::string>> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = origin + ":" + std::to_string(lineno);
    if (!header_seen) {
      if (line != kHeader) {
        throw Error(ErrorCode::kMalformedLine, where + ": expected header " + kHeader);
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 9) {
      throw Error(ErrorCode::kMalformedLine,
                  where + ": expected 9 fields, got " + std::to_string(fields.size()));
    }
    SampleEvaluation ev;
    ev.image_id = fields[0];
    ev.source = ScoreSource::kHuman;
    try {
      ev.context = parse_context(fields[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedLine, where + ": " + e.what());
    }
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      const std::string& f = fields[2 + d];
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f.size()) {
        throw Error(ErrorCode::kMalformedLine,
                    where + ": " + std::string(kDimensionKeys[d]) + " is not a number");
      }
      if (!(v >= 0.0 && v <= 10.0)) {
        throw Error(ErrorCode::kRangeError, where + ": " + std::string(kDimensionKeys[d]) +
                                                " = " + f + " outside [0, 10]");
      }
      ev.scores[d] = v;
    }
    ev.annotator = fields[8];
    if (ev.annotator.empty()) throw Error(ErrorCode::kMalformedLine, where + ": empty annotator");
    if (!corpus.has_image(ev.image_id)) {
      throw Error(ErrorCode::kUnknownImage, where + ": unknown image " + ev.image_id);
    }
    if (!seen.emplace(ev.image_id, ev.context, ev.annotator).second) {
      throw Error(ErrorCode::kDuplicateScore, where + ": duplicate score for " + ev.key() +
                                                  " by " + ev.annotator);
    }
    out.push_back(std::move(ev));
  }
  if (!header_seen) throw Error(ErrorCode::kMalformedLine, origin + ": missing header");
  return out;
}

void check_benchmark_hygiene(std::span<const std::string> trained_images,
                             const DatasetSplit& split) {
  std::size_t leaked = 0;
  std::string first;
  for (const auto& id : trained_images) {
    if (split.is_benchmark(id)) {
      if (leaked++ == 0) first = id;
    }
  }
  if (leaked > 0) {
    throw Error(ErrorCode::kBenchmarkLeak, std::to_string(leaked) +
                                               " benchmark image(s) used in training, e.g. " +
                                               first);
  }
}

std::vector<std::string> transcript_images(std::string_view transcript_jsonl) {
  std::set<std::string> ids;
  std::istringstream in{std::string(transcript_jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw Error(ErrorCode::kMalformedLine, "transcript line " + std::to_string(lineno) +
                                                 " is not valid JSON");
    }
    if (j.contains("images") && j["images"].is_array()) {
      for (const auto& id : j["images"]) ids.insert(id.get<std::string>());
    }
  }
  return {ids.begin(), ids.end()};
}

const ContextCell& ContextComparison::cell(CultureContext condition) const {
  for (const auto& c : cells) {
    if (c.condition == condition) return c;
  }
  throw Error(ErrorCode::kInvalidArgument, "no cell for condition");
}

ContextComparison compare_contexts(const CheckpointRecord& checkpoint, const Corpus& corpus,
                                   JudgeBackend& judge, const EvalConfig& config) {
  check_benchmark_hygiene(checkpoint.trained_images, corpus.split);
  const auto& ids = require_benchmark_references(corpus);
  ContextComparison table;
  table.seed = config.seed;
  table.images = ids.size();
  for (CultureContext cond : kAllContexts) {
    ContextCell cell;
    cell.condition = cond;
    if (cond == CultureContext::kNone) {
      for (CultureContext target : {CultureContext::kWestern, CultureContext::kEastern}) {
        cell.per_target[target] = mean_scores(
            evaluate_policy(checkpoint.params, corpus, ids, cond, target, judge, config));
      }
      cell.scores = scaled(plus(cell.per_target[CultureContext::kWestern],
                                cell.per_target[CultureContext::kEastern]),
                           0.5);
    } else {
      cell.scores =
          mean_scores(evaluate_policy(checkpoint.params, corpus, ids, cond, cond, judge, config));
      cell.per_target[cond] = cell.scores;
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

CultureScores evaluate_benchmark(const PolicyParams& params, const Corpus& corpus,
                                 JudgeBackend& judge, const EvalConfig& config) {
  const auto& ids = require_benchmark_references(corpus);
  CultureScores out;
  out.western = mean_scores(evaluate_policy(params, corpus, ids, CultureContext::kWestern,
                                            CultureContext::kWestern, judge, config));
  out.eastern = mean_scores(evaluate_policy(params, corpus, ids, CultureContext::kEastern,
                                            CultureContext::kEastern, judge, config));
  return out;
}

std::vector<JudgeValidationPair> build_validation_pairs(
    const Corpus& corpus, std::span<const LowQualityCaption> pool, std::size_t easy,
    std::size_t hard, std::uint64_t seed) {
  const SimJudgeWeights weights;
  const TokenId eos = corpus.lexicon.vocab.eos();
  struct Candidate {
    std::size_t index;
    double total;
    TokenSeq reference;
  };
  std::vector<Candidate> kept;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& low = pool[i];
    const ImageRecord& image = corpus.image(low.image_id);
    const auto ref = corpus.reference(low.image_id, low.context);
    if (!ref) {
      throw Error(ErrorCode::kMissingReference, "no " + std::string(to_string(low.context)) +
                                                    " reference for " + low.image_id);
    }
    const auto body = caption_body(low.caption, eos);
    if (std::equal(body.begin(), body.end(), ref->text.begin(), ref->text.end())) continue;
    const double low_total =
        simulated_score(corpus.lexicon, image, low.context, body, weights).total;
    const double ref_total =
        simulated_score(corpus.lexicon, image, low.context, ref->text, weights).total;
    if (low_total < ref_total) kept.push_back({i, low_total, ref->text});
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const Candidate& a, const Candidate& b) { return a.total < b.total; });
  const std::size_t third = kept.size() / 3;
  if (easy > third || hard > third) {
    throw Error(ErrorCode::kInsufficientPool,
                "validation pool tercile has " + std::to_string(third) + " captions; need " +
                    std::to_string(std::max(easy, hard)));
  }
  std::vector<std::size_t> bottom, top;
  for (std::size_t i = 0; i < third; ++i) {
    bottom.push_back(i);
    top.push_back(kept.size() - third + i);
  }
  Rng rng(seed);
  seeded_shuffle(bottom, rng);
  seeded_shuffle(top, rng);

  std::vector<JudgeValidationPair> out;
  auto emit = [&](std::size_t k, Difficulty d) {
    const Candidate& c = kept[k];
    const auto& low = pool[c.index];
    JudgeValidationPair p;
    p.image_id = low.image_id;
    p.context = low.context;
    p.difficulty = d;
    const auto body = caption_body(low.caption, eos);
    TokenSeq low_text(body.begin(), body.end());
    if (uniform01(rng) < 0.5) {
      p.gold = PairwiseVerdict::Choice::kFirst;
      p.first = c.reference;
      p.second = std::move(low_text);
    } else {
      p.gold = PairwiseVerdict::Choice::kSecond;
      p.first = std::move(low_text);
      p.second = c.reference;
    }
    out.push_back(std::move(p));
  };
  for (std::size_t i = 0; i < easy; ++i) emit(bottom[i], Difficulty::kEasy);
  for (std::size_t i = 0; i < hard; ++i) emit(top[i], Difficulty::kHard);
  return out;
}

std::vector<LowQualityCaption> sample_low_quality_pool(const PolicyParams& params,
                                                       const Corpus& corpus,
                                                       std::size_t per_image, double temperature,
                                                       std::uint64_t seed) {
  const TokenId eos = corpus.lexicon.vocab.eos();
  std::vector<LowQualityCaption> out;
  const auto& ids = corpus.split.benchmark_ids;
  for (std::size_t idx = 0; idx < ids.size(); ++idx) {
    const ImageRecord& image = corpus.image(ids[idx]);
    for (CultureContext ctx : {CultureContext::kWestern, CultureContext::kEastern}) {
      Condition cond{image.descriptor_tokens, ctx};
      auto samples = sample_rollouts(params, cond, std::max<std::size_t>(2, per_image),
                                     temperature,
                                     derive_seed(seed, {idx, static_cast<std::uint64_t>(ctx)}));
      for (std::size_t s = 0; s < per_image; ++s) {
        if (caption_body(samples[s].tokens, eos).empty()) continue;
        out.push_back({image.image_id, ctx, samples[s].tokens});
      }
    }
  }
  return out;
}

std::vector<PairwiseVerdict> judge_pairs(std::span<const JudgeValidationPair> pairs,
                                         const Corpus& corpus, JudgeBackend& judge,
                                         std::uint64_t seed) {
  std::vector<PairwiseVerdict> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    out.push_back(judge.compare(corpus.image(p.image_id), p.context, p.first, p.second,
                                derive_seed(seed, {i})));
  }
  return out;
}

AgreementReport agreement_rate(std::span<const JudgeValidationPair> pairs,
                               std::span<const PairwiseVerdict> verdicts,
                               const std::string& judge_name) {
  if (pairs.size() != verdicts.size()) {
    throw Error(ErrorCode::kMissingVerdict, std::to_string(pairs.size()) + " pairs but " +
                                                std::to_string(verdicts.size()) + " verdicts");
  }
  AgreementReport r;
  r.judge = judge_name;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool ok = verdicts[i].chosen == pairs[i].gold;
    const Difficulty d = pairs[i].difficulty;
    for (AgreementCell* c : {&r.by_language[{std::string(language_tag(pairs[i].context)), d}],
                             d == Difficulty::kEasy ? &r.easy : &r.hard, &r.overall}) {
      c->total += 1;
      c->correct += ok ? 1 : 0;
    }
  }
  return r;
}

namespace {

json scores_json(const DimensionScore& s) {
  json j;
  for (std::size_t d = 0; d < kNumDimensions; ++d) j[std::string(kDimensionKeys[d])] = s[d];
  j["overall"] = s.overall();
  return j;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string score_row(const std::string& label, const DimensionScore& s) {
  std::string row = pad(label, 12);
  for (std::size_t d = 0; d < kNumDimensions; ++d) row += pad(fmt("%.3f", s[d]), 8);
  row += fmt("%.3f", s.overall());
  return row + "\n";
}

std::string score_header() {
  std::string row = pad("", 12);
  for (auto l : kDimensionLabels) row += pad(std::string(l), 8);
  return row + "Overall\n";
}

}  // namespace

std::string report_json(const AggregateReport& report, std::uint64_t seed,
                        const std::string& language) {
  json j = {{"seed", seed},
            {"language", language},
            {"scores", scores_json(report.mean)},
            {"overall", report.overall},
            {"human_samples", report.human_samples},
            {"judge_samples", report.judge_samples},
            {"records", report.records}};
  return j.dump(2) + "\n";
}

std::string report_text(const AggregateReport& report, std::uint64_t seed,
                        const std::string& language) {
  std::string out = "seed " + std::to_string(seed) + "  language " + language + "  samples " +
                    std::to_string(report.human_samples + report.judge_samples) + " (human " +
                    std::to_string(report.human_samples) + ", judge " +
                    std::to_string(report.judge_samples) + ")\n";
  out += score_header();
  out += score_row("mean", report.mean);
  return out;
}

std::string report_json(const ContextComparison& table) {
  json cells = json::array();
  for (const auto& c : table.cells) {
    json per = json::object();
    for (const auto& [t, s] : c.per_target) per[std::string(to_string(t))] = scores_json(s);
    cells.push_back({{"condition", to_string(c.condition)},
                     {"cf", c.scores.cf},
                     {"overall", c.scores.overall()},
                     {"scores", scores_json(c.scores)},
                     {"per_target", per}});
  }
  json j = {{"seed", table.seed}, {"images", table.images}, {"conditions", cells}};
  return j.dump(2) + "\n";
}

std::string report_text(const ContextComparison& table) {
  std::string out = "seed " + std::to_string(table.seed) + "  images " +
                    std::to_string(table.images) + "\n";
  out += pad("", 10);
  for (const auto& c : table.cells) out += pad(std::string(to_string(c.condition)), 18);
  out += "\n" + pad("", 10);
  for (std::size_t i = 0; i < table.cells.size(); ++i) out += pad("CF", 9) + pad("Overall", 9);
  out += "\n" + pad("score", 10);
  for (const auto& c : table.cells) {
    out += pad(fmt("%.3f", c.scores.cf), 9) + pad(fmt("%.3f", c.scores.overall()), 9);
  }
  out += "\n";
  return out;
}

std::string report_json(const AgreementReport& report, std::uint64_t seed) {
  auto cell = [](const AgreementCell& c) {
    return json{{"correct", c.correct}, {"total", c.total}, {"rate", c.rate()}};
  };
  json langs = json::array();
  for (const auto& [k, c] : report.by_language) {
    json e = cell(c);
    e["language"] = k.first;
    e["difficulty"] = to_string(k.second);
    langs.push_back(e);
  }
  json j = {{"seed", seed},          {"judge", report.judge},
            {"easy", cell(report.easy)}, {"hard", cell(report.hard)},
            {"overall", cell(report.overall)}, {"by_language", langs}};
  return j.dump(2) + "\n";
}

std::string report_text(const AgreementReport& report, std::uint64_t seed) {
  std::string out = "seed " + std::to_string(seed) + "  judge " + report.judge + "\n";
  out += pad("split", 14) + pad("correct", 9) + pad("total", 9) + "rate\n";
  auto row = [&](const std::string& name, const AgreementCell& c) {
    out += pad(name, 14) + pad(std::to_string(c.correct), 9) + pad(std::to_string(c.total), 9) +
           fmt("%.4f", c.rate()) + "\n";
  };
  for (const auto& [k, c] : report.by_language) {
    row(k.first + "/" + std::string(to_string(k.second)), c);
  }
  row("easy", report.easy);
  row("hard", report.hard);
  row("overall", report.overall);
  return out;
}

}  // namespace culcap
