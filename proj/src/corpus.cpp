#include "culcap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"

namespace culcap {

using nlohmann::json;

std::string_view to_string(CaptionRole role) {
  switch (role) {
    case CaptionRole::kTraining: return "training";
    case CaptionRole::kReference: return "reference";
    case CaptionRole::kRefusal: return "refusal";
  }
  return "training";
}

CaptionRole parse_role(std::string_view text) {
  if (text == "training") return CaptionRole::kTraining;
  if (text == "reference") return CaptionRole::kReference;
  if (text == "refusal") return CaptionRole::kRefusal;
  throw Error(ErrorCode::kInvalidRecord,
              "unknown caption role '" + std::string(text) + "'");
}

DatasetSplit::Part DatasetSplit::part_of(const std::string& image_id) const {
  auto it = membership_.find(image_id);
  return it == membership_.end() ? Part::kNone : it->second;
}

void DatasetSplit::validate() {
  membership_.clear();
  const std::array<std::pair<const std::vector<std::string>*, Part>, 3> sets = {
      {{&train_ids, Part::kTrain}, {&dev_ids, Part::kDev},
       {&benchmark_ids, Part::kBenchmark}}};
  const std::array<std::string_view, 3> names = {"train", "dev", "benchmark"};
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& id : *sets[s].first) {
      auto [it, inserted] = membership_.emplace(id, sets[s].second);
      if (inserted) continue;
      if (it->second == sets[s].second) {
        throw Error(ErrorCode::kDuplicateId, "image id '" + id +
                                                 "' listed twice in " +
                                                 std::string(names[s]));
      }
      throw Error(ErrorCode::kSplitOverlap,
                  "image id '" + id + "' appears in " +
                      std::string(names[static_cast<std::size_t>(it->second)]) +
                      " and " + std::string(names[s]));
    }
  }
  SplitCounts actual{train_ids.size(), dev_ids.size(), benchmark_ids.size()};
  if (!(actual == declared_counts)) {
    std::ostringstream msg;
    msg << "split sizes (" << actual.train << ", " << actual.dev << ", "
        << actual.benchmark << ") differ from declared ("
        << declared_counts.train << ", " << declared_counts.dev << ", "
        << declared_counts.benchmark << ")";
    throw Error(ErrorCode::kSplitCountMismatch, msg.str());
  }
}

const ImageRecord& Corpus::image(const std::string& image_id) const {
  auto it = image_index_.find(image_id);
  if (it == image_index_.end()) {
    throw Error(ErrorCode::kUnknownImage, "unknown image id '" + image_id + "'");
  }
  return images[it->second];
}

std::optional<CaptionRecord> Corpus::reference(const std::string& image_id,
                                               CultureContext context) const {
  auto it = reference_index_.find({image_id, context});
  if (it == reference_index_.end()) return std::nullopt;
  return captions[it->second];
}

std::vector<const DegradationAnnotation*> Corpus::annotations_for(
    const std::string& sample_id) const {
  std::vector<const DegradationAnnotation*> out;
  for (const auto& a : degradations) {
    if (a.sample_id == sample_id) out.push_back(&a);
  }
  return out;
}

void Corpus::add_image(ImageRecord record) {
  auto [it, inserted] = image_index_.emplace(record.image_id, images.size());
  if (!inserted) {
    throw Error(ErrorCode::kDuplicateId,
                "duplicate image id '" + record.image_id + "'");
  }
  images.push_back(std::move(record));
}

void Corpus::reindex() {
  image_index_.clear();
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto [it, inserted] = image_index_.emplace(images[i].image_id, i);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate image id '" + images[i].image_id + "'");
    }
  }
  reference_index_.clear();
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (captions[i].role == CaptionRole::kReference) {
      reference_index_.emplace(std::make_pair(captions[i].image_id, captions[i].context), i);
    }
  }
}

namespace {

struct LineContext {
  std::string file;
  std::size_t line = 0;
  std::string where() const { return file + ":" + std::to_string(line); }
};

TokenSeq encode_tokens(const Vocabulary& vocab, const json& arr,
                       const LineContext& ctx) {
  if (!arr.is_array()) {
    throw Error(ErrorCode::kMalformedLine,
                ctx.where() + ": expected an array of tokens");
  }
  TokenSeq out;
  out.reserve(arr.size());
  for (const auto& t : arr) {
    if (!t.is_string()) {
      throw Error(ErrorCode::kMalformedLine,
                  ctx.where() + ": token is not a string");
    }
    auto id = vocab.find(t.get<std::string>());
    if (!id) {
      throw Error(ErrorCode::kUnknownToken, ctx.where() + ": unknown token '" +
                                                t.get<std::string>() + "'");
    }
    out.push_back(*id);
  }
  return out;
}

json tokens_json(const Vocabulary& vocab, const TokenSeq& seq) {
  json arr = json::array();
  for (TokenId t : seq) arr.push_back(vocab.token(t));
  return arr;
}

// Calls fn(json, LineContext) for every non-blank line of a JSONL file.
template <typename Fn>
std::size_t for_each_jsonl(const std::string& path, const std::string& name,
                           std::string* raw, Fn&& fn) {
  std::string contents = read_file(path);
  if (raw) *raw = contents;
  std::istringstream in(contents);
  std::string line;
  LineContext ctx{name, 0};
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++ctx.line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedLine,
                  ctx.where() + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::kMalformedLine,
                  ctx.where() + ": expected a JSON object");
    }
    try {
      fn(j, ctx);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedLine,
                  ctx.where() + ": " + std::string(e.what()));
    }
    ++records;
  }
  return records;
}

Lexicon load_lexicon(const std::string& path, std::string* raw) {
  std::string contents = read_file(path);
  if (raw) *raw = contents;
  json j;
  try {
    j = json::parse(contents);
    std::vector<std::string> tokens = j.at("tokens").get<std::vector<std::string>>();
    Lexicon lex{Vocabulary(std::move(tokens)), {}, {}};
    LineContext ctx{"vocab.json", 1};
    lex.western_markers = encode_tokens(lex.vocab, j.at("markers").at("western"), ctx);
    lex.eastern_markers = encode_tokens(lex.vocab, j.at("markers").at("eastern"), ctx);
    for (TokenId w : lex.western_markers) {
      if (lex.is_marker(w, CultureContext::kEastern)) {
        throw Error(ErrorCode::kInvalidRecord,
                    "vocab.json: marker '" + lex.vocab.token(w) +
                        "' is both western and eastern");
      }
    }
    return lex;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine,
                "vocab.json: " + std::string(e.what()));
  }
}

}  // namespace

Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus corpus;
  std::string raw_all;
  std::string raw;

  corpus.lexicon = load_lexicon((fs::path(dir) / "vocab.json").string(), &raw);
  raw_all += raw;
  const Vocabulary& vocab = corpus.lexicon.vocab;

  for_each_jsonl((fs::path(dir) / "images.jsonl").string(), "images.jsonl", &raw,
                 [&](const json& j, const LineContext& ctx) {
                   ImageRecord rec;
                   rec.image_id = j.at("image_id").get<std::string>();
                   rec.descriptor_tokens =
                       encode_tokens(vocab, j.at("descriptor_tokens"), ctx);
                   if (rec.descriptor_tokens.empty()) {
                     throw Error(ErrorCode::kInvalidRecord,
                                 ctx.where() + ": empty descriptor_tokens");
                   }
                   if (j.contains("source_uri") && !j["source_uri"].is_null()) {
                     rec.source_uri = j["source_uri"].get<std::string>();
                   }
                   if (corpus.has_image(rec.image_id)) {
                     throw Error(ErrorCode::kDuplicateId,
                                 ctx.where() + ": duplicate image id '" +
                                     rec.image_id + "'");
                   }
                   corpus.add_image(std::move(rec));
                 });
  raw_all += raw;

  const TokenSeq refusal = corpus.lexicon.refusal_tokens();
  std::size_t n_captions = for_each_jsonl(
      (fs::path(dir) / "captions.jsonl").string(), "captions.jsonl", &raw,
      [&](const json& j, const LineContext& ctx) {
        CaptionRecord rec;
        rec.image_id = j.at("image_id").get<std::string>();
        if (!corpus.has_image(rec.image_id)) {
          throw Error(ErrorCode::kUnknownImage, ctx.where() +
                                                    ": unknown image id '" +
                                                    rec.image_id + "'");
        }
        try {
          rec.context = parse_context(j.at("context").get<std::string>());
          rec.role = parse_role(j.at("role").get<std::string>());
        } catch (const Error& e) {
          throw Error(ErrorCode::kMalformedLine, ctx.where() + ": " + e.what());
        }
        rec.text = encode_tokens(vocab, j.at("text"), ctx);
        if (rec.text.empty()) {
          throw Error(ErrorCode::kInvalidRecord, ctx.where() + ": empty caption");
        }
        if (rec.role == CaptionRole::kRefusal && rec.text != refusal) {
          throw Error(ErrorCode::kInvalidRecord,
                      ctx.where() + ": refusal text differs from the template");
        }
        corpus.captions.push_back(std::move(rec));
      });
  raw_all += raw;
  if (n_captions == 0) {
    corpus.warnings.push_back("captions.jsonl contains no records");
  }

  const auto deg_path = fs::path(dir) / "degradations.jsonl";
  if (fs::exists(deg_path)) {
    for_each_jsonl(deg_path.string(), "degradations.jsonl", &raw,
                   [&](const json& j, const LineContext& ctx) {
                     DegradationAnnotation a;
                     a.sample_id = j.at("sample_id").get<std::string>();
                     a.direction_id = j.at("direction_id").get<std::string>();
                     for (const auto& ev : j.at("evidence")) {
                       a.evidence_texts.push_back(encode_tokens(vocab, ev, ctx));
                     }
                     if (a.evidence_texts.empty()) {
                       throw Error(ErrorCode::kInvalidRecord,
                                   ctx.where() + ": evidence list is empty");
                     }
                     a.weight = j.value("weight", 1.0);
                     if (!std::isfinite(a.weight) || a.weight < 0.0) {
                       throw Error(ErrorCode::kInvalidRecord,
                                   ctx.where() + ": weight must be finite and >= 0");
                     }
                     corpus.degradations.push_back(std::move(a));
                   });
    raw_all += raw;
  } else {
    corpus.warnings.push_back("degradations.jsonl not present");
  }

  std::string split_text = read_file((fs::path(dir) / "splits.json").string());
  raw_all += split_text;
  try {
    json j = json::parse(split_text);
    corpus.split.train_ids = j.at("train").get<std::vector<std::string>>();
    corpus.split.dev_ids = j.at("dev").get<std::vector<std::string>>();
    corpus.split.benchmark_ids = j.at("benchmark").get<std::vector<std::string>>();
    const json& dc = j.at("declared_counts");
    corpus.split.declared_counts = {dc.at("train").get<std::size_t>(),
                                    dc.at("dev").get<std::size_t>(),
                                    dc.at("benchmark").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, "splits.json: " + std::string(e.what()));
  }
  corpus.split.validate();
  for (const auto* ids : {&corpus.split.train_ids, &corpus.split.dev_ids,
                          &corpus.split.benchmark_ids}) {
    for (const auto& id : *ids) {
      if (!corpus.has_image(id)) {
        throw Error(ErrorCode::kUnknownImage,
                    "splits.json: unknown image id '" + id + "'");
      }
    }
  }

  std::set<std::pair<std::string, CultureContext>> refs;
  for (const auto& c : corpus.captions) {
    if (c.role == CaptionRole::kReference) refs.emplace(c.image_id, c.context);
  }
  std::size_t missing = 0;
  for (const auto& id : corpus.split.benchmark_ids) {
    for (auto ctx : {CultureContext::kWestern, CultureContext::kEastern}) {
      if (!refs.count({id, ctx})) ++missing;
    }
  }
  if (missing > 0) {
    corpus.warnings.push_back(std::to_string(missing) +
                              " benchmark (image, context) pairs lack a reference caption");
  }

  corpus.reindex();
  corpus.content_hash = fnv1a(raw_all);
  return corpus;
}

std::vector<std::pair<std::string, std::string>> serialize_corpus(
    const Corpus& corpus) {
  const Vocabulary& vocab = corpus.lexicon.vocab;
  std::vector<std::pair<std::string, std::string>> files;

  json v;
  v["tokens"] = vocab.tokens();
  v["markers"]["western"] = tokens_json(vocab, corpus.lexicon.western_markers);
  v["markers"]["eastern"] = tokens_json(vocab, corpus.lexicon.eastern_markers);
  files.emplace_back("vocab.json", v.dump(1) + "\n");

  std::string out;
  for (const auto& img : corpus.images) {
    json j;
    j["image_id"] = img.image_id;
    j["descriptor_tokens"] = tokens_json(vocab, img.descriptor_tokens);
    if (img.source_uri) j["source_uri"] = *img.source_uri;
    out += j.dump() + "\n";
  }
  files.emplace_back("images.jsonl", out);

  out.clear();
  for (const auto& c : corpus.captions) {
    json j;
    j["image_id"] = c.image_id;
    j["context"] = std::string(to_string(c.context));
    j["text"] = tokens_json(vocab, c.text);
    j["role"] = std::string(to_string(c.role));
    out += j.dump() + "\n";
  }
  files.emplace_back("captions.jsonl", out);

  out.clear();
  for (const auto& a : corpus.degradations) {
    json j;
    j["sample_id"] = a.sample_id;
    j["direction_id"] = a.direction_id;
    json ev = json::array();
    for (const auto& e : a.evidence_texts) ev.push_back(tokens_json(vocab, e));
    j["evidence"] = ev;
    j["weight"] = a.weight;
    out += j.dump() + "\n";
  }
  files.emplace_back("degradations.jsonl", out);

  json s;
  s["train"] = corpus.split.train_ids;
  s["dev"] = corpus.split.dev_ids;
  s["benchmark"] = corpus.split.benchmark_ids;
  s["declared_counts"] = {{"train", corpus.split.declared_counts.train},
                          {"dev", corpus.split.declared_counts.dev},
                          {"benchmark", corpus.split.declared_counts.benchmark}};
  files.emplace_back("splits.json", s.dump(1) + "\n");
  return files;
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  std::string all;
  for (const auto& [name, contents] : serialize_corpus(corpus)) all += contents;
  return fnv1a(all);
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  for (const auto& [name, contents] : serialize_corpus(corpus)) {
    write_file((std::filesystem::path(dir) / name).string(), contents);
  }
}

Stage3Pools stage3_pools(const Corpus& corpus) {
  std::set<std::string> western_images;
  for (const auto& c : corpus.captions) {
    if (c.role == CaptionRole::kTraining && c.context == CultureContext::kWestern &&
        corpus.split.part_of(c.image_id) == DatasetSplit::Part::kTrain) {
      western_images.insert(c.image_id);
    }
  }
  Stage3Pools pools;
  for (const auto& c : corpus.captions) {
    if (c.role != CaptionRole::kTraining ||
        corpus.split.part_of(c.image_id) != DatasetSplit::Part::kTrain) {
      continue;
    }
    if (c.context == CultureContext::kWestern) {
      pools.western_replay.push_back(c);
    } else if (c.context == CultureContext::kEastern) {
      if (western_images.count(c.image_id)) {
        pools.paired_eastern.push_back(c);
      } else {
        pools.new_eastern.push_back(c);
      }
    }
  }
  return pools;
}

std::array<std::size_t, 3> mixture_counts(std::size_t total,
                                          const StageMixture& mixture) {
  const std::array<double, 3> fracs = {mixture.new_eastern_frac,
                                       mixture.paired_eastern_frac,
                                       mixture.western_replay_frac};
  double sum = 0.0;
  for (double f : fracs) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::kMixtureSum, "mixture fractions must lie in [0, 1]");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kMixtureSum,
                "mixture fractions sum to " + std::to_string(sum) + ", not 1");
  }
  std::array<long long, 3> counts{};
  long long assigned = 0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    counts[i] = std::llround(static_cast<double>(total) * fracs[i]);
    assigned += counts[i];
    if (fracs[i] > fracs[largest]) largest = i;
  }
  counts[largest] += static_cast<long long>(total) - assigned;
  if (counts[largest] < 0) counts[largest] = 0;
  return {static_cast<std::size_t>(counts[0]), static_cast<std::size_t>(counts[1]),
          static_cast<std::size_t>(counts[2])};
}

std::vector<CaptionRecord> build_stage3_mixture(std::size_t total,
                                                const StageMixture& mixture,
                                                const Stage3Pools& pools,
                                                std::uint64_t seed) {
  const auto counts = mixture_counts(total, mixture);
  const std::array<const std::vector<CaptionRecord>*, 3> sources = {
      &pools.new_eastern, &pools.paired_eastern, &pools.western_replay};
  const std::array<std::string_view, 3> names = {"new-Eastern", "paired-Eastern",
                                                 "Western replay"};
  std::vector<CaptionRecord> out;
  out.reserve(total);
  for (std::size_t k = 0; k < 3; ++k) {
    if (sources[k]->size() < counts[k]) {
      throw Error(ErrorCode::kInsufficientPool,
                  std::string(names[k]) + " pool has " +
                      std::to_string(sources[k]->size()) + " records, need " +
                      std::to_string(counts[k]));
    }
    std::vector<std::size_t> order(sources[k]->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, {k}));
    seeded_shuffle(order, rng);
    for (std::size_t i = 0; i < counts[k]; ++i) out.push_back((*sources[k])[order[i]]);
  }
  Rng rng(derive_seed(seed, {99}));
  seeded_shuffle(out, rng);
  return out;
}

}  // namespace culcap
