#include "culcap/checkpoint.hpp"

#include <filesystem>

#include "json.hpp"

namespace culcap {

using nlohmann::json;

std::string dump_checkpoint(const CheckpointRecord& record, const Vocabulary& vocab) {
  const PolicyParams& p = record.params;
  json j;
  j["format"] = "culcap-checkpoint";
  j["version"] = kCheckpointVersion;
  j["stage"] = record.stage;
  j["step"] = record.step;
  j["seed"] = record.seed;
  j["config_hash"] = hex64(record.config_hash);
  j["corpus_hash"] = hex64(record.corpus_hash);
  j["vocab_hash"] = hex64(vocab.hash());
  j["vocab_size"] = p.vocab_size();
  j["max_len"] = p.max_len;
  j["trained_images"] = record.trained_images;
  j["prev_table"] = p.tables.prev;
  j["context_table"] = p.tables.context;
  j["image_table"] = p.tables.image;
  return j.dump() + "\n";
}

CheckpointRecord parse_checkpoint(std::string_view text, const Vocabulary& vocab,
                                  std::optional<std::uint64_t> expected_corpus_hash) {
  CheckpointRecord rec;
  try {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "culcap-checkpoint") {
      throw Error(ErrorCode::kCheckpointMismatch, "not a checkpoint file");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  "unsupported checkpoint version " + j["version"].dump());
    }
    if (j.at("vocab_hash").get<std::string>() != hex64(vocab.hash())) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  "checkpoint was trained with a different vocabulary");
    }
    rec.stage = j.at("stage").get<std::string>();
    rec.step = j.at("step").get<std::size_t>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    rec.corpus_hash = std::stoull(j.at("corpus_hash").get<std::string>(), nullptr, 16);
    if (expected_corpus_hash && *expected_corpus_hash != rec.corpus_hash) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  "checkpoint corpus hash " + hex64(rec.corpus_hash) +
                      " differs from loaded corpus " + hex64(*expected_corpus_hash));
    }
    rec.trained_images = j.at("trained_images").get<std::vector<std::string>>();
    rec.params = PolicyParams::zeros(vocab, j.at("max_len").get<std::size_t>());
    const std::size_t v = j.at("vocab_size").get<std::size_t>();
    if (v != vocab.size()) {
      throw Error(ErrorCode::kCheckpointMismatch, "vocabulary size mismatch");
    }
    rec.params.tables.prev = j.at("prev_table").get<std::vector<double>>();
    rec.params.tables.context = j.at("context_table").get<std::vector<double>>();
    rec.params.tables.image = j.at("image_table").get<std::vector<double>>();
    if (!rec.params.tables.same_shape(ParamTables::zeros(v))) {
      throw Error(ErrorCode::kCheckpointMismatch, "parameter table sizes are wrong");
    }
    if (!rec.params.tables.all_finite()) {
      throw Error(ErrorCode::kCheckpointMismatch, "checkpoint has non-finite entries");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "unreadable checkpoint: " + std::string(e.what()));
  }
  return rec;
}

void save_checkpoint(const std::string& path, const CheckpointRecord& record,
                     const Vocabulary& vocab) {
  write_file(path, dump_checkpoint(record, vocab));
}

CheckpointRecord load_checkpoint(const std::string& path, const Vocabulary& vocab,
                                 std::optional<std::uint64_t> expected_corpus_hash) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingCheckpoint, "checkpoint '" + path + "' not found");
  }
  return parse_checkpoint(read_file(path), vocab, expected_corpus_hash);
}

}  // namespace culcap
