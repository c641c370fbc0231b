#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "culcap/corpus.hpp"
#include "culcap/synth.hpp"

namespace culcap::testing {

inline SynthConfig small_synth() {
  SynthConfig s;
  s.splits = {70, 10, 20};
  return s;
}

inline Corpus small_corpus(std::uint64_t seed = 3) {
  return generate_synthetic_corpus(small_synth(), seed);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("culcap_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace culcap::testing
