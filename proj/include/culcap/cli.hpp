#pragma once

#include <iosfwd>
#include <memory>

#include "culcap/config.hpp"
#include "culcap/embedding.hpp"
#include "culcap/judge.hpp"

namespace culcap {

// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCheckpoint = 3,
  kExitConfig = 4,
  kExitBackend = 5,
  kExitTraining = 6,
  kExitBenchmarkLeak = 7,
  kExitIo = 8,
};

int exit_code_for(ErrorCode code);

std::unique_ptr<JudgeBackend> make_judge(const RunConfig& config, const Lexicon& lexicon);
std::unique_ptr<TextEncoder> make_encoder(const RunConfig& config, const Vocabulary& vocab);

// Errors are reported on `err` as a single "error[CODE]: message" line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace culcap
