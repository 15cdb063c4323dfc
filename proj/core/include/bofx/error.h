#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bofx {

// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorCode {
  kSchema,          // input file lacks a required column/field
  kFormat,          // malformed or non-monotonic input
  kGap,             // channel cannot be filled on the grid
  kWindow,          // not enough history for a one-hour window
  kConfig,          // invalid configuration value
  kTraining,        // training cannot proceed on the given data
  kUsage,           // API misuse: width or channel mismatch
  kModelIntegrity,  // model artifact violates an invariant
  kCapacity,        // request exceeds a hard capacity limit
  kEvaluation,      // evaluation protocol precondition violated
  kEmbedding,       // degenerate input to the embedding
  kMissingArtifact, // required artifact file is absent
  kIo,              // file system failure
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace bofx
