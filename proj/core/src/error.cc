#include "bofx/error.h"

namespace bofx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kGap: return "unrecoverable-gap error";
    case ErrorCode::kWindow: return "window error";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kTraining: return "training error";
    case ErrorCode::kUsage: return "usage error";
    case ErrorCode::kModelIntegrity: return "model-integrity error";
    case ErrorCode::kCapacity: return "capacity error";
    case ErrorCode::kEvaluation: return "evaluation error";
    case ErrorCode::kEmbedding: return "embedding error";
    case ErrorCode::kMissingArtifact: return "missing artifact";
    case ErrorCode::kIo: return "i/o error";
  }
  return "error";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace bofx
