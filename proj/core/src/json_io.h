#pragma once

#include <string>

namespace bofx::detail {

// Whole-file read; a missing file is a kMissingArtifact error naming `what`.
std::string read_text(const std::string& path, const std::string& what);
void write_text(const std::string& path, const std::string& text);

}  // namespace bofx::detail
