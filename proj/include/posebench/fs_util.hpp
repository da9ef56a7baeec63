#pragma once

#include <filesystem>
#include <string>

namespace posebench {

// Writes via a sibling temp file and renames into place, so readers never see
// a half-written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_text_file(const std::filesystem::path& path);  // MissingFile on failure

}  // namespace posebench
