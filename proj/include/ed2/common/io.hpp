#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ed2 {

// CSV field, quoted only when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

// Writes `content` verbatim (binary mode), creating parent directories.
// Throws std::runtime_error when the file cannot be written.
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ed2
