#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace poseloop {

// Whole-file read; throws DataError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Write-to-temp then rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace poseloop
