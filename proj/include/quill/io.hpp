#pragma once

#include <string>
#include <string_view>

namespace quill {

// Write-to-temp then rename, so interrupted runs never leave partial
// artifacts at the destination path.
void atomic_write_file(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

}  // namespace quill
