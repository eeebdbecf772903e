#pragma once

#include <stdexcept>
#include <string>

namespace quill {

// Bad user input: unreadable files, malformed rows, contract violations
// at the CLI surface. Mapped to exit code 2 by the tools.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or incompatible serialized artifacts (checkpoints, vocab files).
struct FormatError : ValidationError {
  explicit FormatError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace quill
