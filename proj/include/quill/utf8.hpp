#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace quill {

// Splits a UTF-8 string into code-point substrings. Invalid continuation
// bytes are kept as single-byte tokens rather than rejected; corpus
// filtering happens at a higher level.
inline std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((b & 0x80u) == 0x00u) {
      len = 1;
    } else if ((b & 0xE0u) == 0xC0u) {
      len = 2;
    } else if ((b & 0xF0u) == 0xE0u) {
      len = 3;
    } else if ((b & 0xF8u) == 0xF0u) {
      len = 4;
    }
    if (i + len > text.size()) {
      len = 1;
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

inline std::size_t utf8_length(std::string_view text) {
  return utf8_chars(text).size();
}

}  // namespace quill
