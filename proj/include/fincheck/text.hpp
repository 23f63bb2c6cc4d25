#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fincheck {

/// Minimal UTF-8 helpers. Spans in annotations are Unicode scalar-value
/// offsets (source regulations are Chinese text; byte offsets would be
/// encoding-fragile).

/// Decodes one scalar at byte offset `i`, advancing `i`. Returns nullopt
/// on malformed input (i is then advanced by one byte).
inline std::optional<char32_t> utf8_next(std::string_view s, size_t& i) {
  if (i >= s.size()) return std::nullopt;
  unsigned char c0 = s[i];
  auto cont = [&](size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if (c0 < 0x80) {
    ++i;
    return char32_t(c0);
  }
  if ((c0 & 0xE0) == 0xC0 && cont(1)) {
    char32_t cp = (char32_t(c0 & 0x1F) << 6) | (s[i + 1] & 0x3F);
    i += 2;
    if (cp < 0x80) return std::nullopt;  // overlong
    return cp;
  }
  if ((c0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    char32_t cp = (char32_t(c0 & 0x0F) << 12) | (char32_t(s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
    i += 3;
    if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
    return cp;
  }
  if ((c0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    char32_t cp = (char32_t(c0 & 0x07) << 18) | (char32_t(s[i + 1] & 0x3F) << 12) |
                  (char32_t(s[i + 2] & 0x3F) << 6) | (s[i + 3] & 0x3F);
    i += 4;
    if (cp < 0x10000 || cp > 0x10FFFF) return std::nullopt;
    return cp;
  }
  ++i;
  return std::nullopt;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += char(cp);
  } else if (cp < 0x800) {
    out += char(0xC0 | (cp >> 6));
    out += char(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += char(0xE0 | (cp >> 12));
    out += char(0x80 | ((cp >> 6) & 0x3F));
    out += char(0x80 | (cp & 0x3F));
  } else {
    out += char(0xF0 | (cp >> 18));
    out += char(0x80 | ((cp >> 12) & 0x3F));
    out += char(0x80 | ((cp >> 6) & 0x3F));
    out += char(0x80 | (cp & 0x3F));
  }
}

/// Number of Unicode scalars (malformed bytes count as one scalar each,
/// so lengths are total even on bad input).
inline size_t utf8_scalar_length(std::string_view s) {
  size_t i = 0, n = 0;
  while (i < s.size()) {
    utf8_next(s, i);
    ++n;
  }
  return n;
}

/// Substring by scalar offsets [start, end). Clamped to the text.
inline std::string utf8_substr(std::string_view s, size_t start, size_t end) {
  size_t i = 0, n = 0;
  size_t byte_start = s.size(), byte_end = s.size();
  while (i < s.size()) {
    if (n == start) byte_start = i;
    if (n == end) {
      byte_end = i;
      break;
    }
    utf8_next(s, i);
    ++n;
  }
  if (n == start) byte_start = i;
  if (n <= end && byte_end == s.size()) byte_end = s.size();
  if (byte_start > byte_end) return {};
  return std::string(s.substr(byte_start, byte_end - byte_start));
}

}  // namespace fincheck
