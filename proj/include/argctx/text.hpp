#pragma once

// UTF-8 handling and the ADU tokenizer.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace argctx {

namespace utf8 {

/// Decodes one code point starting at `pos`; advances `pos`. Returns nullopt
/// on malformed input (overlong forms, surrogates and truncation included).
inline std::optional<char32_t> decode(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  std::size_t len;
  char32_t cp;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return std::nullopt;
  }
  if (pos + len > s.size()) return std::nullopt;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return std::nullopt;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
  pos += len;
  return cp;
}

/// Byte offset of the first invalid sequence, or nullopt if `s` is valid.
inline std::optional<std::size_t> find_invalid(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    if (!decode(s, pos)) return start;
  }
  return std::nullopt;
}

inline std::size_t length(std::string_view s) {
  std::size_t pos = 0, n = 0;
  while (pos < s.size()) {
    if (!decode(s, pos)) ++pos;
    ++n;
  }
  return n;
}

inline bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

inline bool is_ascii_alnum(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

/// Letters outside ASCII are approximated as "anything above U+00BF that is
/// not general punctuation or a symbol block".
inline bool is_alnum(char32_t c) {
  if (c < 0x80) return is_ascii_alnum(c);
  if (c < 0xC0 || c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows
  if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if (c >= 0xFF00 && c <= 0xFF0F) return false;
  return true;
}

inline bool is_punct(char32_t c) { return !is_space(c) && !is_alnum(c); }

}  // namespace utf8

struct Token {
  std::string surface;
  std::string lower;

  bool operator==(const Token&) const = default;
};

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Whitespace split, then every leading and trailing punctuation code point is
/// detached as its own token. Internal apostrophes and hyphens stay attached.
/// Invalid UTF-8 bytes are read as U+FFFD.
inline std::vector<Token> tokenize(std::string_view text) {
  struct Unit {
    std::size_t begin, end;
    char32_t cp;
  };
  std::vector<Token> tokens;
  std::vector<Unit> word;

  auto emit = [&](std::size_t b, std::size_t e) {
    std::string surface(text.substr(b, e - b));
    tokens.push_back({surface, ascii_lower(surface)});
  };
  auto flush = [&] {
    if (word.empty()) return;
    std::size_t lo = 0, hi = word.size();
    while (lo < hi && utf8::is_punct(word[lo].cp)) ++lo;
    while (hi > lo && utf8::is_punct(word[hi - 1].cp)) --hi;
    for (std::size_t i = 0; i < lo; ++i) emit(word[i].begin, word[i].end);
    if (lo < hi) emit(word[lo].begin, word[hi - 1].end);
    // Trailing punctuation belongs after the core; when the whole word is
    // punctuation, lo == hi and each unit was already emitted above.
    for (std::size_t i = std::max(hi, lo); i < word.size(); ++i) emit(word[i].begin, word[i].end);
    word.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    auto cp = utf8::decode(text, pos);
    if (!cp) {
      pos = start + 1;
      cp = 0xFFFD;
    }
    if (utf8::is_space(*cp)) {
      flush();
    } else {
      word.push_back({start, pos, *cp});
    }
  }
  flush();
  return tokens;
}

}  // namespace argctx
