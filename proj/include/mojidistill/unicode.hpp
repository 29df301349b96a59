#pragma once

#include <string>
#include <string_view>

namespace moji::uni {

constexpr char32_t kReplacementChar = 0xFFFD;

/// Decodes UTF-8 into Unicode scalar values. Invalid byte sequences decode
/// to U+FFFD, one replacement per rejected byte.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view scalars);
void append_utf8(std::string& out, char32_t cp);

/// Simple one-to-one lowercase fold (no multi-codepoint expansions).
char32_t to_lower(char32_t cp);
std::u32string to_lower(std::u32string_view scalars);

/// True if cp falls in a Unicode general category P* or S*.
bool is_punct_or_symbol(char32_t cp);

inline bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }
inline bool is_ascii_alnum(char32_t cp) {
  return is_ascii_digit(cp) || (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
}

}  // namespace moji::uni
