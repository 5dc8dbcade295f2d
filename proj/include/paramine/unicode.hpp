#pragma once

// UTF-8 helpers backed by ICU. Lengths everywhere in paramine are counted in
// Unicode scalar values, never bytes.

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace paramine::unicode {

// Decodes UTF-8; ill-formed sequences become U+FFFD.
inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(s.size());
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    out.push_back(c < 0 ? U'\uFFFD' : static_cast<char32_t>(c));
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t c) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool err = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, static_cast<UChar32>(c), err);
  if (err) {
    out += "\xEF\xBF\xBD";
    return;
  }
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append_utf8(out, c);
  return out;
}

inline bool valid_utf8(std::string_view s) {
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(s.size());
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    if (c < 0) return false;
  }
  return true;
}

inline std::size_t length(std::string_view s) {
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(s.size());
  std::size_t count = 0;
  while (i < n) {
    U8_FWD_1(p, i, n);
    ++count;
  }
  return count;
}

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

// General category P* (Pc, Pd, Ps, Pe, Pi, Pf, Po).
inline bool is_punct(char32_t c) { return u_ispunct(static_cast<UChar32>(c)); }

inline bool is_alnum(char32_t c) { return u_isalnum(static_cast<UChar32>(c)); }

inline bool is_alpha(char32_t c) { return u_isalpha(static_cast<UChar32>(c)); }

inline bool is_digit(char32_t c) { return u_isdigit(static_cast<UChar32>(c)); }

inline char32_t fold(char32_t c) {
  return static_cast<char32_t>(u_foldCase(static_cast<UChar32>(c), U_FOLD_CASE_DEFAULT));
}

inline char32_t lower(char32_t c) {
  return static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
}

inline std::u32string fold(std::u32string s) {
  for (auto& c : s) c = fold(c);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : decode(s)) append_utf8(out, lower(c));
  return out;
}

// Simple (1:1) case folding; enough for case-insensitive comparisons.
inline std::string case_fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : decode(s)) append_utf8(out, fold(c));
  return out;
}

}  // namespace paramine::unicode
