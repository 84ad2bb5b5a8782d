#pragma once

// UTF-8 <-> code point conversion. All text inside the library is a
// std::wstring holding one Unicode scalar value per element, so that character
// offsets count characters rather than bytes and std::wregex can be used.

#include <cstdint>
#include <string>
#include <string_view>

#include "hybridtn/error.hpp"

namespace hybridtn {

static_assert(sizeof(wchar_t) == 4, "hybridtn requires a 32-bit wchar_t");

using Text = std::wstring;
using TextView = std::wstring_view;

inline Text from_utf8(std::string_view in) {
  Text out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    const auto b0 = static_cast<unsigned char>(in[i]);
    char32_t cp;
    std::size_t len;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw ParseError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > in.size()) {
      throw ParseError("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(in[i + k]);
      if ((b & 0xC0) != 0x80) {
        throw ParseError("invalid UTF-8 continuation at offset " +
                         std::to_string(i + k));
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw ParseError("invalid code point at offset " + std::to_string(i));
    }
    out.push_back(static_cast<wchar_t>(cp));
    i += len;
  }
  return out;
}

inline std::string to_utf8(TextView in) {
  std::string out;
  out.reserve(in.size() * 3);
  for (wchar_t wc : in) {
    const auto cp = static_cast<std::uint32_t>(wc);
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

inline bool is_ascii_digit(wchar_t c) { return c >= L'0' && c <= L'9'; }

// CJK Unified Ideographs, basic block.
inline bool is_han(wchar_t c) { return c >= 0x4E00 && c <= 0x9FFF; }

}  // namespace hybridtn
