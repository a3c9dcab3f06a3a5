#include "unseen/perturb/utf8.hpp"

#include <cstdint>
#include <cstdio>

#include "unseen/errors.hpp"

namespace unseen::perturb {

namespace {

[[noreturn]] void bad_utf8(std::size_t offset) {
  throw Error(Errc::InvalidUtf8, "invalid UTF-8 at byte offset " + std::to_string(offset));
}

}  // namespace

std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto b0 = static_cast<std::uint8_t>(bytes[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len;
    char32_t cp;
    char32_t min;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2; cp = b0 & 0x1F; min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3; cp = b0 & 0x0F; min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4; cp = b0 & 0x07; min = 0x10000;
    } else {
      bad_utf8(i);
    }
    if (i + len > bytes.size()) bad_utf8(i);
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<std::uint8_t>(bytes[i + k]);
      if ((b & 0xC0) != 0x80) bad_utf8(i);
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) bad_utf8(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
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

std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

bool is_ascii_printable(char32_t cp) { return cp >= 0x20 && cp <= 0x7E; }

std::string format_codepoint(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

std::string escape_codepoints(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp == '\\') {
      out += "\\\\";
    } else if (cp == '\n') {
      out += "\\n";
    } else if (cp == '\t') {
      out += "\\t";
    } else if (cp == '\r') {
      out += "\\r";
    } else if (is_ascii_printable(cp)) {
      out.push_back(static_cast<char>(cp));
    } else {
      char buf[16];
      std::snprintf(buf, sizeof buf, "\\u{%04X}", static_cast<unsigned>(cp));
      out += buf;
    }
  }
  return out;
}

std::string escape_codepoints_utf8(std::string_view utf8) {
  return escape_codepoints(decode_utf8(utf8));
}

std::u32string unescape_codepoints(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c != '\\') {
      out.push_back(static_cast<unsigned char>(c));
      continue;
    }
    if (i + 1 >= s.size()) throw Error(Errc::InvalidConfig, "dangling backslash in escaped text");
    const char e = s[++i];
    switch (e) {
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'u': {
        if (i + 1 >= s.size() || s[i + 1] != '{')
          throw Error(Errc::InvalidConfig, "malformed \\u escape");
        const auto close = s.find('}', i + 2);
        if (close == std::string_view::npos)
          throw Error(Errc::InvalidConfig, "unterminated \\u{ escape");
        const std::string hex(s.substr(i + 2, close - i - 2));
        if (hex.empty() || hex.size() > 6)
          throw Error(Errc::InvalidConfig, "bad \\u{} escape: " + hex);
        std::size_t used = 0;
        const unsigned long v = std::stoul(hex, &used, 16);
        if (used != hex.size() || v > 0x10FFFF)
          throw Error(Errc::InvalidConfig, "bad \\u{} escape: " + hex);
        out.push_back(static_cast<char32_t>(v));
        i = close;
        break;
      }
      default:
        throw Error(Errc::InvalidConfig, std::string("unknown escape \\") + e);
    }
  }
  return out;
}

}  // namespace unseen::perturb
