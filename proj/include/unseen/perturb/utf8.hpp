#pragma once

#include <string>
#include <string_view>

namespace unseen::perturb {

// Strict UTF-8 decoding: overlong forms, surrogates and truncated sequences
// throw Error(InvalidUtf8). Positions everywhere in the toolkit are indices
// into the decoded code-point sequence.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

bool is_ascii_printable(char32_t cp);

// "U+200B" formatting, uppercase, at least four hex digits.
std::string format_codepoint(char32_t cp);

// Printable escaping for perturbed text: ASCII printable passes through,
// backslash doubles, \n \t \r use C escapes, everything else becomes \u{XXXX}.
std::string escape_codepoints(std::u32string_view cps);
std::string escape_codepoints_utf8(std::string_view utf8);
std::u32string unescape_codepoints(std::string_view escaped);

}  // namespace unseen::perturb
