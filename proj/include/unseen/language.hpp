#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace unseen {

enum class Language { Python, Java, PlainText };

std::string_view language_name(Language lang);

// Accepts "python", "java", "text" and the "-like"/"plain-text" spellings.
std::optional<Language> parse_language(std::string_view name);

// Maps a file extension (with or without the leading dot) to a language tag.
Language language_from_extension(std::string_view ext);

}  // namespace unseen
