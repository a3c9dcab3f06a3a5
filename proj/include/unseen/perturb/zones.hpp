#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/errors.hpp"
#include "unseen/language.hpp"

namespace unseen::perturb {

enum class ZoneKind { Comment, StringLiteral, Identifier, WholeText };

std::string_view zone_kind_name(ZoneKind kind);

// Half-open range of insertion positions [start, end). Inserting before
// original index p, for start <= p < end, keeps the code valid. Positions run
// from 0 to the text length inclusive, so end <= length + 1.
struct ZoneSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  ZoneKind kind = ZoneKind::WholeText;

  bool operator==(const ZoneSpan&) const = default;
};

class SafetyZones {
 public:
  SafetyZones() = default;
  // Throws InvalidConfig unless spans are non-empty ranges, sorted, disjoint
  // and within [0, text_length + 1).
  SafetyZones(std::vector<ZoneSpan> spans, Language language, std::size_t text_length);

  static SafetyZones whole_text(std::size_t text_length, Language language = Language::PlainText);

  const std::vector<ZoneSpan>& spans() const noexcept { return spans_; }
  Language language() const noexcept { return language_; }
  std::size_t text_length() const noexcept { return text_length_; }
  bool empty() const noexcept { return spans_.empty(); }

  bool contains(long long pos) const;
  SafetyZones without(ZoneKind kind) const;
  std::size_t count(ZoneKind kind) const;

 private:
  std::vector<ZoneSpan> spans_;
  Language language_ = Language::PlainText;
  std::size_t text_length_ = 0;
};

/// Lexer failure (unterminated literal or block comment). Carries the comment
/// zones found before the failure so callers can fall back to them.
class ZoneError : public Error {
 public:
  ZoneError(const std::string& message, SafetyZones comment_zones)
      : Error(Errc::ZoneError, message), comment_zones_(std::move(comment_zones)) {}

  const SafetyZones& comment_zones() const noexcept { return comment_zones_; }

 private:
  SafetyZones comment_zones_;
};

/// Lightweight lexing of a snippet into insertion-safe spans: comment bodies,
/// string-literal interiors (escape sequences excluded) and interiors of
/// identifiers the snippet itself binds. Plain text is one whole-text zone.
SafetyZones compute_safety_zones(std::u32string_view code, Language language);

}  // namespace unseen::perturb
