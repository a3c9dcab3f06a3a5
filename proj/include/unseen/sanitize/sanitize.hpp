#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/embedding/embedding.hpp"
#include "unseen/perturb/catalog.hpp"
#include "unseen/retrieval/corpus.hpp"
#include "unseen/retrieval/retrieval.hpp"

namespace unseen::sanitize {

inline constexpr char32_t kSentinel = U'\uFFFD';
inline constexpr char32_t kZeroWidthJoiner = U'\u200D';

struct SanitizePolicy {
  std::vector<char32_t> strip_set;  // sorted, unique
  // Keep a ZWJ whose nearest neighbours are both Extended_Pictographic, and
  // U+FE0F directly after a pictograph.
  bool preserve_emoji_joiners = false;
  // Replace with U+FFFD instead of deleting, so offsets survive.
  bool map_to_sentinel = false;

  // catalog plus every code point of general category Cf.
  static SanitizePolicy defaults(const perturb::InvisibleCatalog& catalog = perturb::InvisibleCatalog::builtin());
  static SanitizePolicy catalog_only(const perturb::InvisibleCatalog& catalog);

  bool in_strip_set(char32_t cp) const;
  // Throws InvalidConfig if the set touches printable ASCII or is unsorted.
  void validate() const;
};

struct Finding {
  std::size_t index = 0;  // code-point index in the scanned text
  char32_t codepoint = 0;
  std::string context_snippet;  // escaped, a few code points either side
};

// What strip would remove (or replace), in text order.
std::vector<Finding> scan(std::u32string_view text, const SanitizePolicy& policy);
std::vector<Finding> scan_utf8(std::string_view text, const SanitizePolicy& policy);

std::u32string strip(std::u32string_view text, const SanitizePolicy& policy);
std::string strip_utf8(std::string_view text, const SanitizePolicy& policy);

// {"index":..,"codepoint":"U+XXXX","context_snippet":".."}
std::string finding_to_json(const Finding& finding);

bool is_format_char(char32_t cp);
bool is_extended_pictographic(char32_t cp);

/// Strips the query and every document, then retrieves exhaustively.
retrieval::RetrievalResult defended_retrieve(std::string_view query, const retrieval::Corpus& corpus, std::size_t k,
                                             const embedding::Embedder& embedder, const SanitizePolicy& policy,
                                             embedding::SimilarityKind sim = embedding::SimilarityKind::Cosine);

// Same texts as defended_retrieve would see, as a corpus.
retrieval::Corpus sanitized_corpus(const retrieval::Corpus& corpus, const SanitizePolicy& policy);

// Embedder that strips before delegating (tokenizer-side defense).
std::shared_ptr<const embedding::Embedder> sanitizing_embedder(std::shared_ptr<const embedding::Embedder> inner,
                                                               SanitizePolicy policy);

}  // namespace unseen::sanitize
