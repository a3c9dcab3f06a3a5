#include "unseen/sanitize/sanitize.hpp"

#include <unicode/uchar.h>

#include <algorithm>

#include "json.hpp"

#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"

namespace unseen::sanitize {

namespace {

constexpr std::size_t kContext = 8;

const std::vector<char32_t>& format_chars() {
  static const std::vector<char32_t> chars = [] {
    std::vector<char32_t> out;
    for (UChar32 c = 0; c <= 0x10FFFF; ++c) {
      if (u_charType(c) == U_FORMAT_CHAR) out.push_back(static_cast<char32_t>(c));
    }
    return out;
  }();
  return chars;
}

bool is_skin_tone(char32_t c) { return c >= 0x1F3FB && c <= 0x1F3FF; }

// Decides per position whether strip touches it.
std::vector<bool> removal_mask(std::u32string_view text, const SanitizePolicy& policy) {
  std::vector<bool> remove(text.size(), false);
  for (std::size_t i = 0; i < text.size(); ++i) remove[i] = policy.in_strip_set(text[i]);
  if (!policy.preserve_emoji_joiners) return remove;

  // Neighbour search skips anything strippable and skin-tone modifiers so the
  // verdict does not change once the text has been stripped.
  auto skippable = [&](std::size_t j) { return policy.in_strip_set(text[j]) || is_skin_tone(text[j]); };
  auto pictographic_before = [&](std::size_t i) {
    for (std::size_t j = i; j-- > 0;) {
      if (skippable(j)) continue;
      return is_extended_pictographic(text[j]);
    }
    return false;
  };
  auto pictographic_after = [&](std::size_t i) {
    for (std::size_t j = i + 1; j < text.size(); ++j) {
      if (skippable(j)) continue;
      return is_extended_pictographic(text[j]);
    }
    return false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!remove[i]) continue;
    if (text[i] == kZeroWidthJoiner && pictographic_before(i) && pictographic_after(i)) remove[i] = false;
    if (text[i] == U'\uFE0F' && i > 0 && is_extended_pictographic(text[i - 1])) remove[i] = false;
  }
  return remove;
}

}  // namespace

bool is_format_char(char32_t cp) { return u_charType(static_cast<UChar32>(cp)) == U_FORMAT_CHAR; }

bool is_extended_pictographic(char32_t cp) {
  return u_hasBinaryProperty(static_cast<UChar32>(cp), UCHAR_EXTENDED_PICTOGRAPHIC) != 0;
}

SanitizePolicy SanitizePolicy::catalog_only(const perturb::InvisibleCatalog& catalog) {
  SanitizePolicy p;
  p.strip_set.assign(catalog.entries().begin(), catalog.entries().end());
  std::sort(p.strip_set.begin(), p.strip_set.end());
  return p;
}

SanitizePolicy SanitizePolicy::defaults(const perturb::InvisibleCatalog& catalog) {
  SanitizePolicy p = catalog_only(catalog);
  const auto& cf = format_chars();
  std::vector<char32_t> merged;
  std::set_union(p.strip_set.begin(), p.strip_set.end(), cf.begin(), cf.end(), std::back_inserter(merged));
  p.strip_set = std::move(merged);
  return p;
}

bool SanitizePolicy::in_strip_set(char32_t cp) const {
  return std::binary_search(strip_set.begin(), strip_set.end(), cp);
}

void SanitizePolicy::validate() const {
  if (!std::is_sorted(strip_set.begin(), strip_set.end()) ||
      std::adjacent_find(strip_set.begin(), strip_set.end()) != strip_set.end())
    throw Error(Errc::InvalidConfig, "strip set must be sorted and unique");
  for (char32_t c : strip_set) {
    if (perturb::is_ascii_printable(c))
      throw Error(Errc::InvalidConfig, "strip set contains printable ASCII " + perturb::format_codepoint(c));
  }
}

std::vector<Finding> scan(std::u32string_view text, const SanitizePolicy& policy) {
  std::vector<Finding> out;
  const auto mask = removal_mask(text, policy);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!mask[i]) continue;
    const std::size_t lo = i >= kContext ? i - kContext : 0;
    const std::size_t hi = std::min(text.size(), i + kContext + 1);
    out.push_back({i, text[i], perturb::escape_codepoints(text.substr(lo, hi - lo))});
  }
  return out;
}

std::vector<Finding> scan_utf8(std::string_view text, const SanitizePolicy& policy) {
  return scan(perturb::decode_utf8(text), policy);
}

std::u32string strip(std::u32string_view text, const SanitizePolicy& policy) {
  const auto mask = removal_mask(text, policy);
  std::u32string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!mask[i]) {
      out.push_back(text[i]);
    } else if (policy.map_to_sentinel) {
      out.push_back(kSentinel);
    }
  }
  return out;
}

std::string strip_utf8(std::string_view text, const SanitizePolicy& policy) {
  return perturb::encode_utf8(strip(perturb::decode_utf8(text), policy));
}

std::string finding_to_json(const Finding& finding) {
  nlohmann::ordered_json j;
  j["index"] = finding.index;
  j["codepoint"] = perturb::format_codepoint(finding.codepoint);
  j["context_snippet"] = finding.context_snippet;
  return j.dump();
}

retrieval::Corpus sanitized_corpus(const retrieval::Corpus& corpus, const SanitizePolicy& policy) {
  std::vector<retrieval::Document> docs = corpus.documents();
  for (auto& d : docs) d.text = strip_utf8(d.text, policy);
  return retrieval::Corpus(std::move(docs));
}

retrieval::RetrievalResult defended_retrieve(std::string_view query, const retrieval::Corpus& corpus, std::size_t k,
                                             const embedding::Embedder& embedder, const SanitizePolicy& policy,
                                             embedding::SimilarityKind sim) {
  return retrieval::retrieve_k(strip_utf8(query, policy), sanitized_corpus(corpus, policy), k, embedder, sim);
}

std::shared_ptr<const embedding::Embedder> sanitizing_embedder(std::shared_ptr<const embedding::Embedder> inner,
                                                               SanitizePolicy policy) {
  return std::make_shared<embedding::TransformingEmbedder>(
      std::move(inner), [policy = std::move(policy)](std::string_view text) { return strip_utf8(text, policy); },
      "sanitized");
}

}  // namespace unseen::sanitize
