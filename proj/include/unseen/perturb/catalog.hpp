#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace unseen::perturb {

/// Ordered set of invisible code points that genomes may insert.
///
/// A gene's `id` is an index into `entries()`, so the order is part of the
/// contract: the file format is one `U+XXXX` per line, `#` starts a comment,
/// and a `# source: <tag>` line sets the provenance tag. Construction rejects
/// ASCII printable characters, duplicates, surrogates and out-of-range values.
class InvisibleCatalog {
 public:
  InvisibleCatalog(std::vector<char32_t> entries, std::string source_tag);

  static InvisibleCatalog parse(std::string_view file_text,
                                std::string fallback_tag = "unnamed");
  static InvisibleCatalog load(const std::filesystem::path& path);

  // The catalog shipped in data/catalog_default.txt, compiled in.
  static const InvisibleCatalog& builtin();

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  char32_t at(std::size_t id) const { return entries_.at(id); }
  const std::vector<char32_t>& entries() const noexcept { return entries_; }
  const std::string& source_tag() const noexcept { return source_tag_; }

  bool contains(char32_t cp) const { return index_.count(cp) != 0; }
  std::optional<std::size_t> index_of(char32_t cp) const;

  // First `n` entries, same ids.
  InvisibleCatalog restricted(std::size_t n) const;

  // Canonical serialization: source line followed by one entry per line.
  std::string to_file_text() const;
  // SHA-256 of the entry list (order-sensitive, tag-insensitive).
  std::string digest() const;

 private:
  std::vector<char32_t> entries_;
  std::string source_tag_;
  std::unordered_map<char32_t, std::size_t> index_;
};

// Removes every catalog member from `text`.
std::u32string strip_catalog(std::u32string_view text, const InvisibleCatalog& catalog);

}  // namespace unseen::perturb
