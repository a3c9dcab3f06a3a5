#include "unseen/perturb/catalog.hpp"

#include <fstream>
#include <sstream>

#include "unseen/digest.hpp"
#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"
#include "builtin_catalog.inc"

namespace unseen::perturb {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

InvisibleCatalog::InvisibleCatalog(std::vector<char32_t> entries, std::string source_tag)
    : entries_(std::move(entries)), source_tag_(std::move(source_tag)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const char32_t cp = entries_[i];
    if (is_ascii_printable(cp)) {
      throw Error(Errc::CatalogFormat, "catalog entry " + format_codepoint(cp) + " is ASCII printable");
    }
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw Error(Errc::CatalogFormat, "catalog entry " + format_codepoint(cp) + " is not a scalar value");
    }
    if (!index_.emplace(cp, i).second) {
      throw Error(Errc::CatalogFormat, "duplicate catalog entry " + format_codepoint(cp));
    }
  }
}

InvisibleCatalog InvisibleCatalog::parse(std::string_view text, std::string fallback_tag) {
  std::vector<char32_t> entries;
  std::string tag = std::move(fallback_tag);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      if (body.rfind("source:", 0) == 0) tag = std::string(trim(body.substr(7)));
      continue;
    }
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.size() < 3 || (line[0] != 'U' && line[0] != 'u') || line[1] != '+') {
      throw Error(Errc::CatalogFormat, "catalog line " + std::to_string(line_no) + ": expected U+XXXX");
    }
    const std::string hex(line.substr(2));
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(hex, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != hex.size() || hex.size() > 6) {
      throw Error(Errc::CatalogFormat, "catalog line " + std::to_string(line_no) + ": bad hex '" + hex + "'");
    }
    entries.push_back(static_cast<char32_t>(v));
  }
  return InvisibleCatalog(std::move(entries), std::move(tag));
}

InvisibleCatalog InvisibleCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open catalog " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.filename().string());
}

const InvisibleCatalog& InvisibleCatalog::builtin() {
  static const InvisibleCatalog catalog = parse(kBuiltinCatalogText, "builtin");
  return catalog;
}

std::optional<std::size_t> InvisibleCatalog::index_of(char32_t cp) const {
  const auto it = index_.find(cp);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

InvisibleCatalog InvisibleCatalog::restricted(std::size_t n) const {
  if (n > entries_.size()) n = entries_.size();
  return InvisibleCatalog({entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(n)},
                          source_tag_ + "[:" + std::to_string(n) + "]");
}

std::string InvisibleCatalog::to_file_text() const {
  std::string out = "# source: " + source_tag_ + "\n";
  for (char32_t cp : entries_) out += format_codepoint(cp) + "\n";
  return out;
}

std::string InvisibleCatalog::digest() const {
  std::string canon;
  for (char32_t cp : entries_) canon += format_codepoint(cp) + "\n";
  return sha256_hex(canon);
}

std::u32string strip_catalog(std::u32string_view text, const InvisibleCatalog& catalog) {
  std::u32string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    if (!catalog.contains(cp)) out.push_back(cp);
  }
  return out;
}

}  // namespace unseen::perturb
