#include "unseen/errors.hpp"
#include "unseen/language.hpp"

namespace unseen {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidGene: return "InvalidGene";
    case Errc::InvalidUtf8: return "InvalidUtf8";
    case Errc::CatalogFormat: return "CatalogFormat";
    case Errc::ZoneError: return "ZoneError";
    case Errc::EmptyZones: return "EmptyZones";
    case Errc::OracleUnavailable: return "OracleUnavailable";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::RemoteError: return "RemoteError";
    case Errc::DimError: return "DimError";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NotFound: return "NotFound";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::InsensitiveEmbedder: return "InsensitiveEmbedder";
    case Errc::CompilabilityError: return "CompilabilityError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

std::string_view language_name(Language lang) {
  switch (lang) {
    case Language::Python: return "python";
    case Language::Java: return "java";
    case Language::PlainText: return "text";
  }
  return "text";
}

std::optional<Language> parse_language(std::string_view name) {
  if (name == "python" || name == "python-like" || name == "py") return Language::Python;
  if (name == "java" || name == "java-like") return Language::Java;
  if (name == "text" || name == "plain-text" || name == "plain") return Language::PlainText;
  return std::nullopt;
}

Language language_from_extension(std::string_view ext) {
  if (!ext.empty() && ext.front() == '.') ext.remove_prefix(1);
  if (ext == "py") return Language::Python;
  if (ext == "java") return Language::Java;
  return Language::PlainText;
}

}  // namespace unseen
