#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/embedding/embedding.hpp"
#include "unseen/language.hpp"

namespace unseen::retrieval {

enum class Label { Safe, Vulnerable, Adversarial, Unlabeled };

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view name);

struct Document {
  std::string id;
  std::string text;  // UTF-8, byte-faithful
  Language language = Language::PlainText;
  Label label = Label::Unlabeled;
  std::optional<std::string> pair_id;
};

/// Immutable-by-convention document collection with optional cached
/// embeddings. Ids are unique; a pair_id links exactly one safe and one
/// vulnerable document. Copies share the embedding cache.
class Corpus {
 public:
  Corpus() = default;
  // Throws DuplicateId or InvalidConfig (malformed pairs).
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const Document& at(std::size_t i) const { return documents_.at(i); }
  const Document* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

  // Single-writer phase: embeds every document with `embedder`.
  void materialize(const embedding::Embedder& embedder);
  bool materialized_for(const embedding::Embedder& embedder) const;
  // Cached vectors where available for this embedder, the rest computed now.
  std::vector<embedding::EmbeddingVector> embeddings(const embedding::Embedder& embedder) const;

  // Documents whose label is in `labels` (pairs broken by the filter are kept
  // as plain documents).
  Corpus filtered(const std::set<Label>& labels) const;

  // Safe/vulnerable pairs as (safe index, vulnerable index), ordered by pair id.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;

 private:
  friend Corpus poison(const Corpus& corpus, Document target);

  std::vector<Document> documents_;
  std::string embedder_identity_;
  // Entries may be empty for documents added after materialization.
  std::shared_ptr<const std::vector<std::optional<embedding::EmbeddingVector>>> cache_;
};

// Line-delimited JSON records {id, text, language, label, pair_id?}.
Corpus load_records(const std::filesystem::path& path);
void save_records(const Corpus& corpus, const std::filesystem::path& path);
std::string to_record_line(const Document& doc);

// Every regular file is a document: id = file name, language from extension.
// An optional sidecar "labels.jsonl" ({id, label, pair_id?}) supplies labels
// and is not itself ingested.
Corpus load_directory(const std::filesystem::path& dir);

// Directory or record file, chosen by what `path` is.
Corpus load_corpus(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace unseen::retrieval
