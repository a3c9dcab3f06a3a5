#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/embedding/embedding.hpp"
#include "unseen/retrieval/corpus.hpp"

namespace unseen::retrieval {

struct ScoredDocument {
  std::string id;
  double similarity = 0.0;
};

struct RetrievalResult {
  std::vector<ScoredDocument> ranked;  // non-increasing similarity
  std::size_t k = 0;

  bool contains(std::string_view id) const;
};

/// Full ranking of the corpus for a query embedding: similarity descending,
/// ties by ascending document id.
std::vector<ScoredDocument> rank_all(const embedding::EmbeddingVector& query, const Corpus& corpus,
                                     const embedding::Embedder& embedder,
                                     embedding::SimilarityKind sim = embedding::SimilarityKind::Cosine);

/// Exhaustive top-k. Throws InvalidConfig for k == 0 and EmptyCorpus.
RetrievalResult retrieve_k(std::string_view query, const Corpus& corpus, std::size_t k,
                           const embedding::Embedder& embedder,
                           embedding::SimilarityKind sim = embedding::SimilarityKind::Cosine);

/// D' = D plus `target`. The input corpus is untouched; cached embeddings are
/// extended. Throws DuplicateId.
Corpus poison(const Corpus& corpus, Document target);

/// 1-based position of `doc_id` in the full ranking. Throws NotFound.
std::size_t rank_of(std::string_view query, const Corpus& corpus, std::string_view doc_id,
                    const embedding::Embedder& embedder,
                    embedding::SimilarityKind sim = embedding::SimilarityKind::Cosine);

std::size_t rank_in(const std::vector<ScoredDocument>& ranking, std::string_view doc_id);

}  // namespace unseen::retrieval
