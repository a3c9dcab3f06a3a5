#include "unseen/retrieval/retrieval.hpp"

#include <algorithm>

#include "unseen/errors.hpp"

namespace unseen::retrieval {

bool RetrievalResult::contains(std::string_view id) const {
  return std::any_of(ranked.begin(), ranked.end(), [id](const ScoredDocument& d) { return d.id == id; });
}

std::vector<ScoredDocument> rank_all(const embedding::EmbeddingVector& query, const Corpus& corpus,
                                     const embedding::Embedder& embedder, embedding::SimilarityKind sim) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot retrieve from an empty corpus");
  const auto vecs = corpus.embeddings(embedder);
  std::vector<ScoredDocument> scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scored.push_back({corpus.at(i).id, embedding::similarity(sim, query, vecs[i])});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  return scored;
}

RetrievalResult retrieve_k(std::string_view query, const Corpus& corpus, std::size_t k,
                           const embedding::Embedder& embedder, embedding::SimilarityKind sim) {
  if (k == 0) throw Error(Errc::InvalidConfig, "k must be at least 1");
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot retrieve from an empty corpus");
  auto ranked = rank_all(embedder.embed(query), corpus, embedder, sim);
  ranked.resize(std::min(k, ranked.size()));
  return RetrievalResult{std::move(ranked), k};
}

Corpus poison(const Corpus& corpus, Document target) {
  if (corpus.find(target.id)) throw Error(Errc::DuplicateId, "document id '" + target.id + "' already in corpus");
  std::vector<Document> docs = corpus.documents();
  docs.push_back(std::move(target));
  Corpus out(std::move(docs));
  if (corpus.cache_) {
    auto vecs = *corpus.cache_;
    vecs.emplace_back();
    out.cache_ = std::make_shared<const std::vector<std::optional<embedding::EmbeddingVector>>>(std::move(vecs));
    out.embedder_identity_ = corpus.embedder_identity_;
  }
  return out;
}

std::size_t rank_in(const std::vector<ScoredDocument>& ranking, std::string_view doc_id) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].id == doc_id) return i + 1;
  }
  throw Error(Errc::NotFound, "document '" + std::string(doc_id) + "' not in corpus");
}

std::size_t rank_of(std::string_view query, const Corpus& corpus, std::string_view doc_id,
                    const embedding::Embedder& embedder, embedding::SimilarityKind sim) {
  if (!corpus.find(doc_id)) throw Error(Errc::NotFound, "document '" + std::string(doc_id) + "' not in corpus");
  return rank_in(rank_all(embedder.embed(query), corpus, embedder, sim), doc_id);
}

}  // namespace unseen::retrieval
