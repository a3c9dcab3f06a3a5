#include "unseen/embedding/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"

namespace unseen::embedding {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidConfig, "embedding contains a non-finite value");
  }
}

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

EmbeddingVector EmbeddingVector::scaled(double factor) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= factor;
  return EmbeddingVector(std::move(out));
}

EmbeddingVector Embedder::embed(std::string_view text) const {
  const std::string owned(text);
  auto out = embed_batch(std::span<const std::string>(&owned, 1));
  return std::move(out.front());
}

void Embedder::require_non_empty(std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error(Errc::EmptyInput, "text " + std::to_string(i) + " is empty");
  }
}

namespace {

std::uint64_t fmix64(std::uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

}  // namespace

ReferenceEmbedder::ReferenceEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw Error(Errc::InvalidConfig, "embedding dimension must be positive");
}

std::string ReferenceEmbedder::identity() const {
  return "reference-byte-trigram-" + std::to_string(dim_);
}

std::size_t ReferenceEmbedder::bucket(std::string_view gram) const {
  std::uint64_t h = kSeed;
  for (unsigned char b : gram) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(fmix64(h) % dim_);
}

std::vector<double> ReferenceEmbedder::counts(std::string_view text) const {
  std::vector<double> c(dim_, 0.0);
  if (text.size() < kGram) {
    c[bucket(text)] += 1.0;
    return c;
  }
  for (std::size_t i = 0; i + kGram <= text.size(); ++i) c[bucket(text.substr(i, kGram))] += 1.0;
  return c;
}

std::vector<EmbeddingVector> ReferenceEmbedder::embed_batch(std::span<const std::string> texts) const {
  require_non_empty(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto c = counts(t);
    double s = 0.0;
    for (double v : c) s += v * v;
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : c) v *= inv;
    out.emplace_back(std::move(c));
  }
  return out;
}

TransformingEmbedder::TransformingEmbedder(std::shared_ptr<const Embedder> inner, Transform transform,
                                           std::string label)
    : inner_(std::move(inner)), transform_(std::move(transform)), label_(std::move(label)) {}

std::vector<EmbeddingVector> TransformingEmbedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<std::string> transformed;
  transformed.reserve(texts.size());
  for (const auto& t : texts) transformed.push_back(transform_(t));
  return inner_->embed_batch(transformed);
}

MemoEmbedder::MemoEmbedder(std::shared_ptr<const Embedder> inner) : inner_(std::move(inner)) {}

std::vector<EmbeddingVector> MemoEmbedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (const auto it = memo_.find(texts[i]); it != memo_.end()) {
        out[i] = it->second;
        ++hits_;
      } else {
        missing.push_back(texts[i]);
        missing_at.push_back(i);
      }
    }
  }
  if (!missing.empty()) {
    auto fresh = inner_->embed_batch(missing);
    std::lock_guard lock(mu_);
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      memo_.emplace(missing[k], fresh[k]);
      out[missing_at[k]] = std::move(fresh[k]);
      ++misses_;
    }
  }
  return out;
}

std::size_t MemoEmbedder::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t MemoEmbedder::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw Error(Errc::DimError, "dimension mismatch: " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) s += u[i] * v[i];
  return s;
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  const double d = dot(u, v);
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw Error(Errc::ZeroVector, "cosine of a zero vector");
  return std::clamp(d / (nu * nv), -1.0, 1.0);
}

double similarity(SimilarityKind kind, const EmbeddingVector& u, const EmbeddingVector& v) {
  return kind == SimilarityKind::Cosine ? cosine(u, v) : dot(u, v);
}

ProbeReport sensitivity_probe(const Embedder& embedder, std::span<const std::string> samples,
                              const perturb::InvisibleCatalog& catalog, double epsilon,
                              std::optional<std::size_t> char_id) {
  if (samples.empty()) throw Error(Errc::EmptyInput, "sensitivity probe needs at least one sample");
  if (catalog.empty()) throw Error(Errc::InvalidConfig, "sensitivity probe needs a non-empty catalog");
  const std::size_t id = char_id.value_or(catalog.index_of(U'\u200B').value_or(0));
  const char32_t inserted = catalog.at(id);

  std::vector<std::string> batch;
  batch.reserve(samples.size() * 2);
  for (const auto& s : samples) {
    auto cps = perturb::decode_utf8(s);
    batch.push_back(s);
    cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(cps.size() / 2), inserted);
    batch.push_back(perturb::encode_utf8(cps));
  }
  const auto vecs = embedder.embed_batch(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) total += 1.0 - cosine(vecs[2 * i], vecs[2 * i + 1]);

  ProbeReport report;
  report.samples = samples.size();
  report.mean_shift = total / static_cast<double>(samples.size());
  report.sensitive = report.mean_shift > epsilon;
  report.inserted = perturb::format_codepoint(inserted);
  embedder.record_sensitivity(report.sensitive);
  return report;
}

}  // namespace unseen::embedding
