#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unseen/perturb/catalog.hpp"

namespace unseen::embedding {

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws InvalidConfig on non-finite values.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;
  EmbeddingVector scaled(double factor) const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

enum class EmbedderKind { Reference, Remote, Decorated };
enum class Sensitivity { Unchecked, Sensitive, Insensitive };

/// Black-box text embedder. Implementations must be safe to call from
/// several threads at once and must see the text byte-for-byte: no Unicode
/// normalization and no stripping of control or format characters.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::size_t dim() const = 0;
  virtual EmbedderKind kind() const = 0;
  virtual std::string identity() const = 0;
  // One vector per text, same order. Empty texts throw EmptyInput.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const = 0;

  EmbeddingVector embed(std::string_view text) const;

  Sensitivity sensitivity() const noexcept { return sensitivity_.load(); }
  void record_sensitivity(bool sensitive) const noexcept {
    sensitivity_.store(sensitive ? Sensitivity::Sensitive : Sensitivity::Insensitive);
  }

 protected:
  static void require_non_empty(std::span<const std::string> texts);

 private:
  mutable std::atomic<Sensitivity> sensitivity_{Sensitivity::Unchecked};
};

/// Deterministic stand-in for a byte-level neural embedder.
///
/// Counts every overlapping byte trigram of the raw UTF-8 text into `dim`
/// buckets and L2-normalizes. A gram is hashed with 64-bit FNV-1a using
/// `kSeed` as the offset basis, then the MurmurHash3 fmix64 finalizer; the
/// bucket is the result modulo `dim`. Texts shorter than three bytes count
/// as a single gram of their own bytes.
class ReferenceEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 512;
  static constexpr std::size_t kGram = 3;
  static constexpr std::uint64_t kSeed = 0x243F6A8885A308D3ULL;

  explicit ReferenceEmbedder(std::size_t dim = kDefaultDim);

  std::size_t dim() const override { return dim_; }
  EmbedderKind kind() const override { return EmbedderKind::Reference; }
  std::string identity() const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

  // Bucket index for one gram; exposed for tests.
  std::size_t bucket(std::string_view gram) const;
  // Raw (unnormalized) bucket counts.
  std::vector<double> counts(std::string_view text) const;

 private:
  std::size_t dim_;
};

/// Applies `transform` to each text before delegating. Used for tokenizer-side
/// sanitization and for building deliberately insensitive embedders.
class TransformingEmbedder final : public Embedder {
 public:
  using Transform = std::function<std::string(std::string_view)>;

  TransformingEmbedder(std::shared_ptr<const Embedder> inner, Transform transform, std::string label);

  std::size_t dim() const override { return inner_->dim(); }
  EmbedderKind kind() const override { return EmbedderKind::Decorated; }
  std::string identity() const override { return label_ + "(" + inner_->identity() + ")"; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::shared_ptr<const Embedder> inner_;
  Transform transform_;
  std::string label_;
};

/// Exact-match memo keyed on the raw bytes of the text. Never normalizes.
class MemoEmbedder final : public Embedder {
 public:
  explicit MemoEmbedder(std::shared_ptr<const Embedder> inner);

  std::size_t dim() const override { return inner_->dim(); }
  EmbedderKind kind() const override { return inner_->kind(); }
  std::string identity() const override { return inner_->identity(); }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<const Embedder> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, EmbeddingVector> memo_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

enum class SimilarityKind { Cosine, Dot };

// u.v / (|u||v|), clamped to [-1, 1]. DimError on mismatch, ZeroVector if
// either side is all zeros.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);
double dot(const EmbeddingVector& u, const EmbeddingVector& v);
double similarity(SimilarityKind kind, const EmbeddingVector& u, const EmbeddingVector& v);

struct ProbeReport {
  bool sensitive = false;
  double mean_shift = 0.0;  // mean cosine distance over samples
  std::size_t samples = 0;
  std::string inserted;     // code point used, "U+XXXX"
};

/// Embeds each sample with and without one catalog character inserted at its
/// midpoint. Sensitive iff the mean cosine distance exceeds `epsilon`. The
/// verdict is also recorded on the embedder. Defaults to U+200B when the
/// catalog has it, otherwise entry 0.
ProbeReport sensitivity_probe(const Embedder& embedder, std::span<const std::string> samples,
                              const perturb::InvisibleCatalog& catalog, double epsilon = 1e-6,
                              std::optional<std::size_t> char_id = std::nullopt);

}  // namespace unseen::embedding
