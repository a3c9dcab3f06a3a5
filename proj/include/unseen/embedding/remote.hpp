#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

#include "unseen/embedding/embedding.hpp"

namespace unseen::embedding {

struct RemoteConfig {
  std::string endpoint;               // "http://host:port"
  std::size_t batch_size = 32;        // texts per POST /embed
  std::size_t max_in_flight = 4;      // concurrent requests per embed_batch call
  int retries = 2;                    // extra attempts on connection errors and 5xx
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds backoff{50};
};

/// Client for the embedding wire protocol:
///   POST /embed {"texts": [...]} -> {"vectors": [[...], ...], "dim": n}
///   POST /echo  {"texts": [...]} -> {"texts": [...]}
/// Bodies are UTF-8 JSON; texts are sent exactly as given.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(RemoteConfig config);

  // Embeds a one-text batch to learn the dimension. Throws RemoteError.
  void connect();

  std::size_t dim() const override;
  EmbedderKind kind() const override { return EmbedderKind::Remote; }
  std::string identity() const override { return "remote:" + config_.endpoint; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

  std::vector<std::string> echo(const std::vector<std::string>& texts) const;
  // True iff /echo returns every text with identical bytes.
  bool verify_byte_fidelity(const std::vector<std::string>& texts) const;

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::vector<EmbeddingVector> embed_chunk(std::span<const std::string> texts) const;

  RemoteConfig config_;
  mutable std::atomic<std::size_t> dim_{0};
};

}  // namespace unseen::embedding
