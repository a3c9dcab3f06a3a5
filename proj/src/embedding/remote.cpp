#include "unseen/embedding/remote.hpp"

#include <future>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "unseen/errors.hpp"

namespace unseen::embedding {

using nlohmann::json;

RemoteEmbedder::RemoteEmbedder(RemoteConfig config) : config_(std::move(config)) {
  if (config_.batch_size == 0 || config_.max_in_flight == 0) {
    throw Error(Errc::InvalidConfig, "remote batch size and parallelism must be positive");
  }
}

void RemoteEmbedder::connect() {
  const std::string probe = "dimension probe";
  embed_chunk(std::span<const std::string>(&probe, 1));
}

std::size_t RemoteEmbedder::dim() const {
  const auto d = dim_.load();
  if (d == 0) throw Error(Errc::InvalidConfig, "remote embedder dimension unknown; call connect() first");
  return d;
}

std::string RemoteEmbedder::post(const std::string& path, const std::string& body) const {
  int last_status = 0;
  bool connection_failure = false;
  std::string last_message;
  const int attempts = config_.retries + 1;
  int made = 0;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    made = attempt;
    httplib::Client client(config_.endpoint);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path, body, "application/json; charset=utf-8");
    if (!res) {
      connection_failure = true;
      last_status = 0;
      last_message = httplib::to_string(res.error());
    } else if (res->status == 200) {
      return res->body;
    } else {
      connection_failure = false;
      last_status = res->status;
      last_message = res->body;
      if (res->status < 500) break;  // client errors will not improve on retry
    }
    if (attempt < attempts) std::this_thread::sleep_for(config_.backoff * attempt);
  }
  throw RemoteError("POST " + config_.endpoint + path + " failed: " + last_message, made, last_status,
                    connection_failure);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_chunk(std::span<const std::string> texts) const {
  json req;
  req["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  const std::string body = post("/embed", req.dump());

  json res;
  try {
    res = json::parse(body);
  } catch (const json::exception& e) {
    throw RemoteError(std::string("malformed /embed response: ") + e.what(), 1, 200, false);
  }
  if (!res.contains("vectors") || !res["vectors"].is_array() || !res.contains("dim")) {
    throw RemoteError("/embed response missing vectors or dim", 1, 200, false);
  }
  const auto d = res["dim"].get<std::size_t>();
  const auto& vs = res["vectors"];
  if (vs.size() != texts.size()) {
    throw RemoteError("/embed returned " + std::to_string(vs.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts",
                      1, 200, false);
  }
  std::size_t expected = 0;
  if (!dim_.compare_exchange_strong(expected, d) && expected != d) {
    throw Error(Errc::DimError, "remote dimension changed from " + std::to_string(expected) + " to " +
                                    std::to_string(d));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(vs.size());
  for (const auto& v : vs) {
    auto values = v.get<std::vector<double>>();
    if (values.size() != d) throw Error(Errc::DimError, "remote vector length disagrees with dim");
    out.emplace_back(std::move(values));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  require_non_empty(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const std::size_t chunk = config_.batch_size;
  std::size_t next = 0;
  while (next < texts.size()) {
    std::vector<std::future<std::vector<EmbeddingVector>>> wave;
    for (std::size_t k = 0; k < config_.max_in_flight && next < texts.size(); ++k) {
      const std::size_t len = std::min(chunk, texts.size() - next);
      wave.push_back(std::async(std::launch::async,
                                [this, part = texts.subspan(next, len)] { return embed_chunk(part); }));
      next += len;
    }
    for (auto& f : wave) {
      auto part = f.get();
      for (auto& v : part) out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<std::string> RemoteEmbedder::echo(const std::vector<std::string>& texts) const {
  json req;
  req["texts"] = texts;
  const auto res = json::parse(post("/echo", req.dump()));
  return res.at("texts").get<std::vector<std::string>>();
}

bool RemoteEmbedder::verify_byte_fidelity(const std::vector<std::string>& texts) const {
  return echo(texts) == texts;
}

}  // namespace unseen::embedding
