#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unseen {

enum class Errc {
  InvalidGene,
  InvalidUtf8,
  CatalogFormat,
  ZoneError,
  EmptyZones,
  OracleUnavailable,
  EmptyInput,
  RemoteError,
  DimError,
  ZeroVector,
  DuplicateId,
  NotFound,
  EmptyCorpus,
  InsensitiveEmbedder,
  CompilabilityError,
  InvalidConfig,
  Io,
};

const char* errc_name(Errc code);

/// Base error for every failure surfaced by the toolkit. The code is stable
/// and is what the CLI reports in its machine-readable error records.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

class InvalidGene : public Error {
 public:
  InvalidGene(std::size_t gene_index, const std::string& message)
      : Error(Errc::InvalidGene, message), gene_index_(gene_index) {}

  std::size_t gene_index() const noexcept { return gene_index_; }

 private:
  std::size_t gene_index_;
};

class RemoteError : public Error {
 public:
  RemoteError(const std::string& message, int attempts, int http_status,
              bool connection_failure)
      : Error(Errc::RemoteError, message),
        attempts_(attempts),
        http_status_(http_status),
        connection_failure_(connection_failure) {}

  int attempts() const noexcept { return attempts_; }
  // 0 when no HTTP response was received.
  int http_status() const noexcept { return http_status_; }
  bool connection_failure() const noexcept { return connection_failure_; }

 private:
  int attempts_;
  int http_status_;
  bool connection_failure_;
};

}  // namespace unseen
