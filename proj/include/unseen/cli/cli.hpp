#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "unseen/attack/attack.hpp"
#include "unseen/embedding/remote.hpp"
#include "unseen/eval/eval.hpp"

namespace unseen::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitRunFailure = 2,
  kExitInsensitive = 3,
  kExitConnectivity = 4,
};

// Environment variable that overrides the manifest's embedder (flags still win).
inline constexpr const char* kEmbedderEnv = "UNSEEN_EMBEDDER";

struct TargetSpec {
  std::string id;
  std::filesystem::path path;
  std::optional<Language> language;
};

/// Validated run configuration: the manifest with flag and environment
/// overrides applied and relative paths resolved.
struct Settings {
  std::string command;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::set<retrieval::Label>> corpus_labels;  // keep only these labels when indexing
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::size_t> catalog_size;
  std::vector<TargetSpec> targets;
  std::optional<std::filesystem::path> pairs;
  std::optional<std::filesystem::path> output_dir;
  std::string embedder = "reference";
  embedding::RemoteConfig remote;
  std::optional<attack::Scenario> scenario;
  std::vector<double> budgets;
  std::vector<std::size_t> ks{1, 3, 5};
  attack::DEConfig de;
  embedding::SimilarityKind similarity = embedding::SimilarityKind::Cosine;
  bool force = false;
  std::size_t workers = 1;
  std::optional<std::string> reference;
  std::optional<char32_t> insert_char;
  std::map<Language, std::string> oracle_commands;
  eval::AlignmentMode alignment_mode = eval::AlignmentMode::DifferentialEvolution;
  std::optional<std::filesystem::path> generations_dir;
  std::optional<std::filesystem::path> detection_rules;
  std::optional<std::string> detection_tag;
  bool defense = false;
  std::optional<std::filesystem::path> input;
  std::string sanitize_action;  // scan | strip
  bool preserve_emoji_joiners = false;
  bool map_to_sentinel = false;
  bool catalog_only = false;
  std::vector<std::string> samples;

  // SHA-256 of the effective manifest without output_dir and workers, which
  // do not change results.
  std::string manifest_sha256;
};

/// Parses `manifest` (keys documented in schema/manifest.schema.json),
/// resolving relative paths against `base_dir`. Unknown keys, wrong types
/// and missing input files throw Error(InvalidConfig) or Error(Io).
Settings parse_settings(const nlohmann::ordered_json& manifest, const std::filesystem::path& base_dir);

// {"error": code, "message": ..., "exit_code": n}
std::string error_record(const std::string& code, const std::string& message, int exit_code);

/// Entry point behind the `unseen` binary; `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unseen::cli
