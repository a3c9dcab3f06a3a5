#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/attack/attack.hpp"
#include "unseen/embedding/embedding.hpp"
#include "unseen/perturb/catalog.hpp"
#include "unseen/perturb/syntax_oracle.hpp"
#include "unseen/retrieval/corpus.hpp"
#include "unseen/sanitize/sanitize.hpp"

namespace unseen::eval {

struct Query {
  std::string id;
  std::string text;
};

// JSONL records {"id": ..., "text": ...}.
std::vector<Query> load_queries(const std::filesystem::path& path);

// Budget recorded for perturb_both rows, which insert at every other position.
inline constexpr double kEveryOtherBudget = 0.5;

struct AttackReport {
  std::string query_id;
  std::string target_id;
  std::string scenario;  // scenario name, or "baseline" for budget-0 rows
  double budget = 0.0;
  std::size_t rank = 0;           // 1-based rank of the adversarial target in D'
  std::size_t baseline_rank = 0;  // rank of the clean target for the clean query
  double sim_target = 0.0;
  double sim_reference = 0.0;
  std::size_t evaluations = 0;
  std::string reference_id;
  // Texts as retrieved, kept for the defense check and outcome files.
  std::string retrieved_query;
  std::string retrieved_target;

  bool hit(std::size_t k) const { return rank >= 1 && rank <= k; }
  bool is_baseline() const { return scenario == "baseline"; }
};

struct FailedRow {
  std::string query_id;
  std::string target_id;
  double budget = 0.0;
  std::string error;  // Errc name
  std::string message;
};

struct SweepConfig {
  attack::DEConfig de;
  std::vector<double> budgets{0.1, 0.2, 0.3};
  embedding::SimilarityKind similarity = embedding::SimilarityKind::Cosine;
  const perturb::InvisibleCatalog* catalog = nullptr;  // builtin when null
  const perturb::SyntaxOracle* oracle = nullptr;
  std::optional<std::size_t> insert_char;        // perturb_both character, U+200B by default
  std::optional<std::string> reference_override;  // attacker-built reference snippet
  bool force = false;
  std::size_t workers = 1;
};

struct SweepResult {
  std::vector<AttackReport> reports;  // baseline rows first, then attack rows
  std::vector<FailedRow> failures;
};

/// For each query: a budget-0 baseline row, then one attack row per budget
/// (a single row for perturb_both). Each attack row poisons `corpus` with
/// the (possibly perturbed) target and ranks it for the (possibly
/// perturbed) query. Row failures are collected, not thrown. Row seeds are
/// de.rng_seed + row index, so results do not depend on `workers`.
/// Throws NotFound-style errors up front: DuplicateId if the target id is
/// already in the corpus, InvalidConfig for an empty budget list,
/// InsensitiveEmbedder unless forced.
SweepResult run_retrievability(const std::vector<Query>& queries, const retrieval::Corpus& corpus,
                               const retrieval::Document& target, attack::Scenario scenario,
                               const SweepConfig& config, std::shared_ptr<const embedding::Embedder> embedder);

/// Per (query, target, scenario): the row with the minimum rank over the
/// non-baseline rows (first such row on ties). Throws EmptyInput.
std::vector<AttackReport> best_across_budgets(const std::vector<AttackReport>& reports);

struct DefenseCheck {
  std::string query_id;
  double budget = 0.0;
  std::size_t defended_rank = 0;
  std::size_t clean_rank = 0;
  bool neutralized() const { return defended_rank == clean_rank; }
};

/// Reruns every attack row through defended_retrieve on the poisoned corpus
/// and compares with the clean rank of the clean target.
std::vector<DefenseCheck> check_defense(const std::vector<AttackReport>& reports, const std::vector<Query>& queries,
                                        const retrieval::Corpus& corpus, const retrieval::Document& target,
                                        const embedding::Embedder& embedder, const sanitize::SanitizePolicy& policy,
                                        embedding::SimilarityKind sim = embedding::SimilarityKind::Cosine);

// ---- detection

enum class DetectMethod { Substring, Regex, Command };

struct DetectionRule {
  std::string target_tag;
  DetectMethod method = DetectMethod::Substring;
  // Substring, ECMAScript regex, or a shell command fed the output on stdin
  // (non-zero exit means detected, for scanners such as bandit).
  std::string pattern;

  // Throws InvalidConfig if a regex does not compile.
  void validate() const;
};

std::string_view method_name(DetectMethod m);
std::vector<DetectionRule> load_detection_rules(const std::filesystem::path& path);

/// Substring rules match the raw text. Regex rules use search semantics with
/// `.` not crossing line breaks. Command rules throw Error(Io) if the command
/// cannot run.
bool detect_target_in_output(std::string_view output, const DetectionRule& rule);

// Tags of every rule that fires on `output`.
std::vector<std::string> firing_rules(std::string_view output, const std::vector<DetectionRule>& rules);

// <query_id>.txt files of a directory; other files are ignored.
std::map<std::string, std::string> load_generation_outputs(const std::filesystem::path& dir);

// ---- alignment

struct AlignmentPair {
  std::string pair_id;
  std::string query;
  std::string safe;
  std::string vulnerable;
  Language language = Language::PlainText;
};

// JSONL {"pair_id","query","safe","vulnerable","language"?}.
std::vector<AlignmentPair> load_alignment_pairs(const std::filesystem::path& path);

enum class AlignmentMode { DifferentialEvolution, RandomInsertion };

std::string_view alignment_mode_name(AlignmentMode mode);
std::optional<AlignmentMode> parse_alignment_mode(std::string_view name);

struct AlignmentConfig {
  attack::DEConfig de;
  std::vector<double> budgets{0.05, 0.1, 0.15, 0.2};
  AlignmentMode mode = AlignmentMode::DifferentialEvolution;
  embedding::SimilarityKind similarity = embedding::SimilarityKind::Cosine;
  const perturb::InvisibleCatalog* catalog = nullptr;
  const perturb::SyntaxOracle* oracle = nullptr;
  bool force = false;
  std::size_t workers = 1;
};

struct AlignmentRecord {
  std::string pair_id;
  double budget = 0.0;
  double sim_safe = 0.0;
  double sim_vuln = 0.0;
  bool flipped = false;  // sim_vuln > sim_safe; ties are not flips
  std::size_t evaluations = 0;
  std::string perturbed_text;
};

struct AlignmentResult {
  std::vector<AlignmentRecord> records;  // per pair: budget 0 first, then budgets in order
  std::vector<FailedRow> failures;
};

/// perturb_query pushes the query toward the vulnerable variant and away
/// from the safe one; perturb_target pulls the vulnerable variant toward the
/// query. Random mode draws one insertion sequence per pair and uses growing
/// prefixes of it, so larger budgets extend smaller ones.
AlignmentResult run_alignment(const std::vector<AlignmentPair>& pairs, attack::Scenario scenario,
                              const AlignmentConfig& config, std::shared_ptr<const embedding::Embedder> embedder);

struct FlipRate {
  double budget = 0.0;
  std::size_t flipped = 0;
  std::size_t total = 0;
};

// Fraction flipped at each budget.
std::vector<FlipRate> flip_rates(const std::vector<AlignmentRecord>& records);
// Pairs flipped at any budget <= b; non-decreasing in b.
std::vector<FlipRate> cumulative_flip_rates(const std::vector<AlignmentRecord>& records);

// ---- artifacts

struct ArtifactMeta {
  std::uint64_t seed = 0;
  std::string catalog_sha256;
  std::string embedder;
  std::string manifest_sha256;

  // "# seed=... catalog_sha256=... embedder=... manifest_sha256=..."
  std::string comment_line() const;
};

// Hundredths, rounded half-up: 1 of 8 gives 12.5, 2 of 3 gives 66.67.
double percent_half_up(std::size_t hits, std::size_t total);

inline const std::vector<std::size_t> kDefaultKs{1, 3, 5};

// Column header of report.csv, without the optional detection columns.
std::string report_csv_header();

struct GenerationDetection {
  const std::map<std::string, std::string>* outputs = nullptr;  // query_id -> generated text
  const DetectionRule* rule = nullptr;
};

std::string report_csv(const std::vector<AttackReport>& reports, const std::optional<ArtifactMeta>& meta,
                       const GenerationDetection& detection = {});

// Summary object: per-k success over best-across-budgets rows, per-budget
// cells, baseline cells, failures, and end-to-end success when outputs are
// supplied.
std::string summary_json(const std::vector<AttackReport>& reports, const std::vector<FailedRow>& failures,
                         const std::vector<std::size_t>& ks, const std::optional<ArtifactMeta>& meta,
                         const GenerationDetection& detection = {},
                         const std::vector<DefenseCheck>* defense = nullptr);

std::string alignment_csv(const std::vector<AlignmentRecord>& records, const std::optional<ArtifactMeta>& meta);
std::string alignment_json(const AlignmentResult& result, const std::optional<ArtifactMeta>& meta);

// Writes report.csv and summary.json under `dir`; Io errors name the path.
void emit_report(const std::filesystem::path& dir, const SweepResult& sweep, const std::vector<std::size_t>& ks,
                 const std::optional<ArtifactMeta>& meta, const GenerationDetection& detection = {},
                 const std::vector<DefenseCheck>* defense = nullptr);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace unseen::eval
