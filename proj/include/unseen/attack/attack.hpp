#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unseen/embedding/embedding.hpp"
#include "unseen/language.hpp"
#include "unseen/perturb/catalog.hpp"
#include "unseen/perturb/genome.hpp"
#include "unseen/perturb/syntax_oracle.hpp"
#include "unseen/perturb/zones.hpp"
#include "unseen/retrieval/corpus.hpp"

namespace unseen::attack {

enum class Scenario { PerturbQuery, PerturbTarget, PerturbBoth };

std::string_view scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view name);

struct DEConfig {
  std::size_t population_size = 32;
  std::size_t max_generations = 3;
  double differential_weight = 0.8;  // F
  double crossover_rate = 0.7;       // CR
  double budget_fraction = 0.1;      // b in (0, 1]
  std::uint64_t rng_seed = 0;
  // Fixed genome length M instead of the fraction rule.
  std::optional<std::size_t> budget_override;

  // Throws InvalidConfig: population >= 4, 0 < F <= 2, 0 <= CR <= 1, 0 < b <= 1.
  void validate() const;
};

// M = max(1, floor(fraction * length)).
std::size_t compute_budget(double fraction, std::size_t length);

struct FitnessContext {
  Scenario scenario = Scenario::PerturbQuery;
  std::string query;
  std::string target;
  // Required for perturb_query unless reference_disabled; absent otherwise.
  std::optional<std::string> reference;
  bool reference_disabled = false;
  std::shared_ptr<const embedding::Embedder> embedder;
  embedding::SimilarityKind similarity = embedding::SimilarityKind::Cosine;
  // Candidate targets are parse-checked when an oracle is given.
  Language target_language = Language::PlainText;
  const perturb::SyntaxOracle* oracle = nullptr;
  // Attack even if the sensitivity probe says the embedder ignores the catalog.
  bool force = false;

  void validate() const;
};

struct AttackOutcome {
  perturb::Genome best_genome;
  double best_fitness = 0.0;
  double baseline_fitness = 0.0;  // loss of the unperturbed subject
  std::string perturbed_text;
  std::vector<double> history;     // best loss after init and after each generation
  std::size_t evaluations = 0;     // candidate texts sent to the embedder
  std::size_t budget = 0;          // M
  std::vector<std::string> warnings;
};

// -s(E(q), E(delta_t)); lower is better.
double loss_target(std::string_view query, std::string_view delta_target, const FitnessContext& ctx);

// -s(E(delta_q), E(t)) + s(E(delta_q), E(r)); the second term is dropped when
// `reference` is empty.
double loss_query(std::string_view delta_query, std::string_view target,
                  std::optional<std::string_view> reference, const FitnessContext& ctx);

/// The document closest to `query`, or a synthetic "reference" document built
/// from `override_text` when the attacker supplies one. Throws EmptyCorpus.
retrieval::Document select_reference(std::string_view query, const retrieval::Corpus& corpus,
                                     const embedding::Embedder& embedder,
                                     std::optional<std::string> override_text = std::nullopt,
                                     embedding::SimilarityKind sim = embedding::SimilarityKind::Cosine);

/// DE/rand/1/bin over integer genomes of M insertion genes.
///
/// The subject is the query (perturb_query) or the target (perturb_target).
/// Each gene contributes two integer coordinates, pos in [-1, L] and id in
/// [0, |catalog|). Mutation is round(x_r1 + F (x_r2 - x_r3)) clamped to the
/// coordinate range; binomial crossover takes the mutant coordinate with
/// probability CR and always for one random coordinate; a trial replaces its
/// parent when its loss is no worse. Individual 0 starts as all sentinels so
/// the result never loses to the unperturbed subject. Positions outside
/// `zones` become sentinels. Targets failing the syntax oracle score +inf.
AttackOutcome optimize(const FitnessContext& ctx, const DEConfig& config,
                       const perturb::InvisibleCatalog& catalog,
                       const perturb::SafetyZones* zones = nullptr);

struct CombinedOutcome {
  std::string delta_query;
  std::string delta_target;
  perturb::Genome query_genome;
  perturb::Genome target_genome;
  bool identifier_zones_dropped = false;
  bool oracle_checked = false;
  std::vector<std::string> warnings;
};

/// Same character at every other position of the query and of the target's
/// safety zones; no search. If the oracle rejects the target, identifier
/// zones are dropped and the check repeated; a second rejection throws
/// CompilabilityError. A missing oracle only adds a warning.
CombinedOutcome attack_both(std::string_view query, std::string_view target, std::size_t char_id,
                            const perturb::SafetyZones& target_zones, Language target_language,
                            const perturb::InvisibleCatalog& catalog,
                            const perturb::SyntaxOracle* oracle);

// Catalog id of U+200B if present, else 0.
std::size_t default_insert_char(const perturb::InvisibleCatalog& catalog);

}  // namespace unseen::attack
