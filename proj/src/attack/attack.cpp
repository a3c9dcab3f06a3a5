#include "unseen/attack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"
#include "unseen/retrieval/retrieval.hpp"

namespace unseen::attack {

using embedding::EmbeddingVector;
using perturb::Genome;
using perturb::InsertionGene;

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::PerturbQuery: return "perturb_query";
    case Scenario::PerturbTarget: return "perturb_target";
    case Scenario::PerturbBoth: return "perturb_both";
  }
  return "perturb_query";
}

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "perturb_query") return Scenario::PerturbQuery;
  if (name == "perturb_target") return Scenario::PerturbTarget;
  if (name == "perturb_both") return Scenario::PerturbBoth;
  return std::nullopt;
}

void DEConfig::validate() const {
  if (population_size < 4) throw Error(Errc::InvalidConfig, "population_size must be at least 4");
  if (!(differential_weight > 0.0 && differential_weight <= 2.0))
    throw Error(Errc::InvalidConfig, "differential weight F must be in (0, 2]");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0))
    throw Error(Errc::InvalidConfig, "crossover rate CR must be in [0, 1]");
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0))
    throw Error(Errc::InvalidConfig, "budget fraction must be in (0, 1]");
  if (budget_override && *budget_override == 0) throw Error(Errc::InvalidConfig, "budget override must be >= 1");
}

std::size_t compute_budget(double fraction, std::size_t length) {
  const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length)));
  return std::max<std::size_t>(1, m);
}

void FitnessContext::validate() const {
  if (!embedder) throw Error(Errc::InvalidConfig, "fitness context has no embedder");
  if (scenario == Scenario::PerturbQuery && !reference && !reference_disabled)
    throw Error(Errc::InvalidConfig, "perturb_query needs a reference document (or reference_disabled)");
  if (scenario != Scenario::PerturbQuery && reference)
    throw Error(Errc::InvalidConfig, "a reference document only applies to perturb_query");
}

double loss_target(std::string_view query, std::string_view delta_target, const FitnessContext& ctx) {
  const std::vector<std::string> texts{std::string(query), std::string(delta_target)};
  const auto v = ctx.embedder->embed_batch(texts);
  return -embedding::similarity(ctx.similarity, v[0], v[1]);
}

double loss_query(std::string_view delta_query, std::string_view target,
                  std::optional<std::string_view> reference, const FitnessContext& ctx) {
  std::vector<std::string> texts{std::string(delta_query), std::string(target)};
  if (reference) texts.emplace_back(*reference);
  const auto v = ctx.embedder->embed_batch(texts);
  double loss = -embedding::similarity(ctx.similarity, v[0], v[1]);
  if (reference) loss += embedding::similarity(ctx.similarity, v[0], v[2]);
  return loss;
}

retrieval::Document select_reference(std::string_view query, const retrieval::Corpus& corpus,
                                     const embedding::Embedder& embedder, std::optional<std::string> override_text,
                                     embedding::SimilarityKind sim) {
  if (override_text) {
    retrieval::Document d;
    d.id = "reference";
    d.text = std::move(*override_text);
    return d;
  }
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "reference selection needs a non-empty corpus");
  const auto ranking = retrieval::rank_all(embedder.embed(query), corpus, embedder, sim);
  return *corpus.find(ranking.front().id);
}

namespace {

class Evolution {
 public:
  Evolution(const FitnessContext& ctx, const DEConfig& cfg, const perturb::InvisibleCatalog& catalog,
            const perturb::SafetyZones* zones)
      : ctx_(ctx), cfg_(cfg), catalog_(catalog), zones_(zones), rng_(cfg.rng_seed) {
    subject_ = perturb::decode_utf8(ctx.scenario == Scenario::PerturbQuery ? ctx.query : ctx.target);
    if (subject_.empty()) throw Error(Errc::EmptyInput, "cannot perturb an empty subject");
    budget_ = cfg.budget_override.value_or(compute_budget(cfg.budget_fraction, subject_.size()));

    std::vector<std::string> fixed;
    if (ctx.scenario == Scenario::PerturbQuery) {
      fixed.push_back(ctx.target);
      if (ctx.reference && !ctx.reference_disabled) fixed.push_back(*ctx.reference);
    } else {
      fixed.push_back(ctx.query);
    }
    auto vecs = ctx.embedder->embed_batch(fixed);
    anchor_ = std::move(vecs[0]);
    if (vecs.size() > 1) reference_ = std::move(vecs[1]);
  }

  AttackOutcome run() {
    const std::size_t n = cfg_.population_size;
    const auto len = static_cast<std::int64_t>(subject_.size());
    std::uniform_int_distribution<std::int64_t> pos_dist(-1, len);
    std::uniform_int_distribution<std::size_t> id_dist(0, catalog_.size() - 1);

    std::vector<Genome> pop(n);
    pop[0] = Genome::sentinels(budget_);
    for (std::size_t i = 1; i < n; ++i) {
      pop[i].genes.resize(budget_);
      for (auto& g : pop[i].genes) {
        g.pos = pos_dist(rng_);
        g.id = id_dist(rng_);
      }
      normalize(pop[i]);
    }
    std::vector<double> fit = evaluate(pop);

    AttackOutcome out;
    out.budget = budget_;
    out.baseline_fitness = fit[0];
    auto best = std::min_element(fit.begin(), fit.end()) - fit.begin();
    out.history.push_back(fit[best]);

    const std::size_t coords = 2 * budget_;
    std::uniform_int_distribution<std::size_t> member(0, n - 1);
    std::uniform_int_distribution<std::size_t> coord(0, coords - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double f = cfg_.differential_weight;
    const std::int64_t max_id = static_cast<std::int64_t>(catalog_.size()) - 1;

    for (std::size_t gen = 0; gen < cfg_.max_generations; ++gen) {
      std::vector<Genome> trials(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r1, r2, r3;
        do r1 = member(rng_); while (r1 == i);
        do r2 = member(rng_); while (r2 == i || r2 == r1);
        do r3 = member(rng_); while (r3 == i || r3 == r1 || r3 == r2);
        const std::size_t forced = coord(rng_);
        Genome trial = pop[i];
        for (std::size_t c = 0; c < coords; ++c) {
          if (unit(rng_) >= cfg_.crossover_rate && c != forced) continue;
          const std::size_t gi = c / 2;
          const bool is_pos = c % 2 == 0;
          auto value = [&](std::size_t r) {
            const auto& g = pop[r].genes[gi];
            return static_cast<double>(is_pos ? g.pos : static_cast<std::int64_t>(g.id));
          };
          const auto v = static_cast<std::int64_t>(std::lround(value(r1) + f * (value(r2) - value(r3))));
          if (is_pos) {
            trial.genes[gi].pos = std::clamp<std::int64_t>(v, InsertionGene::kSentinel, len);
          } else {
            trial.genes[gi].id = static_cast<std::size_t>(std::clamp<std::int64_t>(v, 0, max_id));
          }
        }
        normalize(trial);
        trials[i] = std::move(trial);
      }
      const auto trial_fit = evaluate(trials);
      for (std::size_t i = 0; i < n; ++i) {
        if (trial_fit[i] <= fit[i]) {
          pop[i] = std::move(trials[i]);
          fit[i] = trial_fit[i];
        }
      }
      best = std::min_element(fit.begin(), fit.end()) - fit.begin();
      out.history.push_back(fit[best]);
    }

    out.best_genome = pop[best];
    out.best_fitness = fit[best];
    out.perturbed_text = perturb::encode_utf8(perturb::apply_genome(subject_, out.best_genome, catalog_));
    out.evaluations = evaluations_;
    out.warnings = std::move(warnings_);
    return out;
  }

 private:
  void normalize(Genome& g) const {
    if (zones_) perturb::constrain_to_zones(g, *zones_);
  }

  std::vector<double> evaluate(const std::vector<Genome>& genomes) {
    std::vector<double> loss(genomes.size(), std::numeric_limits<double>::infinity());
    std::vector<std::string> candidates;
    candidates.reserve(genomes.size());
    for (const auto& g : genomes) {
      candidates.push_back(perturb::encode_utf8(perturb::apply_genome(subject_, g, catalog_)));
    }
    std::vector<bool> parses(genomes.size(), true);
    const bool check = ctx_.scenario == Scenario::PerturbTarget && ctx_.oracle != nullptr &&
                       ctx_.target_language != Language::PlainText && !oracle_missing_;
    if (check) {
      try {
        const auto verdicts = ctx_.oracle->check_batch(candidates, ctx_.target_language);
        for (std::size_t i = 0; i < verdicts.size(); ++i) parses[i] = verdicts[i].pass;
      } catch (const Error& e) {
        if (e.code() != Errc::OracleUnavailable) throw;
        oracle_missing_ = true;
        warnings_.push_back(std::string("syntax oracle unavailable, candidates not parse-checked: ") + e.what());
      }
    }
    std::vector<std::string> texts;
    std::vector<std::size_t> at;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!parses[i]) continue;
      texts.push_back(std::move(candidates[i]));
      at.push_back(i);
    }
    if (texts.empty()) return loss;
    const auto vecs = ctx_.embedder->embed_batch(texts);
    evaluations_ += texts.size();
    for (std::size_t k = 0; k < vecs.size(); ++k) {
      double l = -embedding::similarity(ctx_.similarity, vecs[k], anchor_);
      if (reference_) l += embedding::similarity(ctx_.similarity, vecs[k], *reference_);
      loss[at[k]] = l;
    }
    return loss;
  }

  const FitnessContext& ctx_;
  const DEConfig& cfg_;
  const perturb::InvisibleCatalog& catalog_;
  const perturb::SafetyZones* zones_;
  std::mt19937_64 rng_;
  std::u32string subject_;
  std::size_t budget_ = 1;
  EmbeddingVector anchor_;
  std::optional<EmbeddingVector> reference_;
  std::size_t evaluations_ = 0;
  bool oracle_missing_ = false;
  std::vector<std::string> warnings_;
};

}  // namespace

AttackOutcome optimize(const FitnessContext& ctx, const DEConfig& config, const perturb::InvisibleCatalog& catalog,
                       const perturb::SafetyZones* zones) {
  ctx.validate();
  config.validate();
  if (ctx.scenario == Scenario::PerturbBoth)
    throw Error(Errc::InvalidConfig, "perturb_both uses attack_both, not optimize");
  if (catalog.empty()) throw Error(Errc::InvalidConfig, "catalog is empty");
  const std::string& subject = ctx.scenario == Scenario::PerturbQuery ? ctx.query : ctx.target;
  if (subject.empty()) throw Error(Errc::EmptyInput, "cannot perturb an empty subject");

  if (ctx.embedder->sensitivity() == embedding::Sensitivity::Unchecked) {
    embedding::sensitivity_probe(*ctx.embedder, std::vector<std::string>{subject}, catalog);
  }
  if (ctx.embedder->sensitivity() == embedding::Sensitivity::Insensitive && !ctx.force) {
    throw Error(Errc::InsensitiveEmbedder,
                "embedder " + ctx.embedder->identity() + " ignores invisible characters; refusing to attack");
  }
  return Evolution(ctx, config, catalog, zones).run();
}

std::size_t default_insert_char(const perturb::InvisibleCatalog& catalog) {
  return catalog.index_of(U'\u200B').value_or(0);
}

CombinedOutcome attack_both(std::string_view query, std::string_view target, std::size_t char_id,
                            const perturb::SafetyZones& target_zones, Language target_language,
                            const perturb::InvisibleCatalog& catalog, const perturb::SyntaxOracle* oracle) {
  CombinedOutcome out;
  const auto q = perturb::decode_utf8(query);
  const auto t = perturb::decode_utf8(target);
  out.query_genome = perturb::every_other_position_genome(q, char_id, catalog);
  out.delta_query = perturb::encode_utf8(perturb::apply_genome(q, out.query_genome, catalog));

  auto build_target = [&](const perturb::SafetyZones& zones) {
    out.target_genome = perturb::every_other_position_genome(t, char_id, catalog, &zones);
    out.delta_target = perturb::encode_utf8(perturb::apply_genome(t, out.target_genome, catalog));
  };
  build_target(target_zones);

  if (target_language == Language::PlainText) return out;
  if (oracle == nullptr) {
    out.warnings.push_back("no syntax oracle; perturbed target not parse-checked");
    return out;
  }
  try {
    auto verdict = oracle->check(out.delta_target, target_language);
    out.oracle_checked = true;
    if (!verdict.pass && target_zones.count(perturb::ZoneKind::Identifier) > 0) {
      const auto fallback = target_zones.without(perturb::ZoneKind::Identifier);
      if (!fallback.empty()) {
        build_target(fallback);
        out.identifier_zones_dropped = true;
        out.warnings.push_back("identifier insertions rejected by the parser (" + verdict.reason +
                               "); kept comment and string zones only");
        verdict = oracle->check(out.delta_target, target_language);
      }
    }
    if (!verdict.pass) throw Error(Errc::CompilabilityError, "perturbed target does not parse: " + verdict.reason);
  } catch (const Error& e) {
    if (e.code() != Errc::OracleUnavailable) throw;
    out.oracle_checked = false;
    out.warnings.push_back(std::string("syntax oracle unavailable: ") + e.what());
  }
  return out;
}

}  // namespace unseen::attack
