#include <algorithm>
#include <fstream>
#include <map>
#include <optional>

#include "json.hpp"
#include "unseen/errors.hpp"
#include "unseen/eval/eval.hpp"
#include "unseen/parallel.hpp"
#include "unseen/perturb/utf8.hpp"
#include "unseen/perturb/zones.hpp"
#include "unseen/retrieval/retrieval.hpp"

namespace unseen::eval {

using attack::Scenario;
using embedding::EmbeddingVector;

std::vector<Query> load_queries(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read queries file " + path.string());
  std::vector<Query> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    perturb::decode_utf8(out.back().text);
  }
  return out;
}

namespace {

struct QueryContext {
  const Query* query = nullptr;
  retrieval::Document reference;
  std::size_t baseline_rank = 0;
  double sim_target = 0.0;
  double sim_reference = 0.0;
};

struct Task {
  std::size_t query = 0;
  std::optional<double> budget;  // empty for the baseline row
};

retrieval::Document adversarial_copy(const retrieval::Document& target, std::string text) {
  retrieval::Document d = target;
  d.text = std::move(text);
  d.label = retrieval::Label::Adversarial;
  d.pair_id.reset();
  return d;
}

double sim_of(const embedding::Embedder& e, embedding::SimilarityKind kind, const std::string& a,
              const std::string& b) {
  const std::vector<std::string> texts{a, b};
  const auto v = e.embed_batch(texts);
  return embedding::similarity(kind, v[0], v[1]);
}

}  // namespace

SweepResult run_retrievability(const std::vector<Query>& queries, const retrieval::Corpus& corpus_in,
                               const retrieval::Document& target, Scenario scenario, const SweepConfig& config,
                               std::shared_ptr<const embedding::Embedder> embedder) {
  if (!embedder) throw Error(Errc::InvalidConfig, "sweep has no embedder");
  if (queries.empty()) throw Error(Errc::EmptyInput, "no queries to evaluate");
  if (config.budgets.empty()) throw Error(Errc::InvalidConfig, "budget list is empty");
  for (double b : config.budgets) {
    if (!(b > 0.0 && b <= 1.0)) throw Error(Errc::InvalidConfig, "budgets must be in (0, 1]");
  }
  if (corpus_in.empty()) throw Error(Errc::EmptyCorpus, "corpus is empty");
  if (corpus_in.find(target.id)) throw Error(Errc::DuplicateId, "target id '" + target.id + "' is already in the corpus");
  config.de.validate();

  const auto& catalog = config.catalog ? *config.catalog : perturb::InvisibleCatalog::builtin();
  const auto& emb = *embedder;
  const auto sim = config.similarity;

  if (emb.sensitivity() == embedding::Sensitivity::Unchecked) {
    std::vector<std::string> samples;
    for (std::size_t i = 0; i < queries.size() && samples.size() < 8; ++i) {
      if (!queries[i].text.empty()) samples.push_back(queries[i].text);
    }
    samples.push_back(target.text);
    embedding::sensitivity_probe(emb, samples, catalog);
  }
  if (emb.sensitivity() == embedding::Sensitivity::Insensitive && !config.force) {
    throw Error(Errc::InsensitiveEmbedder, "embedder " + emb.identity() + " ignores invisible characters");
  }

  retrieval::Corpus corpus = corpus_in;
  corpus.materialize(emb);
  const retrieval::Corpus clean_poisoned = retrieval::poison(corpus, adversarial_copy(target, target.text));
  const auto target_zones = perturb::compute_safety_zones(perturb::decode_utf8(target.text), target.language);
  const std::size_t both_char = config.insert_char.value_or(attack::default_insert_char(catalog));

  // Per-query baseline facts shared by every row of that query.
  std::vector<std::optional<QueryContext>> contexts(queries.size());
  std::vector<std::optional<FailedRow>> context_errors(queries.size());
  parallel_for(queries.size(), config.workers, [&](std::size_t i) {
    const Query& q = queries[i];
    try {
      QueryContext c;
      c.query = &q;
      c.reference = attack::select_reference(q.text, corpus, emb, config.reference_override, sim);
      c.baseline_rank = retrieval::rank_of(q.text, clean_poisoned, target.id, emb, sim);
      c.sim_target = sim_of(emb, sim, q.text, target.text);
      c.sim_reference = sim_of(emb, sim, q.text, c.reference.text);
      contexts[i] = std::move(c);
    } catch (const Error& e) {
      context_errors[i] = FailedRow{q.id, target.id, 0.0, errc_name(e.code()), e.what()};
    }
  });

  std::vector<Task> tasks;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    tasks.push_back({i, std::nullopt});
    if (scenario == Scenario::PerturbBoth) {
      tasks.push_back({i, kEveryOtherBudget});
    } else {
      for (double b : config.budgets) tasks.push_back({i, b});
    }
  }

  std::vector<std::optional<AttackReport>> rows(tasks.size());
  std::vector<std::optional<FailedRow>> failures(tasks.size());
  parallel_for(tasks.size(), config.workers, [&](std::size_t row) {
    const Task& task = tasks[row];
    const Query& q = queries[task.query];
    const double budget = task.budget.value_or(0.0);
    if (!contexts[task.query]) {
      auto f = *context_errors[task.query];
      f.budget = budget;
      failures[row] = std::move(f);
      return;
    }
    const QueryContext& c = *contexts[task.query];
    AttackReport r;
    r.query_id = q.id;
    r.target_id = target.id;
    r.budget = budget;
    r.baseline_rank = c.baseline_rank;
    r.reference_id = c.reference.id;
    try {
      if (!task.budget) {
        r.scenario = "baseline";
        r.rank = c.baseline_rank;
        r.sim_target = c.sim_target;
        r.sim_reference = c.sim_reference;
        r.retrieved_query = q.text;
        r.retrieved_target = target.text;
        rows[row] = std::move(r);
        return;
      }
      r.scenario = std::string(attack::scenario_name(scenario));
      attack::DEConfig de = config.de;
      de.budget_fraction = budget;
      de.rng_seed = config.de.rng_seed + row;

      attack::FitnessContext ctx;
      ctx.scenario = scenario;
      ctx.query = q.text;
      ctx.target = target.text;
      ctx.embedder = embedder;
      ctx.similarity = sim;
      ctx.target_language = target.language;
      ctx.oracle = config.oracle;
      ctx.force = config.force;

      std::string dq = q.text;
      std::string dt = target.text;
      if (scenario == Scenario::PerturbQuery) {
        ctx.reference = c.reference.text;
        const auto out = attack::optimize(ctx, de, catalog);
        dq = out.perturbed_text;
        r.evaluations = out.evaluations;
      } else if (scenario == Scenario::PerturbTarget) {
        const auto out = attack::optimize(ctx, de, catalog, &target_zones);
        dt = out.perturbed_text;
        r.evaluations = out.evaluations;
      } else {
        const auto out = attack::attack_both(q.text, target.text, both_char, target_zones, target.language, catalog,
                                             config.oracle);
        dq = out.delta_query;
        dt = out.delta_target;
      }
      const retrieval::Corpus poisoned =
          dt == target.text ? clean_poisoned : retrieval::poison(corpus, adversarial_copy(target, dt));
      r.rank = retrieval::rank_of(dq, poisoned, target.id, emb, sim);
      r.sim_target = sim_of(emb, sim, dq, dt);
      r.sim_reference = sim_of(emb, sim, dq, c.reference.text);
      r.retrieved_query = std::move(dq);
      r.retrieved_target = std::move(dt);
      rows[row] = std::move(r);
    } catch (const Error& e) {
      failures[row] = FailedRow{q.id, target.id, budget, errc_name(e.code()), e.what()};
    }
  });

  SweepResult result;
  // Baselines first keeps the CSV easy to scan.
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!tasks[i].budget && rows[i]) result.reports.push_back(*rows[i]);
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].budget && rows[i]) result.reports.push_back(std::move(*rows[i]));
    if (failures[i]) result.failures.push_back(std::move(*failures[i]));
  }
  return result;
}

std::vector<AttackReport> best_across_budgets(const std::vector<AttackReport>& reports) {
  if (reports.empty()) throw Error(Errc::EmptyInput, "no reports to aggregate");
  std::vector<AttackReport> out;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> slot;
  for (const auto& r : reports) {
    if (r.is_baseline()) continue;
    const auto key = std::make_tuple(r.query_id, r.target_id, r.scenario);
    const auto it = slot.find(key);
    if (it == slot.end()) {
      slot.emplace(key, out.size());
      out.push_back(r);
    } else if (r.rank < out[it->second].rank) {
      out[it->second] = r;
    }
  }
  if (out.empty()) throw Error(Errc::EmptyInput, "only baseline rows to aggregate");
  return out;
}

std::vector<DefenseCheck> check_defense(const std::vector<AttackReport>& reports, const std::vector<Query>& queries,
                                        const retrieval::Corpus& corpus, const retrieval::Document& target,
                                        const embedding::Embedder& embedder, const sanitize::SanitizePolicy& policy,
                                        embedding::SimilarityKind sim) {
  std::map<std::string, const Query*> by_id;
  for (const auto& q : queries) by_id[q.id] = &q;
  const auto clean_poisoned = retrieval::poison(corpus, adversarial_copy(target, target.text));

  std::vector<DefenseCheck> out;
  for (const auto& r : reports) {
    if (r.is_baseline()) continue;
    const auto it = by_id.find(r.query_id);
    if (it == by_id.end()) throw Error(Errc::NotFound, "report names unknown query '" + r.query_id + "'");
    const auto poisoned = retrieval::poison(corpus, adversarial_copy(target, r.retrieved_target));
    const auto defended =
        sanitize::defended_retrieve(r.retrieved_query, poisoned, poisoned.size(), embedder, policy, sim);
    DefenseCheck c;
    c.query_id = r.query_id;
    c.budget = r.budget;
    c.defended_rank = retrieval::rank_in(defended.ranked, target.id);
    c.clean_rank = retrieval::rank_of(it->second->text, clean_poisoned, target.id, embedder, sim);
    out.push_back(c);
  }
  return out;
}

}  // namespace unseen::eval
