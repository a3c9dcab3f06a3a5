#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "json.hpp"
#include "unseen/errors.hpp"
#include "unseen/eval/eval.hpp"
#include "unseen/parallel.hpp"
#include "unseen/perturb/utf8.hpp"
#include "unseen/perturb/zones.hpp"

namespace unseen::eval {

using attack::Scenario;

std::vector<AlignmentPair> load_alignment_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read alignment pairs " + path.string());
  std::vector<AlignmentPair> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AlignmentPair p;
    try {
      const auto j = nlohmann::json::parse(line);
      p.pair_id = j.at("pair_id").get<std::string>();
      p.query = j.at("query").get<std::string>();
      p.safe = j.at("safe").get<std::string>();
      p.vulnerable = j.at("vulnerable").get<std::string>();
      if (j.contains("language")) {
        const auto lang = parse_language(j["language"].get<std::string>());
        if (!lang) throw Error(Errc::InvalidConfig, "unknown language on line " + std::to_string(lineno));
        p.language = *lang;
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(p.pair_id).second) throw Error(Errc::DuplicateId, "duplicate pair id '" + p.pair_id + "'");
    out.push_back(std::move(p));
  }
  return out;
}

std::string_view alignment_mode_name(AlignmentMode mode) {
  return mode == AlignmentMode::DifferentialEvolution ? "de" : "random";
}

std::optional<AlignmentMode> parse_alignment_mode(std::string_view name) {
  if (name == "de") return AlignmentMode::DifferentialEvolution;
  if (name == "random") return AlignmentMode::RandomInsertion;
  return std::nullopt;
}

namespace {

std::pair<double, double> sims(const embedding::Embedder& e, embedding::SimilarityKind kind, const std::string& q,
                               const std::string& safe, const std::string& vuln) {
  const std::vector<std::string> texts{q, safe, vuln};
  const auto v = e.embed_batch(texts);
  return {embedding::similarity(kind, v[0], v[1]), embedding::similarity(kind, v[0], v[2])};
}

// One random insertion sequence per pair; budgets take prefixes of it.
perturb::Genome random_prefix(const std::u32string& subject, const perturb::SafetyZones* zones, std::size_t total,
                              std::size_t take, std::uint64_t seed, const perturb::InvisibleCatalog& catalog) {
  std::vector<std::int64_t> allowed;
  for (std::int64_t p = 0; p <= static_cast<std::int64_t>(subject.size()); ++p) {
    if (!zones || zones->contains(p)) allowed.push_back(p);
  }
  if (allowed.empty()) throw Error(Errc::EmptyZones, "no insertion positions available");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
  std::uniform_int_distribution<std::size_t> id(0, catalog.size() - 1);
  perturb::Genome g;
  for (std::size_t i = 0; i < total; ++i) {
    const auto p = allowed[pick(rng)];
    const auto c = id(rng);
    if (i < take) g.genes.push_back({p, c});
  }
  return g;
}

}  // namespace

AlignmentResult run_alignment(const std::vector<AlignmentPair>& pairs, Scenario scenario,
                              const AlignmentConfig& config, std::shared_ptr<const embedding::Embedder> embedder) {
  if (!embedder) throw Error(Errc::InvalidConfig, "alignment run has no embedder");
  if (scenario == Scenario::PerturbBoth)
    throw Error(Errc::InvalidConfig, "alignment supports perturb_query and perturb_target only");
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no alignment pairs");
  if (config.budgets.empty()) throw Error(Errc::InvalidConfig, "budget list is empty");
  for (double b : config.budgets) {
    if (!(b > 0.0 && b <= 1.0)) throw Error(Errc::InvalidConfig, "budgets must be in (0, 1]");
  }
  config.de.validate();
  const auto& catalog = config.catalog ? *config.catalog : perturb::InvisibleCatalog::builtin();
  const auto& emb = *embedder;
  const auto kind = config.similarity;

  if (emb.sensitivity() == embedding::Sensitivity::Unchecked) {
    std::vector<std::string> samples;
    for (std::size_t i = 0; i < pairs.size() && i < 8; ++i) samples.push_back(pairs[i].query);
    embedding::sensitivity_probe(emb, samples, catalog);
  }
  if (emb.sensitivity() == embedding::Sensitivity::Insensitive && !config.force) {
    throw Error(Errc::InsensitiveEmbedder, "embedder " + emb.identity() + " ignores invisible characters");
  }
  const double max_budget = *std::max_element(config.budgets.begin(), config.budgets.end());

  struct Task {
    std::size_t pair;
    double budget;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    tasks.push_back({i, 0.0});
    for (double b : config.budgets) tasks.push_back({i, b});
  }

  std::vector<std::optional<AlignmentRecord>> rows(tasks.size());
  std::vector<std::optional<FailedRow>> failures(tasks.size());
  parallel_for(tasks.size(), config.workers, [&](std::size_t row) {
    const auto& [pi, budget] = tasks[row];
    const AlignmentPair& p = pairs[pi];
    AlignmentRecord r;
    r.pair_id = p.pair_id;
    r.budget = budget;
    try {
      const bool on_query = scenario == Scenario::PerturbQuery;
      std::string dq = p.query;
      std::string dv = p.vulnerable;
      if (budget > 0.0) {
        const std::string& subject = on_query ? p.query : p.vulnerable;
        const auto cps = perturb::decode_utf8(subject);
        std::optional<perturb::SafetyZones> zones;
        if (!on_query) zones = perturb::compute_safety_zones(cps, p.language);

        std::string perturbed;
        if (config.mode == AlignmentMode::DifferentialEvolution) {
          attack::DEConfig de = config.de;
          de.budget_fraction = budget;
          de.rng_seed = config.de.rng_seed + row;
          attack::FitnessContext ctx;
          ctx.scenario = scenario;
          ctx.query = p.query;
          ctx.target = p.vulnerable;
          if (on_query) ctx.reference = p.safe;
          ctx.embedder = embedder;
          ctx.similarity = kind;
          ctx.target_language = p.language;
          ctx.oracle = config.oracle;
          ctx.force = config.force;
          const auto out = attack::optimize(ctx, de, catalog, zones ? &*zones : nullptr);
          perturbed = out.perturbed_text;
          r.evaluations = out.evaluations;
        } else {
          const auto g = random_prefix(cps, zones ? &*zones : nullptr, attack::compute_budget(max_budget, cps.size()),
                                       attack::compute_budget(budget, cps.size()), config.de.rng_seed + pi, catalog);
          perturbed = perturb::apply_genome_utf8(subject, g, catalog);
          if (!on_query && config.oracle && p.language != Language::PlainText) {
            const auto v = config.oracle->check(perturbed, p.language);
            if (!v.pass) throw Error(Errc::CompilabilityError, "random insertion broke parsing: " + v.reason);
          }
          r.evaluations = 1;
        }
        (on_query ? dq : dv) = perturbed;
        r.perturbed_text = std::move(perturbed);
      }
      const auto [s_safe, s_vuln] = sims(emb, kind, dq, p.safe, dv);
      r.sim_safe = s_safe;
      r.sim_vuln = s_vuln;
      r.flipped = s_vuln > s_safe;
      rows[row] = std::move(r);
    } catch (const Error& e) {
      failures[row] = FailedRow{p.pair_id, p.pair_id, budget, errc_name(e.code()), e.what()};
    }
  });

  AlignmentResult result;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (rows[i]) result.records.push_back(std::move(*rows[i]));
    if (failures[i]) result.failures.push_back(std::move(*failures[i]));
  }
  return result;
}

std::vector<FlipRate> flip_rates(const std::vector<AlignmentRecord>& records) {
  std::map<double, FlipRate> by_budget;
  for (const auto& r : records) {
    auto& f = by_budget[r.budget];
    f.budget = r.budget;
    ++f.total;
    if (r.flipped) ++f.flipped;
  }
  std::vector<FlipRate> out;
  for (auto& [b, f] : by_budget) out.push_back(f);
  return out;
}

std::vector<FlipRate> cumulative_flip_rates(const std::vector<AlignmentRecord>& records) {
  std::set<double> budgets;
  std::set<std::string> all_pairs;
  for (const auto& r : records) {
    budgets.insert(r.budget);
    all_pairs.insert(r.pair_id);
  }
  std::vector<FlipRate> out;
  for (double b : budgets) {
    std::set<std::string> flipped;
    for (const auto& r : records) {
      if (r.budget <= b && r.flipped) flipped.insert(r.pair_id);
    }
    out.push_back({b, flipped.size(), all_pairs.size()});
  }
  return out;
}

}  // namespace unseen::eval
