#include "unseen/cli/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "unseen/embedding/remote.hpp"
#include "unseen/errors.hpp"
#include "unseen/parallel.hpp"
#include "unseen/perturb/utf8.hpp"
#include "unseen/perturb/zones.hpp"
#include "unseen/retrieval/retrieval.hpp"
#include "unseen/sanitize/sanitize.hpp"

namespace unseen::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(Errc::InvalidConfig, message); }

int exit_code_for(const Error& e, bool validating) {
  if (e.code() == Errc::InsensitiveEmbedder) return kExitInsensitive;
  if (const auto* r = dynamic_cast<const RemoteError*>(&e); r && r->connection_failure()) return kExitConnectivity;
  switch (e.code()) {
    case Errc::InvalidConfig:
    case Errc::CatalogFormat:
    case Errc::EmptyInput:
    case Errc::EmptyCorpus:
    case Errc::DuplicateId:
    case Errc::InvalidUtf8:
      return kExitValidation;
    default:
      return validating ? kExitValidation : kExitRunFailure;
  }
}

// ---- shared loading

perturb::InvisibleCatalog load_catalog(const Settings& s) {
  auto catalog = s.catalog ? perturb::InvisibleCatalog::load(*s.catalog) : perturb::InvisibleCatalog::builtin();
  if (s.catalog_size) catalog = catalog.restricted(*s.catalog_size);
  return catalog;
}

perturb::SyntaxOracle make_oracle(const Settings& s) {
  auto oracle = perturb::SyntaxOracle::with_defaults();
  for (const auto& [lang, cmd] : s.oracle_commands) {
    if (cmd.empty()) {
      oracle.clear_command(lang);
    } else {
      oracle.set_command(lang, cmd);
    }
  }
  return oracle;
}

std::vector<retrieval::Document> load_targets(const Settings& s) {
  std::vector<retrieval::Document> out;
  for (const auto& t : s.targets) {
    retrieval::Document d;
    d.id = t.id;
    d.text = retrieval::read_file(t.path);
    perturb::decode_utf8(d.text);
    d.language = t.language.value_or(language_from_extension(t.path.extension().string()));
    d.label = retrieval::Label::Adversarial;
    out.push_back(std::move(d));
  }
  return out;
}

retrieval::Corpus load_corpus(const Settings& s) {
  auto corpus = retrieval::load_corpus(*s.corpus);
  if (s.corpus_labels) corpus = corpus.filtered(*s.corpus_labels);
  return corpus;
}

std::vector<eval::Query> require_queries(const Settings& s) {
  if (!s.queries) invalid("this command needs a queries file");
  auto q = eval::load_queries(*s.queries);
  if (q.empty()) throw Error(Errc::EmptyInput, "query set is empty: " + s.queries->string());
  return q;
}

const fs::path& require_output(const Settings& s) {
  if (!s.output_dir) invalid("this command needs an output directory (--out or output_dir)");
  return *s.output_dir;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
}

std::shared_ptr<const embedding::Embedder> make_embedder(const Settings& s) {
  if (s.embedder == "reference") return std::make_shared<embedding::ReferenceEmbedder>();
  auto remote = std::make_shared<embedding::RemoteEmbedder>(s.remote);
  remote->connect();
  return remote;
}

eval::ArtifactMeta meta_for(const Settings& s, const perturb::InvisibleCatalog& catalog,
                            const embedding::Embedder& embedder) {
  return {s.de.rng_seed, catalog.digest(), embedder.identity(), s.manifest_sha256};
}

ordered_json meta_json(const eval::ArtifactMeta& m) {
  ordered_json j;
  j["seed"] = m.seed;
  j["catalog_sha256"] = m.catalog_sha256;
  j["embedder"] = m.embedder;
  j["manifest_sha256"] = m.manifest_sha256;
  return j;
}

std::optional<std::size_t> insert_char_id(const Settings& s, const perturb::InvisibleCatalog& catalog) {
  if (!s.insert_char) return std::nullopt;
  const auto id = catalog.index_of(*s.insert_char);
  if (!id) invalid("insert_char " + perturb::format_codepoint(*s.insert_char) + " is not in the catalog");
  return id;
}

void require_sensitive(const Settings& s, const embedding::Embedder& embedder, const std::vector<std::string>& samples,
                       const perturb::InvisibleCatalog& catalog) {
  if (embedder.sensitivity() == embedding::Sensitivity::Unchecked) {
    embedding::sensitivity_probe(embedder, samples, catalog);
  }
  if (embedder.sensitivity() == embedding::Sensitivity::Insensitive && !s.force) {
    throw Error(Errc::InsensitiveEmbedder,
                "embedder " + embedder.identity() + " ignores invisible characters; use force to attack anyway");
  }
}

std::vector<std::string> sample_texts(const std::vector<eval::Query>& queries) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < queries.size() && out.size() < 8; ++i) out.push_back(queries[i].text);
  return out;
}

ordered_json genome_json(const perturb::Genome& g) {
  ordered_json a = ordered_json::array();
  for (const auto& gene : g.genes) a.push_back({gene.pos, gene.id});
  return a;
}

// ---- attack

int cmd_attack(const Settings& s, std::ostream& out, bool& running) {
  // Validation phase.
  const auto catalog = load_catalog(s);
  const auto oracle = make_oracle(s);
  const auto queries = require_queries(s);
  const auto targets = load_targets(s);
  if (targets.empty()) invalid("attack needs at least one target");
  const auto scenario = s.scenario.value_or(attack::Scenario::PerturbBoth);
  std::optional<retrieval::Corpus> corpus;
  if (s.corpus) corpus = load_corpus(s);
  if (scenario == attack::Scenario::PerturbQuery && !s.reference && !corpus)
    invalid("perturb_query needs a corpus or a reference text to pick the reference document");
  const auto both_char = insert_char_id(s, catalog);
  const auto& dir = require_output(s);
  const std::vector<double> budgets = s.budgets.empty() ? std::vector<double>{0.1, 0.2, 0.3} : s.budgets;

  // Run phase.
  return [&]() -> int {
    running = true;
    const auto embedder = make_embedder(s);
    require_sensitive(s, *embedder, sample_texts(queries), catalog);
    const auto meta = meta_for(s, catalog, *embedder);
    if (corpus) corpus->materialize(*embedder);

    struct Task {
      const retrieval::Document* target;
      const eval::Query* query;
      double budget;
    };
    std::vector<Task> tasks;
    for (const auto& t : targets) {
      for (const auto& q : queries) {
        if (scenario == attack::Scenario::PerturbBoth) {
          tasks.push_back({&t, &q, eval::kEveryOtherBudget});
        } else {
          for (double b : budgets) tasks.push_back({&t, &q, b});
        }
      }
    }
    std::vector<perturb::SafetyZones> zones;
    for (const auto& t : targets) zones.push_back(perturb::compute_safety_zones(perturb::decode_utf8(t.text), t.language));

    std::vector<ordered_json> records(tasks.size());
    std::vector<bool> ok(tasks.size(), false);
    parallel_for(tasks.size(), s.workers, [&](std::size_t row) {
      const Task& task = tasks[row];
      const auto& t = *task.target;
      const auto& zt = zones[static_cast<std::size_t>(task.target - targets.data())];
      ordered_json rec;
      rec["query_id"] = task.query->id;
      rec["target_id"] = t.id;
      rec["scenario"] = std::string(attack::scenario_name(scenario));
      rec["budget"] = task.budget;
      try {
        if (scenario == attack::Scenario::PerturbBoth) {
          const auto res = attack::attack_both(task.query->text, t.text,
                                               both_char.value_or(attack::default_insert_char(catalog)), zt,
                                               t.language, catalog, &oracle);
          const std::vector<std::string> texts{task.query->text, t.text, res.delta_query, res.delta_target};
          const auto v = embedder->embed_batch(texts);
          rec["status"] = "ok";
          rec["clean_similarity"] = embedding::similarity(s.similarity, v[0], v[1]);
          rec["perturbed_similarity"] = embedding::similarity(s.similarity, v[2], v[3]);
          rec["query_genome"] = genome_json(res.query_genome);
          rec["target_genome"] = genome_json(res.target_genome);
          rec["identifier_zones_dropped"] = res.identifier_zones_dropped;
          rec["oracle_checked"] = res.oracle_checked;
          rec["perturbed_query"] = perturb::escape_codepoints_utf8(res.delta_query);
          rec["perturbed_target"] = perturb::escape_codepoints_utf8(res.delta_target);
          rec["warnings"] = res.warnings;
        } else {
          attack::DEConfig de = s.de;
          de.budget_fraction = task.budget;
          de.rng_seed = s.de.rng_seed + row;
          attack::FitnessContext ctx;
          ctx.scenario = scenario;
          ctx.query = task.query->text;
          ctx.target = t.text;
          ctx.embedder = embedder;
          ctx.similarity = s.similarity;
          ctx.target_language = t.language;
          ctx.oracle = &oracle;
          ctx.force = s.force;
          std::string reference_id;
          if (scenario == attack::Scenario::PerturbQuery) {
            const auto ref = attack::select_reference(task.query->text, corpus ? *corpus : retrieval::Corpus{},
                                                      *embedder, s.reference, s.similarity);
            ctx.reference = ref.text;
            reference_id = ref.id;
          }
          const auto res = attack::optimize(ctx, de, catalog,
                                            scenario == attack::Scenario::PerturbTarget ? &zt : nullptr);
          rec["status"] = "ok";
          if (!reference_id.empty()) rec["reference_id"] = reference_id;
          rec["insertion_budget"] = res.budget;
          rec["best_fitness"] = res.best_fitness;
          rec["baseline_fitness"] = res.baseline_fitness;
          rec["history"] = res.history;
          rec["evaluations"] = res.evaluations;
          rec["genome"] = genome_json(res.best_genome);
          rec[scenario == attack::Scenario::PerturbQuery ? "perturbed_query" : "perturbed_target"] =
              perturb::escape_codepoints_utf8(res.perturbed_text);
          rec["warnings"] = res.warnings;
        }
        ok[row] = true;
      } catch (const Error& e) {
        rec["status"] = "failed";
        rec["error"] = errc_name(e.code());
        rec["message"] = e.what();
      }
      records[row] = std::move(rec);
    });

    ensure_dir(dir);
    std::string body;
    ordered_json header = meta_json(meta);
    header["artifact"] = "outcomes";
    body += header.dump() + "\n";
    std::size_t succeeded = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      body += records[i].dump() + "\n";
      succeeded += ok[i] ? 1 : 0;
    }
    eval::write_text_file(dir / "outcomes.jsonl", body);
    ordered_json summary{{"command", "attack"},
                         {"records", records.size()},
                         {"succeeded", succeeded},
                         {"failed", records.size() - succeeded},
                         {"output", (dir / "outcomes.jsonl").string()}};
    out << summary.dump() << "\n";
    return succeeded > 0 ? kExitOk : kExitRunFailure;
  }();
}

// ---- eval

int cmd_eval(const Settings& s, std::ostream& out, bool& running) {
  const auto catalog = load_catalog(s);
  const auto oracle = make_oracle(s);
  const auto queries = require_queries(s);
  if (!s.corpus) invalid("eval needs a corpus");
  const auto corpus = load_corpus(s);
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "corpus is empty: " + s.corpus->string());
  const auto targets = load_targets(s);
  if (targets.empty()) invalid("eval needs at least one target");
  for (const auto& t : targets) {
    if (corpus.find(t.id)) throw Error(Errc::DuplicateId, "target id '" + t.id + "' is already a corpus document");
  }
  const auto scenario = s.scenario.value_or(attack::Scenario::PerturbBoth);
  const auto& dir = require_output(s);

  std::map<std::string, std::string> outputs;
  std::optional<eval::DetectionRule> rule;
  if (s.generations_dir) {
    if (targets.size() != 1) invalid("generation outputs can only be scored for a single target");
    if (!s.detection_rules) invalid("generations_dir needs detection_rules");
    outputs = eval::load_generation_outputs(*s.generations_dir);
    const auto rules = eval::load_detection_rules(*s.detection_rules);
    const std::string tag = s.detection_tag.value_or(targets[0].id);
    for (const auto& r : rules) {
      if (r.target_tag == tag) rule = r;
    }
    if (!rule) invalid("no detection rule for target tag '" + tag + "'");
  }

  eval::SweepConfig cfg;
  cfg.de = s.de;
  if (!s.budgets.empty()) cfg.budgets = s.budgets;
  cfg.similarity = s.similarity;
  cfg.catalog = &catalog;
  cfg.oracle = &oracle;
  cfg.insert_char = insert_char_id(s, catalog);
  cfg.reference_override = s.reference;
  cfg.force = s.force;
  cfg.workers = s.workers;

  return [&]() -> int {
    running = true;
    const auto embedder = make_embedder(s);
    require_sensitive(s, *embedder, sample_texts(queries), catalog);
    const auto meta = meta_for(s, catalog, *embedder);
    eval::SweepResult all;
    std::vector<eval::DefenseCheck> defense;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      auto sweep = eval::run_retrievability(queries, corpus, targets[i], scenario, cfg, embedder);
      if (s.defense) {
        auto checks = eval::check_defense(sweep.reports, queries, corpus, targets[i], *embedder,
                                          sanitize::SanitizePolicy::defaults(catalog), s.similarity);
        defense.insert(defense.end(), checks.begin(), checks.end());
      }
      all.reports.insert(all.reports.end(), sweep.reports.begin(), sweep.reports.end());
      all.failures.insert(all.failures.end(), sweep.failures.begin(), sweep.failures.end());
    }
    std::size_t attack_rows = 0;
    for (const auto& r : all.reports) attack_rows += r.is_baseline() ? 0 : 1;
    eval::GenerationDetection detection;
    if (rule) {
      detection.outputs = &outputs;
      detection.rule = &*rule;
    }
    if (all.reports.empty()) throw Error(Errc::EmptyInput, "every row of the sweep failed");
    eval::emit_report(dir, all, s.ks, meta, detection, s.defense ? &defense : nullptr);
    ordered_json summary{{"command", "eval"},
                         {"rows", all.reports.size()},
                         {"attack_rows", attack_rows},
                         {"failed", all.failures.size()},
                         {"output", dir.string()}};
    out << summary.dump() << "\n";
    return attack_rows > 0 ? kExitOk : kExitRunFailure;
  }();
}

// ---- align

int cmd_align(const Settings& s, std::ostream& out, bool& running) {
  const auto catalog = load_catalog(s);
  const auto oracle = make_oracle(s);
  if (!s.pairs) invalid("align needs a pairs file");
  const auto pairs = eval::load_alignment_pairs(*s.pairs);
  if (pairs.empty()) throw Error(Errc::EmptyInput, "pairs file is empty");
  const auto scenario = s.scenario.value_or(attack::Scenario::PerturbQuery);
  if (scenario == attack::Scenario::PerturbBoth) invalid("align supports perturb_query and perturb_target");
  const auto& dir = require_output(s);

  eval::AlignmentConfig cfg;
  cfg.de = s.de;
  if (!s.budgets.empty()) cfg.budgets = s.budgets;
  cfg.mode = s.alignment_mode;
  cfg.similarity = s.similarity;
  cfg.catalog = &catalog;
  cfg.oracle = &oracle;
  cfg.force = s.force;
  cfg.workers = s.workers;

  return [&]() -> int {
    running = true;
    const auto embedder = make_embedder(s);
    std::vector<std::string> samples;
    for (std::size_t i = 0; i < pairs.size() && i < 8; ++i) samples.push_back(pairs[i].query);
    require_sensitive(s, *embedder, samples, catalog);
    const auto meta = meta_for(s, catalog, *embedder);
    const auto result = eval::run_alignment(pairs, scenario, cfg, embedder);
    ensure_dir(dir);
    eval::write_text_file(dir / "alignment.csv", eval::alignment_csv(result.records, meta));
    eval::write_text_file(dir / "alignment.json", eval::alignment_json(result, meta));
    std::size_t perturbed_rows = 0;
    for (const auto& r : result.records) perturbed_rows += r.budget > 0.0 ? 1 : 0;
    ordered_json summary{{"command", "align"},
                         {"records", result.records.size()},
                         {"failed", result.failures.size()},
                         {"output", dir.string()}};
    out << summary.dump() << "\n";
    return perturbed_rows > 0 ? kExitOk : kExitRunFailure;
  }();
}

// ---- sanitize

int cmd_sanitize(const Settings& s, std::ostream& out, bool& running) {
  const auto catalog = load_catalog(s);
  if (!s.input) invalid("sanitize needs an input file");
  if (s.sanitize_action.empty()) invalid("sanitize needs an action: scan or strip");
  const std::string text = retrieval::read_file(*s.input);
  auto policy = s.catalog_only ? sanitize::SanitizePolicy::catalog_only(catalog)
                               : sanitize::SanitizePolicy::defaults(catalog);
  policy.preserve_emoji_joiners = s.preserve_emoji_joiners;
  policy.map_to_sentinel = s.map_to_sentinel;
  policy.validate();
  running = true;

  if (s.sanitize_action == "scan") {
    std::string body;
    for (const auto& f : sanitize::scan_utf8(text, policy)) body += sanitize::finding_to_json(f) + "\n";
    if (s.output_dir) {
      ensure_dir(*s.output_dir);
      eval::write_text_file(*s.output_dir / "findings.jsonl", body);
    } else {
      out << body;
    }
    return kExitOk;
  }
  const std::string cleaned = sanitize::strip_utf8(text, policy);
  if (s.output_dir) {
    ensure_dir(*s.output_dir);
    eval::write_text_file(*s.output_dir / s.input->filename(), cleaned);
  } else {
    // Whatever the policy kept (emoji joiners) is still shown escaped.
    const bool clean = sanitize::scan_utf8(cleaned, sanitize::SanitizePolicy::defaults(catalog)).empty();
    out << (clean ? cleaned : perturb::escape_codepoints_utf8(cleaned));
  }
  return kExitOk;
}

// ---- probe

int cmd_probe(const Settings& s, std::ostream& out, bool& running) {
  const auto catalog = load_catalog(s);
  std::vector<std::string> samples = s.samples;
  if (samples.empty() && s.queries) samples = sample_texts(require_queries(s));
  if (samples.empty()) {
    samples = {"def add(a, b):\n    return a + b\n", "Read a file and print every line.",
               "SELECT name FROM users WHERE id = ?"};
  }
  return [&]() -> int {
    running = true;
    const auto embedder = make_embedder(s);
    const auto report = embedding::sensitivity_probe(*embedder, samples, catalog);
    ordered_json j;
    j["embedder"] = embedder->identity();
    j["sensitive"] = report.sensitive;
    j["mean_shift"] = report.mean_shift;
    j["samples"] = report.samples;
    j["inserted"] = report.inserted;
    if (const auto* remote = dynamic_cast<const embedding::RemoteEmbedder*>(embedder.get())) {
      std::vector<std::string> probes;
      const char32_t cp = catalog.at(attack::default_insert_char(catalog));
      for (const auto& t : samples) {
        auto cps = perturb::decode_utf8(t);
        cps.insert(cps.size() / 2, 1, cp);
        probes.push_back(perturb::encode_utf8(cps));
      }
      j["byte_fidelity"] = remote->verify_byte_fidelity(probes);
    }
    if (s.output_dir) {
      ensure_dir(*s.output_dir);
      eval::write_text_file(*s.output_dir / "probe.json", j.dump(2) + "\n");
    }
    out << j.dump() << "\n";
    return report.sensitive ? kExitOk : kExitInsensitive;
  }();
}

// ---- ingest

int cmd_ingest(const Settings& s, std::ostream& out, bool& running) {
  if (!s.corpus) invalid("ingest needs a corpus directory or file");
  const auto corpus = load_corpus(s);
  const auto& dir = require_output(s);
  running = true;
  ensure_dir(dir);
  retrieval::save_records(corpus, dir / "corpus.jsonl");
  ordered_json summary{{"command", "ingest"}, {"documents", corpus.size()}, {"output", (dir / "corpus.jsonl").string()}};
  out << summary.dump() << "\n";
  return kExitOk;
}

int dispatch(const Settings& s, std::ostream& out, bool& running) {
  if (s.command == "attack") return cmd_attack(s, out, running);
  if (s.command == "eval") return cmd_eval(s, out, running);
  if (s.command == "align") return cmd_align(s, out, running);
  if (s.command == "sanitize") return cmd_sanitize(s, out, running);
  if (s.command == "probe") return cmd_probe(s, out, running);
  if (s.command == "ingest") return cmd_ingest(s, out, running);
  invalid("no command given");
}

// ---- flag plumbing

std::string abs_path(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal().string(); }

struct FlagSink {
  ordered_json overrides = ordered_json::object();
  std::string manifest;
};

void add_common(CLI::App* app, FlagSink& f) {
  app->add_option("-m,--manifest", f.manifest, "Run manifest (JSON); flags override its fields");
  app->add_option_function<std::string>(
      "-o,--out", [&f](const std::string& v) { f.overrides["output_dir"] = abs_path(v); }, "Output directory");
  app->add_option_function<std::string>(
      "--embedder", [&f](const std::string& v) { f.overrides["embedder"] = v; },
      "\"reference\" or an http:// embed server endpoint");
  app->add_option_function<std::uint64_t>(
      "--seed", [&f](const std::uint64_t& v) { f.overrides["rng_seed"] = v; }, "Base RNG seed");
  app->add_option_function<std::size_t>(
      "--workers", [&f](const std::size_t& v) { f.overrides["workers"] = v; }, "Worker threads for sweeps");
  app->add_flag_function(
      "--force", [&f](std::int64_t) { f.overrides["force"] = true; }, "Attack even an insensitive embedder");
  app->add_option_function<std::string>(
      "--catalog", [&f](const std::string& v) { f.overrides["catalog"] = abs_path(v); }, "Catalog file");
  app->add_option_function<std::size_t>(
      "--catalog-size", [&f](const std::size_t& v) { f.overrides["catalog_size"] = v; },
      "Use only the first N catalog entries");
  app->add_option_function<std::string>(
      "--similarity", [&f](const std::string& v) { f.overrides["similarity"] = v; }, "cosine or dot");
}

void add_inputs(CLI::App* app, FlagSink& f) {
  app->add_option_function<std::string>(
      "--corpus", [&f](const std::string& v) { f.overrides["corpus"] = abs_path(v); },
      "Corpus JSONL file or directory of source files");
  app->add_option_function<std::vector<std::string>>(
         "--corpus-labels", [&f](const std::vector<std::string>& v) { f.overrides["corpus_labels"] = v; },
         "Index only documents with these labels, comma separated")
      ->delimiter(',');
  app->add_option_function<std::string>(
      "--queries", [&f](const std::string& v) { f.overrides["queries"] = abs_path(v); }, "Queries JSONL");
}

void add_attack_knobs(CLI::App* app, FlagSink& f) {
  app->add_option_function<std::vector<std::string>>(
         "--target",
         [&f](const std::vector<std::string>& v) {
           ordered_json a = ordered_json::array();
           for (const auto& p : v) a.push_back(abs_path(p));
           f.overrides["targets"] = a;
         },
         "Adversarial target file (repeatable); id is the file stem")
      ->take_all();
  app->add_option_function<std::string>(
      "--scenario", [&f](const std::string& v) { f.overrides["scenario"] = v; },
      "perturb_query, perturb_target or perturb_both");
  app->add_option_function<std::vector<double>>(
         "--budgets", [&f](const std::vector<double>& v) { f.overrides["budgets"] = v; },
         "Budget fractions, comma separated")
      ->delimiter(',');
  app->add_option_function<std::size_t>(
      "--population", [&f](const std::size_t& v) { f.overrides["de"]["population_size"] = v; }, "DE population");
  app->add_option_function<std::size_t>(
      "--generations", [&f](const std::size_t& v) { f.overrides["de"]["max_generations"] = v; }, "DE generations");
  app->add_option_function<double>(
      "--F", [&f](const double& v) { f.overrides["de"]["differential_weight"] = v; }, "DE differential weight");
  app->add_option_function<double>(
      "--CR", [&f](const double& v) { f.overrides["de"]["crossover_rate"] = v; }, "DE crossover rate");
  app->add_option_function<std::size_t>(
      "--budget-override", [&f](const std::size_t& v) { f.overrides["de"]["budget_override"] = v; },
      "Fixed number of insertion genes");
  app->add_option_function<std::string>(
      "--oracle-python", [&f](const std::string& v) { f.overrides["oracle"]["python"] = v; },
      "Shell command that parses Python on stdin");
  app->add_option_function<std::string>(
      "--oracle-java", [&f](const std::string& v) { f.overrides["oracle"]["java"] = v; },
      "Shell command that parses Java on stdin");
}

ordered_json read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "manifest not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    auto j = ordered_json::parse(ss.str());
    if (!j.is_object()) throw Error(Errc::InvalidConfig, "manifest must be a JSON object: " + path);
    return j;
  } catch (const ordered_json::parse_error& e) {
    throw Error(Errc::InvalidConfig, "manifest is not valid JSON: " + path + ": " + e.what());
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Invisible-Unicode retrieval attack and defense toolkit", "unseen"};
  app.require_subcommand(1);
  FlagSink f;

  auto* attack = app.add_subcommand("attack", "Perturb queries and/or targets and write outcomes.jsonl");
  add_common(attack, f);
  add_inputs(attack, f);
  add_attack_knobs(attack, f);
  attack->add_option_function<std::string>(
      "--reference", [&f](const std::string& v) { f.overrides["reference"] = v; },
      "Reference snippet for perturb_query instead of the corpus top hit");
  attack->add_option_function<std::string>(
      "--insert-char", [&f](const std::string& v) { f.overrides["insert_char"] = v; },
      "Character for perturb_both, e.g. U+200B");

  auto* evalc = app.add_subcommand("eval", "Retrievability sweep; writes report.csv and summary.json");
  add_common(evalc, f);
  add_inputs(evalc, f);
  add_attack_knobs(evalc, f);
  evalc->add_option_function<std::string>(
      "--reference", [&f](const std::string& v) { f.overrides["reference"] = v; }, "Reference snippet override");
  evalc->add_option_function<std::string>(
      "--insert-char", [&f](const std::string& v) { f.overrides["insert_char"] = v; }, "Character for perturb_both");
  evalc->add_option_function<std::vector<std::size_t>>(
           "--ks", [&f](const std::vector<std::size_t>& v) { f.overrides["ks"] = v; }, "Cutoffs, comma separated")
      ->delimiter(',');
  evalc->add_option_function<std::string>(
      "--generations-dir", [&f](const std::string& v) { f.overrides["generations_dir"] = abs_path(v); },
      "Directory of <query_id>.txt generator outputs");
  evalc->add_option_function<std::string>(
      "--detection-rules", [&f](const std::string& v) { f.overrides["detection_rules"] = abs_path(v); },
      "Detection rules JSONL");
  evalc->add_option_function<std::string>(
      "--detection-tag", [&f](const std::string& v) { f.overrides["detection_tag"] = v; },
      "Rule tag to apply (defaults to the target id)");
  evalc->add_flag_function(
      "--defense", [&f](std::int64_t) { f.overrides["defense"] = true; },
      "Also rank every attack under the sanitizing defense");

  auto* align = app.add_subcommand("align", "Safe/vulnerable alignment experiment");
  add_common(align, f);
  add_attack_knobs(align, f);
  align->add_option_function<std::string>(
      "--pairs", [&f](const std::string& v) { f.overrides["pairs"] = abs_path(v); }, "Alignment pairs JSONL");
  align->add_option_function<std::string>(
      "--mode", [&f](const std::string& v) { f.overrides["alignment_mode"] = v; }, "de or random");

  auto* san = app.add_subcommand("sanitize", "Scan for or strip invisible code points");
  san->require_subcommand(1);
  for (const char* action : {"scan", "strip"}) {
    auto* sub = san->add_subcommand(action, std::string(action) == "scan" ? "Report invisible code points as JSONL"
                                                                           : "Remove invisible code points");
    add_common(sub, f);
    sub->add_option_function<std::string>(
        "input", [&f](const std::string& v) { f.overrides["input"] = abs_path(v); }, "File to sanitize");
    sub->add_flag_function(
        "--preserve-emoji-joiners", [&f](std::int64_t) { f.overrides["sanitize"]["preserve_emoji_joiners"] = true; },
        "Keep ZWJ between pictographs");
    sub->add_flag_function(
        "--sentinel", [&f](std::int64_t) { f.overrides["sanitize"]["map_to_sentinel"] = true; },
        "Replace with U+FFFD instead of deleting");
    sub->add_flag_function(
        "--catalog-only", [&f](std::int64_t) { f.overrides["sanitize"]["catalog_only"] = true; },
        "Strip catalog characters only, not every format character");
  }

  auto* probe = app.add_subcommand("probe", "Check that the embedder reacts to invisible characters");
  add_common(probe, f);
  probe->add_option_function<std::string>(
      "--queries", [&f](const std::string& v) { f.overrides["queries"] = abs_path(v); }, "Sample texts (queries JSONL)");
  probe->add_option_function<std::vector<std::string>>(
      "--sample", [&f](const std::vector<std::string>& v) { f.overrides["samples"] = v; }, "Sample text (repeatable)");

  auto* ingest = app.add_subcommand("ingest", "Normalize a corpus directory or file into corpus.jsonl");
  add_common(ingest, f);
  ingest->add_option_function<std::string>(
      "--corpus", [&f](const std::string& v) { f.overrides["corpus"] = abs_path(v); }, "Corpus directory or file");

  auto* run = app.add_subcommand("run", "Run whatever command the manifest names");
  add_common(run, f);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << error_record("Usage", e.what(), kExitValidation) << "\n";
    return kExitValidation;
  }

  std::string command;
  if (attack->parsed()) command = "attack";
  if (evalc->parsed()) command = "eval";
  if (align->parsed()) command = "align";
  if (san->parsed()) {
    command = "sanitize";
    f.overrides["sanitize"]["action"] = san->get_subcommands().front()->get_name();
  }
  if (probe->parsed()) command = "probe";
  if (ingest->parsed()) command = "ingest";

  Settings settings;
  try {
    ordered_json manifest = ordered_json::object();
    fs::path base = fs::current_path();
    if (!f.manifest.empty()) {
      manifest = read_manifest(f.manifest);
      base = fs::absolute(fs::path(f.manifest)).parent_path();
    }
    if (command.empty()) {
      if (!manifest.contains("command")) invalid("'run' needs a manifest with a command field");
    } else if (manifest.contains("command") && manifest["command"] != command) {
      invalid("manifest is for '" + manifest["command"].get<std::string>() + "', not '" + command + "'");
    }
    if (!command.empty()) manifest["command"] = command;
    if (const char* env = std::getenv(kEmbedderEnv); env && *env) manifest["embedder"] = env;
    manifest.merge_patch(f.overrides);
    settings = parse_settings(manifest, base);
  } catch (const Error& e) {
    err << error_record(errc_name(e.code()), e.what(), kExitValidation) << "\n";
    return kExitValidation;
  }

  // Commands flip `running` once inputs are validated; errors before that
  // point exit 1.
  bool running = false;
  try {
    return dispatch(settings, out, running);
  } catch (const Error& e) {
    const int code = exit_code_for(e, !running);
    err << error_record(errc_name(e.code()), e.what(), code) << "\n";
    return code;
  } catch (const std::exception& e) {
    err << error_record("Internal", e.what(), kExitRunFailure) << "\n";
    return kExitRunFailure;
  }
}

}  // namespace unseen::cli
