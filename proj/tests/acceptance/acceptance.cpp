// Acceptance checks. Each test records a verdict; the environment prints one
// "ACCEPT <criterion> PASS|FAIL" line per criterion when the run ends.
#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "unseen/attack/attack.hpp"
#include "unseen/cli/cli.hpp"
#include "unseen/eval/eval.hpp"
#include "unseen/perturb/genome.hpp"
#include "unseen/perturb/syntax_oracle.hpp"
#include "unseen/perturb/utf8.hpp"
#include "unseen/perturb/zones.hpp"
#include "unseen/retrieval/retrieval.hpp"
#include "unseen/sanitize/sanitize.hpp"
#include "unseen/subprocess.hpp"

using namespace unseen;
using attack::Scenario;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

const std::vector<std::string> kCriteria = {"strip_round_trip", "de_oracle_equivalence", "combined_dominance",
                                            "k_monotonicity",   "compilability",         "detection_fixtures",
                                            "defense_efficacy", "determinism"};

std::map<std::string, Verdict>& verdicts() {
  static std::map<std::string, Verdict> v;
  return v;
}

void record(const std::string& name, bool pass, const std::string& detail) { verdicts()[name] = {pass, detail}; }

class Printer : public ::testing::Environment {
 public:
  void TearDown() override {
    for (const auto& name : kCriteria) {
      const auto it = verdicts().find(name);
      if (it == verdicts().end()) {
        std::printf("ACCEPT %s FAIL (not run)\n", name.c_str());
      } else {
        std::printf("ACCEPT %s %s %s\n", name.c_str(), it->second.pass ? "PASS" : "FAIL", it->second.detail.c_str());
      }
    }
    std::fflush(stdout);
  }
};

const auto* const kPrinter = ::testing::AddGlobalTestEnvironment(new Printer);

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct TargetFile {
  std::string tag;
  std::string file;
};

const std::vector<TargetFile> kTargets = {{"A", "A.py"},   {"B", "B.java"}, {"C1", "C1.py"},
                                          {"C2", "C2.py"}, {"C3", "C3.py"}, {"C4", "C4.py"}};

retrieval::Document load_target(const TargetFile& t) {
  retrieval::Document d;
  d.id = t.tag;
  d.text = testing_support::read_data("targets/" + t.file);
  d.language = language_from_extension(std::filesystem::path(t.file).extension().string());
  d.label = retrieval::Label::Adversarial;
  return d;
}

std::optional<std::string> java_checker() {
  if (run_shell("command -v javac", "").exit_code != 0) return std::nullopt;
  return std::string(
      "d=$(mktemp -d) && cat > \"$d/Main.java\" && javac -d \"$d\" \"$d/Main.java\" >/dev/null 2>&1; s=$?; "
      "rm -rf \"$d\"; exit $s");
}

perturb::SyntaxOracle make_oracle() {
  auto o = perturb::SyntaxOracle::with_defaults();
  if (const auto j = java_checker()) o.set_command(Language::Java, *j);
  return o;
}

struct Fixture {
  std::vector<eval::Query> queries = eval::load_queries(testing_support::data_dir() / "fixtures/queries.jsonl");
  retrieval::Corpus corpus = retrieval::load_records(testing_support::data_dir() / "fixtures/corpus.jsonl");
  std::shared_ptr<embedding::ReferenceEmbedder> emb = std::make_shared<embedding::ReferenceEmbedder>();
  perturb::SyntaxOracle oracle = make_oracle();
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

struct SweepRun {
  std::string target;
  Scenario scenario;
  eval::SweepResult result;
  double seconds = 0.0;
};

// Every scenario against every target on the fixture queries, computed once.
const std::vector<SweepRun>& all_sweeps() {
  static const std::vector<SweepRun> runs = [] {
    auto& f = fixture();
    std::vector<SweepRun> out;
    for (const auto& t : kTargets) {
      const auto doc = load_target(t);
      for (auto s : {Scenario::PerturbQuery, Scenario::PerturbTarget, Scenario::PerturbBoth}) {
        eval::SweepConfig cfg;
        cfg.de.rng_seed = 1000;
        cfg.oracle = &f.oracle;
        const auto t0 = Clock::now();
        auto res = eval::run_retrievability(f.queries, f.corpus, doc, s, cfg, f.emb);
        out.push_back({t.tag, s, std::move(res), seconds_since(t0)});
      }
    }
    return out;
  }();
  return runs;
}

// ---- helpers for CSV-level checks

std::vector<std::map<std::string, std::string>> csv_rows(const std::string& text) {
  std::vector<std::map<std::string, std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

int run_cli(std::vector<std::string> args, std::string* err = nullptr) {
  std::ostringstream out, e;
  const int code = cli::run_cli(args, out, e);
  if (err) *err = e.str();
  return code;
}

}  // namespace

TEST(Acceptance, StripRoundTrip) {
  const auto& cat = perturb::InvisibleCatalog::builtin();
  const auto policy = sanitize::SanitizePolicy::defaults(cat);
  std::mt19937_64 rng(20240601);
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto text = testing_support::random_clean_text(rng, 60);
    std::uniform_int_distribution<std::size_t> genes(1, 24);
    std::uniform_int_distribution<std::int64_t> pos(-1, static_cast<std::int64_t>(text.size()));
    std::uniform_int_distribution<std::size_t> id(0, cat.size() - 1);
    perturb::Genome g;
    g.genes.resize(genes(rng));
    for (auto& gene : g.genes) gene = {pos(rng), id(rng)};
    const auto perturbed = perturb::encode_utf8(perturb::apply_genome(text, g, cat));
    if (sanitize::strip_utf8(perturbed, policy) != perturb::encode_utf8(text)) ++failures;
  }
  record("strip_round_trip", failures == 0, "(" + std::to_string(1000 - failures) + "/1000 exact)");
  EXPECT_EQ(failures, 0u);
}

TEST(Acceptance, DeOracleEquivalence) {
  auto& f = fixture();
  const auto cat = perturb::InvisibleCatalog::builtin().restricted(8);
  f.emb->record_sensitivity(true);

  struct Instance {
    std::string subject;
    std::string anchor;
  };
  // Subjects are fixture queries cut to 40 code points; anchors are corpus
  // documents. Instances where no single insertion beats the clean text are
  // skipped so every kept instance needs the search to find an improvement.
  std::vector<Instance> instances;
  std::vector<double> exhaustive;
  std::vector<double> baseline;
  for (std::size_t d = 0; d < f.corpus.size() && instances.size() < 20; ++d) {
    for (std::size_t q = 0; q < f.queries.size() && instances.size() < 20; q += 3) {
      auto cps = perturb::decode_utf8(f.queries[(q + d) % f.queries.size()].text);
      cps.resize(std::min<std::size_t>(cps.size(), 40));
      Instance in{perturb::encode_utf8(cps), f.corpus.at(d).text};
      attack::FitnessContext ctx;
      ctx.scenario = Scenario::PerturbQuery;
      ctx.query = in.subject;
      ctx.target = in.anchor;
      ctx.reference_disabled = true;
      ctx.embedder = f.emb;
      const double base = attack::loss_query(in.subject, in.anchor, std::nullopt, ctx);
      double best = base;
      for (std::int64_t p = 0; p <= static_cast<std::int64_t>(cps.size()); ++p) {
        for (std::size_t id = 0; id < cat.size(); ++id) {
          const auto text = perturb::apply_genome_utf8(in.subject, perturb::Genome{{{p, id}}}, cat);
          best = std::min(best, attack::loss_query(text, in.anchor, std::nullopt, ctx));
        }
      }
      if (best < base - 1e-9) {
        instances.push_back(in);
        exhaustive.push_back(best);
        baseline.push_back(base);
      }
    }
  }
  ASSERT_EQ(instances.size(), 20u);

  const auto t0 = Clock::now();
  std::size_t matched = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    attack::FitnessContext ctx;
    ctx.scenario = Scenario::PerturbQuery;
    ctx.query = instances[i].subject;
    ctx.target = instances[i].anchor;
    ctx.reference_disabled = true;
    ctx.embedder = f.emb;
    attack::DEConfig cfg;
    cfg.population_size = 32;
    cfg.max_generations = 50;
    cfg.budget_override = 1;
    cfg.rng_seed = 500 + i;
    const auto out = attack::optimize(ctx, cfg, cat);
    if (std::abs(out.best_fitness - exhaustive[i]) <= 1e-9) ++matched;
  }
  const double secs = seconds_since(t0);
  const bool pass = matched >= 19 && secs < 60.0;
  record("de_oracle_equivalence", pass,
         "(" + std::to_string(matched) + "/20 match exhaustive, " + fmt("%.2fs", secs) + ")");
  EXPECT_GE(matched, 19u);
  EXPECT_LT(secs, 60.0);
}

TEST(Acceptance, CombinedDominance) {
  auto& f = fixture();
  ASSERT_EQ(f.queries.size(), 10u);
  ASSERT_EQ(f.corpus.size(), 12u);
  bool pass = true;
  std::string detail = "(";
  for (const auto& t : kTargets) {
    const auto doc = load_target(t);
    eval::SweepConfig cfg;
    cfg.oracle = &f.oracle;
    const auto t0 = Clock::now();
    const auto res = eval::run_retrievability(f.queries, f.corpus, doc, Scenario::PerturbBoth, cfg, f.emb);
    const double secs = seconds_since(t0);
    std::size_t first = 0;
    for (const auto& r : res.reports) first += (!r.is_baseline() && r.rank == 1) ? 1 : 0;
    const bool ok = first >= 9 && secs < 10.0 && res.failures.empty();
    pass = pass && ok;
    detail += t.tag + "=" + std::to_string(first) + "/10 " + fmt("%.2fs", secs) + (t.tag == "C4" ? "" : ", ");
    EXPECT_GE(first, 9u) << t.tag;
    EXPECT_LT(secs, 10.0) << t.tag;
    EXPECT_TRUE(res.failures.empty()) << t.tag;
  }
  record("combined_dominance", pass, detail + ")");
}

TEST(Acceptance, KMonotonicity) {
  // Reports from the library sweeps plus the CLI manifests, checked on the
  // emitted CSV text.
  std::vector<std::string> csvs;
  for (const auto& run : all_sweeps()) csvs.push_back(eval::report_csv(run.result.reports, std::nullopt));
  testing_support::TempDir dir;
  std::string err;
  const int code = run_cli({"run", "-m", (testing_support::data_dir() / "manifests/eval_both.json").string(), "--out",
                            dir.path().string()},
                           &err);
  ASSERT_EQ(code, 0) << err;
  csvs.push_back(retrieval::read_file(dir.path() / "report.csv"));

  std::size_t rows = 0, violations = 0;
  for (const auto& csv : csvs) {
    for (const auto& r : csv_rows(csv)) {
      ++rows;
      const std::size_t rank = std::stoul(r.at("rank"));
      const bool h1 = r.at("hit_k1") == "1", h3 = r.at("hit_k3") == "1", h5 = r.at("hit_k5") == "1";
      if ((h1 && !h3) || (h3 && !h5)) ++violations;
      if (h1 != (rank <= 1) || h3 != (rank <= 3) || h5 != (rank <= 5)) ++violations;
    }
  }
  record("k_monotonicity", violations == 0 && rows > 0,
         "(" + std::to_string(rows) + " rows, " + std::to_string(violations) + " violations)");
  EXPECT_GT(rows, 0u);
  EXPECT_EQ(violations, 0u);
}

TEST(Acceptance, Compilability) {
  auto& f = fixture();
  const auto& cat = perturb::InvisibleCatalog::builtin();
  bool pass = true;
  std::string detail = "(";
  for (const auto& t : kTargets) {
    const auto doc = load_target(t);
    if (!f.oracle.available(doc.language)) {
      detail += t.tag + " skipped: no " + std::string(language_name(doc.language)) + " checker (javac not found); ";
      continue;
    }
    const auto zones = perturb::compute_safety_zones(perturb::decode_utf8(doc.text), doc.language);
    bool ok = false;
    try {
      const auto out = attack::attack_both("query", doc.text, attack::default_insert_char(cat), zones, doc.language,
                                           cat, &f.oracle);
      // Fresh oracle so nothing is served from the memo.
      const auto fresh = make_oracle();
      ok = out.oracle_checked && fresh.check(out.delta_target, doc.language).pass &&
           out.delta_target != doc.text;
    } catch (const Error& e) {
      ADD_FAILURE() << t.tag << ": " << e.what();
    }
    EXPECT_TRUE(ok) << t.tag;
    pass = pass && ok;
    detail += t.tag + (ok ? " ok; " : " FAILED; ");
  }
  detail.resize(detail.size() - 2);
  record("compilability", pass, detail + ")");
}

TEST(Acceptance, DetectionFixtures) {
  const auto rules = eval::load_detection_rules(testing_support::data_dir() / "detection_rules.jsonl");
  const auto cross = nlohmann::json::parse(testing_support::read_data("crossfire.json"));
  std::size_t mismatches = 0;
  for (auto& [tag, rel] : cross["targets"].items()) {
    const auto fired = eval::firing_rules(testing_support::read_data(rel.get<std::string>()), rules);
    const auto want = cross["fires"].at(tag).get<std::vector<std::string>>();
    if (fired != want) {
      ++mismatches;
      ADD_FAILURE() << tag;
    }
    // Each target's own rule fires.
    if (std::find(fired.begin(), fired.end(), tag) == fired.end()) ++mismatches;
  }
  record("detection_fixtures", mismatches == 0,
         "(" + std::to_string(cross["targets"].size()) + " targets, " + std::to_string(mismatches) + " mismatches)");
  EXPECT_EQ(mismatches, 0u);
}

TEST(Acceptance, DefenseEfficacy) {
  auto& f = fixture();
  std::size_t checked = 0, broken = 0, failed_rows = 0;
  for (const auto& run : all_sweeps()) {
    failed_rows += run.result.failures.size();
    const auto doc = load_target(*std::find_if(kTargets.begin(), kTargets.end(),
                                               [&](const TargetFile& t) { return t.tag == run.target; }));
    const auto checks = eval::check_defense(run.result.reports, f.queries, f.corpus, doc, *f.emb,
                                            sanitize::SanitizePolicy::defaults());
    for (const auto& c : checks) {
      ++checked;
      if (!c.neutralized()) {
        ++broken;
        ADD_FAILURE() << run.target << " " << attack::scenario_name(run.scenario) << " " << c.query_id << " b="
                      << c.budget;
      }
    }
  }
  record("defense_efficacy", broken == 0 && checked > 0,
         "(" + std::to_string(checked - broken) + "/" + std::to_string(checked) + " neutralized over " +
             std::to_string(all_sweeps().size()) + " sweeps, " + std::to_string(failed_rows) + " failed rows)");
  EXPECT_EQ(broken, 0u);
}

TEST(Acceptance, Determinism) {
  testing_support::TempDir a, b;
  std::size_t compared = 0, differing = 0;
  for (const char* m : {"eval_both.json", "attack_query.json", "align.json"}) {
    const auto path = (testing_support::data_dir() / "manifests" / m).string();
    const auto da = a.path() / m, db = b.path() / m;
    std::string err;
    ASSERT_EQ(run_cli({"run", "-m", path, "--out", da.string()}, &err), 0) << err;
    ASSERT_EQ(run_cli({"run", "-m", path, "--out", db.string()}, &err), 0) << err;
    for (const auto& entry : std::filesystem::directory_iterator(da)) {
      ++compared;
      const auto other = db / entry.path().filename();
      if (!std::filesystem::exists(other) ||
          retrieval::read_file(entry.path()) != retrieval::read_file(other)) {
        ++differing;
        ADD_FAILURE() << m << ": " << entry.path().filename();
      }
    }
  }
  record("determinism", differing == 0 && compared > 0,
         "(" + std::to_string(compared) + " files, " + std::to_string(differing) + " differ)");
  EXPECT_EQ(differing, 0u);
}
