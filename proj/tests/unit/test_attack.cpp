#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "unseen/attack/attack.hpp"
#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"
#include "unseen/perturb/zones.hpp"
#include "unseen/retrieval/retrieval.hpp"

using namespace unseen;
using namespace unseen::attack;
using embedding::ReferenceEmbedder;
using perturb::InvisibleCatalog;

namespace {

// Reference vectors multiplied by a constant; cosine must not notice.
class ScaledEmbedder final : public embedding::Embedder {
 public:
  explicit ScaledEmbedder(double factor) : factor_(factor) {}
  std::size_t dim() const override { return inner_.dim(); }
  embedding::EmbedderKind kind() const override { return embedding::EmbedderKind::Decorated; }
  std::string identity() const override { return "scaled"; }
  std::vector<embedding::EmbeddingVector> embed_batch(std::span<const std::string> texts) const override {
    auto v = inner_.embed_batch(texts);
    for (auto& x : v) x = x.scaled(factor_);
    return v;
  }

 private:
  ReferenceEmbedder inner_;
  double factor_;
};

FitnessContext query_ctx(std::string q, std::string t, std::optional<std::string> r) {
  FitnessContext ctx;
  ctx.scenario = Scenario::PerturbQuery;
  ctx.query = std::move(q);
  ctx.target = std::move(t);
  ctx.reference = std::move(r);
  ctx.reference_disabled = !ctx.reference;
  ctx.embedder = std::make_shared<ReferenceEmbedder>();
  return ctx;
}

FitnessContext target_ctx(std::string q, std::string t) {
  FitnessContext ctx;
  ctx.scenario = Scenario::PerturbTarget;
  ctx.query = std::move(q);
  ctx.target = std::move(t);
  ctx.embedder = std::make_shared<ReferenceEmbedder>();
  return ctx;
}

}  // namespace

TEST(Budget, FloorWithMinimumOne) {
  EXPECT_EQ(compute_budget(0.1, 100), 10u);
  EXPECT_EQ(compute_budget(0.1, 5), 1u);
  EXPECT_EQ(compute_budget(0.3, 17), 5u);
  EXPECT_EQ(compute_budget(1.0, 3), 3u);
}

TEST(Loss, HandComputedExamples) {
  // "aaaa" has one trigram (aaa, twice) and "bbbb" one (bbb); orthogonal unless
  // the two hash to the same bucket.
  ReferenceEmbedder emb;
  ASSERT_NE(emb.bucket("aaa"), emb.bucket("bbb"));
  const auto ctx = target_ctx("aaaa", "bbbb");
  EXPECT_NEAR(loss_target("aaaa", "bbbb", ctx), 0.0, 1e-12);
  EXPECT_NEAR(loss_target("aaaa", "aaaa", ctx), -1.0, 1e-12);
  // "aaab": {aaa, aab}; cosine with "aaaa" is 1/sqrt(2).
  ASSERT_NE(emb.bucket("aaa"), emb.bucket("aab"));
  EXPECT_NEAR(loss_target("aaaa", "aaab", ctx), -1.0 / std::sqrt(2.0), 1e-12);

  const auto qctx = query_ctx("aaab", "aaaa", std::string("bbbb"));
  // -cos(dq, t) + cos(dq, r)
  EXPECT_NEAR(loss_query("aaab", "aaaa", std::string_view("bbbb"), qctx), -1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(loss_query("bbbb", "aaaa", std::string_view("bbbb"), qctx), 1.0, 1e-12);
  EXPECT_NEAR(loss_query("aaab", "aaaa", std::nullopt, qctx), -1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Reference, NearestDocOrOverride) {
  const auto corpus = retrieval::load_records(testing_support::data_dir() / "fixtures/corpus.jsonl");
  ReferenceEmbedder emb;
  const std::string q = "read the whole file at path and return its text";
  const auto ref = select_reference(q, corpus, emb);
  EXPECT_EQ(ref.id, retrieval::retrieve_k(q, corpus, 1, emb).ranked[0].id);
  const auto o = select_reference(q, corpus, emb, std::string("custom snippet"));
  EXPECT_EQ(o.id, "reference");
  EXPECT_EQ(o.text, "custom snippet");
  EXPECT_THROW(select_reference(q, retrieval::Corpus{}, emb), Error);
}

TEST(Optimize, DefaultsStayWithinEvaluationBudget) {
  auto ctx = query_ctx("how do I run a shell command from python", "import os\nos.system(cmd)\n",
                       std::string("import subprocess\nsubprocess.run(args, check=True)\n"));
  DEConfig cfg;
  cfg.rng_seed = 3;
  const auto out = optimize(ctx, cfg, InvisibleCatalog::builtin());
  EXPECT_LE(out.evaluations, 32u * 4u);
  EXPECT_EQ(out.history.size(), cfg.max_generations + 1);
  for (std::size_t i = 1; i < out.history.size(); ++i) EXPECT_LE(out.history[i], out.history[i - 1]);
  EXPECT_LE(out.best_fitness, out.baseline_fitness);
  EXPECT_EQ(out.budget, compute_budget(0.1, perturb::decode_utf8(ctx.query).size()));
  EXPECT_LE(out.best_genome.insertion_count(), out.budget);
  // The best genome reproduces the reported text and loss.
  EXPECT_EQ(perturb::apply_genome_utf8(ctx.query, out.best_genome, InvisibleCatalog::builtin()), out.perturbed_text);
  EXPECT_NEAR(loss_query(out.perturbed_text, ctx.target, std::string_view(*ctx.reference), ctx), out.best_fitness,
              1e-12);
  EXPECT_EQ(testing_support::strip_catalog_utf8(out.perturbed_text), ctx.query);
}

TEST(Optimize, IdentityIsAFloor) {
  auto ctx = target_ctx("def f(x): return x", "def f(x): return x");
  DEConfig cfg;
  const auto out = optimize(ctx, cfg, InvisibleCatalog::builtin());
  EXPECT_NEAR(out.baseline_fitness, -1.0, 1e-12);
  EXPECT_NEAR(out.best_fitness, -1.0, 1e-12);
}

TEST(Optimize, DeterministicPerSeed) {
  auto ctx = target_ctx("open a file and read it", "with open(p) as f:\n    data = f.read()\n");
  DEConfig cfg;
  cfg.rng_seed = 42;
  const auto a = optimize(ctx, cfg, InvisibleCatalog::builtin());
  const auto b = optimize(ctx, cfg, InvisibleCatalog::builtin());
  EXPECT_EQ(a.best_genome, b.best_genome);
  EXPECT_EQ(a.history, b.history);
  cfg.rng_seed = 43;
  const auto c = optimize(ctx, cfg, InvisibleCatalog::builtin());
  EXPECT_EQ(c.baseline_fitness, a.baseline_fitness);
}

TEST(Optimize, ScaleInvariantUnderCosine) {
  auto a = target_ctx("parse a csv file", "import csv\nrows = list(csv.reader(open(p)))\n");
  auto b = a;
  b.embedder = std::make_shared<ScaledEmbedder>(7.5);
  DEConfig cfg;
  cfg.rng_seed = 9;
  const auto x = optimize(a, cfg, InvisibleCatalog::builtin());
  const auto y = optimize(b, cfg, InvisibleCatalog::builtin());
  EXPECT_EQ(x.best_genome, y.best_genome);
  EXPECT_NEAR(x.best_fitness, y.best_fitness, 1e-9);
}

TEST(Optimize, RespectsZones) {
  const std::string code = "x = 1  # comment here\ny = 2\n";
  const auto cps = perturb::decode_utf8(code);
  const auto zones = perturb::compute_safety_zones(cps, Language::Python).without(perturb::ZoneKind::Identifier);
  auto ctx = target_ctx("a comment", code);
  DEConfig cfg;
  cfg.budget_override = 4;
  cfg.max_generations = 10;
  const auto out = optimize(ctx, cfg, InvisibleCatalog::builtin(), &zones);
  for (const auto& g : out.best_genome.genes) {
    if (!g.is_sentinel()) EXPECT_TRUE(zones.contains(g.pos)) << g.pos;
  }
}

TEST(Optimize, RejectsBadInput) {
  auto ctx = target_ctx("q", "");
  try {
    optimize(ctx, DEConfig{}, InvisibleCatalog::builtin());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
  auto both = target_ctx("q", "t");
  both.scenario = Scenario::PerturbBoth;
  EXPECT_THROW(optimize(both, DEConfig{}, InvisibleCatalog::builtin()), Error);
  DEConfig bad;
  bad.crossover_rate = 1.5;
  EXPECT_THROW(optimize(target_ctx("q", "t"), bad, InvisibleCatalog::builtin()), Error);
  auto noref = query_ctx("q", "t", std::nullopt);
  noref.reference_disabled = false;
  EXPECT_THROW(optimize(noref, DEConfig{}, InvisibleCatalog::builtin()), Error);
}

TEST(Optimize, InsensitiveEmbedderRefusedUnlessForced) {
  auto inner = std::make_shared<ReferenceEmbedder>();
  auto ctx = target_ctx("read a file", "open(p).read()");
  ctx.embedder = std::make_shared<embedding::TransformingEmbedder>(
      inner, [](std::string_view t) { return testing_support::strip_catalog_utf8(std::string(t)); }, "strip");
  try {
    optimize(ctx, DEConfig{}, InvisibleCatalog::builtin());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsensitiveEmbedder);
  }
  ctx.force = true;
  const auto out = optimize(ctx, DEConfig{}, InvisibleCatalog::builtin());
  EXPECT_DOUBLE_EQ(out.best_fitness, out.baseline_fitness);
}

TEST(Optimize, OracleRejectionsAreNotEvaluated) {
  perturb::SyntaxOracle reject_all;
  reject_all.set_command(Language::Python, "false");
  auto ctx = target_ctx("read a file", "data = open(p).read()\n");
  ctx.target_language = Language::Python;
  ctx.oracle = &reject_all;
  const auto out = optimize(ctx, DEConfig{}, InvisibleCatalog::builtin());
  EXPECT_EQ(out.evaluations, 0u);
  EXPECT_TRUE(std::isinf(out.best_fitness));

  perturb::SyntaxOracle missing;
  missing.set_command(Language::Python, "no-such-checker-binary-xyz");
  ctx.oracle = &missing;
  const auto warned = optimize(ctx, DEConfig{}, InvisibleCatalog::builtin());
  EXPECT_EQ(warned.warnings.size(), 1u);
  EXPECT_GT(warned.evaluations, 0u);
}

TEST(AttackBoth, EveryOtherOnBothSides) {
  const auto& cat = InvisibleCatalog::builtin();
  const auto zw = default_insert_char(cat);
  EXPECT_EQ(cat.at(zw), U'\u200B');
  const auto out = attack_both("abcd", "wxyz", zw, perturb::SafetyZones::whole_text(4), Language::PlainText, cat,
                               nullptr);
  EXPECT_EQ(out.delta_query, "\xE2\x80\x8B" "ab\xE2\x80\x8B" "cd\xE2\x80\x8B");
  EXPECT_EQ(out.delta_target, "\xE2\x80\x8B" "wx\xE2\x80\x8B" "yz\xE2\x80\x8B");
  EXPECT_FALSE(out.oracle_checked);
  EXPECT_TRUE(out.warnings.empty());
}

TEST(AttackBoth, FallsBackWhenIdentifiersBreakParsing) {
  auto oracle = perturb::SyntaxOracle::with_defaults();
  if (!oracle.available(Language::Python)) GTEST_SKIP() << "python3 not available";
  const auto& cat = InvisibleCatalog::builtin();
  const std::string code = testing_support::read_data("targets/A.py");
  const auto zones = perturb::compute_safety_zones(perturb::decode_utf8(code), Language::Python);
  const auto out = attack_both("run a command", code, default_insert_char(cat), zones, Language::Python, cat, &oracle);
  EXPECT_TRUE(out.oracle_checked);
  EXPECT_TRUE(oracle.check(out.delta_target, Language::Python).pass);
  EXPECT_EQ(testing_support::strip_catalog_utf8(out.delta_target), code);
  if (zones.count(perturb::ZoneKind::Identifier) > 0) EXPECT_TRUE(out.identifier_zones_dropped);
}

TEST(AttackBoth, CompilabilityErrorWhenNothingParses) {
  perturb::SyntaxOracle never;
  never.set_command(Language::Python, "false");
  const auto& cat = InvisibleCatalog::builtin();
  const std::string code = "x = 1  # hi\n";
  const auto zones = perturb::compute_safety_zones(perturb::decode_utf8(code), Language::Python);
  try {
    attack_both("q", code, 0, zones, Language::Python, cat, &never);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CompilabilityError);
  }
  const auto warned = attack_both("q", code, 0, zones, Language::Python, cat, nullptr);
  EXPECT_EQ(warned.warnings.size(), 1u);
}
