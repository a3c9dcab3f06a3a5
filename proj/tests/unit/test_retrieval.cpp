#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"
#include "unseen/errors.hpp"
#include "unseen/retrieval/corpus.hpp"
#include "unseen/retrieval/retrieval.hpp"

using namespace unseen;
using namespace unseen::retrieval;
using embedding::ReferenceEmbedder;

namespace {

Corpus fixture_corpus() { return load_records(testing_support::data_dir() / "fixtures/corpus.jsonl"); }

// Brute force: score every document, then pick the best k by repeated scans.
std::vector<std::string> brute_force_top(const std::string& q, const Corpus& c, std::size_t k,
                                         const ReferenceEmbedder& emb) {
  std::vector<std::pair<double, std::string>> scored;
  const auto qv = emb.embed(q);
  for (const auto& d : c.documents()) scored.emplace_back(embedding::cosine(qv, emb.embed(d.text)), d.id);
  std::vector<std::string> out;
  std::vector<bool> used(scored.size(), false);
  for (std::size_t r = 0; r < std::min(k, scored.size()); ++r) {
    std::size_t best = scored.size();
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (used[i]) continue;
      if (best == scored.size() || scored[i].first > scored[best].first ||
          (scored[i].first == scored[best].first && scored[i].second < scored[best].second))
        best = i;
    }
    used[best] = true;
    out.push_back(scored[best].second);
  }
  return out;
}

}  // namespace

TEST(Corpus, LoadsFixture) {
  const auto c = fixture_corpus();
  EXPECT_EQ(c.size(), 12u);
  ASSERT_NE(c.find("read_file"), nullptr);
  EXPECT_EQ(c.find("read_file")->language, Language::Python);
  EXPECT_EQ(c.find("missing"), nullptr);
}

TEST(Corpus, DuplicateIdsRejected) {
  try {
    Corpus({Document{"a", "x"}, Document{"a", "y"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateId);
  }
}

TEST(Corpus, RecordRoundTripIsByteFaithful) {
  testing_support::TempDir dir;
  Document d{"inv", "a\xE2\x80\x8B" "b\r\n\xEF\xBB\xBF", Language::Python, Label::Adversarial, std::nullopt};
  Corpus c({d, Document{"s", "safe", Language::Java, Label::Safe, "p"},
            Document{"v", "vuln", Language::Java, Label::Vulnerable, "p"}});
  save_records(c, dir.path() / "c.jsonl");
  const auto back = load_records(dir.path() / "c.jsonl");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.at(0).text, d.text);
  EXPECT_EQ(back.at(0).label, Label::Adversarial);
  EXPECT_EQ(back.pairs().size(), 1u);
}

TEST(Corpus, PairsMustLinkSafeAndVulnerable) {
  EXPECT_THROW(Corpus({Document{"a", "x", Language::PlainText, Label::Safe, "p"},
                       Document{"b", "y", Language::PlainText, Label::Safe, "p"}}),
               Error);
}

TEST(Corpus, DirectoryIngestUsesFileNames) {
  const auto c = load_directory(testing_support::data_dir() / "targets");
  EXPECT_EQ(c.size(), 6u);
  ASSERT_NE(c.find("A.py"), nullptr);
  EXPECT_EQ(c.find("A.py")->language, Language::Python);
  EXPECT_EQ(c.find("B.java")->language, Language::Java);
}

TEST(Retrieval, MatchesBruteForce) {
  const auto c = fixture_corpus();
  ReferenceEmbedder emb;
  const auto queries = std::vector<std::string>{"read a file", "hash a password securely", "run a shell command",
                                                "parse csv rows", "x"};
  for (const auto& q : queries) {
    for (std::size_t k : {1u, 3u, 5u, 20u}) {
      const auto got = retrieve_k(q, c, k, emb);
      const auto want = brute_force_top(q, c, k, emb);
      ASSERT_EQ(got.ranked.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(got.ranked[i].id, want[i]) << q << " k=" << k;
      for (std::size_t i = 1; i < got.ranked.size(); ++i)
        EXPECT_GE(got.ranked[i - 1].similarity, got.ranked[i].similarity);
    }
  }
}

TEST(Retrieval, TiesBreakById) {
  Corpus c({Document{"b", "same text"}, Document{"a", "same text"}, Document{"c", "other words"}});
  ReferenceEmbedder emb;
  const auto r = retrieve_k("same text", c, 2, emb);
  EXPECT_EQ(r.ranked[0].id, "a");
  EXPECT_EQ(r.ranked[1].id, "b");
  EXPECT_EQ(rank_of("same text", c, "b", emb), 2u);
}

TEST(Retrieval, Errors) {
  ReferenceEmbedder emb;
  Corpus empty;
  try {
    retrieve_k("q", empty, 1, emb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyCorpus);
  }
  const auto c = fixture_corpus();
  EXPECT_THROW(retrieve_k("q", c, 0, emb), Error);
  try {
    rank_of("q", c, "nope", emb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotFound);
  }
}

TEST(Retrieval, PoisonAddsOneDocument) {
  auto c = fixture_corpus();
  ReferenceEmbedder emb;
  c.materialize(emb);
  EXPECT_TRUE(c.materialized_for(emb));
  const auto p = poison(c, Document{"evil", "import os\nos.system(input())\n"});
  EXPECT_EQ(p.size(), c.size() + 1);
  EXPECT_EQ(c.size(), 12u);
  const auto ranked = rank_all(emb.embed("run a shell command with os"), p, emb);
  EXPECT_EQ(ranked.size(), 13u);
  EXPECT_EQ(rank_in(ranked, "evil"), rank_of("run a shell command with os", p, "evil", emb));
  try {
    poison(p, Document{"evil", "again"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateId);
  }
}

TEST(Retrieval, DotMatchesCosineForUnitVectors) {
  const auto c = fixture_corpus();
  ReferenceEmbedder emb;
  const auto a = retrieve_k("write json to disk", c, 5, emb, embedding::SimilarityKind::Cosine);
  const auto b = retrieve_k("write json to disk", c, 5, emb, embedding::SimilarityKind::Dot);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a.ranked[i].id, b.ranked[i].id);
}
