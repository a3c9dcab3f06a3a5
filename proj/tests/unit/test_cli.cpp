#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "unseen/cli/cli.hpp"
#include "unseen/retrieval/corpus.hpp"

using namespace unseen;
using namespace unseen::cli;
using testing_support::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string data(const std::string& rel) { return (testing_support::data_dir() / rel).string(); }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

bool has_raw_invisible(const std::string& bytes) {
  // Anything outside printable ASCII and newline counts.
  for (unsigned char c : bytes) {
    if (c != '\n' && (c < 0x20 || c >= 0x7F)) return true;
  }
  return false;
}

class EnvGuard {
 public:
  explicit EnvGuard(const char* value) {
    if (const char* old = std::getenv(kEmbedderEnv)) old_ = old;
    if (value) {
      ::setenv(kEmbedderEnv, value, 1);
    } else {
      ::unsetenv(kEmbedderEnv);
    }
  }
  ~EnvGuard() {
    if (old_) {
      ::setenv(kEmbedderEnv, old_->c_str(), 1);
    } else {
      ::unsetenv(kEmbedderEnv);
    }
  }

 private:
  std::optional<std::string> old_;
};

std::string three_queries(const TempDir& dir) {
  const auto path = dir.path() / "q3.jsonl";
  std::ofstream(path) << "{\"id\":\"a\",\"text\":\"Run a shell command.\"}\n"
                         "{\"id\":\"b\",\"text\":\"Read a file.\"}\n"
                         "{\"id\":\"c\",\"text\":\"Hash a password.\"}\n";
  return path.string();
}

}  // namespace

TEST(Cli, HelpAndUsage) {
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
  const auto bad = invoke({"frobnicate"});
  EXPECT_EQ(bad.code, kExitValidation);
  const auto rec = nlohmann::json::parse(lines(bad.err).at(0));
  EXPECT_EQ(rec["exit_code"], 1);
  EXPECT_EQ(rec["error"], "Usage");
}

TEST(Cli, PerturbBothWritesOneRecordPerQuery) {
  EnvGuard env(nullptr);
  TempDir dir;
  const auto r = invoke({"attack", "--queries", three_queries(dir), "--target", data("targets/A.py"), "--scenario",
                      "perturb_both", "--out", (dir.path() / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto recs = lines(retrieval::read_file(dir.path() / "out/outcomes.jsonl"));
  ASSERT_EQ(recs.size(), 4u);
  const auto header = nlohmann::json::parse(recs[0]);
  EXPECT_EQ(header["artifact"], "outcomes");
  EXPECT_EQ(header["embedder"], "reference-byte-trigram-512");
  EXPECT_EQ(header["catalog_sha256"].get<std::string>().size(), 64u);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const auto j = nlohmann::json::parse(recs[i]);
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["target_id"], "A");
    EXPECT_EQ(j["scenario"], "perturb_both");
  }
  EXPECT_FALSE(has_raw_invisible(retrieval::read_file(dir.path() / "out/outcomes.jsonl")));
}

TEST(Cli, ValidationFailuresExitOne) {
  EnvGuard env(nullptr);
  TempDir dir;
  const auto out = (dir.path() / "out").string();
  const auto missing_catalog = invoke({"attack", "--queries", three_queries(dir), "--target", data("targets/A.py"),
                                    "--catalog", "/nonexistent/cat.txt", "--out", out});
  EXPECT_EQ(missing_catalog.code, kExitValidation);
  EXPECT_EQ(nlohmann::json::parse(lines(missing_catalog.err).at(0))["exit_code"], 1);

  std::ofstream(dir.path() / "empty.jsonl") << "";
  const auto empty = invoke({"attack", "--queries", (dir.path() / "empty.jsonl").string(), "--target",
                          data("targets/A.py"), "--out", out});
  EXPECT_EQ(empty.code, kExitValidation);
  EXPECT_EQ(nlohmann::json::parse(lines(empty.err).at(0))["error"], "EmptyInput");
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out"));

  std::ofstream(dir.path() / "m.json") << "{\"command\":\"eval\",\"bogus_key\":1}";
  EXPECT_EQ(invoke({"run", "-m", (dir.path() / "m.json").string()}).code, kExitValidation);

  std::ofstream(dir.path() / "bad.json") << "{not json";
  EXPECT_EQ(invoke({"run", "-m", (dir.path() / "bad.json").string()}).code, kExitValidation);

  EXPECT_EQ(invoke({"eval", "--queries", three_queries(dir), "--corpus", data("fixtures/corpus.jsonl"), "--target",
                 data("targets/A.py"), "--budgets", "0.1,1.5", "--out", out})
                .code,
            kExitValidation);
}

TEST(Cli, ManifestRunsAreDeterministicAcrossOutputDirs) {
  EnvGuard env(nullptr);
  TempDir a, b;
  const auto m = data("manifests/eval_both.json");
  const auto ra = invoke({"run", "-m", m, "--out", a.path().string()});
  const auto rb = invoke({"run", "-m", m, "--out", b.path().string(), "--workers", "2"});
  ASSERT_EQ(ra.code, kExitOk) << ra.err;
  ASSERT_EQ(rb.code, kExitOk) << rb.err;
  for (const char* f : {"report.csv", "summary.json"}) {
    const auto x = retrieval::read_file(a.path() / f);
    EXPECT_EQ(x, retrieval::read_file(b.path() / f)) << f;
    EXPECT_FALSE(has_raw_invisible(x)) << f;
  }
  const auto summary = nlohmann::json::parse(retrieval::read_file(a.path() / "summary.json"));
  EXPECT_EQ(summary["seed"], 7);
  EXPECT_EQ(summary["manifest_sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(summary["defense"]["checked"], summary["defense"]["neutralized"]);
}

TEST(Cli, SeedChangesManifestDigest) {
  EnvGuard env(nullptr);
  TempDir a, b;
  const auto m = data("manifests/attack_query.json");
  ASSERT_EQ(invoke({"attack", "-m", m, "--out", a.path().string(), "--budgets", "0.1"}).code, kExitOk);
  ASSERT_EQ(invoke({"attack", "-m", m, "--out", b.path().string(), "--budgets", "0.1", "--seed", "12"}).code, kExitOk);
  const auto ha = nlohmann::json::parse(lines(retrieval::read_file(a.path() / "outcomes.jsonl"))[0]);
  const auto hb = nlohmann::json::parse(lines(retrieval::read_file(b.path() / "outcomes.jsonl"))[0]);
  EXPECT_NE(ha["manifest_sha256"], hb["manifest_sha256"]);
  EXPECT_EQ(hb["seed"], 12);
}

TEST(Cli, AlignWritesArtifacts) {
  EnvGuard env(nullptr);
  TempDir dir;
  const auto r = invoke({"run", "-m", data("manifests/align.json"), "--out", dir.path().string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(retrieval::read_file(dir.path() / "alignment.json"));
  EXPECT_FALSE(j["flip_rates"].empty());
  EXPECT_FALSE(has_raw_invisible(retrieval::read_file(dir.path() / "alignment.csv")));
}

TEST(Cli, SanitizeScanAndStrip) {
  TempDir dir;
  const auto in = dir.path() / "in.txt";
  std::ofstream(in, std::ios::binary) << "ab\xE2\x80\x8B" "cd\n";
  const auto scan = invoke({"sanitize", "scan", in.string()});
  ASSERT_EQ(scan.code, kExitOk) << scan.err;
  const auto rec = nlohmann::json::parse(lines(scan.out).at(0));
  EXPECT_EQ(rec["index"], 2);
  EXPECT_EQ(rec["codepoint"], "U+200B");
  const auto strip = invoke({"sanitize", "strip", in.string()});
  EXPECT_EQ(strip.out, "abcd\n");
  ASSERT_EQ(invoke({"sanitize", "strip", in.string(), "--out", (dir.path() / "o").string()}).code, kExitOk);
  EXPECT_EQ(retrieval::read_file(dir.path() / "o/in.txt"), "abcd\n");
  const auto sentinel = invoke({"sanitize", "strip", "--sentinel", in.string()});
  EXPECT_EQ(sentinel.out, "ab\xEF\xBF\xBD" "cd\n");
}

TEST(Cli, ProbeAgainstStubServers) {
  EnvGuard env(nullptr);
  testing_support::StubServer good;
  const auto ok = invoke({"probe", "--embedder", good.endpoint()});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  const auto j = nlohmann::json::parse(lines(ok.out).at(0));
  EXPECT_TRUE(j["sensitive"].get<bool>());
  EXPECT_TRUE(j["byte_fidelity"].get<bool>());

  testing_support::StubServer lossy([](const std::string& t) { return testing_support::strip_catalog_utf8(t); });
  const auto insensitive = invoke({"probe", "--embedder", lossy.endpoint()});
  EXPECT_EQ(insensitive.code, kExitInsensitive);

  TempDir dir;
  const auto attack = invoke({"attack", "--embedder", lossy.endpoint(), "--queries", three_queries(dir), "--target",
                           data("targets/A.py"), "--out", (dir.path() / "out").string()});
  EXPECT_EQ(attack.code, kExitInsensitive);
  EXPECT_EQ(nlohmann::json::parse(lines(attack.err).at(0))["error"], "InsensitiveEmbedder");

  const auto dead = invoke({"probe", "--embedder", testing_support::dead_endpoint()});
  EXPECT_EQ(dead.code, kExitConnectivity);
  EXPECT_EQ(nlohmann::json::parse(lines(dead.err).at(0))["exit_code"], 4);
}

TEST(Cli, EnvironmentSelectsEmbedderButFlagsWin) {
  EnvGuard env(testing_support::dead_endpoint().c_str());
  EXPECT_EQ(invoke({"probe"}).code, kExitConnectivity);
  EXPECT_EQ(invoke({"probe", "--embedder", "reference"}).code, kExitOk);
}

TEST(Cli, IngestDirectory) {
  TempDir dir;
  const auto r = invoke({"ingest", "--corpus", data("targets"), "--out", dir.path().string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto c = retrieval::load_records(dir.path() / "corpus.jsonl");
  EXPECT_EQ(c.size(), 6u);
  EXPECT_EQ(c.find("C3.py")->text, testing_support::read_data("targets/C3.py"));
}

TEST(Cli, ManifestMustMatchSubcommand) {
  TempDir dir;
  EXPECT_EQ(invoke({"attack", "-m", data("manifests/eval_both.json"), "--out", dir.path().string()}).code,
            kExitValidation);
}

TEST(Cli, CorpusLabelFilter) {
  EnvGuard env(nullptr);
  TempDir dir;
  const std::vector<std::string> base = {"eval", "--queries", three_queries(dir), "--corpus",
                                         data("fixtures/corpus.jsonl"), "--target", data("targets/A.py"),
                                         "--out", (dir.path() / "out").string()};
  auto only_vuln = base;
  only_vuln.insert(only_vuln.end(), {"--corpus-labels", "vulnerable"});
  const auto r = invoke(only_vuln);
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_EQ(nlohmann::json::parse(lines(r.err).at(0))["error"], "EmptyCorpus");
  auto safe = base;
  safe.insert(safe.end(), {"--corpus-labels", "safe,unlabeled"});
  EXPECT_EQ(invoke(safe).code, kExitOk);
  auto bogus = base;
  bogus.insert(bogus.end(), {"--corpus-labels", "nice"});
  EXPECT_EQ(invoke(bogus).code, kExitValidation);
}
