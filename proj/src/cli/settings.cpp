#include <set>

#include "unseen/cli/cli.hpp"
#include "unseen/digest.hpp"
#include "unseen/errors.hpp"
#include "unseen/perturb/utf8.hpp"

namespace unseen::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(Errc::InvalidConfig, "manifest field '" + key + "' " + what);
}

void check_keys(const ordered_json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) bad(where, "must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) bad(where.empty() ? k : where + "." + k, "is not a known field");
  }
}

std::string get_string(const ordered_json& j, const std::string& key) {
  if (!j.is_string()) bad(key, "must be a string");
  return j.get<std::string>();
}

bool get_bool(const ordered_json& j, const std::string& key) {
  if (!j.is_boolean()) bad(key, "must be true or false");
  return j.get<bool>();
}

std::uint64_t get_uint(const ordered_json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad(key, "must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

double get_number(const ordered_json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "must be a number");
  return j.get<double>();
}

fs::path existing(const ordered_json& j, const std::string& key, const fs::path& base) {
  fs::path p = get_string(j, key);
  if (p.is_relative()) p = base / p;
  std::error_code ec;
  if (!fs::exists(p, ec)) throw Error(Errc::Io, "manifest field '" + key + "': path not found: " + p.string());
  return p;
}

fs::path output_path(const ordered_json& j, const std::string& key, const fs::path& base) {
  fs::path p = get_string(j, key);
  return p.is_relative() ? base / p : p;
}

Language language_field(const ordered_json& j, const std::string& key) {
  const auto lang = parse_language(get_string(j, key));
  if (!lang) bad(key, "names an unknown language");
  return *lang;
}

}  // namespace

Settings parse_settings(const ordered_json& manifest, const fs::path& base_dir) {
  static const std::set<std::string> kTop{
      "command", "corpus", "corpus_labels", "queries", "catalog", "catalog_size", "targets", "pairs", "output_dir",
      "embedder", "remote", "scenario", "budgets", "ks", "de", "rng_seed", "similarity", "force",
      "workers", "reference", "insert_char", "oracle", "alignment_mode", "generations_dir",
      "detection_rules", "detection_tag", "defense", "input", "sanitize", "samples"};
  check_keys(manifest, "", kTop);

  Settings s;
  const auto& m = manifest;
  if (m.contains("command")) {
    s.command = get_string(m["command"], "command");
    static const std::set<std::string> kCommands{"attack", "eval", "align", "sanitize", "probe", "ingest"};
    if (!kCommands.count(s.command)) bad("command", "must be one of attack, eval, align, sanitize, probe, ingest");
  }
  if (m.contains("corpus")) s.corpus = existing(m["corpus"], "corpus", base_dir);
  if (m.contains("corpus_labels")) {
    if (!m["corpus_labels"].is_array() || m["corpus_labels"].empty()) bad("corpus_labels", "must be a non-empty array");
    std::set<retrieval::Label> labels;
    for (const auto& l : m["corpus_labels"]) {
      const auto label = retrieval::parse_label(get_string(l, "corpus_labels[]"));
      if (!label) bad("corpus_labels", "entries must be safe, vulnerable, adversarial or unlabeled");
      labels.insert(*label);
    }
    s.corpus_labels = std::move(labels);
  }
  if (m.contains("queries")) s.queries = existing(m["queries"], "queries", base_dir);
  if (m.contains("catalog")) s.catalog = existing(m["catalog"], "catalog", base_dir);
  if (m.contains("catalog_size")) {
    s.catalog_size = get_uint(m["catalog_size"], "catalog_size");
    if (*s.catalog_size == 0) bad("catalog_size", "must be at least 1");
  }
  if (m.contains("targets")) {
    if (!m["targets"].is_array()) bad("targets", "must be an array");
    for (const auto& t : m["targets"]) {
      TargetSpec spec;
      if (t.is_string()) {
        spec.path = existing(t, "targets[]", base_dir);
      } else {
        check_keys(t, "targets[]", {"id", "path", "language"});
        if (!t.contains("path")) bad("targets[]", "needs a path");
        spec.path = existing(t["path"], "targets[].path", base_dir);
        if (t.contains("id")) spec.id = get_string(t["id"], "targets[].id");
        if (t.contains("language")) spec.language = language_field(t["language"], "targets[].language");
      }
      if (spec.id.empty()) spec.id = spec.path.stem().string();
      for (const auto& other : s.targets) {
        if (other.id == spec.id) bad("targets", "repeats id '" + spec.id + "'");
      }
      s.targets.push_back(std::move(spec));
    }
  }
  if (m.contains("pairs")) s.pairs = existing(m["pairs"], "pairs", base_dir);
  if (m.contains("output_dir")) s.output_dir = output_path(m["output_dir"], "output_dir", base_dir);
  if (m.contains("embedder")) {
    s.embedder = get_string(m["embedder"], "embedder");
    if (s.embedder != "reference" && s.embedder.rfind("http://", 0) != 0)
      bad("embedder", "must be \"reference\" or an http:// endpoint");
  }
  s.remote.endpoint = s.embedder;
  if (m.contains("remote")) {
    const auto& r = m["remote"];
    check_keys(r, "remote", {"batch_size", "max_in_flight", "retries", "timeout_ms"});
    if (r.contains("batch_size")) s.remote.batch_size = get_uint(r["batch_size"], "remote.batch_size");
    if (r.contains("max_in_flight")) s.remote.max_in_flight = get_uint(r["max_in_flight"], "remote.max_in_flight");
    if (r.contains("retries")) s.remote.retries = static_cast<int>(get_uint(r["retries"], "remote.retries"));
    if (r.contains("timeout_ms"))
      s.remote.timeout = std::chrono::milliseconds(get_uint(r["timeout_ms"], "remote.timeout_ms"));
    if (s.remote.batch_size == 0 || s.remote.max_in_flight == 0) bad("remote", "sizes must be at least 1");
  }
  if (m.contains("scenario")) {
    const auto sc = attack::parse_scenario(get_string(m["scenario"], "scenario"));
    if (!sc) bad("scenario", "must be perturb_query, perturb_target or perturb_both");
    s.scenario = *sc;
  }
  if (m.contains("budgets")) {
    if (!m["budgets"].is_array() || m["budgets"].empty()) bad("budgets", "must be a non-empty array");
    for (const auto& b : m["budgets"]) {
      const double v = get_number(b, "budgets[]");
      if (!(v > 0.0 && v <= 1.0)) bad("budgets", "entries must be in (0, 1]");
      s.budgets.push_back(v);
    }
  }
  if (m.contains("ks")) {
    if (!m["ks"].is_array() || m["ks"].empty()) bad("ks", "must be a non-empty array");
    s.ks.clear();
    for (const auto& k : m["ks"]) {
      const auto v = get_uint(k, "ks[]");
      if (v == 0) bad("ks", "entries must be at least 1");
      s.ks.push_back(v);
    }
  }
  if (m.contains("de")) {
    const auto& d = m["de"];
    check_keys(d, "de", {"population_size", "max_generations", "differential_weight", "crossover_rate",
                         "budget_override"});
    if (d.contains("population_size")) s.de.population_size = get_uint(d["population_size"], "de.population_size");
    if (d.contains("max_generations")) s.de.max_generations = get_uint(d["max_generations"], "de.max_generations");
    if (d.contains("differential_weight"))
      s.de.differential_weight = get_number(d["differential_weight"], "de.differential_weight");
    if (d.contains("crossover_rate")) s.de.crossover_rate = get_number(d["crossover_rate"], "de.crossover_rate");
    if (d.contains("budget_override") && !d["budget_override"].is_null())
      s.de.budget_override = get_uint(d["budget_override"], "de.budget_override");
  }
  if (m.contains("rng_seed")) s.de.rng_seed = get_uint(m["rng_seed"], "rng_seed");
  try {
    s.de.validate();
  } catch (const Error& e) {
    bad("de", e.what());
  }
  if (m.contains("similarity")) {
    const auto v = get_string(m["similarity"], "similarity");
    if (v == "cosine") {
      s.similarity = embedding::SimilarityKind::Cosine;
    } else if (v == "dot") {
      s.similarity = embedding::SimilarityKind::Dot;
    } else {
      bad("similarity", "must be cosine or dot");
    }
  }
  if (m.contains("force")) s.force = get_bool(m["force"], "force");
  if (m.contains("workers")) {
    s.workers = get_uint(m["workers"], "workers");
    if (s.workers == 0) bad("workers", "must be at least 1");
  }
  if (m.contains("reference")) s.reference = get_string(m["reference"], "reference");
  if (m.contains("insert_char")) {
    const auto text = get_string(m["insert_char"], "insert_char");
    if (text.rfind("U+", 0) == 0) {
      try {
        s.insert_char = static_cast<char32_t>(std::stoul(text.substr(2), nullptr, 16));
      } catch (const std::exception&) {
        bad("insert_char", "must look like U+200B");
      }
    } else {
      const auto cps = perturb::unescape_codepoints(text);
      if (cps.size() != 1) bad("insert_char", "must name one code point, e.g. U+200B");
      s.insert_char = cps[0];
    }
  }
  if (m.contains("oracle")) {
    const auto& o = m["oracle"];
    check_keys(o, "oracle", {"python", "java"});
    if (o.contains("python")) s.oracle_commands[Language::Python] = get_string(o["python"], "oracle.python");
    if (o.contains("java")) s.oracle_commands[Language::Java] = get_string(o["java"], "oracle.java");
  }
  if (m.contains("alignment_mode")) {
    const auto mode = eval::parse_alignment_mode(get_string(m["alignment_mode"], "alignment_mode"));
    if (!mode) bad("alignment_mode", "must be de or random");
    s.alignment_mode = *mode;
  }
  if (m.contains("generations_dir")) s.generations_dir = existing(m["generations_dir"], "generations_dir", base_dir);
  if (m.contains("detection_rules")) s.detection_rules = existing(m["detection_rules"], "detection_rules", base_dir);
  if (m.contains("detection_tag")) s.detection_tag = get_string(m["detection_tag"], "detection_tag");
  if (m.contains("defense")) s.defense = get_bool(m["defense"], "defense");
  if (m.contains("input")) s.input = existing(m["input"], "input", base_dir);
  if (m.contains("sanitize")) {
    const auto& z = m["sanitize"];
    check_keys(z, "sanitize", {"action", "preserve_emoji_joiners", "map_to_sentinel", "catalog_only"});
    if (z.contains("action")) {
      s.sanitize_action = get_string(z["action"], "sanitize.action");
      if (s.sanitize_action != "scan" && s.sanitize_action != "strip") bad("sanitize.action", "must be scan or strip");
    }
    if (z.contains("preserve_emoji_joiners"))
      s.preserve_emoji_joiners = get_bool(z["preserve_emoji_joiners"], "sanitize.preserve_emoji_joiners");
    if (z.contains("map_to_sentinel")) s.map_to_sentinel = get_bool(z["map_to_sentinel"], "sanitize.map_to_sentinel");
    if (z.contains("catalog_only")) s.catalog_only = get_bool(z["catalog_only"], "sanitize.catalog_only");
  }
  if (m.contains("samples")) {
    if (!m["samples"].is_array()) bad("samples", "must be an array of strings");
    for (const auto& t : m["samples"]) s.samples.push_back(get_string(t, "samples[]"));
  }

  ordered_json digestible = manifest;
  digestible.erase("output_dir");
  digestible.erase("workers");
  s.manifest_sha256 = sha256_hex(digestible.dump());
  return s;
}

std::string error_record(const std::string& code, const std::string& message, int exit_code) {
  ordered_json j;
  j["error"] = code;
  j["message"] = message;
  j["exit_code"] = exit_code;
  return j.dump();
}

}  // namespace unseen::cli
