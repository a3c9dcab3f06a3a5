#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "unseen/errors.hpp"
#include "unseen/eval/eval.hpp"

namespace unseen::eval {

using nlohmann::ordered_json;

std::string ArtifactMeta::comment_line() const {
  return "# seed=" + std::to_string(seed) + " catalog_sha256=" + catalog_sha256 + " embedder=" + embedder +
         " manifest_sha256=" + manifest_sha256;
}

double percent_half_up(std::size_t hits, std::size_t total) {
  if (total == 0) return 0.0;
  // Integer half-up in hundredths of a percent avoids binary rounding drift.
  const std::uint64_t num = static_cast<std::uint64_t>(hits) * 10000u * 2u + total;
  const std::uint64_t hundredths = num / (2u * total);
  return static_cast<double>(hundredths) / 100.0;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::string budget_str(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void put_meta(ordered_json& j, const std::optional<ArtifactMeta>& meta) {
  if (!meta) return;
  j["seed"] = meta->seed;
  j["catalog_sha256"] = meta->catalog_sha256;
  j["embedder"] = meta->embedder;
  j["manifest_sha256"] = meta->manifest_sha256;
}

ordered_json pct_by_k(const std::vector<const AttackReport*>& rows, const std::vector<std::size_t>& ks) {
  ordered_json j = ordered_json::object();
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (const auto* r : rows) hits += r->hit(k) ? 1 : 0;
    j[std::to_string(k)] = percent_half_up(hits, rows.size());
  }
  return j;
}

bool detected(const GenerationDetection& d, const std::string& query_id, bool* present) {
  *present = false;
  if (!d.outputs || !d.rule) return false;
  const auto it = d.outputs->find(query_id);
  if (it == d.outputs->end()) return false;
  *present = true;
  return detect_target_in_output(it->second, *d.rule);
}

}  // namespace

std::string report_csv_header() {
  return "query_id,target_id,scenario,budget,rank,baseline_rank,sim_target,sim_reference,hit_k1,hit_k3,hit_k5,"
         "evaluations";
}

std::string report_csv(const std::vector<AttackReport>& reports, const std::optional<ArtifactMeta>& meta,
                       const GenerationDetection& detection) {
  const bool with_detection = detection.outputs && detection.rule;
  std::string out;
  if (meta) out += meta->comment_line() + "\n";
  out += report_csv_header();
  if (with_detection) out += ",generated,detected";
  out += "\n";
  for (const auto& r : reports) {
    out += csv_field(r.query_id) + "," + csv_field(r.target_id) + "," + r.scenario + "," + budget_str(r.budget) + "," +
           std::to_string(r.rank) + "," + std::to_string(r.baseline_rank) + "," + num(r.sim_target) + "," +
           num(r.sim_reference) + "," + (r.hit(1) ? "1" : "0") + "," + (r.hit(3) ? "1" : "0") + "," +
           (r.hit(5) ? "1" : "0") + "," + std::to_string(r.evaluations);
    if (with_detection) {
      bool present = false;
      const bool fired = detected(detection, r.query_id, &present);
      out += std::string(",") + (present ? "1" : "0") + "," + (fired ? "1" : "0");
    }
    out += "\n";
  }
  return out;
}

std::string summary_json(const std::vector<AttackReport>& reports, const std::vector<FailedRow>& failures,
                         const std::vector<std::size_t>& ks, const std::optional<ArtifactMeta>& meta,
                         const GenerationDetection& detection, const std::vector<DefenseCheck>* defense) {
  ordered_json j;
  put_meta(j, meta);
  j["ks"] = ks;

  std::vector<AttackReport> best;
  bool any_attack = false;
  for (const auto& r : reports) any_attack |= !r.is_baseline();
  if (any_attack) best = best_across_budgets(reports);

  // Cells keyed by (target, scenario) in first-seen order.
  std::vector<std::pair<std::string, std::string>> cell_keys;
  for (const auto& r : best) {
    const auto key = std::make_pair(r.target_id, r.scenario);
    if (std::find(cell_keys.begin(), cell_keys.end(), key) == cell_keys.end()) cell_keys.push_back(key);
  }
  ordered_json cells = ordered_json::array();
  for (const auto& [target_id, scenario] : cell_keys) {
    std::vector<const AttackReport*> rows;
    for (const auto& r : best) {
      if (r.target_id == target_id && r.scenario == scenario) rows.push_back(&r);
    }
    ordered_json cell;
    cell["target_id"] = target_id;
    cell["scenario"] = scenario;
    cell["queries"] = rows.size();
    cell["success_pct"] = pct_by_k(rows, ks);

    std::vector<const AttackReport*> base;
    for (const auto& r : reports) {
      if (r.is_baseline() && r.target_id == target_id) base.push_back(&r);
    }
    cell["baseline_success_pct"] = pct_by_k(base, ks);

    std::map<double, std::vector<const AttackReport*>> per_budget;
    for (const auto& r : reports) {
      if (!r.is_baseline() && r.target_id == target_id && r.scenario == scenario) per_budget[r.budget].push_back(&r);
    }
    ordered_json budgets = ordered_json::array();
    for (const auto& [b, brow] : per_budget) {
      ordered_json e;
      e["budget"] = b;
      e["rows"] = brow.size();
      e["success_pct"] = pct_by_k(brow, ks);
      budgets.push_back(e);
    }
    cell["per_budget"] = budgets;

    if (detection.outputs && detection.rule) {
      std::size_t present_count = 0;
      ordered_json succ = ordered_json::object();
      for (std::size_t k : ks) {
        std::size_t hits = 0;
        for (const auto* r : rows) {
          bool present = false;
          const bool fired = detected(detection, r->query_id, &present);
          if (r->hit(k) && fired) ++hits;
        }
        succ[std::to_string(k)] = percent_half_up(hits, rows.size());
      }
      for (const auto* r : rows) present_count += detection.outputs->count(r->query_id);
      cell["generated_outputs"] = present_count;
      cell["end_to_end_success_pct"] = succ;
    }
    cells.push_back(cell);
  }
  j["cells"] = cells;

  ordered_json failed = ordered_json::array();
  for (const auto& f : failures) {
    failed.push_back({{"query_id", f.query_id},
                      {"target_id", f.target_id},
                      {"budget", f.budget},
                      {"error", f.error},
                      {"message", f.message}});
  }
  j["failed"] = failed;

  if (defense) {
    ordered_json d;
    std::size_t ok = 0;
    ordered_json violations = ordered_json::array();
    for (const auto& c : *defense) {
      if (c.neutralized()) {
        ++ok;
      } else {
        violations.push_back(
            {{"query_id", c.query_id}, {"budget", c.budget}, {"defended_rank", c.defended_rank}, {"clean_rank", c.clean_rank}});
      }
    }
    d["checked"] = defense->size();
    d["neutralized"] = ok;
    d["violations"] = violations;
    j["defense"] = d;
  }
  return j.dump(2) + "\n";
}

std::string alignment_csv(const std::vector<AlignmentRecord>& records, const std::optional<ArtifactMeta>& meta) {
  std::string out;
  if (meta) out += meta->comment_line() + "\n";
  out += "pair_id,budget,sim_safe,sim_vuln,flipped,evaluations\n";
  for (const auto& r : records) {
    out += csv_field(r.pair_id) + "," + budget_str(r.budget) + "," + num(r.sim_safe) + "," + num(r.sim_vuln) + "," +
           (r.flipped ? "1" : "0") + "," + std::to_string(r.evaluations) + "\n";
  }
  return out;
}

std::string alignment_json(const AlignmentResult& result, const std::optional<ArtifactMeta>& meta) {
  ordered_json j;
  put_meta(j, meta);
  auto rates = [](const std::vector<FlipRate>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& f : v) {
      a.push_back({{"budget", f.budget},
                   {"flipped", f.flipped},
                   {"total", f.total},
                   {"flip_pct", percent_half_up(f.flipped, f.total)}});
    }
    return a;
  };
  j["records"] = result.records.size();
  j["flip_rates"] = rates(flip_rates(result.records));
  j["cumulative_flip_rates"] = rates(cumulative_flip_rates(result.records));
  ordered_json failed = ordered_json::array();
  for (const auto& f : result.failures) {
    failed.push_back({{"pair_id", f.query_id}, {"budget", f.budget}, {"error", f.error}, {"message", f.message}});
  }
  j["failed"] = failed;
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

void emit_report(const std::filesystem::path& dir, const SweepResult& sweep, const std::vector<std::size_t>& ks,
                 const std::optional<ArtifactMeta>& meta, const GenerationDetection& detection,
                 const std::vector<DefenseCheck>* defense) {
  if (sweep.reports.empty()) throw Error(Errc::EmptyInput, "no reports to emit");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "report.csv", report_csv(sweep.reports, meta, detection));
  write_text_file(dir / "summary.json", summary_json(sweep.reports, sweep.failures, ks, meta, detection, defense));
}

}  // namespace unseen::eval
