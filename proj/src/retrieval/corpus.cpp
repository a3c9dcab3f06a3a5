#include "unseen/retrieval/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "unseen/errors.hpp"

namespace unseen::retrieval {

using nlohmann::json;

std::string_view label_name(Label label) {
  switch (label) {
    case Label::Safe: return "safe";
    case Label::Vulnerable: return "vulnerable";
    case Label::Adversarial: return "adversarial";
    case Label::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::optional<Label> parse_label(std::string_view name) {
  if (name == "safe") return Label::Safe;
  if (name == "vulnerable") return Label::Vulnerable;
  if (name == "adversarial") return Label::Adversarial;
  if (name == "unlabeled" || name.empty()) return Label::Unlabeled;
  return std::nullopt;
}

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
  std::unordered_set<std::string> seen;
  std::map<std::string, std::vector<const Document*>> pairs;
  for (const auto& d : documents_) {
    if (!seen.insert(d.id).second) throw Error(Errc::DuplicateId, "duplicate document id '" + d.id + "'");
    if (d.pair_id) pairs[*d.pair_id].push_back(&d);
  }
  for (const auto& [pid, docs] : pairs) {
    const bool ok = docs.size() == 2 &&
                    std::set<Label>{docs[0]->label, docs[1]->label} == std::set<Label>{Label::Safe, Label::Vulnerable};
    if (!ok) throw Error(Errc::InvalidConfig, "pair '" + pid + "' must link one safe and one vulnerable document");
  }
}

const Document* Corpus::find(std::string_view id) const {
  for (const auto& d : documents_) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (documents_[i].id == id) return i;
  }
  return std::nullopt;
}

void Corpus::materialize(const embedding::Embedder& embedder) {
  if (materialized_for(embedder)) return;
  std::vector<std::string> texts;
  texts.reserve(documents_.size());
  for (const auto& d : documents_) texts.push_back(d.text);
  auto vecs = embedder.embed_batch(texts);
  cache_ = std::make_shared<const std::vector<std::optional<embedding::EmbeddingVector>>>(
      std::make_move_iterator(vecs.begin()), std::make_move_iterator(vecs.end()));
  embedder_identity_ = embedder.identity();
}

bool Corpus::materialized_for(const embedding::Embedder& embedder) const {
  return cache_ && cache_->size() == documents_.size() && embedder_identity_ == embedder.identity() &&
         std::all_of(cache_->begin(), cache_->end(), [](const auto& v) { return v.has_value(); });
}

std::vector<embedding::EmbeddingVector> Corpus::embeddings(const embedding::Embedder& embedder) const {
  const bool usable = cache_ && cache_->size() == documents_.size() && embedder_identity_ == embedder.identity();
  std::vector<embedding::EmbeddingVector> out(documents_.size());
  std::vector<std::string> texts;
  std::vector<std::size_t> at;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (usable && (*cache_)[i]) {
      out[i] = *(*cache_)[i];
    } else {
      texts.push_back(documents_[i].text);
      at.push_back(i);
    }
  }
  if (!texts.empty()) {
    auto fresh = embedder.embed_batch(texts);
    for (std::size_t k = 0; k < fresh.size(); ++k) out[at[k]] = std::move(fresh[k]);
  }
  return out;
}

Corpus Corpus::filtered(const std::set<Label>& labels) const {
  std::vector<Document> kept;
  std::vector<std::optional<embedding::EmbeddingVector>> kept_vecs;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!labels.count(documents_[i].label)) continue;
    kept.push_back(documents_[i]);
    if (cache_) kept_vecs.push_back((*cache_)[i]);
  }
  std::map<std::string, int> pair_counts;
  for (const auto& d : kept) {
    if (d.pair_id) ++pair_counts[*d.pair_id];
  }
  for (auto& d : kept) {
    if (d.pair_id && pair_counts[*d.pair_id] != 2) d.pair_id.reset();
  }
  Corpus out(std::move(kept));
  if (cache_) {
    out.cache_ = std::make_shared<const std::vector<std::optional<embedding::EmbeddingVector>>>(std::move(kept_vecs));
    out.embedder_identity_ = embedder_identity_;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Corpus::pairs() const {
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_id;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const auto& d = documents_[i];
    if (!d.pair_id) continue;
    auto& p = by_id[*d.pair_id];
    (d.label == Label::Safe ? p.first : p.second) = i;
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [id, p] : by_id) out.push_back(p);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

Document document_from_json(const json& rec, const std::string& where) {
  if (!rec.is_object() || !rec.contains("id") || !rec.contains("text")) {
    throw Error(Errc::InvalidConfig, where + ": record needs id and text");
  }
  Document d;
  d.id = rec["id"].get<std::string>();
  d.text = rec["text"].get<std::string>();
  if (rec.contains("language")) {
    const auto lang = parse_language(rec["language"].get<std::string>());
    if (!lang) throw Error(Errc::InvalidConfig, where + ": unknown language");
    d.language = *lang;
  }
  if (rec.contains("label")) {
    const auto label = parse_label(rec["label"].get<std::string>());
    if (!label) throw Error(Errc::InvalidConfig, where + ": unknown label");
    d.label = *label;
  }
  if (rec.contains("pair_id") && !rec["pair_id"].is_null()) d.pair_id = rec["pair_id"].get<std::string>();
  return d;
}

}  // namespace

Corpus load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open corpus " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      docs.push_back(document_from_json(json::parse(line), where));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, where + ": " + e.what());
    }
  }
  return Corpus(std::move(docs));
}

std::string to_record_line(const Document& doc) {
  json rec;
  rec["id"] = doc.id;
  rec["text"] = doc.text;
  rec["language"] = std::string(language_name(doc.language));
  rec["label"] = std::string(label_name(doc.label));
  if (doc.pair_id) rec["pair_id"] = *doc.pair_id;
  return rec.dump();
}

void save_records(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& d : corpus.documents()) out << to_record_line(d) << '\n';
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

Corpus load_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(Errc::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "labels.jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, json> sidecar;
  if (const auto labels = dir / "labels.jsonl"; fs::exists(labels)) {
    std::istringstream in(read_file(labels));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto rec = json::parse(line);
      sidecar[rec.at("id").get<std::string>()] = rec;
    }
  }

  std::vector<Document> docs;
  for (const auto& f : files) {
    Document d;
    d.id = f.filename().string();
    d.text = read_file(f);
    d.language = language_from_extension(f.extension().string());
    if (const auto it = sidecar.find(d.id); it != sidecar.end()) {
      if (it->second.contains("label")) {
        const auto label = parse_label(it->second["label"].get<std::string>());
        if (!label) throw Error(Errc::InvalidConfig, "labels.jsonl: unknown label for " + d.id);
        d.label = *label;
      }
      if (it->second.contains("pair_id")) d.pair_id = it->second["pair_id"].get<std::string>();
    }
    docs.push_back(std::move(d));
  }
  return Corpus(std::move(docs));
}

Corpus load_corpus(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_directory(path);
  return load_records(path);
}

}  // namespace unseen::retrieval
