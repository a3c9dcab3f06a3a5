#include "unseen/perturb/syntax_oracle.hpp"

#include "unseen/errors.hpp"
#include "unseen/subprocess.hpp"

namespace unseen::perturb {

namespace {

std::string memo_key(std::string_view code, Language lang) {
  std::string key = std::string(language_name(lang)) + '\0';
  key.append(code);
  return key;
}

}  // namespace

SyntaxOracle SyntaxOracle::with_defaults() {
  SyntaxOracle oracle;
  oracle.set_command(Language::Python, std::string(kDefaultPythonCommand));
  oracle.set_batch_command(Language::Python, std::string(kDefaultPythonBatchCommand));
  return oracle;
}

SyntaxOracle::SyntaxOracle(const SyntaxOracle& other) {
  std::lock_guard lock(other.mu_);
  commands_ = other.commands_;
  batch_commands_ = other.batch_commands_;
}

SyntaxOracle& SyntaxOracle::operator=(const SyntaxOracle& other) {
  if (this != &other) {
    std::scoped_lock lock(mu_, other.mu_);
    commands_ = other.commands_;
    batch_commands_ = other.batch_commands_;
    memo_.clear();
  }
  return *this;
}

void SyntaxOracle::set_command(Language lang, std::string command) {
  std::lock_guard lock(mu_);
  commands_[lang] = std::move(command);
  batch_commands_.erase(lang);
  memo_.clear();
}

void SyntaxOracle::clear_command(Language lang) {
  std::lock_guard lock(mu_);
  commands_.erase(lang);
  batch_commands_.erase(lang);
  memo_.clear();
}

void SyntaxOracle::set_batch_command(Language lang, std::string command) {
  std::lock_guard lock(mu_);
  batch_commands_[lang] = std::move(command);
  memo_.clear();
}

std::optional<std::string> SyntaxOracle::command(Language lang) const {
  std::lock_guard lock(mu_);
  const auto it = commands_.find(lang);
  if (it == commands_.end()) return std::nullopt;
  return it->second;
}

bool SyntaxOracle::available(Language lang) const {
  return lang == Language::PlainText || command(lang).has_value();
}

OracleVerdict SyntaxOracle::check(std::string_view code, Language lang) const {
  if (lang == Language::PlainText) return {true, {}};
  const auto cmd = command(lang);
  if (!cmd) {
    throw Error(Errc::OracleUnavailable,
                "no syntax checker configured for " + std::string(language_name(lang)));
  }
  std::string key = memo_key(code, lang);
  {
    std::lock_guard lock(mu_);
    if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const ProcessResult r = run_shell(*cmd, code);
  if (r.exit_code == 126 || r.exit_code == 127) {
    throw Error(Errc::OracleUnavailable, "syntax checker not runnable: " + *cmd);
  }
  OracleVerdict verdict{r.exit_code == 0, {}};
  if (!verdict.pass) {
    // Python tracebacks end with the diagnostic; other tools lead with it.
    std::string_view err = r.err.empty() ? std::string_view(r.out) : std::string_view(r.err);
    while (!err.empty() && (err.back() == '\n' || err.back() == '\r')) err.remove_suffix(1);
    const auto nl = err.rfind('\n');
    verdict.reason = std::string(nl == std::string_view::npos ? err : err.substr(nl + 1));
    if (verdict.reason.empty()) verdict.reason = "exit status " + std::to_string(r.exit_code);
  }
  std::lock_guard lock(mu_);
  memo_.emplace(std::move(key), verdict);
  return verdict;
}

std::vector<OracleVerdict> SyntaxOracle::check_batch(std::span<const std::string> codes, Language lang) const {
  std::vector<OracleVerdict> out(codes.size());
  if (lang == Language::PlainText) {
    for (auto& v : out) v.pass = true;
    return out;
  }
  std::optional<std::string> batch;
  std::vector<std::size_t> pending;
  {
    std::lock_guard lock(mu_);
    if (const auto it = batch_commands_.find(lang); it != batch_commands_.end()) batch = it->second;
    for (std::size_t i = 0; i < codes.size(); ++i) {
      if (const auto it = memo_.find(memo_key(codes[i], lang)); it != memo_.end()) {
        out[i] = it->second;
      } else {
        pending.push_back(i);
      }
    }
  }
  if (pending.empty()) return out;
  if (!batch) {
    for (std::size_t i : pending) out[i] = check(codes[i], lang);
    return out;
  }

  std::string input;
  for (std::size_t i : pending) {
    input += std::to_string(codes[i].size()) + "\n";
    input += codes[i];
  }
  const ProcessResult r = run_shell(*batch, input);
  if (r.exit_code == 126 || r.exit_code == 127) {
    throw Error(Errc::OracleUnavailable, "syntax checker not runnable: " + *batch);
  }
  std::vector<std::string_view> lines;
  std::string_view rest = r.out;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  if (r.exit_code != 0 || lines.size() != pending.size()) {
    throw Error(Errc::Io, "batch syntax checker returned " + std::to_string(lines.size()) + " verdicts for " +
                              std::to_string(pending.size()) + " inputs (exit " + std::to_string(r.exit_code) + ")");
  }
  std::lock_guard lock(mu_);
  for (std::size_t k = 0; k < pending.size(); ++k) {
    OracleVerdict v;
    const auto line = lines[k];
    v.pass = line == "ok";
    if (!v.pass) v.reason = std::string(line.substr(0, 5) == "fail " ? line.substr(5) : line);
    out[pending[k]] = v;
    memo_.emplace(memo_key(codes[pending[k]], lang), v);
  }
  return out;
}

}  // namespace unseen::perturb
