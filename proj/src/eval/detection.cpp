#include <fstream>
#include <regex>

#include "json.hpp"
#include "unseen/errors.hpp"
#include "unseen/eval/eval.hpp"
#include "unseen/subprocess.hpp"

namespace unseen::eval {

std::string_view method_name(DetectMethod m) {
  switch (m) {
    case DetectMethod::Substring: return "substring";
    case DetectMethod::Regex: return "regex";
    case DetectMethod::Command: return "command";
  }
  return "substring";
}

namespace {

DetectMethod parse_method(const std::string& name) {
  if (name == "substring") return DetectMethod::Substring;
  if (name == "regex") return DetectMethod::Regex;
  if (name == "command") return DetectMethod::Command;
  throw Error(Errc::InvalidConfig, "unknown detection method '" + name + "'");
}

std::regex compile(const std::string& pattern) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error(Errc::InvalidConfig, "detection regex '" + pattern + "' does not compile: " + e.what());
  }
}

}  // namespace

void DetectionRule::validate() const {
  if (target_tag.empty()) throw Error(Errc::InvalidConfig, "detection rule without target_tag");
  if (pattern.empty()) throw Error(Errc::InvalidConfig, "detection rule '" + target_tag + "' has an empty pattern");
  if (method == DetectMethod::Regex) compile(pattern);
}

std::vector<DetectionRule> load_detection_rules(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read detection rules " + path.string());
  std::vector<DetectionRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    DetectionRule r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.target_tag = j.at("target_tag").get<std::string>();
      r.method = parse_method(j.at("method").get<std::string>());
      r.pattern = j.at("pattern").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    r.validate();
    for (const auto& other : rules) {
      if (other.target_tag == r.target_tag)
        throw Error(Errc::InvalidConfig, "two detection rules for target '" + r.target_tag + "'");
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

bool detect_target_in_output(std::string_view output, const DetectionRule& rule) {
  switch (rule.method) {
    case DetectMethod::Substring:
      return output.find(rule.pattern) != std::string_view::npos;
    case DetectMethod::Regex: {
      // ECMAScript `.` already stops at line terminators.
      const std::regex re = compile(rule.pattern);
      return std::regex_search(output.begin(), output.end(), re);
    }
    case DetectMethod::Command: {
      const auto res = run_shell(rule.pattern, output);
      if (res.exit_code == 126 || res.exit_code == 127)
        throw Error(Errc::Io, "detection command for '" + rule.target_tag + "' could not run: " + rule.pattern);
      return res.exit_code != 0;
    }
  }
  return false;
}

std::vector<std::string> firing_rules(std::string_view output, const std::vector<DetectionRule>& rules) {
  std::vector<std::string> tags;
  for (const auto& r : rules) {
    if (detect_target_in_output(output, r)) tags.push_back(r.target_tag);
  }
  return tags;
}

std::map<std::string, std::string> load_generation_outputs(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(Errc::Io, "generation output directory not found: " + dir.string());
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    out[entry.path().stem().string()] = retrieval::read_file(entry.path());
  }
  return out;
}

}  // namespace unseen::eval
