#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unseen/language.hpp"

namespace unseen::perturb {

struct OracleVerdict {
  bool pass = false;
  std::string reason;  // first diagnostic line when the check fails
};

/// Parse check used to keep perturbed targets compilable.
///
/// Each language maps to a shell command that receives the code on stdin and
/// exits 0 when it parses. Plain text always passes. A language with no
/// command, or whose command cannot be found (shell status 126/127), raises
/// Error(OracleUnavailable). Verdicts are memoized by exact code bytes.
class SyntaxOracle {
 public:
  // Python preconfigured with the interpreter's own `ast.parse`; Java has no
  // default since javac availability varies.
  static SyntaxOracle with_defaults();

  static constexpr std::string_view kDefaultPythonCommand =
      "python3 -c 'import ast,sys; ast.parse(sys.stdin.buffer.read())'";

  // Batch protocol: stdin carries "<byte length>\n<code>" records, stdout one
  // line per record, "ok" or "fail <reason>".
  static constexpr std::string_view kDefaultPythonBatchCommand =
      "python3 -c '\n"
      "import ast, sys\n"
      "src = sys.stdin.buffer\n"
      "while True:\n"
      "    head = src.readline()\n"
      "    if not head:\n"
      "        break\n"
      "    code = src.read(int(head))\n"
      "    try:\n"
      "        ast.parse(code)\n"
      "        print(\"ok\")\n"
      "    except (SyntaxError, ValueError) as e:\n"
      "        print(\"fail\", type(e).__name__ + \":\", str(e).replace(\"\\n\", \" \"))\n"
      "'";

  // Setting a single-check command drops any batch command for that language.
  void set_command(Language lang, std::string command);
  void clear_command(Language lang);
  void set_batch_command(Language lang, std::string command);
  std::optional<std::string> command(Language lang) const;
  bool available(Language lang) const;

  OracleVerdict check(std::string_view code, Language lang) const;
  // One process for all unmemoized codes when a batch command is set,
  // otherwise one check() per code.
  std::vector<OracleVerdict> check_batch(std::span<const std::string> codes, Language lang) const;

  SyntaxOracle() = default;
  SyntaxOracle(const SyntaxOracle& other);
  SyntaxOracle& operator=(const SyntaxOracle& other);

 private:
  std::map<Language, std::string> commands_;
  std::map<Language, std::string> batch_commands_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, OracleVerdict> memo_;
};

}  // namespace unseen::perturb
