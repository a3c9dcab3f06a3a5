#include "unseen/perturb/zones.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <unordered_set>

namespace unseen::perturb {

std::string_view zone_kind_name(ZoneKind kind) {
  switch (kind) {
    case ZoneKind::Comment: return "comment";
    case ZoneKind::StringLiteral: return "string";
    case ZoneKind::Identifier: return "identifier";
    case ZoneKind::WholeText: return "whole";
  }
  return "whole";
}

SafetyZones::SafetyZones(std::vector<ZoneSpan> spans, Language language, std::size_t text_length)
    : spans_(std::move(spans)), language_(language), text_length_(text_length) {
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    const auto& s = spans_[i];
    if (s.start >= s.end || s.end > text_length_ + 1 || (i > 0 && s.start < prev_end)) {
      throw Error(Errc::InvalidConfig, "safety zone spans must be non-empty, sorted, disjoint and in bounds");
    }
    prev_end = s.end;
  }
}

SafetyZones SafetyZones::whole_text(std::size_t text_length, Language language) {
  return SafetyZones({ZoneSpan{0, text_length + 1, ZoneKind::WholeText}}, language, text_length);
}

bool SafetyZones::contains(long long pos) const {
  if (pos < 0) return false;
  const auto p = static_cast<std::size_t>(pos);
  auto it = std::upper_bound(spans_.begin(), spans_.end(), p,
                             [](std::size_t v, const ZoneSpan& s) { return v < s.start; });
  if (it == spans_.begin()) return false;
  --it;
  return p < it->end;
}

SafetyZones SafetyZones::without(ZoneKind kind) const {
  std::vector<ZoneSpan> kept;
  std::copy_if(spans_.begin(), spans_.end(), std::back_inserter(kept),
               [kind](const ZoneSpan& s) { return s.kind != kind; });
  return SafetyZones(std::move(kept), language_, text_length_);
}

std::size_t SafetyZones::count(ZoneKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(spans_.begin(), spans_.end(), [kind](const ZoneSpan& s) { return s.kind == kind; }));
}

namespace {

enum class TokKind { Name, Op, Newline, String, Number, CharLit };

struct Token {
  TokKind kind;
  std::size_t start;
  std::size_t end;
  std::u32string text;  // names and operators only
};

bool is_ascii_alpha(char32_t c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }
bool is_space(char32_t c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::u32string u32(std::string_view s) { return {s.begin(), s.end()}; }

class Lexer {
 public:
  Lexer(std::u32string_view code, Language lang) : code_(code), lang_(lang) {}

  void run() {
    std::size_t i = 0;
    const std::size_t n = code_.size();
    while (i < n) {
      const char32_t c = code_[i];
      if (c == '\n') {
        if (depth_ == 0) tokens_.push_back({TokKind::Newline, i, i + 1, {}});
        ++i;
      } else if (is_space(c)) {
        ++i;
      } else if (lang_ == Language::Python && c == '#') {
        i = line_comment(i, i + 1);
      } else if (lang_ == Language::Java && c == '/' && i + 1 < n && code_[i + 1] == '/') {
        i = line_comment(i, i + 2);
      } else if (lang_ == Language::Java && c == '/' && i + 1 < n && code_[i + 1] == '*') {
        i = block_comment(i);
      } else if (c == '"' || (c == '\'' && lang_ == Language::Python)) {
        i = string_literal(i, i, false, false, false);
      } else if (c == '\'' && lang_ == Language::Java) {
        i = char_literal(i);
      } else if (lang_ == Language::Python && c == '\\' && i + 1 < n && code_[i + 1] == '\n') {
        i += 2;
      } else if (is_ident_start(c)) {
        std::size_t j = i + 1;
        while (j < n && is_ident_continue(code_[j])) ++j;
        std::u32string word(code_.substr(i, j - i));
        if (lang_ == Language::Python && j < n && (code_[j] == '"' || code_[j] == '\'') && is_string_prefix(word)) {
          std::u32string lower = word;
          for (auto& ch : lower) ch = (ch >= 'A' && ch <= 'Z') ? ch + 32 : ch;
          const bool raw = lower.find(U'r') != std::u32string::npos;
          const bool bytes = lower.find(U'b') != std::u32string::npos;
          const bool fmt = lower.find(U'f') != std::u32string::npos;
          i = string_literal(i, j, raw, bytes, fmt);
        } else {
          tokens_.push_back({TokKind::Name, i, j, std::move(word)});
          i = j;
        }
      } else if (is_digit(c)) {
        std::size_t j = i + 1;
        while (j < n && (is_ident_continue(code_[j]) || code_[j] == '.')) ++j;
        tokens_.push_back({TokKind::Number, i, j, {}});
        i = j;
      } else {
        i = op(i);
      }
    }
  }

  const std::vector<Token>& tokens() const { return tokens_; }
  std::vector<ZoneSpan>& spans() { return spans_; }

  std::vector<ZoneSpan> comment_spans() const {
    std::vector<ZoneSpan> out;
    std::copy_if(spans_.begin(), spans_.end(), std::back_inserter(out),
                 [](const ZoneSpan& s) { return s.kind == ZoneKind::Comment; });
    return out;
  }

 private:
  bool is_ident_start(char32_t c) const {
    return is_ascii_alpha(c) || c == '_' || (lang_ == Language::Java && c == '$') || c >= 0x80;
  }
  bool is_ident_continue(char32_t c) const { return is_ident_start(c) || is_digit(c); }

  static bool is_string_prefix(const std::u32string& w) {
    static const std::set<std::u32string> prefixes = {
        U"r", U"u", U"R", U"U", U"b", U"B", U"f", U"F", U"br", U"Br", U"bR", U"BR", U"rb", U"rB", U"Rb", U"RB",
        U"fr", U"Fr", U"fR", U"FR", U"rf", U"rF", U"Rf", U"RF"};
    return prefixes.count(w) != 0;
  }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw ZoneError(what + " at code point " + std::to_string(at),
                    SafetyZones(comment_spans(), lang_, code_.size()));
  }

  std::size_t line_comment(std::size_t /*start*/, std::size_t body) {
    std::size_t eol = body;
    while (eol < code_.size() && code_[eol] != '\n') ++eol;
    // Position eol inserts just before the newline, still inside the comment.
    spans_.push_back({body, eol + 1, ZoneKind::Comment});
    return eol;
  }

  std::size_t block_comment(std::size_t start) {
    const std::size_t body = start + 2;
    std::size_t j = body;
    while (j + 1 < code_.size() && !(code_[j] == '*' && code_[j + 1] == '/')) ++j;
    if (j + 1 >= code_.size()) fail("unterminated block comment", start);
    // Keep the first body position clear so "/**" doc markers stay intact.
    if (body + 1 <= j) spans_.push_back({body + 1, j + 1, ZoneKind::Comment});
    return j + 2;
  }

  std::size_t char_literal(std::size_t start) {
    std::size_t j = start + 1;
    while (j < code_.size() && code_[j] != '\'') {
      if (code_[j] == '\n') fail("unterminated character literal", start);
      j += code_[j] == '\\' ? 2 : 1;
    }
    if (j >= code_.size()) fail("unterminated character literal", start);
    tokens_.push_back({TokKind::CharLit, start, j + 1, {}});
    return j + 1;
  }

  // Length of the escape sequence starting at the backslash at k.
  std::size_t escape_length(std::size_t k, bool raw) const {
    if (k + 1 >= code_.size()) return 1;
    if (raw) return 2;
    const char32_t e = code_[k + 1];
    auto hex_run = [&](std::size_t max) {
      std::size_t len = 2;
      while (len < 2 + max && k + len < code_.size() && std::isxdigit(static_cast<int>(code_[k + len] & 0x7F)) &&
             code_[k + len] < 0x80)
        ++len;
      return len;
    };
    if (e == 'x') return hex_run(2);
    if (e == 'u') {
      if (lang_ == Language::Java) {
        std::size_t len = 1;
        while (k + len < code_.size() && code_[k + len] == 'u') ++len;
        std::size_t digits = 0;
        while (digits < 4 && k + len < code_.size() && code_[k + len] < 0x80 &&
               std::isxdigit(static_cast<int>(code_[k + len]))) {
          ++len;
          ++digits;
        }
        return len;
      }
      return hex_run(4);
    }
    if (e == 'U' && lang_ == Language::Python) return hex_run(8);
    if (e == 'N' && lang_ == Language::Python && k + 2 < code_.size() && code_[k + 2] == '{') {
      std::size_t j = k + 3;
      while (j < code_.size() && code_[j] != '}' && code_[j] != '\n') ++j;
      return j < code_.size() && code_[j] == '}' ? j - k + 1 : 2;
    }
    if (e >= '0' && e <= '7') {
      std::size_t len = 2;
      while (len < 4 && k + len < code_.size() && code_[k + len] >= '0' && code_[k + len] <= '7') ++len;
      return len;
    }
    return 2;
  }

  std::size_t string_literal(std::size_t token_start, std::size_t quote_at, bool raw, bool bytes, bool fmt) {
    const char32_t q = code_[quote_at];
    const bool triple = quote_at + 2 < code_.size() && code_[quote_at + 1] == q && code_[quote_at + 2] == q &&
                        (lang_ == Language::Python || q == '"');
    const std::size_t open_end = quote_at + (triple ? 3 : 1);
    std::vector<bool> blocked;  // relative to open_end
    std::size_t j = open_end;
    std::size_t close_at = 0;
    bool closed = false;
    while (j < code_.size()) {
      const char32_t c = code_[j];
      if (c == '\\') {
        const std::size_t len = escape_length(j, raw);
        for (std::size_t p = j + 1; p < j + len; ++p) mark(blocked, p - open_end);
        j += len;
        continue;
      }
      if (triple) {
        if (c == q && j + 2 < code_.size() && code_[j + 1] == q && code_[j + 2] == q) {
          close_at = j;
          closed = true;
          break;
        }
      } else {
        if (c == '\n') fail("unterminated string literal", token_start);
        if (c == q) {
          close_at = j;
          closed = true;
          break;
        }
      }
      ++j;
    }
    if (!closed) fail("unterminated string literal", token_start);

    // Java text blocks must open with a line terminator; keep the header clean.
    std::size_t first = open_end;
    if (triple && lang_ == Language::Java) {
      while (first < close_at && code_[first] != '\n') ++first;
      ++first;
    }
    if (!bytes && !fmt) {
      std::size_t run_start = 0;
      bool in_run = false;
      for (std::size_t p = first; p <= close_at; ++p) {
        const std::size_t rel = p - open_end;
        const bool ok = rel >= blocked.size() || !blocked[rel];
        if (ok && !in_run) {
          run_start = p;
          in_run = true;
        } else if (!ok && in_run) {
          spans_.push_back({run_start, p, ZoneKind::StringLiteral});
          in_run = false;
        }
      }
      if (in_run) spans_.push_back({run_start, close_at + 1, ZoneKind::StringLiteral});
    }
    const std::size_t end = close_at + (triple ? 3 : 1);
    tokens_.push_back({TokKind::String, token_start, end, {}});
    return end;
  }

  static void mark(std::vector<bool>& v, std::size_t idx) {
    if (v.size() <= idx) v.resize(idx + 1, false);
    v[idx] = true;
  }

  std::size_t op(std::size_t i) {
    static const std::vector<std::u32string> multi = {
        U"**=", U"//=", U">>=", U"<<=", U">>>", U"...", U"==", U"!=", U"<=", U">=", U"+=", U"-=", U"*=",
        U"/=",  U"%=",  U"&=",  U"|=",  U"^=",  U"**",  U"//", U"->", U":=", U"&&", U"||", U"++", U"--", U"::"};
    for (const auto& m : multi) {
      if (code_.substr(i, m.size()) == m) {
        tokens_.push_back({TokKind::Op, i, i + m.size(), m});
        return i + m.size();
      }
    }
    const char32_t c = code_[i];
    if (c == '(' || c == '[' || c == '{') ++depth_;
    if ((c == ')' || c == ']' || c == '}') && depth_ > 0) --depth_;
    tokens_.push_back({TokKind::Op, i, i + 1, std::u32string(1, c)});
    return i + 1;
  }

  std::u32string_view code_;
  Language lang_;
  std::vector<Token> tokens_;
  std::vector<ZoneSpan> spans_;
  int depth_ = 0;
};

bool is_op(const Token& t, std::u32string_view s) { return t.kind == TokKind::Op && t.text == s; }
bool is_name(const Token& t, std::u32string_view s) { return t.kind == TokKind::Name && t.text == s; }

const std::unordered_set<std::u32string>& python_reserved() {
  static const std::unordered_set<std::u32string> words = [] {
    std::unordered_set<std::u32string> s;
    for (const char* w :
         {"False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def",
          "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is",
          "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield", "match",
          "case", "self", "cls", "print", "input", "open", "len", "range", "str", "int", "float", "bool", "list",
          "dict", "set", "tuple", "object", "type", "super", "isinstance", "enumerate", "zip", "map", "filter",
          "sorted", "min", "max", "sum", "abs", "any", "all", "iter", "next", "repr", "hash", "id", "format",
          "bytes", "exec", "eval", "compile", "getattr", "setattr", "hasattr", "vars", "dir", "round",
          "Exception", "ValueError", "TypeError", "KeyError", "IndexError", "RuntimeError", "OSError",
          "IOError", "StopIteration", "NotImplementedError", "AttributeError"})
      s.insert(u32(w));
    return s;
  }();
  return words;
}

const std::unordered_set<std::u32string>& java_keywords() {
  static const std::unordered_set<std::u32string> words = [] {
    std::unordered_set<std::u32string> s;
    for (const char* w :
         {"abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const", "continue",
          "default", "do", "double", "else", "enum", "extends", "final", "finally", "float", "for", "goto", "if",
          "implements", "import", "instanceof", "int", "interface", "long", "native", "new", "package",
          "private", "protected", "public", "return", "short", "static", "strictfp", "super", "switch",
          "synchronized", "this", "throw", "throws", "transient", "try", "void", "volatile", "while", "var",
          "record", "yield", "true", "false", "null", "main", "args"})
      s.insert(u32(w));
    return s;
  }();
  return words;
}

bool is_java_type_keyword(const std::u32string& w) {
  static const std::unordered_set<std::u32string> types = {U"int",  U"long", U"double", U"float", U"boolean",
                                                           U"char", U"byte", U"short",  U"var"};
  return types.count(w) != 0;
}

bool is_dunder(const std::u32string& w) {
  return w.size() >= 4 && w.compare(0, 2, U"__") == 0 && w.compare(w.size() - 2, 2, U"__") == 0;
}

// Names the snippet binds itself (functions, classes, parameters, assignment
// and loop targets, aliases), minus anything also used as an attribute.
std::set<std::u32string> python_user_names(const std::vector<Token>& toks, std::set<std::u32string>& params) {
  std::set<std::u32string> names;
  std::set<std::u32string> imported;
  const auto n = toks.size();
  auto add_name = [&](std::size_t k) {
    if (k < n && toks[k].kind == TokKind::Name) names.insert(toks[k].text);
  };
  for (std::size_t k = 0; k < n; ++k) {
    const auto& t = toks[k];
    if (t.kind != TokKind::Name) continue;
    const bool line_start = k == 0 || toks[k - 1].kind == TokKind::Newline;

    if ((t.text == U"def" || t.text == U"class") && k + 1 < n) {
      add_name(k + 1);
      if (t.text == U"def" && k + 2 < n && is_op(toks[k + 2], U"(")) {
        int depth = 0;
        for (std::size_t m = k + 2; m < n; ++m) {
          if (is_op(toks[m], U"(") || is_op(toks[m], U"[") || is_op(toks[m], U"{")) ++depth;
          if (is_op(toks[m], U")") || is_op(toks[m], U"]") || is_op(toks[m], U"}")) {
            if (--depth == 0) break;
          }
          if (depth == 1 && toks[m].kind == TokKind::Name && m + 1 < n) {
            const auto& prev = toks[m - 1];
            const auto& next = toks[m + 1];
            const bool after = is_op(prev, U"(") || is_op(prev, U",") || is_op(prev, U"*") || is_op(prev, U"**");
            const bool before = is_op(next, U",") || is_op(next, U")") || is_op(next, U"=") || is_op(next, U":");
            if (after && before) {
              names.insert(toks[m].text);
              params.insert(toks[m].text);
            }
          }
        }
      }
    } else if (t.text == U"for") {
      for (std::size_t m = k + 1; m < n && !is_name(toks[m], U"in"); ++m) {
        if (toks[m].kind == TokKind::Name) names.insert(toks[m].text);
      }
    } else if (t.text == U"as") {
      add_name(k + 1);
    } else if (t.text == U"global" || t.text == U"nonlocal") {
      for (std::size_t m = k + 1; m < n && toks[m].kind != TokKind::Newline; ++m) {
        if (toks[m].kind == TokKind::Name) names.insert(toks[m].text);
      }
    } else if (t.text == U"import") {
      for (std::size_t m = k + 1; m < n && toks[m].kind != TokKind::Newline; ++m) {
        if (is_name(toks[m], U"as")) {
          ++m;
          continue;
        }
        if (toks[m].kind == TokKind::Name && !(m + 1 < n && is_name(toks[m + 1], U"as")))
          imported.insert(toks[m].text);
      }
    } else if (t.text == U"from") {
      for (std::size_t m = k + 1; m < n && !is_name(toks[m], U"import"); ++m) {
        if (toks[m].kind == TokKind::Name) imported.insert(toks[m].text);
      }
    } else if (line_start) {
      // NAME [, NAME]* ( = | augmented | : annotation )
      std::vector<std::size_t> targets;
      std::size_t m = k;
      while (m < n && toks[m].kind == TokKind::Name) {
        targets.push_back(m);
        if (m + 1 < n && is_op(toks[m + 1], U",")) {
          m += 2;
        } else {
          ++m;
          break;
        }
      }
      if (m < n && toks[m].kind == TokKind::Op) {
        const auto& o = toks[m].text;
        const bool assign = o == U"=" || o == U":" ||
                            (o.size() >= 2 && o.back() == U'=' && o != U"==" && o != U"!=" && o != U"<=" &&
                             o != U">=");
        if (assign && toks[m - 1].kind == TokKind::Name) {
          for (auto idx : targets) names.insert(toks[idx].text);
        }
      }
    }
  }
  std::set<std::u32string> attributes;
  for (std::size_t k = 1; k < n; ++k) {
    if (toks[k].kind == TokKind::Name && is_op(toks[k - 1], U".")) attributes.insert(toks[k].text);
  }
  const auto& reserved = python_reserved();
  for (auto it = names.begin(); it != names.end();) {
    if (reserved.count(*it) || is_dunder(*it) || it->size() < 2 || imported.count(*it) || attributes.count(*it)) {
      params.erase(*it);
      it = names.erase(it);
    } else {
      ++it;
    }
  }
  return names;
}

std::set<std::u32string> java_user_names(const std::vector<Token>& toks) {
  std::set<std::u32string> names;
  const auto& kw = java_keywords();
  const auto n = toks.size();
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const auto& t = toks[k];
    if (t.kind != TokKind::Name || kw.count(t.text)) continue;
    const auto& prev = toks[k - 1];
    const auto& next = toks[k + 1];
    const bool typed = (prev.kind == TokKind::Name && (!kw.count(prev.text) || is_java_type_keyword(prev.text))) ||
                       is_op(prev, U"]") || is_op(prev, U">");
    const bool declarator = is_op(next, U"=") || is_op(next, U";") || is_op(next, U",") || is_op(next, U")") ||
                            is_op(next, U":");
    if (typed && declarator) names.insert(t.text);
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (toks[k].kind == TokKind::Name && (is_op(toks[k - 1], U".") || is_op(toks[k - 1], U"::")))
      names.erase(toks[k].text);
  }
  for (auto it = names.begin(); it != names.end();) {
    it = it->size() < 2 ? names.erase(it) : std::next(it);
  }
  return names;
}

}  // namespace

SafetyZones compute_safety_zones(std::u32string_view code, Language language) {
  if (language == Language::PlainText) return SafetyZones::whole_text(code.size(), language);

  Lexer lexer(code, language);
  lexer.run();
  const auto& toks = lexer.tokens();
  auto& spans = lexer.spans();

  std::set<std::u32string> params;
  const auto names = language == Language::Python ? python_user_names(toks, params) : java_user_names(toks);
  for (std::size_t k = 0; k < toks.size(); ++k) {
    const auto& t = toks[k];
    if (t.kind != TokKind::Name || !names.count(t.text)) continue;
    if (k > 0 && is_op(toks[k - 1], U".")) continue;
    if (language == Language::Python && k + 1 < toks.size() && is_op(toks[k + 1], U"=") && !params.count(t.text)) {
      // Keyword argument to a call we did not define.
      bool in_call = false;
      int depth = 0;
      for (std::size_t m = k; m-- > 0;) {
        if (toks[m].kind == TokKind::Newline) break;
        if (is_op(toks[m], U")")) ++depth;
        if (is_op(toks[m], U"(")) {
          if (depth == 0) {
            in_call = true;
            break;
          }
          --depth;
        }
      }
      if (in_call) continue;
    }
    if (t.end - t.start >= 2) spans.push_back({t.start + 1, t.end, ZoneKind::Identifier});
  }
  std::sort(spans.begin(), spans.end(), [](const ZoneSpan& a, const ZoneSpan& b) { return a.start < b.start; });
  return SafetyZones(std::move(spans), language, code.size());
}

}  // namespace unseen::perturb
