// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/dsl.hpp"

#include <cctype>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "fstrisk/csv.hpp"

namespace fstrisk {
namespace {

enum class Tok { ident, string, number, lbrace, rbrace, lparen, rparen, comma, colon, equals, end };

std::string describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::string: return "string";
    case Tok::number: return "number";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::comma: return "','";
    case Tok::colon: return "':'";
    case Tok::equals: return "'='";
    case Tok::end: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier name, decoded string, or number spelling
  double number = 0.0;
  SourceSpan span;
};

struct Failure {
  ParseError error;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  // Fills `out` or returns a lexical error.
  std::optional<ParseError> next(Token& out) {
    skip_trivia();
    out = Token{};
    const SourceSpan start{line_, column_, 0};
    if (pos_ >= src_.size()) {
      out.kind = Tok::end;
      out.span = start;
      return std::nullopt;
    }
    const std::size_t begin = pos_;
    const char c = src_[pos_];
    auto single = [&](Tok t) {
      advance();
      out.kind = t;
      out.span = {start.line, start.column, 1};
      return std::nullopt;
    };
    switch (c) {
      case '{': return single(Tok::lbrace);
      case '}': return single(Tok::rbrace);
      case '(': return single(Tok::lparen);
      case ')': return single(Tok::rparen);
      case ',': return single(Tok::comma);
      case ':': return single(Tok::colon);
      case '=': return single(Tok::equals);
      default: break;
    }
    if (is_ident_start(c)) {
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
      out.kind = Tok::ident;
      out.text = std::string(src_.substr(begin, pos_ - begin));
      out.span = {start.line, start.column, pos_ - begin};
      return std::nullopt;
    }
    if (c == '"') return lex_string(out, start);
    if (is_digit(c) || c == '.' || c == '-' || c == '+') return lex_number(out, start);

    const std::size_t width = code_point_width(pos_);
    for (std::size_t i = 0; i < width; ++i) advance();
    return ParseError{{start.line, start.column, 1},
                      fmt::format("unexpected character '{}'", printable(src_.substr(begin, width))),
                      {}};
  }

 private:
  static std::string printable(std::string_view raw) {
    std::string out;
    for (unsigned char ch : raw) {
      if (ch < 0x20 || ch == 0x7F) {
        out += fmt::format("\\x{:02x}", ch);
      } else {
        out.push_back(static_cast<char>(ch));
      }
    }
    return out;
  }

  std::size_t code_point_width(std::size_t at) const {
    std::size_t w = 1;
    while (at + w < src_.size() && (static_cast<unsigned char>(src_[at + w]) & 0xC0) == 0x80 && w < 4) ++w;
    return w;
  }

  // Consumes one byte. Columns count bytes that start a UTF-8 sequence.
  void advance() {
    const auto c = static_cast<unsigned char>(src_[pos_++]);
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else if ((c & 0xC0) != 0x80) {
      ++column_;
    }
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::optional<ParseError> lex_string(Token& out, SourceSpan start) {
    advance();  // opening quote
    std::string value;
    std::size_t cols = 1;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        return ParseError{{start.line, start.column, cols}, "unterminated string", {"'\"'"}};
      }
      const char c = src_[pos_];
      if (c == '"') {
        advance();
        ++cols;
        break;
      }
      if (c == '\\') {
        advance();
        ++cols;
        if (pos_ >= src_.size() || (src_[pos_] != '"' && src_[pos_] != '\\')) {
          return ParseError{{line_, column_ > 1 ? column_ - 1 : 1, 1}, "invalid escape in string",
                            {"'\\\"'", "'\\\\'"}};
        }
        value.push_back(src_[pos_]);
        advance();
        ++cols;
        continue;
      }
      const std::size_t w = code_point_width(pos_);
      value.append(src_.substr(pos_, w));
      for (std::size_t i = 0; i < w; ++i) advance();
      ++cols;
    }
    out.kind = Tok::string;
    out.text = std::move(value);
    out.span = {start.line, start.column, cols};
    return std::nullopt;
  }

  std::optional<ParseError> lex_number(Token& out, SourceSpan start) {
    const std::size_t begin = pos_;
    if (src_[pos_] == '-' || src_[pos_] == '+') advance();
    std::size_t digits = 0;
    while (pos_ < src_.size() && is_digit(src_[pos_])) advance(), ++digits;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (pos_ < src_.size() && is_digit(src_[pos_])) advance(), ++digits;
    }
    if (digits > 0 && pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t save_pos = pos_, save_col = column_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) advance();
      std::size_t exp_digits = 0;
      while (pos_ < src_.size() && is_digit(src_[pos_])) advance(), ++exp_digits;
      if (exp_digits == 0) {
        pos_ = save_pos;
        column_ = save_col;
      }
    }
    const std::string_view spelling = src_.substr(begin, pos_ - begin);
    const SourceSpan span{start.line, start.column, spelling.size()};
    if (digits == 0) return ParseError{span, fmt::format("malformed number '{}'", spelling), {"number"}};
    const auto value = csv::parse_real(spelling);
    if (!value) return ParseError{span, fmt::format("number '{}' is out of range", spelling), {}};
    out.kind = Tok::number;
    out.text = std::string(spelling);
    out.number = *value;
    out.span = span;
    return std::nullopt;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) {}

  RiskScenario parse_file() {
    bump();
    expect_keyword("scenario");
    RiskScenario scenario;
    scenario.name = expect(Tok::string).text;
    expect(Tok::lbrace);
    if (!(tok_.kind == Tok::ident && tok_.text == "step")) fail_expected({"'step'"});
    while (tok_.kind == Tok::ident && tok_.text == "step") {
      const SourceSpan step_span = tok_.span;
      auto step = parse_step();
      step_spans_[step.id].push_back(step_span);
      scenario.steps.push_back(std::move(step));
    }
    if (tok_.kind != Tok::rbrace) fail_expected({"'step'", "'}'"});
    bump();
    if (tok_.kind != Tok::end) fail_expected({"end of input"});
    return scenario;
  }

  // Span used when a validation violation names a step.
  SourceSpan span_for(const RiskScenario& scenario, const Violation& v, std::size_t occurrence) const {
    if (!v.step_id.empty()) {
      const auto it = step_spans_.find(v.step_id);
      if (it != step_spans_.end() && !it->second.empty()) {
        return it->second[std::min(occurrence, it->second.size() - 1)];
      }
    }
    (void)scenario;
    return scenario_span_;
  }

 private:
  [[noreturn]] void fail(SourceSpan span, std::string message, std::vector<std::string> expected = {}) {
    throw Failure{ParseError{span, std::move(message), std::move(expected)}};
  }

  [[noreturn]] void fail_expected(std::vector<std::string> expected) {
    std::string found = tok_.kind == Tok::end ? "end of input"
                        : tok_.kind == Tok::ident || tok_.kind == Tok::number
                            ? fmt::format("'{}'", tok_.text)
                            : describe(tok_.kind);
    std::string list;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) list += i + 1 == expected.size() ? " or " : ", ";
      list += expected[i];
    }
    fail(tok_.span, fmt::format("expected {}, found {}", list, found), std::move(expected));
  }

  void bump() {
    if (auto err = lexer_.next(tok_)) throw Failure{std::move(*err)};
  }

  Token expect(Tok kind) {
    if (tok_.kind != kind) fail_expected({describe(kind)});
    Token t = tok_;
    bump();
    return t;
  }

  void expect_keyword(std::string_view word) {
    if (!(tok_.kind == Tok::ident && tok_.text == word)) fail_expected({fmt::format("'{}'", word)});
    if (word == "scenario") scenario_span_ = tok_.span;
    bump();
  }

  StepSpec parse_step() {
    expect_keyword("step");
    StepSpec step;
    step.id = expect(Tok::ident).text;
    expect(Tok::colon);
    if (tok_.kind != Tok::ident) fail_expected({"'count'", "'probability'", "'loss'"});
    const auto kind = step_kind_from_name(tok_.text);
    if (!kind) {
      fail(tok_.span, fmt::format("unknown step kind '{}'", tok_.text), {"'count'", "'probability'", "'loss'"});
    }
    step.kind = *kind;
    bump();
    expect(Tok::equals);
    step.binding = parse_expr();
    return step;
  }

  Binding parse_expr() {
    if (tok_.kind != Tok::ident) fail_expected({"distribution", "'curve'"});
    const Token head = tok_;
    bump();
    expect(Tok::lparen);
    if (head.text == "curve") return parse_curve();

    const auto family = family_from_name(head.text);
    if (!family) {
      fail(head.span, fmt::format("unknown distribution family '{}'", head.text),
           {"'point'", "'uniform'", "'triangular'", "'lognormal'", "'beta'", "'curve'"});
    }
    DistributionExpr expr{*family, {}};
    expr.params.push_back(expect(Tok::number).number);
    while (tok_.kind == Tok::comma) {
      bump();
      expr.params.push_back(expect(Tok::number).number);
    }
    const SourceSpan close = tok_.span;
    expect(Tok::rparen);
    if (expr.params.size() != family_arity(*family)) {
      const std::size_t length = close.line == head.span.line ? close.column + 1 - head.span.column : head.span.length;
      fail({head.span.line, head.span.column, length},
           fmt::format("{} takes {} parameter(s), got {}", head.text, family_arity(*family), expr.params.size()));
    }
    return expr;
  }

  CurveBinding parse_curve() {
    CurveBinding curve;
    curve.curve_id = expect(Tok::ident).text;
    expect(Tok::comma);
    expect_keyword("fst");
    expect(Tok::equals);
    curve.fst_minutes = expect(Tok::number).number;
    if (tok_.kind == Tok::comma) {
      bump();
      expect_keyword("access");
      expect(Tok::equals);
      curve.access_probability = expect(Tok::number).number;
    }
    if (tok_.kind != Tok::rparen) fail_expected({"','", "')'"});
    bump();
    return curve;
  }

  Lexer lexer_;
  Token tok_;
  SourceSpan scenario_span_{1, 1, 0};
  std::map<std::string, std::vector<SourceSpan>> step_spans_;
};

std::string quote_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string ParseError::to_string() const {
  return fmt::format("{}:{}: {}", span.line, span.column, message);
}

Expected<RiskScenario, ParseError> parse_scenario(std::string_view source) {
  Parser parser(source);
  RiskScenario scenario;
  try {
    scenario = parser.parse_file();
  } catch (Failure& f) {
    return std::move(f.error);
  }
  auto checked = validate_scenario(scenario);
  if (!checked) {
    const auto& v = checked.error().violations.front();
    // Duplicate ids point at the second occurrence.
    const std::size_t occurrence = v.message == "duplicate step id" ? 1 : 0;
    const std::string message = v.step_id.empty() ? v.message : fmt::format("step '{}': {}", v.step_id, v.message);
    return ParseError{parser.span_for(scenario, v, occurrence), message, {}};
  }
  return std::move(checked).value();
}

std::string format_scenario(const RiskScenario& scenario) {
  std::string out = fmt::format("scenario {} {{\n", quote_string(scenario.name));
  for (const auto& step : scenario.steps) {
    out += fmt::format("  step {}: {} = ", step.id, step_kind_name(step.kind));
    if (const auto* curve = std::get_if<CurveBinding>(&step.binding)) {
      out += fmt::format("curve({}, fst={}", curve->curve_id, csv::format_real(curve->fst_minutes));
      if (curve->access_probability != 1.0) out += fmt::format(", access={}", csv::format_real(curve->access_probability));
      out += ")\n";
    } else {
      const auto& dist = std::get<DistributionExpr>(step.binding);
      out += fmt::format("{}(", family_name(dist.family));
      for (std::size_t i = 0; i < dist.params.size(); ++i) {
        if (i) out += ", ";
        out += csv::format_real(dist.params[i]);
      }
      out += ")\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace fstrisk
