#include <cctype>
#include <charconv>

#include "gridflow/dsl.hpp"

namespace gridflow {

SyntaxError::SyntaxError(int line, int column, std::string expected, std::string found)
    : Error(ErrorCode::SyntaxError, "line " + std::to_string(line) + ", column " + std::to_string(column) +
                                        ": expected " + expected + ", found " + found),
      line_(line), column_(column), expected_(std::move(expected)) {}

namespace {

enum class Tok { Ident, String, Number, Punct, Arrow, Cmp, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "string \"" + t.text + "\"";
    default: return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      const int line = line_, col = col_;
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", line, col});
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string id;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          id.push_back(take());
        out.push_back({Tok::Ident, id, line, col});
      } else if (c == '"') {
        take();
        std::string s;
        for (;;) {
          if (pos_ >= src_.size() || src_[pos_] == '\n')
            throw SyntaxError(line, col, "closing '\"'", "end of line");
          char ch = take();
          if (ch == '"') break;
          if (ch == '\\') {
            if (pos_ >= src_.size()) throw SyntaxError(line_, col_, "escape character", "end of input");
            char e = take();
            if (e == 'n') s.push_back('\n');
            else if (e == '"' || e == '\\') s.push_back(e);
            else throw SyntaxError(line_, col_ - 1, "escape \\n, \\\" or \\\\", std::string("\\") + e);
          } else {
            s.push_back(ch);
          }
        }
        out.push_back({Tok::String, s, line, col});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                 (c == '-' && pos_ + 1 < src_.size() &&
                  (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '.'))) {
        std::string num;
        num.push_back(take());
        while (pos_ < src_.size()) {
          char d = src_[pos_];
          if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' ) {
            num.push_back(take());
          } else if ((d == 'e' || d == 'E')) {
            num.push_back(take());
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) num.push_back(take());
          } else {
            break;
          }
        }
        out.push_back({Tok::Number, num, line, col});
      } else if (c == '-' && peek(1) == '>') {
        take();
        take();
        out.push_back({Tok::Arrow, "->", line, col});
      } else if (c == '<' || c == '>' || c == '=' || c == '!') {
        std::string op(1, take());
        if (pos_ < src_.size() && src_[pos_] == '=') op.push_back(take());
        if (op == "=" || op == "!") throw SyntaxError(line, col, "comparison operator", "'" + op + "'");
        out.push_back({Tok::Cmp, op, line, col});
      } else if (std::string_view("{}()[];:,").find(c) != std::string_view::npos) {
        out.push_back({Tok::Punct, std::string(1, take()), line, col});
      } else {
        throw SyntaxError(line, col, "token", "'" + std::string(1, c) + "'");
      }
    }
  }

 private:
  char peek(std::size_t ahead) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }
  char take() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++col_;
    }
    return c;
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        take();
      } else if (src_[pos_] == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  WorkflowGraph run() {
    keyword("workflow");
    std::string name = expect(Tok::String, "workflow name string").text;
    punct("{");
    while (!at_punct("}")) {
      if (peek().kind == Tok::End) fail("'}'");
      statement();
    }
    punct("}");
    if (peek().kind != Tok::End) fail("end of input");
    return build_graph(std::move(name), std::move(nodes_), std::move(edges_), std::move(flows_),
                       std::move(source_refs_));
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& advance() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    throw SyntaxError(t.line, t.column, expected, describe(t));
  }
  bool at_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool at_keyword(std::string_view k) const { return peek().kind == Tok::Ident && peek().text == k; }
  void punct(std::string_view p) {
    if (!at_punct(p)) fail("'" + std::string(p) + "'");
    advance();
  }
  void keyword(std::string_view k) {
    if (!at_keyword(k)) fail("'" + std::string(k) + "'");
    advance();
  }
  const Token& expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) fail(what);
    return advance();
  }
  void arrow() { expect(Tok::Arrow, "'->'"); }
  void opt_semicolon() {
    if (at_punct(";")) advance();
  }

  static bool reserved(std::string_view s) {
    return s == "start" || s == "end" || s == "workflow" || s == "activity" || s == "fork" || s == "join" ||
           s == "decision" || s == "final" || s == "cite" || s == "after" || s == "into" || s == "waits" ||
           s == "when" || s == "else";
  }
  std::string node_id(const std::string& what = "identifier") {
    if (peek().kind != Tok::Ident || reserved(peek().text)) fail(what);
    return advance().text;
  }
  std::string ensure_final_end() {
    if (!has_end_) {
      nodes_.push_back(make_final("end"));
      has_end_ = true;
    }
    return "end";
  }
  std::string first_start() {
    if (start_count_ == 0) {
      nodes_.push_back(make_start("start"));
      start_count_ = 1;
    }
    return "start";
  }
  std::string target() {
    if (at_keyword("end")) {
      advance();
      return ensure_final_end();
    }
    return node_id("node identifier or 'end'");
  }
  std::string source() {
    if (at_keyword("start")) {
      advance();
      return first_start();
    }
    return node_id("node identifier or 'start'");
  }

  void statement() {
    const Token& t = peek();
    if (t.kind != Tok::Ident) fail("statement");
    if (t.text == "cite") {
      advance();
      source_refs_.push_back(expect(Tok::String, "citation string").text);
    } else if (t.text == "start") {
      advance();
      arrow();
      std::string id = start_count_ == 0 ? "start" : "start." + std::to_string(start_count_ + 1);
      ++start_count_;
      nodes_.push_back(make_start(id));
      edges_.push_back({id, target()});
    } else if (t.text == "activity") {
      advance();
      activity();
      opt_semicolon();
      return;
    } else if (t.text == "fork") {
      advance();
      std::string id = node_id();
      keyword("after");
      std::string from = source();
      keyword("into");
      nodes_.push_back(make_fork(id));
      edges_.push_back({from, id});
      for (const auto& to : paren_list([this] { return target(); })) edges_.push_back({id, to});
    } else if (t.text == "join") {
      advance();
      std::string id = node_id();
      keyword("waits");
      nodes_.push_back(make_join(id));
      for (const auto& from : paren_list([this] { return source(); })) edges_.push_back({from, id});
      arrow();
      edges_.push_back({id, target()});
    } else if (t.text == "decision") {
      advance();
      decision();
      opt_semicolon();
      return;
    } else if (t.text == "final") {
      advance();
      std::string id = node_id();
      nodes_.push_back(make_final(id));
    } else if (!reserved(t.text)) {
      std::string from = advance().text;
      arrow();
      edges_.push_back({from, target()});
    } else {
      fail("statement");
    }
    opt_semicolon();
  }

  template <typename F>
  std::vector<std::string> paren_list(F item) {
    punct("(");
    std::vector<std::string> out{item()};
    while (at_punct(",")) {
      advance();
      out.push_back(item());
    }
    punct(")");
    return out;
  }

  std::string word_or_string(const std::string& what) {
    if (peek().kind == Tok::Ident || peek().kind == Tok::String) return advance().text;
    fail(what);
  }

  std::vector<std::string> bracket_list() {
    punct("[");
    std::vector<std::string> out;
    if (!at_punct("]")) {
      out.push_back(word_or_string("list item"));
      while (at_punct(",")) {
        advance();
        out.push_back(word_or_string("list item"));
      }
    }
    punct("]");
    return out;
  }

  Unit unit_string() {
    const Token& t = expect(Tok::String, "unit string");
    try {
      return units::get(t.text);
    } catch (const Error&) {
      throw SyntaxError(t.line, t.column, "known unit", "\"" + t.text + "\"");
    }
  }

  void activity() {
    std::string id = node_id("activity identifier");
    Binding binding;
    ParamMap params;
    std::vector<std::string> outputs, cites;
    punct("{");
    while (!at_punct("}")) {
      const Token& field = expect(Tok::Ident, "activity field");
      punct(":");
      if (field.text == "program") {
        binding.program = expect(Tok::String, "program string").text;
      } else if (field.text == "actuator") {
        binding.actuator = expect(Tok::String, "actuator string").text;
      } else if (field.text == "capabilities") {
        for (auto& c : bracket_list()) binding.capabilities.insert(std::move(c));
      } else if (field.text == "params") {
        punct("{");
        while (!at_punct("}")) {
          std::string key = expect(Tok::Ident, "parameter name").text;
          punct(":");
          std::string value;
          if (peek().kind == Tok::String || peek().kind == Tok::Number || peek().kind == Tok::Ident)
            value = advance().text;
          else
            fail("parameter value");
          params[key] = value;
          if (!at_punct(",")) break;
          advance();
        }
        punct("}");
      } else if (field.text == "inputs") {
        keyword("from");
        std::string producer = node_id("producer activity");
        punct("[");
        std::vector<std::pair<std::string, Unit>> wanted;
        while (!at_punct("]")) {
          std::string name = word_or_string("observable name");
          punct(":");
          wanted.emplace_back(name, unit_string());
          if (!at_punct(",")) break;
          advance();
        }
        punct("]");
        try {
          flows_.push_back({producer, id, ExtractionSpec(std::move(wanted))});
        } catch (const Error& e) {
          throw SyntaxError(field.line, field.column, "distinct observable names", e.detail());
        }
      } else if (field.text == "outputs") {
        outputs = bracket_list();
      } else if (field.text == "cite") {
        cites.push_back(expect(Tok::String, "citation string").text);
      } else {
        throw SyntaxError(field.line, field.column,
                          "program, actuator, capabilities, params, inputs, outputs or cite", "'" + field.text + "'");
      }
      opt_semicolon();
    }
    punct("}");
    if (binding.program && binding.actuator) binding.variant = BindingVariant::PinnedBoth;
    else if (binding.program) binding.variant = BindingVariant::PinnedProgram;
    else if (binding.actuator) binding.variant = BindingVariant::PinnedBoth;  // rejected by build_graph
    else binding.variant = BindingVariant::Free;
    Node n = make_activity(id, std::move(binding), std::move(params));
    n.outputs = std::move(outputs);
    n.cites = std::move(cites);
    nodes_.push_back(std::move(n));
  }

  void decision() {
    std::string id = node_id("decision identifier");
    keyword("after");
    std::string from = source();
    punct("{");
    std::vector<Branch> branches;
    while (at_keyword("when")) {
      advance();
      Guard g;
      g.observable = word_or_string("observable name");
      g.op = *parse_compare_op(expect(Tok::Cmp, "comparison operator").text);
      const Token& num = expect(Tok::Number, "number");
      auto res = std::from_chars(num.text.data(), num.text.data() + num.text.size(), g.literal);
      if (res.ec != std::errc{} || res.ptr != num.text.data() + num.text.size())
        throw SyntaxError(num.line, num.column, "number", "'" + num.text + "'");
      if (peek().kind == Tok::String) g.unit = unit_string();
      arrow();
      branches.push_back({g, target()});
      opt_semicolon();
    }
    keyword("else");
    arrow();
    branches.push_back({std::nullopt, target()});
    opt_semicolon();
    punct("}");
    nodes_.push_back(make_decision(id, std::move(branches)));
    edges_.push_back({from, id});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
  std::vector<ControlEdge> edges_;
  std::vector<ObjectFlow> flows_;
  std::vector<std::string> source_refs_;
  int start_count_ = 0;
  bool has_end_ = false;
};

}  // namespace

WorkflowGraph parse_workflow(std::string_view text) { return Parser(Lexer(text).run()).run(); }

}  // namespace gridflow
