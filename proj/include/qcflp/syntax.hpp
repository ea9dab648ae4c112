#pragma once

// Concrete syntax for source programs (.qcflp), translated programs
// (.cflp), goals and statements: lexer, parser, validator and printer.

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qcflp/statement.hpp"

namespace qcflp {

struct Diagnostic {
  int line = 0;
  int column = 0;
  std::string message;
};

inline std::string to_string(const Diagnostic& d) {
  return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message;
}

class SyntaxError : public std::runtime_error {
 public:
  explicit SyntaxError(std::vector<Diagnostic> diags)
      : std::runtime_error(diags.empty() ? "syntax error" : to_string(diags.front())), diags_(std::move(diags)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

struct DataDecl {
  struct Alternative {
    std::string constructor;
    std::vector<std::string> arg_types;
    friend bool operator==(const Alternative&, const Alternative&) = default;
  };
  std::string name;
  std::vector<Alternative> alternatives;
  friend bool operator==(const DataDecl&, const DataDecl&) = default;
};

struct Signature {
  std::map<std::string, int> constructors;
  std::map<std::string, int> defined;
  friend bool operator==(const Signature&, const Signature&) = default;
};

/// f(t1..tn) -alpha-> r <== Delta
struct ProgramRule {
  std::string name;
  std::vector<Expr> patterns;
  QualValue alpha;
  Expr rhs;
  ConstraintSet conditions;
  int line = 0;

  Expr head() const { return Expr::app(name, SymKind::Defined, patterns); }

  friend bool operator==(const ProgramRule& a, const ProgramRule& b) {
    return a.name == b.name && a.patterns == b.patterns && a.alpha == b.alpha && a.rhs == b.rhs &&
           a.conditions == b.conditions;
  }
};

struct Program {
  Signature sig;
  std::vector<DataDecl> data;
  std::vector<ProgramRule> rules;

  friend bool operator==(const Program& a, const Program& b) {
    return a.sig == b.sig && a.data == b.data && a.rules == b.rules;
  }
};

struct GoalPart {
  AtomicConstraint delta;
  std::string qvar;
  std::optional<QualValue> threshold;
  friend bool operator==(const GoalPart& a, const GoalPart& b) {
    if (!(a.delta == b.delta) || a.qvar != b.qvar || a.threshold.has_value() != b.threshold.has_value()) {
      return false;
    }
    return !a.threshold || *a.threshold == *b.threshold;
  }
};

struct Goal {
  std::vector<GoalPart> parts;
  friend bool operator==(const Goal&, const Goal&) = default;
};

enum class SourceKind {
  Qualified,  // .qcflp
  Plain,      // .cflp: unqualified, primed names and W-variables allowed
};

struct ParseOptions {
  SourceKind kind = SourceKind::Qualified;
  QualDomain dom = QualDomain::unit();
};

/// Variables named like `_W12` are introduced by the translation and are
/// reserved in qualified sources.
inline bool is_reserved_qual_var(std::string_view name) {
  if (name.size() < 3 || name.substr(0, 2) != "_W") return false;
  for (char c : name.substr(2)) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

namespace detail {

enum class Tok {
  End, Ident, Var, Number, String, Char, LParen, RParen, LBracket, RBracket, Comma, Colon, Bar, Hash,
  Assign, Eq, Neq, Lt, Le, Gt, Ge, Plus, Minus, Star, Slash, ArrowTop, Arrow, ArrowBang, Implied,
  TypeOf, Bottom,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      lex_one(t);
      out.push_back(std::move(t));
    }
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw SyntaxError({{line_, col_, msg}}); }

  char peek(std::size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  bool starts(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }
  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(peek()))) advance();
      if (starts("--") && peek(2) != '>') {
        while (pos_ < src_.size() && peek() != '\n') advance();
        continue;
      }
      return;
    }
  }

  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  void lex_one(Token& t) {
    char c = peek();
    struct Punct {
      std::string_view text;
      Tok kind;
    };
    static const Punct puncts[] = {
        {"_|_", Tok::Bottom}, {"\xE2\x8A\xA5", Tok::Bottom}, {"-->", Tok::ArrowTop}, {"->!", Tok::ArrowBang},
        {"->", Tok::Arrow},   {"<==", Tok::Implied},        {"::", Tok::TypeOf},    {"==", Tok::Eq},
        {"/=", Tok::Neq},     {"<=", Tok::Le},              {"=<", Tok::Le},        {">=", Tok::Ge},
        {"<", Tok::Lt},       {">", Tok::Gt},               {"(", Tok::LParen},     {")", Tok::RParen},
        {"[", Tok::LBracket}, {"]", Tok::RBracket},         {",", Tok::Comma},      {":", Tok::Colon},
        {"|", Tok::Bar},      {"#", Tok::Hash},             {"=", Tok::Assign},     {"+", Tok::Plus},
        {"-", Tok::Minus},    {"*", Tok::Star},             {"/", Tok::Slash},
    };
    if (std::isdigit(static_cast<unsigned char>(c))) {
      lex_number(t);
      return;
    }
    if (c == '"') {
      lex_string(t);
      return;
    }
    if (c == '\'') {
      lex_char(t);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || (c == '_' && !starts("_|_"))) {
      std::size_t b = pos_;
      while (ident_char(peek())) advance();
      while (peek() == '\'') advance();
      t.text = std::string(src_.substr(b, pos_ - b));
      bool upper = std::isupper(static_cast<unsigned char>(t.text[0])) || t.text[0] == '_';
      t.kind = upper ? Tok::Var : Tok::Ident;
      return;
    }
    for (const auto& p : puncts) {
      if (starts(p.text)) {
        t.kind = p.kind;
        t.text = std::string(p.text);
        advance(p.text.size());
        return;
      }
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  void lex_number(Token& t) {
    std::size_t b = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      advance();
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (std::isdigit(static_cast<unsigned char>(peek(1))) ||
         ((peek(1) == '-' || peek(1) == '+') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
      advance(2);
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    t.kind = Tok::Number;
    t.text = std::string(src_.substr(b, pos_ - b));
    t.number = std::stod(t.text);
  }

  char escape() {
    advance();  // backslash
    char c = peek();
    advance();
    switch (c) {
      case 'n': return '\n';
      case 't': return '\t';
      case '\\': return '\\';
      case '"': return '"';
      case '\'': return '\'';
      default: fail(std::string("unknown escape \\") + c);
    }
  }

  void lex_string(Token& t) {
    advance();
    std::string s;
    while (peek() != '"') {
      if (pos_ >= src_.size() || peek() == '\n') fail("unterminated string literal");
      if (peek() == '\\') {
        s += escape();
      } else {
        s += peek();
        advance();
      }
    }
    advance();
    t.kind = Tok::String;
    t.text = std::move(s);
  }

  void lex_char(Token& t) {
    advance();
    char c;
    if (peek() == '\\') {
      c = escape();
    } else {
      c = peek();
      advance();
    }
    if (peek() != '\'') fail("unterminated character literal");
    advance();
    t.kind = Tok::Char;
    t.text = std::string(1, c);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

inline const char* describe(Tok k) {
  switch (k) {
    case Tok::End: return "end of input";
    case Tok::Ident: return "identifier";
    case Tok::Var: return "variable";
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::Char: return "character";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Bar: return "'|'";
    case Tok::Hash: return "'#'";
    case Tok::Assign: return "'='";
    case Tok::Eq: return "'=='";
    case Tok::Neq: return "'/='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::ArrowTop: return "'-->'";
    case Tok::Arrow: return "'->'";
    case Tok::ArrowBang: return "'->!'";
    case Tok::Implied: return "'<=='";
    case Tok::TypeOf: return "'::'";
    case Tok::Bottom: return "'_|_'";
  }
  return "token";
}

// Raw parse results carry symbol names only; kinds are resolved against the
// signature once every rule head is known.
class Parser {
 public:
  Parser(std::vector<Token> toks, const ParseOptions& opts) : toks_(std::move(toks)), opts_(opts) {}

  // ----- programs -----

  struct RawProgram {
    std::vector<DataDecl> data;
    std::vector<ProgramRule> rules;
    std::vector<std::pair<std::string, Token>> head_tokens;
  };

  RawProgram program() {
    RawProgram out;
    while (!at(Tok::End)) {
      if (at_word("type")) {
        skip_line();
      } else if (at_word("data")) {
        out.data.push_back(data_decl());
      } else if ((at(Tok::Ident)) && peek(1).kind == Tok::TypeOf) {
        skip_line();
      } else {
        Token head = cur();
        out.rules.push_back(rule());
        out.head_tokens.emplace_back(out.rules.back().name, head);
      }
    }
    return out;
  }

  // ----- goals -----

  Goal goal() {
    Goal g;
    std::map<std::string, Token> seen;
    begin_scope();
    if (at(Tok::End)) return g;
    for (;;) {
      GoalPart part;
      part.delta = condition();
      expect(Tok::Hash);
      Token w = cur();
      expect(Tok::Var);
      if (seen.count(w.text)) error_at(w, "qualification variable " + w.text + " used twice");
      seen.emplace(w.text, w);
      part.qvar = w.text;
      g.parts.push_back(std::move(part));
      if (!accept(Tok::Comma)) break;
    }
    if (accept(Tok::Bar)) {
      std::set<std::string> bounded;
      for (;;) {
        Token w = cur();
        expect(Tok::Var);
        expect(Tok::Ge);
        QualValue beta = qual_literal();
        auto it = std::find_if(g.parts.begin(), g.parts.end(), [&](const GoalPart& p) { return p.qvar == w.text; });
        if (it == g.parts.end()) error_at(w, "threshold on undeclared qualification variable " + w.text);
        if (!bounded.insert(w.text).second) error_at(w, "second threshold for " + w.text);
        it->threshold = beta;
        if (!accept(Tok::Comma)) break;
      }
    }
    expect(Tok::End);
    return g;
  }

  /// Comma-separated conditions up to end of input.
  ConstraintSet constraint_list() {
    ConstraintSet out;
    begin_scope();
    if (at(Tok::End)) return out;
    for (;;) {
      out.push_back(condition());
      if (!accept(Tok::Comma)) break;
    }
    expect(Tok::End);
    return out;
  }

  QcStatement statement() {
    begin_scope();
    allow_bottom_ = true;
    QcStatement s;
    Token start = cur();
    Expr lhs = cons_expr();
    if (accept(Tok::Neq)) {
      s = QcStatement::atomic(AtomicConstraint::distinct(std::move(lhs), cons_expr()), std::nullopt);
    } else if (Expr e = rel_tail(std::move(lhs)); accept(Tok::Arrow)) {
      Expr t = expr();
      s = QcStatement::production(e, t, std::nullopt);
    } else {
      s = QcStatement::atomic(to_condition(e, start), std::nullopt);
    }
    if (accept(Tok::Hash)) s.qual = qual_literal();
    if (accept(Tok::Implied)) {
      for (;;) {
        s.hyp.push_back(condition());
        if (!accept(Tok::Comma)) break;
      }
    }
    expect(Tok::End);
    return s;
  }

  Expr single_expr() {
    begin_scope();
    allow_bottom_ = true;
    Expr e = expr();
    expect(Tok::End);
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t k) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_word(std::string_view w) const { return at(Tok::Ident) && cur().text == w; }
  bool accept(Tok k) {
    if (!at(k)) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void error_at(const Token& t, const std::string& msg) const {
    throw SyntaxError({{t.line, t.col, msg}});
  }
  void expect(Tok k) {
    if (!accept(k)) {
      std::string got = at(Tok::End) ? "end of input" : "'" + cur().text + "'";
      error_at(cur(), std::string("expected ") + describe(k) + ", found " + got);
    }
  }
  void skip_line() {
    int line = cur().line;
    while (!at(Tok::End) && cur().line == line) ++pos_;
  }
  void begin_scope() { anon_ = 0; }

  DataDecl data_decl() {
    ++pos_;  // data
    DataDecl d;
    Token name = cur();
    expect(Tok::Ident);
    d.name = name.text;
    while (at(Tok::Var)) ++pos_;  // type parameters
    expect(Tok::Assign);
    for (;;) {
      DataDecl::Alternative alt;
      Token c = cur();
      expect(Tok::Ident);
      alt.constructor = c.text;
      if (accept(Tok::LParen)) {
        std::string text;
        int depth = 0;
        for (;;) {
          if (at(Tok::End)) error_at(cur(), "unterminated constructor declaration");
          if (depth == 0 && (at(Tok::Comma) || at(Tok::RParen))) {
            alt.arg_types.push_back(text);
            text.clear();
            if (accept(Tok::RParen)) break;
            ++pos_;
            continue;
          }
          if (at(Tok::LParen) || at(Tok::LBracket)) ++depth;
          if (at(Tok::RParen) || at(Tok::RBracket)) --depth;
          if (!text.empty() && cur().kind != Tok::RBracket && cur().kind != Tok::RParen &&
              text.back() != '[' && text.back() != '(') {
            text += ' ';
          }
          text += cur().text;
          ++pos_;
        }
      }
      d.alternatives.push_back(std::move(alt));
      if (!accept(Tok::Bar)) break;
    }
    return d;
  }

  ProgramRule rule() {
    begin_scope();
    ProgramRule r;
    Token head = cur();
    r.line = head.line;
    if (at(Tok::Var)) error_at(head, "rule head must start with a function symbol, found variable " + head.text);
    expect(Tok::Ident);
    r.name = head.text;
    if (opts_.kind == SourceKind::Qualified && r.name.back() == '\'') {
      error_at(head, "primed name " + r.name + " is reserved for translated programs");
    }
    if (accept(Tok::LParen)) {
      if (!at(Tok::RParen)) {
        for (;;) {
          r.patterns.push_back(expr());
          if (!accept(Tok::Comma)) break;
        }
      }
      expect(Tok::RParen);
    }
    if (accept(Tok::ArrowTop)) {
      r.alpha = opts_.dom.top();
    } else if (at(Tok::Minus)) {
      ++pos_;
      Token q = cur();
      r.alpha = qual_literal();
      expect(Tok::Arrow);
      if (!opts_.dom.conforms(r.alpha)) error_at(q, "attenuation factor does not belong to domain " + opts_.dom.name());
      if (opts_.dom.is_bottom(r.alpha)) error_at(q, "attenuation factor must not be bottom");
      if (opts_.kind == SourceKind::Plain && !opts_.dom.is_top(r.alpha)) {
        error_at(q, "attenuation factors are not allowed in unqualified programs");
      }
    } else {
      std::string got = at(Tok::End) ? "end of input" : "'" + cur().text + "'";
      error_at(cur(), "expected '-->' or an attenuated arrow, found " + got);
    }
    r.rhs = expr();
    if (accept(Tok::Implied)) {
      for (;;) {
        r.conditions.push_back(condition());
        if (!accept(Tok::Comma)) break;
      }
    }
    return r;
  }

  QualValue qual_literal() {
    Token t = cur();
    if (accept(Tok::LParen)) {
      QualValue l = qual_literal();
      expect(Tok::Comma);
      QualValue r = qual_literal();
      expect(Tok::RParen);
      return QualValue::pair(std::move(l), std::move(r));
    }
    expect(Tok::Number);
    if (t.number > 1.0) error_at(t, "qualification value " + t.text + " outside [0,1]");
    return QualValue::real(t.number);
  }

  AtomicConstraint condition() {
    Token start = cur();
    Expr lhs = cons_expr();
    if (accept(Tok::Neq)) {
      Expr rhs = cons_expr();
      return AtomicConstraint::distinct(std::move(lhs), std::move(rhs));
    }
    Expr e = rel_tail(std::move(lhs));
    return to_condition(std::move(e), start);
  }

  AtomicConstraint to_condition(Expr e, const Token& start) {
    if (accept(Tok::ArrowBang)) {
      Token vt = cur();
      Expr v = primary();
      if (!e.is_app() || sym::primitive_arity(e.name()) < 0) {
        error_at(start, "'->!' requires a primitive application on its left");
      }
      if (!valid_result(v)) error_at(vt, "constraint result must be a variable, constant or number");
      return {Expr::prim(e.name(), std::vector<Expr>(e.args().begin(), e.args().end())), std::move(v)};
    }
    if (e.is_app() && (sym::is_comparison(e.name()) || e.name() == sym::kEq || e.name() == sym::kQVal) &&
        static_cast<int>(e.arity()) == sym::primitive_arity(e.name())) {
      return AtomicConstraint::holds(Expr::prim(e.name(), std::vector<Expr>(e.args().begin(), e.args().end())));
    }
    return AtomicConstraint::equal(std::move(e), Expr::boolean(true));
  }

  // ----- expressions -----

  Expr expr() { return rel_tail(cons_expr()); }

  Expr rel_tail(Expr lhs) {
    static const std::pair<Tok, const char*> ops[] = {
        {Tok::Eq, "=="}, {Tok::Lt, "<"}, {Tok::Le, "<="}, {Tok::Gt, ">"}, {Tok::Ge, ">="}};
    for (const auto& [k, name] : ops) {
      if (accept(k)) {
        Expr rhs = cons_expr();
        if (at(Tok::Eq) || at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) || at(Tok::Ge)) {
          error_at(cur(), "relational operators do not associate; add parentheses");
        }
        return Expr::prim(name, {std::move(lhs), std::move(rhs)});
      }
    }
    if (at(Tok::Neq)) error_at(cur(), "'/=' is only allowed at the top of a condition");
    return lhs;
  }

  Expr cons_expr() {
    Expr head = additive();
    if (accept(Tok::Colon)) return Expr::list_cons(std::move(head), cons_expr());
    return head;
  }

  Expr additive() {
    Expr e = multiplicative();
    for (;;) {
      if (accept(Tok::Plus)) e = Expr::prim("+", {std::move(e), multiplicative()});
      else if (accept(Tok::Minus)) e = Expr::prim("-", {std::move(e), multiplicative()});
      else return e;
    }
  }

  Expr multiplicative() {
    Expr e = unary();
    for (;;) {
      if (accept(Tok::Star)) e = Expr::prim("*", {std::move(e), unary()});
      else if (accept(Tok::Slash)) e = Expr::prim("/", {std::move(e), unary()});
      else return e;
    }
  }

  Expr unary() {
    if (accept(Tok::Minus)) {
      Expr e = unary();
      if (e.is_num()) return Expr::num(-e.number());
      return Expr::prim("-", {Expr::num(0.0), std::move(e)});
    }
    return primary();
  }

  Expr primary() {
    Token t = cur();
    switch (t.kind) {
      case Tok::Number: ++pos_; return Expr::num(t.number);
      case Tok::String: ++pos_; return Expr::string(t.text);
      case Tok::Char: ++pos_; return Expr::character(t.text[0]);
      case Tok::Bottom:
        ++pos_;
        if (!allow_bottom_) error_at(t, "the undefined value _|_ may not appear in programs or goals");
        return Expr::bottom();
      case Tok::Var: {
        ++pos_;
        if (t.text == "_") return Expr::var("_$" + std::to_string(anon_++));
        if (opts_.kind == SourceKind::Qualified && is_reserved_qual_var(t.text)) {
          error_at(t, "variable name " + t.text + " is reserved for translated programs");
        }
        return Expr::var(t.text);
      }
      case Tok::LParen: {
        ++pos_;
        Expr e = expr();
        expect(Tok::RParen);
        return e;
      }
      case Tok::LBracket: {
        ++pos_;
        std::vector<Expr> items;
        if (!at(Tok::RBracket)) {
          for (;;) {
            items.push_back(expr());
            if (!accept(Tok::Comma)) break;
          }
        }
        Expr tail = Expr::nil();
        if (accept(Tok::Bar)) tail = expr();
        expect(Tok::RBracket);
        for (auto it = items.rbegin(); it != items.rend(); ++it) tail = Expr::list_cons(*it, tail);
        return tail;
      }
      case Tok::Ident: {
        ++pos_;
        if (opts_.kind == SourceKind::Qualified && t.text.back() == '\'') {
          error_at(t, "primed name " + t.text + " is reserved for translated programs");
        }
        std::vector<Expr> args;
        if (accept(Tok::LParen)) {
          if (!at(Tok::RParen)) {
            for (;;) {
              args.push_back(expr());
              if (!accept(Tok::Comma)) break;
            }
          }
          expect(Tok::RParen);
        }
        if (t.text == sym::kQVal) return Expr::prim(t.text, std::move(args));
        return Expr::cons(t.text, std::move(args));
      }
      default: {
        std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        error_at(t, "expected an expression, found " + got);
      }
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const ParseOptions& opts_;
  int anon_ = 0;
  bool allow_bottom_ = false;
};

// Rewrites application kinds according to the signature.
inline Expr resolve(const Expr& e, const Signature& sig) {
  if (!e.is_app()) return e;
  std::vector<Expr> args;
  args.reserve(e.arity());
  for (const auto& a : e.args()) args.push_back(resolve(a, sig));
  SymKind kind = e.kind();
  if (kind != SymKind::Primitive) kind = sig.defined.count(e.name()) ? SymKind::Defined : SymKind::Constructor;
  return Expr::app(e.name(), kind, std::move(args));
}

inline AtomicConstraint resolve(const AtomicConstraint& c, const Signature& sig) {
  return {resolve(c.call, sig), resolve(c.result, sig)};
}

inline ConstraintSet resolve(const ConstraintSet& cs, const Signature& sig) {
  ConstraintSet out;
  for (const auto& c : cs) out.push_back(resolve(c, sig));
  return out;
}

struct ArityCheck {
  Signature& sig;
  std::vector<Diagnostic>& diags;
  int line;

  void visit(const Expr& e) {
    if (!e.is_app()) return;
    int n = static_cast<int>(e.arity());
    if (e.kind() == SymKind::Primitive) {
      if (sym::primitive_arity(e.name()) != n) {
        diags.push_back({line, 1, "primitive " + e.name() + " applied to " + std::to_string(n) + " arguments"});
      }
    } else if (e.kind() == SymKind::Defined) {
      int want = sig.defined.at(e.name());
      if (want != n) {
        diags.push_back({line, 1, "function " + e.name() + " has arity " + std::to_string(want) +
                                      " but is applied to " + std::to_string(n) + " arguments"});
      }
    } else {
      auto [it, fresh] = sig.constructors.emplace(e.name(), n);
      if (!fresh && it->second != n) {
        diags.push_back({line, 1, "constructor " + e.name() + " used with arity " + std::to_string(n) +
                                      " but declared with arity " + std::to_string(it->second)});
      }
    }
    for (const auto& a : e.args()) visit(a);
  }
};

}  // namespace detail

/// Structural checks on a rule: linear term patterns, no bottom, attenuation
/// in D \ {bottom}, well-formed constraint results.
inline std::vector<Diagnostic> validate_rule(const ProgramRule& r, const QualDomain& dom) {
  std::vector<Diagnostic> diags;
  std::set<std::string> seen;
  std::vector<std::string> vars;
  for (const auto& p : r.patterns) {
    if (!is_term(p)) diags.push_back({r.line, 1, "pattern of " + r.name + " is not a constructor term"});
    vars.clear();
    collect_vars(p, vars);
    std::vector<std::string> all;
    std::function<void(const Expr&)> walk = [&](const Expr& e) {
      if (e.is_var()) all.push_back(e.name());
      if (e.is_app()) {
        for (const auto& a : e.args()) walk(a);
      }
    };
    walk(p);
    for (const auto& v : all) {
      if (!seen.insert(v).second) {
        diags.push_back({r.line, 1, "non-linear head: variable " + v + " repeated in rule for " + r.name});
      }
    }
  }
  auto no_bottom = [&](const Expr& e) {
    if (!is_total(e)) diags.push_back({r.line, 1, "the undefined value may not appear in program rules"});
  };
  for (const auto& p : r.patterns) no_bottom(p);
  no_bottom(r.rhs);
  for (const auto& c : r.conditions) {
    no_bottom(c.call);
    no_bottom(c.result);
    if (!valid_result(c.result)) diags.push_back({r.line, 1, "constraint result must be a variable or constant"});
  }
  if (!dom.conforms(r.alpha) || dom.is_bottom(r.alpha)) {
    diags.push_back({r.line, 1, "attenuation factor outside D \\ {bottom}"});
  }
  return diags;
}

struct ProgramParse {
  std::optional<Program> program;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return program.has_value() && diagnostics.empty(); }
};

inline ProgramParse parse_program(std::string_view text, const ParseOptions& opts = {}) {
  ProgramParse out;
  detail::Parser::RawProgram raw;
  try {
    detail::Parser p(detail::Lexer(text).run(), opts);
    raw = p.program();
  } catch (const SyntaxError& e) {
    out.diagnostics = e.diagnostics();
    return out;
  } catch (const QualError& e) {
    out.diagnostics.push_back({0, 0, e.what()});
    return out;
  }

  Program prog;
  prog.data = raw.data;
  for (const auto& [name, tok] : raw.head_tokens) {
    (void)tok;
    prog.sig.defined.try_emplace(name, 0);
  }
  for (std::size_t i = 0; i < raw.rules.size(); ++i) {
    const auto& r = raw.rules[i];
    const auto& tok = raw.head_tokens[i].second;
    int n = static_cast<int>(r.patterns.size());
    auto& slot = prog.sig.defined[r.name];
    bool first = std::none_of(raw.rules.begin(), raw.rules.begin() + static_cast<std::ptrdiff_t>(i),
                              [&](const ProgramRule& q) { return q.name == r.name; });
    if (first) slot = n;
    else if (slot != n) {
      out.diagnostics.push_back({tok.line, tok.col, "function " + r.name + " defined with arity " +
                                                        std::to_string(n) + " but earlier with arity " +
                                                        std::to_string(slot)});
    }
  }
  for (const auto& d : prog.data) {
    for (const auto& alt : d.alternatives) {
      int n = static_cast<int>(alt.arg_types.size());
      auto [it, fresh] = prog.sig.constructors.emplace(alt.constructor, n);
      if (!fresh && it->second != n) {
        out.diagnostics.push_back({0, 0, "constructor " + alt.constructor + " declared twice with different arities"});
      }
      if (prog.sig.defined.count(alt.constructor)) {
        out.diagnostics.push_back({raw.head_tokens.empty() ? 0 : raw.head_tokens.front().second.line, 0,
                                   "symbol " + alt.constructor + " is both a constructor and a defined function"});
      }
    }
  }
  for (auto& r : raw.rules) {
    ProgramRule rr = r;
    for (auto& p : rr.patterns) p = detail::resolve(p, prog.sig);
    rr.rhs = detail::resolve(rr.rhs, prog.sig);
    rr.conditions = detail::resolve(rr.conditions, prog.sig);
    detail::ArityCheck check{prog.sig, out.diagnostics, rr.line};
    for (const auto& p : rr.patterns) check.visit(p);
    check.visit(rr.rhs);
    for (const auto& c : rr.conditions) {
      check.visit(c.call);
      check.visit(c.result);
    }
    for (auto& d : validate_rule(rr, opts.dom)) out.diagnostics.push_back(std::move(d));
    prog.rules.push_back(std::move(rr));
  }
  out.program = std::move(prog);
  return out;
}

inline Program parse_program_or_throw(std::string_view text, const ParseOptions& opts = {}) {
  auto r = parse_program(text, opts);
  if (!r.ok()) throw SyntaxError(r.diagnostics);
  return std::move(*r.program);
}

namespace detail {

inline void check_uses(const Expr& e, const Signature& sig, std::vector<Diagnostic>& diags) {
  if (!e.is_app()) return;
  if (e.kind() == SymKind::Defined && sig.defined.at(e.name()) != static_cast<int>(e.arity())) {
    diags.push_back({1, 1, "function " + e.name() + " applied to the wrong number of arguments"});
  }
  if (e.kind() == SymKind::Primitive && sym::primitive_arity(e.name()) != static_cast<int>(e.arity())) {
    diags.push_back({1, 1, "primitive " + e.name() + " applied to the wrong number of arguments"});
  }
  for (const auto& a : e.args()) check_uses(a, sig, diags);
}

template <class F>
auto parse_with(std::string_view text, const ParseOptions& opts, F f) {
  Parser p(Lexer(text).run(), opts);
  return f(p);
}

}  // namespace detail

inline Goal parse_goal(std::string_view text, const Signature& sig, const ParseOptions& opts = {}) {
  Goal g = detail::parse_with(text, opts, [](detail::Parser& p) { return p.goal(); });
  std::vector<Diagnostic> diags;
  for (auto& part : g.parts) {
    part.delta = detail::resolve(part.delta, sig);
    detail::check_uses(part.delta.call, sig, diags);
    if (part.threshold && (!opts.dom.conforms(*part.threshold) || opts.dom.is_bottom(*part.threshold))) {
      diags.push_back({1, 1, "threshold for " + part.qvar + " outside D \\ {bottom}"});
    }
  }
  if (!diags.empty()) throw SyntaxError(diags);
  return g;
}

inline ConstraintSet parse_constraints(std::string_view text, const Signature& sig, const ParseOptions& opts = {}) {
  ConstraintSet cs = detail::parse_with(text, opts, [](detail::Parser& p) { return p.constraint_list(); });
  std::vector<Diagnostic> diags;
  cs = detail::resolve(cs, sig);
  for (const auto& c : cs) detail::check_uses(c.call, sig, diags);
  if (!diags.empty()) throw SyntaxError(diags);
  return cs;
}

inline QcStatement parse_statement(std::string_view text, const Signature& sig, const ParseOptions& opts = {}) {
  QcStatement s = detail::parse_with(text, opts, [](detail::Parser& p) { return p.statement(); });
  std::vector<Diagnostic> diags;
  if (s.is_production()) {
    s.lhs = detail::resolve(s.lhs, sig);
    s.rhs = detail::resolve(s.rhs, sig);
    detail::check_uses(s.lhs, sig, diags);
    if (!is_term(s.rhs)) diags.push_back({1, 1, "right-hand side of a production must be a term"});
  } else {
    s.atom = detail::resolve(s.atom, sig);
    detail::check_uses(s.atom.call, sig, diags);
  }
  s.hyp = detail::resolve(s.hyp, sig);
  for (const auto& c : s.hyp) {
    if (!c.is_primitive()) diags.push_back({1, 1, "hypotheses must be primitive constraints"});
  }
  if (s.qual && (!opts.dom.conforms(*s.qual) || opts.dom.is_bottom(*s.qual))) {
    diags.push_back({1, 1, "statement qualification outside D \\ {bottom}"});
  }
  if (!diags.empty()) throw SyntaxError(diags);
  return s;
}

inline Expr parse_expr(std::string_view text, const Signature& sig, const ParseOptions& opts = {}) {
  Expr e = detail::parse_with(text, opts, [](detail::Parser& p) { return p.single_expr(); });
  return detail::resolve(e, sig);
}

// ---------------------------------------------------------------------------
// Printing

inline std::string arrow_text(const QualValue& alpha, const QualDomain& dom) {
  if (dom.conforms(alpha) && dom.is_top(alpha)) return "-->";
  return "-" + to_string(alpha) + "->";
}

inline std::string to_string(const ProgramRule& r, const QualDomain& dom = QualDomain::unit()) {
  std::string out = to_string(r.head());
  out += " " + arrow_text(r.alpha, dom) + " " + to_string(r.rhs);
  if (!r.conditions.empty()) out += " <== " + to_string(r.conditions);
  return out;
}

inline std::string print_data(const DataDecl& d) {
  std::string out = "data " + d.name + " =";
  for (std::size_t i = 0; i < d.alternatives.size(); ++i) {
    const auto& alt = d.alternatives[i];
    out += i ? " | " : " ";
    out += alt.constructor;
    if (!alt.arg_types.empty()) {
      out += "(";
      for (std::size_t k = 0; k < alt.arg_types.size(); ++k) {
        if (k) out += ", ";
        out += alt.arg_types[k];
      }
      out += ")";
    }
  }
  return out;
}

inline std::string print_program(const Program& p, const QualDomain& dom = QualDomain::unit()) {
  std::string out;
  for (const auto& d : p.data) out += print_data(d) + "\n";
  if (!p.data.empty() && !p.rules.empty()) out += "\n";
  for (const auto& r : p.rules) out += to_string(r, dom) + "\n";
  return out;
}

inline std::string print_goal(const Goal& g) {
  std::string out;
  for (std::size_t i = 0; i < g.parts.size(); ++i) {
    if (i) out += ", ";
    std::string d = to_string(g.parts[i].delta);
    out += d + " # " + g.parts[i].qvar;
  }
  bool first = true;
  for (const auto& p : g.parts) {
    if (!p.threshold) continue;
    out += first ? " | " : ", ";
    first = false;
    out += p.qvar + " >= " + to_string(*p.threshold);
  }
  return out;
}

}  // namespace qcflp
