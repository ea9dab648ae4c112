#pragma once

// Partial expressions over a signature <DC, PF, DF>, constructor terms,
// the information ordering and substitutions.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qcflp/qual_domain.hpp"

namespace qcflp {

enum class SymKind : std::uint8_t { Constructor, Primitive, Defined };

namespace sym {
inline constexpr std::string_view kCons = ":";
inline constexpr std::string_view kNil = "[]";
inline constexpr std::string_view kTrue = "true";
inline constexpr std::string_view kFalse = "false";
inline constexpr std::string_view kEq = "==";
inline constexpr std::string_view kQVal = "qVal";
/// Constructor pairing the components of a product-domain qualification.
inline constexpr std::string_view kQPair = "qpair";

/// Arity of a primitive symbol, or -1 if `name` is not primitive.
inline int primitive_arity(std::string_view name) {
  static const std::map<std::string_view, int> arities = {
      {"+", 2}, {"-", 2}, {"*", 2}, {"/", 2}, {"<", 2}, {"<=", 2},
      {">", 2}, {">=", 2}, {"==", 2}, {"qVal", 1}};
  auto it = arities.find(name);
  return it == arities.end() ? -1 : it->second;
}

inline bool is_comparison(std::string_view p) {
  return p == "<" || p == "<=" || p == ">" || p == ">=";
}
inline bool is_arithmetic(std::string_view p) {
  return p == "+" || p == "-" || p == "*" || p == "/";
}
inline bool is_char(std::string_view name) {
  return name.size() >= 3 && name.front() == '\'' && name.back() == '\'';
}
}  // namespace sym

/// Immutable handle to a shared expression node.
///
/// Expressions are `bottom`, variables, basic (real) values, or
/// applications h(e1..en) of a constructor, primitive or defined symbol.
class Expr {
 public:
  enum class Tag : std::uint8_t { Bottom, Var, Num, App };

  Expr() : Expr(bottom()) {}

  static Expr bottom() {
    static const Expr b{std::make_shared<const Node>(Node{Tag::Bottom, {}, 0.0, SymKind::Constructor, {}})};
    return b;
  }
  static Expr var(std::string name) {
    return Expr{std::make_shared<const Node>(Node{Tag::Var, std::move(name), 0.0, SymKind::Constructor, {}})};
  }
  static Expr num(double x) {
    return Expr{std::make_shared<const Node>(Node{Tag::Num, {}, x, SymKind::Constructor, {}})};
  }
  static Expr app(std::string name, SymKind kind, std::vector<Expr> args = {}) {
    return Expr{std::make_shared<const Node>(Node{Tag::App, std::move(name), 0.0, kind, std::move(args)})};
  }
  static Expr cons(std::string name, std::vector<Expr> args = {}) {
    return app(std::move(name), SymKind::Constructor, std::move(args));
  }
  static Expr prim(std::string name, std::vector<Expr> args) {
    return app(std::move(name), SymKind::Primitive, std::move(args));
  }
  static Expr boolean(bool b) { return cons(std::string(b ? sym::kTrue : sym::kFalse)); }
  static Expr nil() { return cons(std::string(sym::kNil)); }
  static Expr list_cons(Expr head, Expr tail) {
    return cons(std::string(sym::kCons), {std::move(head), std::move(tail)});
  }
  static Expr character(char c) { return cons(std::string{'\'', c, '\''}); }
  static Expr string(std::string_view s) {
    Expr out = nil();
    for (auto it = s.rbegin(); it != s.rend(); ++it) out = list_cons(character(*it), out);
    return out;
  }

  Tag tag() const { return node_->tag; }
  bool is_bottom() const { return tag() == Tag::Bottom; }
  bool is_var() const { return tag() == Tag::Var; }
  bool is_num() const { return tag() == Tag::Num; }
  bool is_app() const { return tag() == Tag::App; }
  bool is_constructor_app() const { return is_app() && kind() == SymKind::Constructor; }
  bool is_primitive_app() const { return is_app() && kind() == SymKind::Primitive; }
  bool is_defined_app() const { return is_app() && kind() == SymKind::Defined; }
  bool is_app_of(std::string_view name) const { return is_app() && this->name() == name; }
  bool is_true() const { return is_constructor_app() && name() == sym::kTrue && args().empty(); }
  bool is_false() const { return is_constructor_app() && name() == sym::kFalse && args().empty(); }

  /// Symbol name for applications, variable name for variables.
  const std::string& name() const { return node_->name; }
  double number() const { return node_->number; }
  SymKind kind() const { return node_->kind; }
  std::span<const Expr> args() const { return node_->args; }
  const Expr& arg(std::size_t i) const { return node_->args[i]; }
  std::size_t arity() const { return node_->args.size(); }

  Expr with_args(std::vector<Expr> args) const { return app(name(), kind(), std::move(args)); }

  /// Identity of the shared node; equal identities imply equal expressions.
  const void* id() const { return node_.get(); }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.tag() != b.tag()) return false;
    switch (a.tag()) {
      case Tag::Bottom: return true;
      case Tag::Var: return a.name() == b.name();
      case Tag::Num: return a.number() == b.number();
      case Tag::App:
        if (a.name() != b.name() || a.kind() != b.kind() || a.arity() != b.arity()) return false;
        for (std::size_t i = 0; i < a.arity(); ++i) {
          if (!(a.arg(i) == b.arg(i))) return false;
        }
        return true;
    }
    return false;
  }

  /// Total order used for canonical containers; not the information order.
  friend bool operator<(const Expr& a, const Expr& b) { return compare(a, b) < 0; }

  static int compare(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return 0;
    if (a.tag() != b.tag()) return a.tag() < b.tag() ? -1 : 1;
    switch (a.tag()) {
      case Tag::Bottom: return 0;
      case Tag::Var: return a.name().compare(b.name());
      case Tag::Num: return a.number() < b.number() ? -1 : (b.number() < a.number() ? 1 : 0);
      case Tag::App: {
        if (int c = a.name().compare(b.name())) return c;
        if (a.arity() != b.arity()) return a.arity() < b.arity() ? -1 : 1;
        for (std::size_t i = 0; i < a.arity(); ++i) {
          if (int c = compare(a.arg(i), b.arg(i))) return c;
        }
        return 0;
      }
    }
    return 0;
  }

 private:
  struct Node {
    Tag tag;
    std::string name;
    double number;
    SymKind kind;
    std::vector<Expr> args;
  };
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Structural predicates

/// Constructor term: no primitive or defined symbol occurs.
inline bool is_term(const Expr& e) {
  if (!e.is_app()) return true;
  if (e.kind() != SymKind::Constructor) return false;
  for (const auto& a : e.args()) {
    if (!is_term(a)) return false;
  }
  return true;
}

inline bool is_total(const Expr& e) {
  if (e.is_bottom()) return false;
  for (const auto& a : e.args()) {
    if (!is_total(a)) return false;
  }
  return true;
}

inline bool is_ground(const Expr& e) {
  if (e.is_var()) return false;
  for (const auto& a : e.args()) {
    if (!is_ground(a)) return false;
  }
  return true;
}

inline bool mentions_defined(const Expr& e) {
  if (e.is_defined_app()) return true;
  for (const auto& a : e.args()) {
    if (mentions_defined(a)) return true;
  }
  return false;
}

inline void collect_vars(const Expr& e, std::vector<std::string>& out) {
  if (e.is_var()) {
    for (const auto& v : out) {
      if (v == e.name()) return;
    }
    out.push_back(e.name());
    return;
  }
  for (const auto& a : e.args()) collect_vars(a, out);
}

/// Variables in order of first occurrence.
inline std::vector<std::string> vars_of(const Expr& e) {
  std::vector<std::string> out;
  collect_vars(e, out);
  return out;
}

inline bool occurs(std::string_view var, const Expr& e) {
  if (e.is_var()) return e.name() == var;
  for (const auto& a : e.args()) {
    if (occurs(var, a)) return true;
  }
  return false;
}

inline std::size_t expr_size(const Expr& e) {
  std::size_t n = 1;
  for (const auto& a : e.args()) n += expr_size(a);
  return n;
}

// ---------------------------------------------------------------------------
// Information ordering: the least partial order compatible with contexts
// in which bottom approximates every expression.

inline bool info_leq(const Expr& a, const Expr& b) {
  if (a.is_bottom()) return true;
  if (a.tag() != b.tag()) return false;
  switch (a.tag()) {
    case Expr::Tag::Bottom: return true;
    case Expr::Tag::Var: return a.name() == b.name();
    case Expr::Tag::Num: return a.number() == b.number();
    case Expr::Tag::App:
      if (a.name() != b.name() || a.arity() != b.arity()) return false;
      for (std::size_t i = 0; i < a.arity(); ++i) {
        if (!info_leq(a.arg(i), b.arg(i))) return false;
      }
      return true;
  }
  return false;
}

/// Least upper bound in the information order, if the two are compatible.
inline std::optional<Expr> info_lub(const Expr& a, const Expr& b) {
  if (a.is_bottom()) return b;
  if (b.is_bottom()) return a;
  if (a.tag() != b.tag()) return std::nullopt;
  if (!a.is_app()) {
    if (a == b) return a;
    return std::nullopt;
  }
  if (a.name() != b.name() || a.arity() != b.arity()) return std::nullopt;
  std::vector<Expr> args;
  args.reserve(a.arity());
  for (std::size_t i = 0; i < a.arity(); ++i) {
    auto l = info_lub(a.arg(i), b.arg(i));
    if (!l) return std::nullopt;
    args.push_back(std::move(*l));
  }
  return a.with_args(std::move(args));
}

/// Greatest lower bound in the information order.
inline Expr info_glb(const Expr& a, const Expr& b) {
  if (a == b) return a;
  if (!a.is_app() || !b.is_app() || a.name() != b.name() || a.arity() != b.arity()) return Expr::bottom();
  std::vector<Expr> args;
  args.reserve(a.arity());
  for (std::size_t i = 0; i < a.arity(); ++i) args.push_back(info_glb(a.arg(i), b.arg(i)));
  return a.with_args(std::move(args));
}

// ---------------------------------------------------------------------------
// Substitutions

/// Finite map from variable names to terms.
class Substitution {
 public:
  using Map = std::map<std::string, Expr>;

  Substitution() = default;
  Substitution(std::initializer_list<std::pair<const std::string, Expr>> init) : map_(init) {}
  explicit Substitution(Map m) : map_(std::move(m)) {}

  void bind(std::string var, Expr value) { map_[std::move(var)] = std::move(value); }
  void erase(const std::string& var) { map_.erase(var); }
  const Expr* lookup(std::string_view var) const {
    auto it = map_.find(std::string(var));
    return it == map_.end() ? nullptr : &it->second;
  }
  bool contains(std::string_view var) const { return lookup(var) != nullptr; }
  bool empty() const { return map_.empty(); }
  std::size_t size() const { return map_.size(); }
  const Map& bindings() const { return map_; }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

  /// Simultaneous replacement.
  Expr apply(const Expr& e) const {
    if (map_.empty()) return e;
    if (e.is_var()) {
      auto it = map_.find(e.name());
      return it == map_.end() ? e : it->second;
    }
    if (!e.is_app() || e.arity() == 0) return e;
    std::vector<Expr> args;
    args.reserve(e.arity());
    bool changed = false;
    for (const auto& a : e.args()) {
      args.push_back(apply(a));
      changed = changed || args.back().id() != a.id();
    }
    return changed ? e.with_args(std::move(args)) : e;
  }

  /// The composition `this` then `next`: o(this.then(next)) == (o this) next.
  Substitution then(const Substitution& next) const {
    Substitution out;
    for (const auto& [v, t] : map_) out.map_[v] = next.apply(t);
    for (const auto& [v, t] : next.map_) {
      if (!map_.count(v)) out.map_[v] = t;
    }
    return out;
  }

  Substitution restricted_to(const std::vector<std::string>& vars) const {
    Substitution out;
    for (const auto& v : vars) {
      if (const Expr* t = lookup(v)) out.bind(v, *t);
    }
    return out;
  }

  friend bool operator==(const Substitution& a, const Substitution& b) { return a.map_ == b.map_; }

 private:
  Map map_;
};

// ---------------------------------------------------------------------------
// Printing in the concrete source syntax

namespace detail {

inline int binary_precedence(std::string_view op) {
  if (op == "==" || sym::is_comparison(op)) return 1;
  if (op == sym::kCons) return 2;
  if (op == "+" || op == "-") return 3;
  if (op == "*" || op == "/") return 4;
  return -1;
}

inline bool string_literal(const Expr& e, std::string& out) {
  const Expr* cur = &e;
  std::string s;
  while (cur->is_app_of(sym::kCons) && cur->arity() == 2) {
    const Expr& h = cur->arg(0);
    if (!(h.is_constructor_app() && h.arity() == 0 && sym::is_char(h.name()))) return false;
    s += h.name().substr(1, h.name().size() - 2);
    cur = &cur->arg(1);
  }
  if (!(cur->is_app_of(sym::kNil) && cur->arity() == 0) || s.empty()) return false;
  out.clear();
  out += '"';
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return true;
}

inline std::string print_var(const std::string& name) {
  if (name.rfind("_$", 0) == 0) return "_";
  return name;
}

inline void print(const Expr& e, int ctx, std::string& out);

inline void print_list(const Expr& e, std::string& out) {
  // proper list: [a,b,c]
  out += '[';
  const Expr* cur = &e;
  bool first = true;
  while (cur->is_app_of(sym::kCons) && cur->arity() == 2) {
    if (!first) out += ',';
    first = false;
    print(cur->arg(0), 0, out);
    cur = &cur->arg(1);
  }
  out += ']';
}

inline bool is_proper_list(const Expr& e) {
  const Expr* cur = &e;
  while (cur->is_app_of(sym::kCons) && cur->arity() == 2) cur = &cur->arg(1);
  return cur->is_app_of(sym::kNil) && cur->arity() == 0;
}

inline void print(const Expr& e, int ctx, std::string& out) {
  switch (e.tag()) {
    case Expr::Tag::Bottom: out += "_|_"; return;
    case Expr::Tag::Var: out += print_var(e.name()); return;
    case Expr::Tag::Num: {
      bool paren = e.number() < 0 && ctx > 0;
      if (paren) out += '(';
      out += format_real(e.number());
      if (paren) out += ')';
      return;
    }
    case Expr::Tag::App: break;
  }
  const std::string& h = e.name();
  std::string lit;
  if (string_literal(e, lit)) {
    out += lit;
    return;
  }
  if (h == sym::kCons && e.arity() == 2 && is_proper_list(e)) {
    print_list(e, out);
    return;
  }
  int prec = e.arity() == 2 ? binary_precedence(h) : -1;
  if (prec > 0) {
    bool paren = prec <= ctx;
    if (paren) out += '(';
    // relational operators are non-associative; ':' is right-associative;
    // arithmetic is left-associative
    int lctx = prec, rctx = prec;
    if (h == sym::kCons) lctx = prec;
    else if (prec >= 3) lctx = prec - 1;
    if (h == sym::kCons) rctx = prec - 1;
    print(e.arg(0), lctx, out);
    out += h == sym::kCons ? ":" : " " + h + " ";
    print(e.arg(1), rctx, out);
    if (paren) out += ')';
    return;
  }
  out += h;
  if (e.arity() > 0) {
    out += '(';
    for (std::size_t i = 0; i < e.arity(); ++i) {
      if (i) out += ',';
      print(e.arg(i), 0, out);
    }
    out += ')';
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print(e, 0, out);
  return out;
}

inline std::string to_string(const Substitution& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& [v, t] : s) {
    out += first ? " " : ", ";
    first = false;
    out += v + " -> " + to_string(t);
  }
  out += first ? "}" : " }";
  return out;
}

struct ExprHash {
  std::size_t operator()(const Expr& e) const noexcept {
    std::size_t h = static_cast<std::size_t>(e.tag()) * 0x9e3779b97f4a7c15ULL;
    switch (e.tag()) {
      case Expr::Tag::Bottom: break;
      case Expr::Tag::Var: h ^= std::hash<std::string>{}(e.name()); break;
      case Expr::Tag::Num: h ^= std::hash<double>{}(e.number()); break;
      case Expr::Tag::App:
        h ^= std::hash<std::string>{}(e.name());
        for (const auto& a : e.args()) h = h * 1099511628211ULL ^ (*this)(a);
        break;
    }
    return h;
  }
};

}  // namespace qcflp
