#include "fibersem/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

#include "fibersem/error.hpp"

namespace fibersem {

namespace {

using Kind = Expr::Kind;
using NodePtr = Expr::NodePtr;

NodePtr make_number(double v) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Number;
  n->value = v;
  return n;
}

NodePtr make_variable(std::size_t index) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Variable;
  n->index = index;
  return n;
}

NodePtr make_unary(Kind k, NodePtr a) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->lhs = std::move(a);
  return n;
}

NodePtr make_binary(Kind k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

NodePtr make_pow(NodePtr a, int exponent) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Kind::Pow;
  n->lhs = std::move(a);
  n->exponent = exponent;
  return n;
}

bool is_num(const NodePtr& n, double v) { return n->kind == Kind::Number && n->value == v; }

// Folding constructors used by derivative() and the Expr operators.
NodePtr fold_add(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0)) return b;
  if (is_num(b, 0.0)) return a;
  if (a->kind == Kind::Number && b->kind == Kind::Number) return make_number(a->value + b->value);
  return make_binary(Kind::Add, std::move(a), std::move(b));
}

NodePtr fold_neg(NodePtr a) {
  if (a->kind == Kind::Number) return make_number(-a->value);
  if (a->kind == Kind::Neg) return a->lhs;
  return make_unary(Kind::Neg, std::move(a));
}

NodePtr fold_sub(NodePtr a, NodePtr b) {
  if (is_num(b, 0.0)) return a;
  if (is_num(a, 0.0)) return fold_neg(std::move(b));
  if (a->kind == Kind::Number && b->kind == Kind::Number) return make_number(a->value - b->value);
  return make_binary(Kind::Sub, std::move(a), std::move(b));
}

NodePtr fold_mul(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0) || is_num(b, 0.0)) return make_number(0.0);
  if (is_num(a, 1.0)) return b;
  if (is_num(b, 1.0)) return a;
  if (a->kind == Kind::Number && b->kind == Kind::Number) return make_number(a->value * b->value);
  return make_binary(Kind::Mul, std::move(a), std::move(b));
}

NodePtr fold_div(NodePtr a, NodePtr b) {
  if (is_num(b, 1.0)) return a;
  if (is_num(a, 0.0) && !is_num(b, 0.0)) return make_number(0.0);
  return make_binary(Kind::Div, std::move(a), std::move(b));
}

NodePtr fold_pow(NodePtr a, int exponent) {
  if (exponent == 1) return a;
  if (exponent == 0) return make_number(1.0);
  return make_pow(std::move(a), exponent);
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void print_node(const Expr::Node& n, const std::vector<std::string>& names, std::string& out) {
  auto fn = [&](const char* name) {
    out += name;
    out += '(';
    print_node(*n.lhs, names, out);
    out += ')';
  };
  auto bin = [&](const char* op) {
    out += '(';
    print_node(*n.lhs, names, out);
    out += op;
    print_node(*n.rhs, names, out);
    out += ')';
  };
  switch (n.kind) {
    case Kind::Number:
      if (n.value < 0 || (n.value == 0 && std::signbit(n.value))) {
        out += "(-" + format_number(-n.value) + ")";
      } else {
        out += format_number(n.value);
      }
      break;
    case Kind::Variable:
      out += n.index < names.size() ? names[n.index] : "$" + std::to_string(n.index);
      break;
    case Kind::Neg:
      out += "(-";
      print_node(*n.lhs, names, out);
      out += ')';
      break;
    case Kind::Add: bin(" + "); break;
    case Kind::Sub: bin(" - "); break;
    case Kind::Mul: bin(" * "); break;
    case Kind::Div: bin(" / "); break;
    case Kind::Pow:
      out += '(';
      print_node(*n.lhs, names, out);
      out += "^" + std::to_string(n.exponent) + ")";
      break;
    case Kind::Sin: fn("sin"); break;
    case Kind::Cos: fn("cos"); break;
    case Kind::Exp: fn("exp"); break;
    case Kind::Sqrt: fn("sqrt"); break;
    case Kind::Abs: fn("abs"); break;
  }
}

std::string print_subtree(const Expr::Node& n, const VarList& vars) {
  std::string out;
  print_node(n, *vars, out);
  return out;
}

double checked(double r, const Expr::Node& n, const VarList& vars) {
  if (!std::isfinite(r)) throw DomainError("non-finite result", print_subtree(n, vars));
  return r;
}

double eval_node(const Expr::Node& n, std::span<const double> x, const VarList& vars) {
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Variable: return x[n.index];
    case Kind::Neg: return -eval_node(*n.lhs, x, vars);
    case Kind::Add: return checked(eval_node(*n.lhs, x, vars) + eval_node(*n.rhs, x, vars), n, vars);
    case Kind::Sub: return checked(eval_node(*n.lhs, x, vars) - eval_node(*n.rhs, x, vars), n, vars);
    case Kind::Mul: return checked(eval_node(*n.lhs, x, vars) * eval_node(*n.rhs, x, vars), n, vars);
    case Kind::Div: {
      const double a = eval_node(*n.lhs, x, vars);
      const double b = eval_node(*n.rhs, x, vars);
      if (b == 0.0) throw DomainError("division by zero", print_subtree(n, vars));
      return checked(a / b, n, vars);
    }
    case Kind::Pow: {
      const double a = eval_node(*n.lhs, x, vars);
      if (a == 0.0 && n.exponent < 0) throw DomainError("division by zero", print_subtree(n, vars));
      return checked(std::pow(a, n.exponent), n, vars);
    }
    case Kind::Sin: return std::sin(eval_node(*n.lhs, x, vars));
    case Kind::Cos: return std::cos(eval_node(*n.lhs, x, vars));
    case Kind::Exp: return checked(std::exp(eval_node(*n.lhs, x, vars)), n, vars);
    case Kind::Sqrt: {
      const double a = eval_node(*n.lhs, x, vars);
      if (a < 0.0) throw DomainError("sqrt of negative value", print_subtree(n, vars));
      return std::sqrt(a);
    }
    case Kind::Abs: return std::fabs(eval_node(*n.lhs, x, vars));
  }
  return 0.0;
}

struct Dual {
  double v;
  double d;
};

Dual diff_node(const Expr::Node& n, std::span<const double> x, std::size_t wrt, const VarList& vars) {
  auto chk = [&](Dual r) {
    if (!std::isfinite(r.v)) throw DomainError("non-finite result", print_subtree(n, vars));
    if (!std::isfinite(r.d)) {
      throw NonDifferentiable("derivative not finite at '" + print_subtree(n, vars) + "'");
    }
    return r;
  };
  switch (n.kind) {
    case Kind::Number: return {n.value, 0.0};
    case Kind::Variable: return {x[n.index], n.index == wrt ? 1.0 : 0.0};
    case Kind::Neg: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      return {-a.v, -a.d};
    }
    case Kind::Add: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      const Dual b = diff_node(*n.rhs, x, wrt, vars);
      return chk({a.v + b.v, a.d + b.d});
    }
    case Kind::Sub: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      const Dual b = diff_node(*n.rhs, x, wrt, vars);
      return chk({a.v - b.v, a.d - b.d});
    }
    case Kind::Mul: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      const Dual b = diff_node(*n.rhs, x, wrt, vars);
      return chk({a.v * b.v, a.d * b.v + a.v * b.d});
    }
    case Kind::Div: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      const Dual b = diff_node(*n.rhs, x, wrt, vars);
      if (b.v == 0.0) throw DomainError("division by zero", print_subtree(n, vars));
      return chk({a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)});
    }
    case Kind::Pow: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      if (a.v == 0.0 && n.exponent < 0) throw DomainError("division by zero", print_subtree(n, vars));
      if (n.exponent == 0) return {1.0, 0.0};
      const double lower = std::pow(a.v, n.exponent - 1);
      return chk({lower * a.v, n.exponent * lower * a.d});
    }
    case Kind::Sin: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      return chk({std::sin(a.v), std::cos(a.v) * a.d});
    }
    case Kind::Cos: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      return chk({std::cos(a.v), -std::sin(a.v) * a.d});
    }
    case Kind::Exp: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      const double e = std::exp(a.v);
      return chk({e, e * a.d});
    }
    case Kind::Sqrt: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      if (a.v < 0.0) throw DomainError("sqrt of negative value", print_subtree(n, vars));
      if (a.v == 0.0) {
        throw NonDifferentiable("sqrt is not differentiable at 0 in '" + print_subtree(n, vars) + "'");
      }
      const double r = std::sqrt(a.v);
      return chk({r, a.d / (2.0 * r)});
    }
    case Kind::Abs: {
      const Dual a = diff_node(*n.lhs, x, wrt, vars);
      if (a.v == 0.0) {
        throw NonDifferentiable("abs is not differentiable at 0 in '" + print_subtree(n, vars) + "'");
      }
      return {std::fabs(a.v), a.v > 0 ? a.d : -a.d};
    }
  }
  return {0.0, 0.0};
}

NodePtr derive_node(const NodePtr& n, std::size_t wrt) {
  switch (n->kind) {
    case Kind::Number: return make_number(0.0);
    case Kind::Variable: return make_number(n->index == wrt ? 1.0 : 0.0);
    case Kind::Neg: return fold_neg(derive_node(n->lhs, wrt));
    case Kind::Add: return fold_add(derive_node(n->lhs, wrt), derive_node(n->rhs, wrt));
    case Kind::Sub: return fold_sub(derive_node(n->lhs, wrt), derive_node(n->rhs, wrt));
    case Kind::Mul:
      return fold_add(fold_mul(derive_node(n->lhs, wrt), n->rhs),
                      fold_mul(n->lhs, derive_node(n->rhs, wrt)));
    case Kind::Div: {
      NodePtr num = fold_sub(fold_mul(derive_node(n->lhs, wrt), n->rhs),
                             fold_mul(n->lhs, derive_node(n->rhs, wrt)));
      return fold_div(std::move(num), fold_pow(n->rhs, 2));
    }
    case Kind::Pow: {
      if (n->exponent == 0) return make_number(0.0);
      NodePtr outer = fold_mul(make_number(n->exponent), fold_pow(n->lhs, n->exponent - 1));
      return fold_mul(std::move(outer), derive_node(n->lhs, wrt));
    }
    case Kind::Sin: return fold_mul(make_unary(Kind::Cos, n->lhs), derive_node(n->lhs, wrt));
    case Kind::Cos:
      return fold_neg(fold_mul(make_unary(Kind::Sin, n->lhs), derive_node(n->lhs, wrt)));
    case Kind::Exp: return fold_mul(n, derive_node(n->lhs, wrt));
    case Kind::Sqrt:
      return fold_div(derive_node(n->lhs, wrt), fold_mul(make_number(2.0), n));
    case Kind::Abs:
      // u' * u / |u|: undefined (division by zero) exactly where abs has a kink.
      return fold_div(fold_mul(derive_node(n->lhs, wrt), n->lhs), n);
  }
  return make_number(0.0);
}

NodePtr substitute_node(const NodePtr& n, const std::vector<Expr>& repl) {
  switch (n->kind) {
    case Kind::Number: return n;
    case Kind::Variable: return repl.at(n->index).root();
    case Kind::Pow: return make_pow(substitute_node(n->lhs, repl), n->exponent);
    case Kind::Neg:
    case Kind::Sin:
    case Kind::Cos:
    case Kind::Exp:
    case Kind::Sqrt:
    case Kind::Abs: return make_unary(n->kind, substitute_node(n->lhs, repl));
    default:
      return make_binary(n->kind, substitute_node(n->lhs, repl), substitute_node(n->rhs, repl));
  }
}

bool node_has_var(const Expr::Node& n) {
  if (n.kind == Kind::Variable) return true;
  if (n.lhs && node_has_var(*n.lhs)) return true;
  return n.rhs && node_has_var(*n.rhs);
}

bool node_uses(const Expr::Node& n, std::size_t index) {
  if (n.kind == Kind::Variable) return n.index == index;
  if (n.lhs && node_uses(*n.lhs, index)) return true;
  return n.rhs && node_uses(*n.rhs, index);
}

// Recursive-descent parser:
//   expr  := term (('+'|'-') term)*
//   term  := unary (('*'|'/') unary)*
//   unary := '-' unary | power
//   power := primary ('^' ['-'] integer)?
//   primary := number | ident | func '(' expr ')' | '(' expr ')'
class Parser {
 public:
  Parser(std::string_view src, const VarList& vars, const VarAliases& aliases)
      : src_(src), vars_(vars), aliases_(aliases) {}

  NodePtr parse() {
    NodePtr e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression syntax error at offset " + std::to_string(pos_) + ": " + what, pos_);
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(Kind::Add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = make_binary(Kind::Sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_product() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(Kind::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(Kind::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(Kind::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (!accept('^')) return base;
    skip_ws();
    bool negative = false;
    if (pos_ < src_.size() && src_[pos_] == '-') {
      negative = true;
      ++pos_;
    }
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (start == pos_) fail("exponent must be an integer literal");
    int exponent = 0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, exponent);
    if (res.ec != std::errc()) fail("exponent out of range");
    return make_pow(std::move(base), negative ? -exponent : exponent);
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view name = src_.substr(start, pos_ - start);
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        Kind k;
        if (name == "sin") k = Kind::Sin;
        else if (name == "cos") k = Kind::Cos;
        else if (name == "exp") k = Kind::Exp;
        else if (name == "sqrt") k = Kind::Sqrt;
        else if (name == "abs") k = Kind::Abs;
        else {
          pos_ = start;
          fail("unknown function '" + std::string(name) + "'");
        }
        ++pos_;
        NodePtr arg = parse_sum();
        if (!accept(')')) fail("expected ')'");
        return make_unary(k, std::move(arg));
      }
      for (std::size_t i = 0; i < vars_->size(); ++i) {
        if ((*vars_)[i] == name) return make_variable(i);
      }
      if (auto it = aliases_.find(name); it != aliases_.end()) return make_variable(it->second);
      throw UndeclaredVariable(std::string(name), start);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return make_number(v);
  }

  std::string_view src_;
  const VarList& vars_;
  const VarAliases& aliases_;
  std::size_t pos_ = 0;
};

std::vector<double> values_from(const Expr& e, const VarBinding& binding) {
  std::vector<double> values(e.var_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& name = (*e.vars())[i];
    auto it = binding.find(name);
    if (it == binding.end()) throw Error("variable '" + name + "' is not bound");
    values[i] = it->second;
  }
  return values;
}

const VarList& common_vars(const Expr& a, const Expr& b) {
  if (a.vars() == b.vars() || *a.vars() == *b.vars()) return a.vars();
  if (a.is_constant() && a.var_count() == 0) return b.vars();
  if (b.is_constant() && b.var_count() == 0) return a.vars();
  throw Error("expressions over different variable lists");
}

}  // namespace

VarList make_vars(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

Expr::Expr() : root_(make_number(0.0)), vars_(make_vars({})) {}

Expr::Expr(NodePtr root, VarList vars) : root_(std::move(root)), vars_(std::move(vars)) {}

Expr Expr::number(double value, VarList vars) { return Expr(make_number(value), std::move(vars)); }

Expr Expr::variable(std::size_t index, VarList vars) {
  if (index >= vars->size()) throw Error("variable index out of range");
  return Expr(make_variable(index), std::move(vars));
}

bool Expr::is_constant() const { return !node_has_var(*root_); }

bool Expr::is_zero() const { return is_num(root_, 0.0); }

bool Expr::depends_on(std::size_t index) const { return node_uses(*root_, index); }

double Expr::eval(std::span<const double> values) const {
  if (values.size() < vars_->size()) throw Error("too few values for expression variables");
  return eval_node(*root_, values, vars_);
}

double Expr::diff(std::span<const double> values, std::size_t wrt) const {
  if (values.size() < vars_->size()) throw Error("too few values for expression variables");
  return diff_node(*root_, values, wrt, vars_).d;
}

Expr parse_expr(std::string_view source, const std::vector<std::string>& vars) {
  return parse_expr(source, make_vars(vars));
}

Expr parse_expr(std::string_view source, VarList vars, const VarAliases& aliases) {
  Parser p(source, vars, aliases);
  NodePtr root = p.parse();
  return Expr(std::move(root), std::move(vars));
}

double eval_expr(const Expr& e, const VarBinding& binding) { return e.eval(values_from(e, binding)); }

double diff_expr(const Expr& e, const VarBinding& binding, std::string_view wrt) {
  const auto& names = *e.vars();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == wrt) return e.diff(values_from(e, binding), i);
  }
  // Not a variable of e: the derivative is zero, but the point must still be valid.
  e.eval(values_from(e, binding));
  return 0.0;
}

Expr derivative(const Expr& e, std::size_t wrt) { return Expr(derive_node(e.root(), wrt), e.vars()); }

Expr substitute(const Expr& e, const std::vector<Expr>& replacements, const VarList& target) {
  if (replacements.size() < e.var_count()) throw Error("substitution needs one expression per variable");
  for (const auto& r : replacements) {
    if (r.vars() != target && *r.vars() != *target && !(r.is_constant() && r.var_count() == 0)) {
      throw Error("substitution replacements must share the target variable list");
    }
  }
  return Expr(substitute_node(e.root(), replacements), target);
}

std::string to_string(const Expr& e) { return print_subtree(*e.root(), e.vars()); }

Expr operator+(const Expr& a, const Expr& b) { return Expr(fold_add(a.root(), b.root()), common_vars(a, b)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(fold_sub(a.root(), b.root()), common_vars(a, b)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(fold_mul(a.root(), b.root()), common_vars(a, b)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(fold_div(a.root(), b.root()), common_vars(a, b)); }
Expr operator-(const Expr& a) { return Expr(fold_neg(a.root()), a.vars()); }
Expr pow(const Expr& a, int exponent) { return Expr(fold_pow(a.root(), exponent), a.vars()); }
Expr sin(const Expr& a) { return Expr(make_unary(Kind::Sin, a.root()), a.vars()); }
Expr cos(const Expr& a) { return Expr(make_unary(Kind::Cos, a.root()), a.vars()); }
Expr exp(const Expr& a) { return Expr(make_unary(Kind::Exp, a.root()), a.vars()); }

}  // namespace fibersem
