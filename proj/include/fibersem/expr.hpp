#pragma once

// Scalar expression language over named real variables. Every smooth map in
// the engine (sections, relation guards, lift fields, base maps) is an Expr.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fibersem {

/// Ordered variable names; an Expr refers to variables by position.
using VarList = std::shared_ptr<const std::vector<std::string>>;

VarList make_vars(std::vector<std::string> names);

/// Name -> value; names are unique by construction.
using VarBinding = std::map<std::string, double, std::less<>>;

/// Extra spellings accepted by the parser for declared variables.
using VarAliases = std::map<std::string, std::size_t, std::less<>>;

class Expr {
 public:
  enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt, Abs };

  struct Node {
    Kind kind = Kind::Number;
    double value = 0.0;
    std::size_t index = 0;
    int exponent = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  /// The constant 0 over an empty variable list.
  Expr();
  Expr(NodePtr root, VarList vars);

  static Expr number(double value, VarList vars);
  static Expr variable(std::size_t index, VarList vars);

  const VarList& vars() const { return vars_; }
  std::size_t var_count() const { return vars_->size(); }
  const NodePtr& root() const { return root_; }
  Kind kind() const { return root_->kind; }

  /// True for a literal (no variables anywhere in the tree).
  bool is_constant() const;
  bool is_zero() const;
  bool depends_on(std::size_t index) const;

  /// Evaluates with `values[i]` bound to variable i. Throws DomainError.
  double eval(std::span<const double> values) const;

  /// Forward-mode derivative with respect to variable `wrt` at `values`.
  /// Throws NonDifferentiable at abs(0) or sqrt(0), DomainError otherwise.
  double diff(std::span<const double> values, std::size_t wrt) const;

 private:
  NodePtr root_;
  VarList vars_;
};

Expr parse_expr(std::string_view source, const std::vector<std::string>& vars);
Expr parse_expr(std::string_view source, VarList vars, const VarAliases& aliases = {});

double eval_expr(const Expr& e, const VarBinding& binding);
double diff_expr(const Expr& e, const VarBinding& binding, std::string_view wrt);

/// Symbolic first derivative (light constant folding only).
Expr derivative(const Expr& e, std::size_t wrt);

/// Replaces variable i by replacements[i]; all replacements share `target`.
Expr substitute(const Expr& e, const std::vector<Expr>& replacements, const VarList& target);

/// Fully parenthesised text that parses back to an equivalent tree.
std::string to_string(const Expr& e);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& a, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);

}  // namespace fibersem
