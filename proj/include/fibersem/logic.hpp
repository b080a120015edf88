#pragma once

// First-order syntax and classical (Tarski) truth inside one fiber.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fibersem/expr.hpp"

namespace fibersem {

using FiberPoint = std::vector<double>;

struct SymbolDecl {
  std::string name;
  std::size_t arity = 1;
};

class Signature {
 public:
  Signature() = default;
  /// Throws ValidationError on duplicate names or zero arities.
  Signature(std::vector<SymbolDecl> relations, std::vector<SymbolDecl> functions,
            std::vector<std::string> constants);

  const std::vector<SymbolDecl>& relations() const { return relations_; }
  const std::vector<SymbolDecl>& functions() const { return functions_; }
  const std::vector<std::string>& constants() const { return constants_; }

  std::optional<std::size_t> relation(std::string_view name) const;
  std::optional<std::size_t> function(std::string_view name) const;
  std::optional<std::size_t> constant(std::string_view name) const;

 private:
  std::vector<SymbolDecl> relations_;
  std::vector<SymbolDecl> functions_;
  std::vector<std::string> constants_;
};

struct Term {
  enum class Kind { Variable, Constant, Function };
  Kind kind = Kind::Variable;
  std::size_t index = 0;  // variable slot, constant index or function index
  std::vector<Term> args;

  static Term variable(std::size_t slot) { return {Kind::Variable, slot, {}}; }
  static Term constant(std::size_t c) { return {Kind::Constant, c, {}}; }
  static Term function(std::size_t f, std::vector<Term> args) { return {Kind::Function, f, std::move(args)}; }
};

class Formula {
 public:
  enum class Kind { Equal, Relation, Not, And, Or, Implies, Exists, Forall };

  struct Node {
    Kind kind = Kind::Equal;
    std::size_t index = 0;  // relation index, or bound slot for quantifiers
    std::string bound_name;
    std::vector<Term> terms;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  Formula(NodePtr root, std::vector<std::string> free_names, std::size_t slot_count)
      : root_(std::move(root)), free_names_(std::move(free_names)), slot_count_(slot_count) {}

  const NodePtr& root() const { return root_; }
  const std::vector<std::string>& free_names() const { return free_names_; }
  /// Free variables occupy slots [0, free_count); quantifiers bind the rest.
  std::size_t free_count() const { return free_names_.size(); }
  std::size_t slot_count() const { return slot_count_; }

  /// Free slots that actually occur in the formula.
  std::vector<std::size_t> free_slots_used() const;

  /// Only relation atoms, conjunction, disjunction and existentials.
  bool is_positive_without_equality() const;
  bool is_quantifier_free() const;
  /// No negation, implication anywhere.
  bool is_negation_free() const;

  /// Longest chain of nested negation/implication/universal clauses.
  std::size_t negation_depth() const;

 private:
  NodePtr root_;
  std::vector<std::string> free_names_;
  std::size_t slot_count_;
};

/// Grammar: `!` not, `&` and, `|` or, `->` implies (right associative),
/// `<->` (desugared into two implications), `=` equality,
/// `exists v.` / `forall v.` binding to the end of the enclosing group.
/// Precedence ! > & > | > -> > <->.
Formula parse_formula(std::string_view source, const Signature& sig,
                      const std::vector<std::string>& free_vars);

std::string to_string(const Formula& f, const Signature& sig);

/// Variable layout of relation guards and function components for a bundle
/// with base dimension n and fiber dimension k: x1..xn, then y{j}{i} for
/// argument j, component i. For arity 1 the short spelling y{i} is accepted.
VarList argument_vars(std::size_t n, std::size_t k, std::size_t arity);
VarAliases argument_aliases(std::size_t n, std::size_t k, std::size_t arity);
VarList base_vars(std::size_t n);
/// x1..xn, y1..yk (used by lift fields).
VarList total_vars(std::size_t n, std::size_t k);

/// Interpretations of all signature symbols with free base variables.
/// A relation holds on a tuple iff its guard is strictly positive there.
struct Interpretation {
  Signature signature;
  std::size_t base_dim = 1;
  std::size_t fiber_dim = 1;
  std::vector<Expr> guards;                  // per relation, over argument_vars(n, k, arity)
  std::vector<std::vector<Expr>> functions;  // per function, k components over argument_vars
  std::vector<std::vector<Expr>> constants;  // per constant, k components over base_vars(n)

  /// Throws ValidationError when the tables do not match the signature.
  void validate() const;
};

/// The structure on a single fiber: interpretations pinned at a base point.
class FiberStructure {
 public:
  FiberStructure(std::shared_ptr<const Interpretation> interp, std::vector<double> base_point);

  const Interpretation& interpretation() const { return *interp_; }
  const std::vector<double>& base_point() const { return base_point_; }
  std::size_t fiber_dim() const { return interp_->fiber_dim; }

  double guard(std::size_t relation, std::span<const FiberPoint> args) const;
  bool holds(std::size_t relation, std::span<const FiberPoint> args) const {
    return guard(relation, args) > 0.0;
  }
  FiberPoint apply(std::size_t function, std::span<const FiberPoint> args) const;
  FiberPoint constant(std::size_t c) const;

 private:
  std::vector<double> bind(std::span<const FiberPoint> args) const;

  std::shared_ptr<const Interpretation> interp_;
  std::vector<double> base_point_;
};

FiberPoint eval_term(const Term& t, const FiberStructure& fs, std::span<const FiberPoint> assignment);

/// Classical truth. Quantifiers range over `witness_pool`; equality compares
/// term values componentwise within `tol_eq`.
bool tarski_eval(const Formula& phi, const FiberStructure& fs, std::span<const FiberPoint> assignment,
                 std::span<const FiberPoint> witness_pool, double tol_eq = 1e-9);

bool points_equal(const FiberPoint& a, const FiberPoint& b, double tol);

}  // namespace fibersem
