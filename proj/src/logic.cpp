#include "fibersem/logic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "fibersem/error.hpp"

namespace fibersem {

Signature::Signature(std::vector<SymbolDecl> relations, std::vector<SymbolDecl> functions,
                     std::vector<std::string> constants)
    : relations_(std::move(relations)), functions_(std::move(functions)), constants_(std::move(constants)) {
  std::set<std::string, std::less<>> seen;
  auto add = [&](const std::string& name) {
    if (name.empty()) throw ValidationError("empty symbol name");
    if (!seen.insert(name).second) throw ValidationError("duplicate symbol '" + name + "'");
  };
  for (const auto& r : relations_) {
    add(r.name);
    if (r.arity == 0) throw ValidationError("relation '" + r.name + "' must have positive arity");
  }
  for (const auto& f : functions_) {
    add(f.name);
    if (f.arity == 0) throw ValidationError("function '" + f.name + "' must have positive arity");
  }
  for (const auto& c : constants_) add(c);
}

namespace {

template <class Seq, class Proj>
std::optional<std::size_t> find_name(const Seq& seq, std::string_view name, Proj proj) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (proj(seq[i]) == name) return i;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::size_t> Signature::relation(std::string_view name) const {
  return find_name(relations_, name, [](const SymbolDecl& d) -> const std::string& { return d.name; });
}
std::optional<std::size_t> Signature::function(std::string_view name) const {
  return find_name(functions_, name, [](const SymbolDecl& d) -> const std::string& { return d.name; });
}
std::optional<std::size_t> Signature::constant(std::string_view name) const {
  return find_name(constants_, name, [](const std::string& s) -> const std::string& { return s; });
}

// ---------------------------------------------------------------------------
// Formula queries

namespace {

using FKind = Formula::Kind;
using FNode = Formula::Node;

void collect_term_slots(const Term& t, std::set<std::size_t>& out) {
  if (t.kind == Term::Kind::Variable) out.insert(t.index);
  for (const auto& a : t.args) collect_term_slots(a, out);
}

void collect_slots(const FNode& n, std::set<std::size_t>& out) {
  for (const auto& t : n.terms) collect_term_slots(t, out);
  if (n.lhs) collect_slots(*n.lhs, out);
  if (n.rhs) collect_slots(*n.rhs, out);
}

template <class Pred>
bool all_nodes(const FNode& n, Pred pred) {
  if (!pred(n)) return false;
  if (n.lhs && !all_nodes(*n.lhs, pred)) return false;
  return !n.rhs || all_nodes(*n.rhs, pred);
}

std::size_t neg_depth(const FNode& n) {
  const std::size_t l = n.lhs ? neg_depth(*n.lhs) : 0;
  const std::size_t r = n.rhs ? neg_depth(*n.rhs) : 0;
  const std::size_t self =
      (n.kind == FKind::Not || n.kind == FKind::Implies || n.kind == FKind::Forall) ? 1 : 0;
  return self + std::max(l, r);
}

}  // namespace

std::vector<std::size_t> Formula::free_slots_used() const {
  std::set<std::size_t> slots;
  collect_slots(*root_, slots);
  std::vector<std::size_t> out;
  for (auto s : slots) {
    if (s < free_count()) out.push_back(s);
  }
  return out;
}

bool Formula::is_positive_without_equality() const {
  return all_nodes(*root_, [](const FNode& n) {
    return n.kind == FKind::Relation || n.kind == FKind::And || n.kind == FKind::Or ||
           n.kind == FKind::Exists;
  });
}

bool Formula::is_quantifier_free() const {
  return all_nodes(*root_, [](const FNode& n) { return n.kind != FKind::Exists && n.kind != FKind::Forall; });
}

bool Formula::is_negation_free() const {
  return all_nodes(*root_, [](const FNode& n) { return n.kind != FKind::Not && n.kind != FKind::Implies; });
}

std::size_t Formula::negation_depth() const { return neg_depth(*root_); }

// ---------------------------------------------------------------------------
// Formula parser

namespace {

class FormulaParser {
 public:
  FormulaParser(std::string_view src, const Signature& sig, const std::vector<std::string>& free_vars)
      : src_(src), sig_(sig), free_(free_vars) {}

  Formula parse() {
    auto root = parse_iff();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return Formula(std::move(root), free_, free_.size() + max_depth_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("formula error at offset " + std::to_string(pos_) + ": " + what, pos_);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  bool peek(std::string_view tok) {
    skip_ws();
    return src_.substr(pos_, tok.size()) == tok;
  }

  std::string_view peek_ident() {
    skip_ws();
    std::size_t p = pos_;
    if (p >= src_.size() || !(std::isalpha(static_cast<unsigned char>(src_[p])) || src_[p] == '_')) return {};
    while (p < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[p])) || src_[p] == '_')) ++p;
    return src_.substr(pos_, p - pos_);
  }

  std::string ident() {
    auto id = peek_ident();
    if (id.empty()) fail("expected identifier");
    pos_ += id.size();
    return std::string(id);
  }

  static std::shared_ptr<FNode> node(FKind k) {
    auto n = std::make_shared<FNode>();
    n->kind = k;
    return n;
  }

  static Formula::NodePtr binary(FKind k, Formula::NodePtr a, Formula::NodePtr b) {
    auto n = node(k);
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  Formula::NodePtr parse_iff() {
    auto lhs = parse_implies();
    if (accept("<->")) {
      auto rhs = parse_implies();
      return binary(FKind::And, binary(FKind::Implies, lhs, rhs), binary(FKind::Implies, rhs, lhs));
    }
    return lhs;
  }

  Formula::NodePtr parse_implies() {
    auto lhs = parse_or();
    if (peek("<->")) return lhs;
    if (accept("->")) return binary(FKind::Implies, lhs, parse_implies());
    return lhs;
  }

  Formula::NodePtr parse_or() {
    auto lhs = parse_and();
    while (accept("|")) lhs = binary(FKind::Or, lhs, parse_and());
    return lhs;
  }

  Formula::NodePtr parse_and() {
    auto lhs = parse_unary();
    while (accept("&")) lhs = binary(FKind::And, lhs, parse_unary());
    return lhs;
  }

  Formula::NodePtr parse_unary() {
    if (accept("!")) {
      auto n = node(FKind::Not);
      n->lhs = parse_unary();
      return n;
    }
    if (accept("(")) {
      auto inner = parse_iff();
      if (!accept(")")) fail("expected ')'");
      return inner;
    }
    const auto id = peek_ident();
    if (id == "exists" || id == "forall") {
      pos_ += id.size();
      auto n = node(id == "exists" ? FKind::Exists : FKind::Forall);
      n->bound_name = ident();
      if (!accept(".")) fail("expected '.' after quantified variable");
      n->index = free_.size() + scope_.size();
      scope_.push_back(n->bound_name);
      max_depth_ = std::max(max_depth_, scope_.size());
      n->lhs = parse_iff();
      scope_.pop_back();
      return n;
    }
    return parse_atom();
  }

  Formula::NodePtr parse_atom() {
    const auto id = peek_ident();
    if (!id.empty()) {
      if (auto r = sig_.relation(id)) {
        const std::size_t start = pos_;
        pos_ += id.size();
        if (!accept("(")) fail("expected '(' after relation '" + std::string(id) + "'");
        auto n = node(FKind::Relation);
        n->index = *r;
        n->terms = parse_args();
        if (n->terms.size() != sig_.relations()[*r].arity) {
          pos_ = start;
          fail("arity mismatch for relation '" + std::string(id) + "': expected " +
               std::to_string(sig_.relations()[*r].arity) + ", got " + std::to_string(n->terms.size()));
        }
        return n;
      }
    }
    auto n = node(FKind::Equal);
    n->terms.push_back(parse_term());
    if (!accept("=")) fail("expected '=' or a relation atom");
    n->terms.push_back(parse_term());
    return n;
  }

  std::vector<Term> parse_args() {
    std::vector<Term> args;
    if (accept(")")) return args;
    for (;;) {
      args.push_back(parse_term());
      if (accept(")")) return args;
      if (!accept(",")) fail("expected ',' or ')'");
    }
  }

  Term parse_term() {
    const std::size_t start = (skip_ws(), pos_);
    const std::string name = ident();
    if (peek("(")) {
      auto f = sig_.function(name);
      if (!f) {
        pos_ = start;
        fail("unknown function symbol '" + name + "'");
      }
      accept("(");
      auto args = parse_args();
      if (args.size() != sig_.functions()[*f].arity) {
        pos_ = start;
        fail("arity mismatch for function '" + name + "': expected " +
             std::to_string(sig_.functions()[*f].arity) + ", got " + std::to_string(args.size()));
      }
      return Term::function(*f, std::move(args));
    }
    for (std::size_t i = scope_.size(); i-- > 0;) {
      if (scope_[i] == name) return Term::variable(free_.size() + i);
    }
    for (std::size_t i = 0; i < free_.size(); ++i) {
      if (free_[i] == name) return Term::variable(i);
    }
    if (auto c = sig_.constant(name)) return Term::constant(*c);
    pos_ = start;
    fail("unknown symbol '" + name + "'");
  }

  std::string_view src_;
  const Signature& sig_;
  std::vector<std::string> free_;
  std::vector<std::string> scope_;
  std::size_t max_depth_ = 0;
  std::size_t pos_ = 0;
};

void print_term(const Term& t, const Signature& sig, const std::vector<std::string>& slots, std::string& out) {
  switch (t.kind) {
    case Term::Kind::Variable:
      out += t.index < slots.size() ? slots[t.index] : "_" + std::to_string(t.index);
      break;
    case Term::Kind::Constant: out += sig.constants()[t.index]; break;
    case Term::Kind::Function:
      out += sig.functions()[t.index].name + "(";
      for (std::size_t i = 0; i < t.args.size(); ++i) {
        if (i) out += ", ";
        print_term(t.args[i], sig, slots, out);
      }
      out += ")";
      break;
  }
}

void print_formula(const FNode& n, const Signature& sig, std::vector<std::string>& slots, std::string& out) {
  switch (n.kind) {
    case FKind::Equal:
      print_term(n.terms[0], sig, slots, out);
      out += " = ";
      print_term(n.terms[1], sig, slots, out);
      break;
    case FKind::Relation:
      out += sig.relations()[n.index].name + "(";
      for (std::size_t i = 0; i < n.terms.size(); ++i) {
        if (i) out += ", ";
        print_term(n.terms[i], sig, slots, out);
      }
      out += ")";
      break;
    case FKind::Not:
      out += "!";
      print_formula(*n.lhs, sig, slots, out);
      break;
    case FKind::And:
    case FKind::Or:
    case FKind::Implies: {
      const char* op = n.kind == FKind::And ? " & " : n.kind == FKind::Or ? " | " : " -> ";
      out += "(";
      print_formula(*n.lhs, sig, slots, out);
      out += op;
      print_formula(*n.rhs, sig, slots, out);
      out += ")";
      break;
    }
    case FKind::Exists:
    case FKind::Forall: {
      out += "(";
      out += n.kind == FKind::Exists ? "exists " : "forall ";
      out += n.bound_name + ". ";
      if (slots.size() <= n.index) slots.resize(n.index + 1);
      const std::string saved = slots[n.index];
      slots[n.index] = n.bound_name;
      print_formula(*n.lhs, sig, slots, out);
      slots[n.index] = saved;
      out += ")";
      break;
    }
  }
}

}  // namespace

Formula parse_formula(std::string_view source, const Signature& sig, const std::vector<std::string>& free_vars) {
  return FormulaParser(source, sig, free_vars).parse();
}

std::string to_string(const Formula& f, const Signature& sig) {
  std::vector<std::string> slots = f.free_names();
  std::string out;
  print_formula(*f.root(), sig, slots, out);
  return out;
}

// ---------------------------------------------------------------------------
// Variable layouts

VarList base_vars(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return make_vars(std::move(names));
}

VarList total_vars(std::size_t n, std::size_t k) {
  std::vector<std::string> names = *base_vars(n);
  for (std::size_t i = 1; i <= k; ++i) names.push_back("y" + std::to_string(i));
  return make_vars(std::move(names));
}

VarList argument_vars(std::size_t n, std::size_t k, std::size_t arity) {
  std::vector<std::string> names = *base_vars(n);
  for (std::size_t j = 1; j <= arity; ++j) {
    for (std::size_t i = 1; i <= k; ++i) names.push_back("y" + std::to_string(j) + std::to_string(i));
  }
  return make_vars(std::move(names));
}

VarAliases argument_aliases(std::size_t n, std::size_t k, std::size_t arity) {
  VarAliases aliases;
  if (arity == 1) {
    for (std::size_t i = 1; i <= k; ++i) aliases.emplace("y" + std::to_string(i), n + i - 1);
  }
  return aliases;
}

void Interpretation::validate() const {
  if (base_dim == 0 || fiber_dim == 0) throw ValidationError("dimensions must be positive");
  if (fiber_dim > 9) throw ValidationError("fiber dimension above 9 is not supported");
  if (guards.size() != signature.relations().size()) throw ValidationError("one guard per relation required");
  if (functions.size() != signature.functions().size()) {
    throw ValidationError("one component table per function required");
  }
  if (constants.size() != signature.constants().size()) {
    throw ValidationError("one component table per constant required");
  }
  for (std::size_t r = 0; r < guards.size(); ++r) {
    const auto arity = signature.relations()[r].arity;
    if (guards[r].var_count() != base_dim + arity * fiber_dim) {
      throw ValidationError("guard of '" + signature.relations()[r].name + "' has the wrong variable layout");
    }
  }
  for (std::size_t f = 0; f < functions.size(); ++f) {
    const auto arity = signature.functions()[f].arity;
    if (functions[f].size() != fiber_dim) {
      throw ValidationError("function '" + signature.functions()[f].name + "' needs one component per fiber axis");
    }
    for (const auto& e : functions[f]) {
      if (e.var_count() != base_dim + arity * fiber_dim) {
        throw ValidationError("function '" + signature.functions()[f].name + "' has the wrong variable layout");
      }
    }
  }
  for (std::size_t c = 0; c < constants.size(); ++c) {
    if (constants[c].size() != fiber_dim) {
      throw ValidationError("constant '" + signature.constants()[c] + "' needs one component per fiber axis");
    }
    for (const auto& e : constants[c]) {
      if (e.var_count() != base_dim) {
        throw ValidationError("constant '" + signature.constants()[c] + "' may only use base variables");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Fiber structures

FiberStructure::FiberStructure(std::shared_ptr<const Interpretation> interp, std::vector<double> base_point)
    : interp_(std::move(interp)), base_point_(std::move(base_point)) {
  if (base_point_.size() != interp_->base_dim) throw Error("base point has the wrong dimension");
}

std::vector<double> FiberStructure::bind(std::span<const FiberPoint> args) const {
  std::vector<double> values(base_point_);
  values.reserve(base_point_.size() + args.size() * interp_->fiber_dim);
  for (const auto& a : args) {
    if (a.size() != interp_->fiber_dim) throw Error("fiber point has the wrong dimension");
    values.insert(values.end(), a.begin(), a.end());
  }
  return values;
}

double FiberStructure::guard(std::size_t relation, std::span<const FiberPoint> args) const {
  if (args.size() != interp_->signature.relations().at(relation).arity) throw Error("relation arity mismatch");
  return interp_->guards[relation].eval(bind(args));
}

FiberPoint FiberStructure::apply(std::size_t function, std::span<const FiberPoint> args) const {
  if (args.size() != interp_->signature.functions().at(function).arity) throw Error("function arity mismatch");
  const auto values = bind(args);
  FiberPoint out(interp_->fiber_dim);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = interp_->functions[function][i].eval(values);
  return out;
}

FiberPoint FiberStructure::constant(std::size_t c) const {
  FiberPoint out(interp_->fiber_dim);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = interp_->constants.at(c)[i].eval(base_point_);
  return out;
}

FiberPoint eval_term(const Term& t, const FiberStructure& fs, std::span<const FiberPoint> assignment) {
  switch (t.kind) {
    case Term::Kind::Variable:
      if (t.index >= assignment.size()) throw Error("assignment does not cover term variable");
      return assignment[t.index];
    case Term::Kind::Constant: return fs.constant(t.index);
    case Term::Kind::Function: {
      std::vector<FiberPoint> args;
      args.reserve(t.args.size());
      for (const auto& a : t.args) args.push_back(eval_term(a, fs, assignment));
      return fs.apply(t.index, args);
    }
  }
  return {};
}

bool points_equal(const FiberPoint& a, const FiberPoint& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(std::fabs(a[i] - b[i]) <= tol)) return false;
  }
  return true;
}

namespace {

bool tarski(const FNode& n, const FiberStructure& fs, std::vector<FiberPoint>& slots,
            std::span<const FiberPoint> pool, double tol) {
  switch (n.kind) {
    case FKind::Equal:
      return points_equal(eval_term(n.terms[0], fs, slots), eval_term(n.terms[1], fs, slots), tol);
    case FKind::Relation: {
      std::vector<FiberPoint> args;
      for (const auto& t : n.terms) args.push_back(eval_term(t, fs, slots));
      return fs.holds(n.index, args);
    }
    case FKind::Not: return !tarski(*n.lhs, fs, slots, pool, tol);
    case FKind::And: return tarski(*n.lhs, fs, slots, pool, tol) && tarski(*n.rhs, fs, slots, pool, tol);
    case FKind::Or: return tarski(*n.lhs, fs, slots, pool, tol) || tarski(*n.rhs, fs, slots, pool, tol);
    case FKind::Implies: return !tarski(*n.lhs, fs, slots, pool, tol) || tarski(*n.rhs, fs, slots, pool, tol);
    case FKind::Exists:
    case FKind::Forall: {
      const bool exists = n.kind == FKind::Exists;
      const FiberPoint saved = slots[n.index];
      bool result = !exists;
      for (const auto& a : pool) {
        slots[n.index] = a;
        if (tarski(*n.lhs, fs, slots, pool, tol) == exists) {
          result = exists;
          break;
        }
      }
      slots[n.index] = saved;
      return result;
    }
  }
  return false;
}

}  // namespace

bool tarski_eval(const Formula& phi, const FiberStructure& fs, std::span<const FiberPoint> assignment,
                 std::span<const FiberPoint> witness_pool, double tol_eq) {
  for (auto s : phi.free_slots_used()) {
    if (s >= assignment.size()) throw Error("assignment does not cover free variable '" + phi.free_names()[s] + "'");
  }
  std::vector<FiberPoint> slots(assignment.begin(), assignment.end());
  slots.resize(std::max(slots.size(), phi.slot_count()));
  return tarski(*phi.root(), fs, slots, witness_pool, tol_eq);
}

}  // namespace fibersem
