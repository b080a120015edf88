#pragma once

// Trivial bundles B x R^k over compact base boxes, bundles of structures,
// sections, smooth maps and pullbacks.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fibersem/expr.hpp"
#include "fibersem/logic.hpp"

namespace fibersem {

struct BaseBox {
  std::vector<double> lo;
  std::vector<double> hi;

  BaseBox() = default;
  /// Throws ValidationError unless lo_i < hi_i on every axis.
  BaseBox(std::vector<double> lo, std::vector<double> hi);
  static BaseBox cube(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return lo.size(); }
  bool contains(std::span<const double> p, double tol = 1e-12) const;
  /// Closed box; throws ValidationError when the intersection is degenerate.
  BaseBox intersect(const BaseBox& other) const;
  bool contains_box(const BaseBox& inner, double tol = 1e-12) const;
};

struct FiberBundle {
  BaseBox base;
  std::size_t fiber_dim = 1;
};

/// Packs a tuple of fiber points into one point of the direct-sum fiber.
FiberPoint pack(std::span<const FiberPoint> points);
std::vector<FiberPoint> unpack(std::span<const double> packed, std::size_t copies);

/// A local section over a sub-box. Either given by component expressions in
/// x1..xn, or by an evaluator (transported lifts, compositions of those).
class Section {
 public:
  using Evaluator = std::function<void(std::span<const double> base_point, std::span<double> out)>;

  Section(BaseBox domain, std::vector<Expr> components, std::string name = {});
  Section(BaseBox domain, std::size_t fiber_dim, Evaluator evaluator, std::string name = {});

  /// Section whose value is `value` at every point of `domain`.
  static Section constant(BaseBox domain, const FiberPoint& value, std::string name = {});

  const BaseBox& domain() const { return domain_; }
  std::size_t fiber_dim() const { return fiber_dim_; }
  const std::string& name() const { return name_; }
  bool has_exprs() const { return !components_.empty(); }
  const std::vector<Expr>& components() const { return components_; }

  /// Throws OutOfDomain outside the section's domain.
  FiberPoint at(std::span<const double> base_point) const;
  /// No domain check.
  void eval_into(std::span<const double> base_point, std::span<double> out) const;

 private:
  BaseBox domain_;
  std::size_t fiber_dim_;
  std::vector<Expr> components_;
  Evaluator evaluator_;
  std::string name_;
};

FiberPoint eval_section(const Section& s, std::span<const double> base_point);

/// Smooth map between base boxes. Source variables are u1..us (t when s = 1).
class SmoothMap {
 public:
  SmoothMap(BaseBox source, std::vector<Expr> components, std::string name = {});

  static VarList source_vars(std::size_t source_dim);
  static VarAliases source_aliases(std::size_t source_dim);
  static SmoothMap identity(const BaseBox& box);
  /// Parses one component per target axis over the source variables.
  static SmoothMap parse(const BaseBox& source, const std::vector<std::string>& components, std::string name = {});

  const BaseBox& source() const { return source_; }
  std::size_t source_dim() const { return source_.dim(); }
  std::size_t target_dim() const { return components_.size(); }
  const std::vector<Expr>& components() const { return components_; }
  const std::string& name() const { return name_; }

  std::vector<double> apply(std::span<const double> p) const;
  /// Velocity of a one-parameter map (path) at t.
  std::vector<double> velocity(double t) const;
  /// Symbolic Jacobian, row i = target axis, column j = source axis.
  std::vector<std::vector<Expr>> jacobian() const;

  /// Components rewritten over `vars`, whose first source_dim entries play
  /// the role of the source coordinates.
  std::vector<Expr> components_over(const VarList& vars) const;

 private:
  BaseBox source_;
  std::vector<Expr> components_;
  std::string name_;
};

/// outer o inner.
SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner);

/// Throws ImageEscape when h, sampled on a regular grid of its source box,
/// leaves `target`.
void check_image(const SmoothMap& h, const BaseBox& target);

class StructureBundle {
 public:
  /// `fiber_box` bounds quantifier witnesses and transport.
  StructureBundle(BaseBox base, std::shared_ptr<const Interpretation> interp, BaseBox fiber_box);

  const BaseBox& base() const { return base_; }
  std::size_t base_dim() const { return base_.dim(); }
  std::size_t fiber_dim() const { return interp_->fiber_dim; }
  FiberBundle bundle() const { return {base_, interp_->fiber_dim}; }
  const Interpretation& interpretation() const { return *interp_; }
  const std::shared_ptr<const Interpretation>& interpretation_ptr() const { return interp_; }
  const Signature& signature() const { return interp_->signature; }
  const BaseBox& fiber_box() const { return fiber_box_; }

 private:
  BaseBox base_;
  std::shared_ptr<const Interpretation> interp_;
  BaseBox fiber_box_;
};

/// The structure on the fiber over m. Throws OutOfDomain outside the base box.
FiberStructure fiber_structure(const StructureBundle& sb, std::span<const double> m);

/// Fiber of the k-fold direct sum at m is A_m^k.
FiberBundle direct_sum(const StructureBundle& sb, std::size_t copies);

/// Precomposes every interpretation expression with h in its base variables.
StructureBundle pullback_bundle(const StructureBundle& sb, const SmoothMap& h, const BaseBox& source_box);

/// n -> s(h(n)) as a section of the pulled-back bundle.
Section pullback_section(const Section& s, const SmoothMap& h, const BaseBox& source_box);

/// m -> t(s_1(m), ..., s_r(m)). Composed symbolically when every input
/// section has expressions.
Section term_section(const Term& t, const std::vector<Section>& sections, const StructureBundle& sb);

}  // namespace fibersem
