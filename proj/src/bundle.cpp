#include "fibersem/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fibersem/error.hpp"

namespace fibersem {

BaseBox::BaseBox(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.empty() || lo.size() != hi.size()) throw ValidationError("box needs matching, non-empty bounds");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) throw ValidationError("box axis " + std::to_string(i + 1) + " needs lo < hi");
  }
}

BaseBox BaseBox::cube(std::size_t dim, double lo, double hi) {
  return BaseBox(std::vector<double>(dim, lo), std::vector<double>(dim, hi));
}

bool BaseBox::contains(std::span<const double> p, double tol) const {
  if (p.size() != lo.size()) return false;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(p[i] >= lo[i] - tol && p[i] <= hi[i] + tol)) return false;
  }
  return true;
}

BaseBox BaseBox::intersect(const BaseBox& other) const {
  if (other.dim() != dim()) throw ValidationError("cannot intersect boxes of different dimension");
  std::vector<double> l(dim()), h(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    l[i] = std::max(lo[i], other.lo[i]);
    h[i] = std::min(hi[i], other.hi[i]);
  }
  return BaseBox(std::move(l), std::move(h));
}

bool BaseBox::contains_box(const BaseBox& inner, double tol) const {
  return inner.dim() == dim() && contains(inner.lo, tol) && contains(inner.hi, tol);
}

FiberPoint pack(std::span<const FiberPoint> points) {
  FiberPoint out;
  for (const auto& p : points) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<FiberPoint> unpack(std::span<const double> packed, std::size_t copies) {
  if (copies == 0 || packed.size() % copies != 0) throw Error("packed fiber point does not split evenly");
  const std::size_t k = packed.size() / copies;
  std::vector<FiberPoint> out;
  for (std::size_t j = 0; j < copies; ++j) out.emplace_back(packed.begin() + j * k, packed.begin() + (j + 1) * k);
  return out;
}

// ---------------------------------------------------------------------------

Section::Section(BaseBox domain, std::vector<Expr> components, std::string name)
    : domain_(std::move(domain)), fiber_dim_(components.size()), components_(std::move(components)),
      name_(std::move(name)) {
  if (components_.empty()) throw ValidationError("section needs at least one component");
  for (const auto& c : components_) {
    if (c.var_count() != domain_.dim()) throw ValidationError("section components must use x1..xn only");
  }
}

Section::Section(BaseBox domain, std::size_t fiber_dim, Evaluator evaluator, std::string name)
    : domain_(std::move(domain)), fiber_dim_(fiber_dim), evaluator_(std::move(evaluator)), name_(std::move(name)) {
  if (fiber_dim_ == 0 || !evaluator_) throw ValidationError("section needs a fiber dimension and an evaluator");
}

Section Section::constant(BaseBox domain, const FiberPoint& value, std::string name) {
  const VarList vars = base_vars(domain.dim());
  std::vector<Expr> comps;
  for (double v : value) comps.push_back(Expr::number(v, vars));
  return Section(std::move(domain), std::move(comps), std::move(name));
}

FiberPoint Section::at(std::span<const double> base_point) const {
  if (!domain_.contains(base_point)) {
    throw OutOfDomain("point outside the domain of section '" + name_ + "'");
  }
  FiberPoint out(fiber_dim_);
  eval_into(base_point, out);
  return out;
}

void Section::eval_into(std::span<const double> base_point, std::span<double> out) const {
  if (!components_.empty()) {
    for (std::size_t i = 0; i < fiber_dim_; ++i) out[i] = components_[i].eval(base_point);
  } else {
    evaluator_(base_point, out);
  }
}

FiberPoint eval_section(const Section& s, std::span<const double> base_point) { return s.at(base_point); }

// ---------------------------------------------------------------------------

SmoothMap::SmoothMap(BaseBox source, std::vector<Expr> components, std::string name)
    : source_(std::move(source)), components_(std::move(components)), name_(std::move(name)) {
  if (components_.empty()) throw ValidationError("smooth map needs at least one component");
  for (const auto& c : components_) {
    if (c.var_count() != source_.dim()) throw ValidationError("map components must use the source variables");
  }
}

VarList SmoothMap::source_vars(std::size_t source_dim) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= source_dim; ++i) names.push_back("u" + std::to_string(i));
  return make_vars(std::move(names));
}

VarAliases SmoothMap::source_aliases(std::size_t source_dim) {
  VarAliases a;
  if (source_dim == 1) a.emplace("t", 0);
  return a;
}

SmoothMap SmoothMap::identity(const BaseBox& box) {
  const VarList vars = source_vars(box.dim());
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < box.dim(); ++i) comps.push_back(Expr::variable(i, vars));
  return SmoothMap(box, std::move(comps), "id");
}

SmoothMap SmoothMap::parse(const BaseBox& source, const std::vector<std::string>& components, std::string name) {
  const VarList vars = source_vars(source.dim());
  const VarAliases aliases = source_aliases(source.dim());
  std::vector<Expr> comps;
  for (const auto& c : components) comps.push_back(parse_expr(c, vars, aliases));
  return SmoothMap(source, std::move(comps), std::move(name));
}

std::vector<double> SmoothMap::apply(std::span<const double> p) const {
  if (p.size() != source_dim()) throw Error("map argument has the wrong dimension");
  std::vector<double> out(components_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = components_[i].eval(p);
  return out;
}

std::vector<double> SmoothMap::velocity(double t) const {
  if (source_dim() != 1) throw Error("velocity is defined for paths only");
  const double arg[1] = {t};
  std::vector<double> out(components_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = components_[i].diff(arg, 0);
  return out;
}

std::vector<std::vector<Expr>> SmoothMap::jacobian() const {
  std::vector<std::vector<Expr>> j(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    for (std::size_t s = 0; s < source_dim(); ++s) j[i].push_back(derivative(components_[i], s));
  }
  return j;
}

std::vector<Expr> SmoothMap::components_over(const VarList& vars) const {
  std::vector<Expr> coords;
  for (std::size_t i = 0; i < source_dim(); ++i) coords.push_back(Expr::variable(i, vars));
  std::vector<Expr> out;
  for (const auto& c : components_) out.push_back(substitute(c, coords, vars));
  return out;
}

SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner) {
  if (inner.target_dim() != outer.source_dim()) throw Error("cannot compose maps of mismatched dimensions");
  const VarList vars = SmoothMap::source_vars(inner.source_dim());
  const std::vector<Expr> inner_comps = inner.components_over(vars);
  std::vector<Expr> comps;
  for (const auto& c : outer.components()) comps.push_back(substitute(c, inner_comps, vars));
  return SmoothMap(inner.source(), std::move(comps), outer.name() + "." + inner.name());
}

void check_image(const SmoothMap& h, const BaseBox& target) {
  if (h.target_dim() != target.dim()) throw ImageEscape("map target dimension does not match the box");
  const std::size_t s = h.source_dim();
  const std::size_t per_axis = s == 1 ? 65 : s == 2 ? 17 : 5;
  std::vector<std::size_t> idx(s, 0);
  std::vector<double> p(s);
  for (;;) {
    for (std::size_t i = 0; i < s; ++i) {
      p[i] = h.source().lo[i] + (h.source().hi[i] - h.source().lo[i]) * static_cast<double>(idx[i]) /
                                    static_cast<double>(per_axis - 1);
    }
    const auto img = h.apply(p);
    if (!target.contains(img, 1e-9)) {
      std::ostringstream msg;
      msg << "image of map '" << h.name() << "' leaves the target box at source point (";
      for (std::size_t i = 0; i < s; ++i) msg << (i ? "," : "") << p[i];
      msg << ")";
      throw ImageEscape(msg.str());
    }
    std::size_t d = 0;
    while (d < s && ++idx[d] == per_axis) idx[d++] = 0;
    if (d == s) break;
  }
}

// ---------------------------------------------------------------------------

StructureBundle::StructureBundle(BaseBox base, std::shared_ptr<const Interpretation> interp, BaseBox fiber_box)
    : base_(std::move(base)), interp_(std::move(interp)), fiber_box_(std::move(fiber_box)) {
  interp_->validate();
  if (base_.dim() != interp_->base_dim) throw ValidationError("base box dimension does not match the structure");
  if (fiber_box_.dim() != interp_->fiber_dim) throw ValidationError("fiber box dimension does not match the fiber");
}

FiberStructure fiber_structure(const StructureBundle& sb, std::span<const double> m) {
  if (!sb.base().contains(m)) throw OutOfDomain("base point outside the base box");
  return FiberStructure(sb.interpretation_ptr(), std::vector<double>(m.begin(), m.end()));
}

FiberBundle direct_sum(const StructureBundle& sb, std::size_t copies) {
  if (copies == 0) throw ValidationError("direct sum needs at least one copy");
  return {sb.base(), sb.fiber_dim() * copies};
}

namespace {

// Replacement list for an expression over argument_vars(n, k, arity): the
// base coordinates become h's components, fiber slots stay put.
std::vector<Expr> pullback_replacements(const SmoothMap& h, std::size_t k, std::size_t arity, const VarList& target) {
  std::vector<Expr> repl = h.components_over(target);
  const std::size_t s = h.source_dim();
  for (std::size_t j = 0; j < arity * k; ++j) repl.push_back(Expr::variable(s + j, target));
  return repl;
}

}  // namespace

StructureBundle pullback_bundle(const StructureBundle& sb, const SmoothMap& h, const BaseBox& source_box) {
  if (h.target_dim() != sb.base_dim()) throw Error("map target dimension does not match the bundle base");
  if (source_box.dim() != h.source_dim()) throw Error("source box dimension does not match the map");
  const SmoothMap restricted(source_box, h.components(), h.name());
  check_image(restricted, sb.base());

  const auto& in = sb.interpretation();
  const std::size_t s = h.source_dim();
  const std::size_t k = in.fiber_dim;
  auto out = std::make_shared<Interpretation>();
  out->signature = in.signature;
  out->base_dim = s;
  out->fiber_dim = k;
  for (std::size_t r = 0; r < in.guards.size(); ++r) {
    const auto arity = in.signature.relations()[r].arity;
    const VarList vars = argument_vars(s, k, arity);
    out->guards.push_back(substitute(in.guards[r], pullback_replacements(h, k, arity, vars), vars));
  }
  for (std::size_t f = 0; f < in.functions.size(); ++f) {
    const auto arity = in.signature.functions()[f].arity;
    const VarList vars = argument_vars(s, k, arity);
    const auto repl = pullback_replacements(h, k, arity, vars);
    std::vector<Expr> comps;
    for (const auto& c : in.functions[f]) comps.push_back(substitute(c, repl, vars));
    out->functions.push_back(std::move(comps));
  }
  const VarList bvars = base_vars(s);
  const auto base_repl = h.components_over(bvars);
  for (const auto& table : in.constants) {
    std::vector<Expr> comps;
    for (const auto& c : table) comps.push_back(substitute(c, base_repl, bvars));
    out->constants.push_back(std::move(comps));
  }
  return StructureBundle(source_box, std::move(out), sb.fiber_box());
}

Section pullback_section(const Section& s, const SmoothMap& h, const BaseBox& source_box) {
  const SmoothMap restricted(source_box, h.components(), h.name());
  check_image(restricted, s.domain());
  if (s.has_exprs()) {
    const VarList vars = base_vars(h.source_dim());
    const auto repl = h.components_over(vars);
    std::vector<Expr> comps;
    for (const auto& c : s.components()) comps.push_back(substitute(c, repl, vars));
    return Section(source_box, std::move(comps), s.name());
  }
  auto eval = [s, restricted](std::span<const double> n, std::span<double> out) {
    const auto m = restricted.apply(n);
    s.eval_into(m, out);
  };
  return Section(source_box, s.fiber_dim(), std::move(eval), s.name());
}

namespace {

std::vector<Expr> term_exprs(const Term& t, const std::vector<Section>& sections, const Interpretation& in,
                             const VarList& bvars) {
  const std::size_t n = in.base_dim;
  switch (t.kind) {
    case Term::Kind::Variable: {
      std::vector<Expr> out;
      std::vector<Expr> coords;
      for (std::size_t i = 0; i < n; ++i) coords.push_back(Expr::variable(i, bvars));
      for (const auto& c : sections.at(t.index).components()) out.push_back(substitute(c, coords, bvars));
      return out;
    }
    case Term::Kind::Constant: {
      std::vector<Expr> coords;
      for (std::size_t i = 0; i < n; ++i) coords.push_back(Expr::variable(i, bvars));
      std::vector<Expr> out;
      for (const auto& c : in.constants.at(t.index)) out.push_back(substitute(c, coords, bvars));
      return out;
    }
    case Term::Kind::Function: {
      std::vector<Expr> repl;
      for (std::size_t i = 0; i < n; ++i) repl.push_back(Expr::variable(i, bvars));
      for (const auto& a : t.args) {
        auto comps = term_exprs(a, sections, in, bvars);
        repl.insert(repl.end(), comps.begin(), comps.end());
      }
      std::vector<Expr> out;
      for (const auto& c : in.functions.at(t.index)) out.push_back(substitute(c, repl, bvars));
      return out;
    }
  }
  return {};
}

bool term_uses_only_expr_sections(const Term& t, const std::vector<Section>& sections) {
  if (t.kind == Term::Kind::Variable) return t.index < sections.size() && sections[t.index].has_exprs();
  return std::all_of(t.args.begin(), t.args.end(),
                     [&](const Term& a) { return term_uses_only_expr_sections(a, sections); });
}

void collect_vars(const Term& t, std::vector<std::size_t>& out) {
  if (t.kind == Term::Kind::Variable) out.push_back(t.index);
  for (const auto& a : t.args) collect_vars(a, out);
}

}  // namespace

Section term_section(const Term& t, const std::vector<Section>& sections, const StructureBundle& sb) {
  std::vector<std::size_t> used;
  collect_vars(t, used);
  BaseBox domain = sb.base();
  for (auto v : used) {
    if (v >= sections.size()) throw Error("term variable not covered by the given sections");
    domain = domain.intersect(sections[v].domain());
  }
  if (term_uses_only_expr_sections(t, sections)) {
    const VarList bvars = base_vars(sb.base_dim());
    return Section(domain, term_exprs(t, sections, sb.interpretation(), bvars));
  }
  auto interp = sb.interpretation_ptr();
  auto eval = [t, sections, interp, used](std::span<const double> m, std::span<double> out) {
    FiberStructure fs(interp, std::vector<double>(m.begin(), m.end()));
    std::vector<FiberPoint> values(sections.size());
    for (auto v : used) {
      values[v].resize(sections[v].fiber_dim());
      sections[v].eval_into(m, values[v]);
    }
    const auto r = eval_term(t, fs, values);
    std::copy(r.begin(), r.end(), out.begin());
  };
  return Section(domain, sb.fiber_dim(), std::move(eval));
}

}  // namespace fibersem
