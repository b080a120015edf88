#include "fibersem/forcing.hpp"

#include <algorithm>
#include <cmath>

#include "fibersem/error.hpp"

namespace fibersem {

void NeighborhoodPolicy::validate() const {
  if (!(eps0 > 0.0) || !std::isfinite(eps0)) throw ValidationError("eps0 must be positive");
  if (halvings < 1) throw ValidationError("at least one halving is required");
  if (halvings > 60) throw ValidationError("too many halvings");
  if (samples < 8) throw ValidationError("at least 8 samples per ball are required");
  if (depth < 1) throw ValidationError("depth budget must be at least 1");
  if (!(tol_eq >= 0.0)) throw ValidationError("equality tolerance must be non-negative");
  if (witness_grid < 1) throw ValidationError("witness grid needs at least one point per axis");
  if (!(step > 0.0)) throw ValidationError("step must be positive");
}

double NeighborhoodPolicy::radius(std::size_t level) const { return std::ldexp(eps0, -static_cast<int>(level)); }

std::string to_string(Decision d) { return d == Decision::Forced ? "Forced" : "NotForced"; }

// ---------------------------------------------------------------------------

namespace {

/// Unique positive root of x^(d+1) = x + 1.
double generalized_golden(std::size_t d) {
  double x = 2.0;
  for (int i = 0; i < 64; ++i) x = std::pow(1.0 + x, 1.0 / static_cast<double>(d + 1));
  return x;
}

}  // namespace

BallSamples::BallSamples(std::size_t dim, std::size_t levels, std::size_t per_level)
    : dim_(dim), levels_(levels), per_level_(per_level) {
  if (dim == 0) throw ValidationError("ball dimension must be positive");
  const double g = generalized_golden(dim);
  std::vector<double> alpha(dim);
  for (std::size_t i = 0; i < dim; ++i) alpha[i] = std::pow(1.0 / g, static_cast<double>(i + 1));
  const std::size_t total = levels * per_level;
  coords_.reserve(total * dim);
  std::vector<double> p(dim);
  std::size_t accepted = 0;
  for (std::size_t n = 1; accepted < total; ++n) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double frac = std::fmod(0.5 + static_cast<double>(n) * alpha[i], 1.0);
      p[i] = 2.0 * frac - 1.0;
      norm2 += p[i] * p[i];
    }
    if (norm2 >= 1.0 || norm2 == 0.0) continue;
    coords_.insert(coords_.end(), p.begin(), p.end());
    ++accepted;
  }
}

std::span<const double> BallSamples::point(std::size_t level, std::size_t i) const {
  return {coords_.data() + (level * per_level_ + i) * dim_, dim_};
}

// ---------------------------------------------------------------------------

struct ForcingEngine::Run {
  const ForcingEngine& eng;
  const Formula& phi;
  std::vector<Section> family;
  std::vector<const Section*> slots;
  std::size_t evaluated = 0;
  std::size_t deepest = 0;

  Run(const ForcingEngine& e, const Formula& f, const std::vector<Section>& sections)
      : eng(e), phi(f), family(e.witness_family(sections)), slots(f.slot_count(), nullptr) {
    for (std::size_t i = 0; i < f.free_count() && i < sections.size(); ++i) slots[i] = &sections[i];
  }

  const NeighborhoodPolicy& pol() const { return eng.pol_; }

  bool in_domain(std::span<const double> v) const {
    if (!eng.sb_.base().contains(v)) return false;
    for (const Section* s : slots) {
      if (s != nullptr && !s->domain().contains(v)) return false;
    }
    return true;
  }

  void consume(std::size_t budget) {
    if (budget == 0) {
      throw DepthExhausted("formula nests negation/implication/universal clauses deeper than the depth budget " +
                           std::to_string(pol().depth));
    }
    deepest = std::max(deepest, pol().depth - budget + 1);
  }

  /// pred at every in-domain sample of the given level's own points.
  template <class Pred>
  bool level_holds(std::span<const double> m, std::size_t level, Pred&& pred) {
    const double r = pol().radius(level);
    std::vector<double> u(m.size());
    for (std::size_t i = 0; i < eng.samples_.per_level(); ++i) {
      const auto p = eng.samples_.point(level, i);
      for (std::size_t a = 0; a < u.size(); ++a) u[a] = m[a] + r * p[a];
      if (!in_domain(u)) continue;
      ++evaluated;
      if (!pred(std::span<const double>(u))) return false;
    }
    return true;
  }

  /// Decision: all samples of the smallest ball (centre included) satisfy pred.
  template <class Pred>
  bool smallest_ball_holds(std::span<const double> m, Pred&& pred) {
    ++evaluated;
    if (!pred(m)) return false;
    return level_holds(m, pol().halvings, pred);
  }

  /// Largest scheduled radius whose nested sample set satisfies pred.
  template <class Pred>
  std::optional<double> scan(std::span<const double> m, Pred&& pred) {
    if (!smallest_ball_holds(m, pred)) return std::nullopt;
    double witness = pol().radius(pol().halvings);
    for (std::size_t level = pol().halvings; level-- > 0;) {
      if (!level_holds(m, level, pred)) break;
      witness = pol().radius(level);
    }
    return witness;
  }

  std::vector<FiberPoint> assignment(std::span<const double> v) const {
    std::vector<FiberPoint> values(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] == nullptr) continue;
      values[i].resize(slots[i]->fiber_dim());
      slots[i]->eval_into(v, values[i]);
    }
    return values;
  }

  bool atom_holds(const Formula::Node& n, std::span<const double> v) const {
    const bool plain = std::all_of(n.terms.begin(), n.terms.end(),
                                   [&](const Term& t) { return t.kind == Term::Kind::Variable && slots[t.index]; });
    if (plain) return plain_atom_holds(n, v);
    const FiberStructure fs(eng.sb_.interpretation_ptr(), std::vector<double>(v.begin(), v.end()));
    const auto values = assignment(v);
    if (n.kind == Formula::Kind::Equal) {
      return points_equal(eval_term(n.terms[0], fs, values), eval_term(n.terms[1], fs, values), pol().tol_eq);
    }
    std::vector<FiberPoint> args;
    args.reserve(n.terms.size());
    for (const auto& t : n.terms) args.push_back(eval_term(t, fs, values));
    return fs.holds(n.index, args);
  }

  /// Atoms whose arguments are all bound variables: no term evaluation.
  bool plain_atom_holds(const Formula::Node& n, std::span<const double> v) const {
    const std::size_t k = eng.sb_.fiber_dim();
    double stack[64];
    std::vector<double> heap;
    const std::size_t size = v.size() + n.terms.size() * k;
    double* buf = stack;
    if (size > 64) {
      heap.resize(size);
      buf = heap.data();
    }
    std::copy(v.begin(), v.end(), buf);
    for (std::size_t j = 0; j < n.terms.size(); ++j) {
      slots[n.terms[j].index]->eval_into(v, std::span<double>(buf + v.size() + j * k, k));
    }
    if (n.kind == Formula::Kind::Equal) {
      for (std::size_t i = 0; i < k; ++i) {
        if (!(std::fabs(buf[v.size() + i] - buf[v.size() + k + i]) <= pol().tol_eq)) return false;
      }
      return true;
    }
    return eng.sb_.interpretation().guards[n.index].eval(std::span<const double>(buf, size)) > 0.0;
  }

  template <class Body>
  bool for_some_witness(std::size_t slot, std::span<const double> v, Body&& body) {
    const Section* saved = slots[slot];
    for (const auto& w : family) {
      if (!w.domain().contains(v)) continue;
      slots[slot] = &w;
      const bool ok = body();
      if (ok) {
        slots[slot] = saved;
        return true;
      }
    }
    slots[slot] = saved;
    return false;
  }

  template <class Body>
  bool for_every_witness(std::size_t slot, std::span<const double> v, Body&& body) {
    const Section* saved = slots[slot];
    for (const auto& w : family) {
      if (!w.domain().contains(v)) continue;
      slots[slot] = &w;
      if (!body()) {
        slots[slot] = saved;
        return false;
      }
    }
    slots[slot] = saved;
    return true;
  }

  bool exists_at(const Formula::Node& n, std::span<const double> v, std::size_t budget) {
    return for_some_witness(n.index, v, [&] { return eval(*n.lhs, v, budget); });
  }

  bool forall_at(const Formula::Node& n, std::span<const double> u, std::size_t budget) {
    return for_every_witness(n.index, u, [&] { return eval(*n.lhs, u, budget); });
  }

  /// Neighborhood predicate of a clause that quantifies over a ball.
  bool local(const Formula::Node& n, std::span<const double> u, std::size_t budget) {
    switch (n.kind) {
      case Formula::Kind::Equal:
      case Formula::Kind::Relation:
        return atom_holds(n, u);
      case Formula::Kind::Not:
        return !eval(*n.lhs, u, budget - 1);
      case Formula::Kind::Implies:
        return !eval(*n.lhs, u, budget - 1) || eval(*n.rhs, u, budget - 1);
      case Formula::Kind::Forall:
        return forall_at(n, u, budget - 1);
      case Formula::Kind::Exists:
        return exists_at(n, u, budget - 1);
      default:
        throw Error("internal: not a neighborhood clause");
    }
  }

  bool is_local(const Formula::Node& n) const {
    switch (n.kind) {
      case Formula::Kind::Equal:
      case Formula::Kind::Relation:
      case Formula::Kind::Not:
      case Formula::Kind::Implies:
      case Formula::Kind::Forall:
        return true;
      case Formula::Kind::Exists:
        return pol().exists_neighborhood;
      default:
        return false;
    }
  }

  bool is_atom(const Formula::Node& n) const {
    return n.kind == Formula::Kind::Equal || n.kind == Formula::Kind::Relation;
  }

  bool eval(const Formula::Node& n, std::span<const double> v, std::size_t budget) {
    if (is_local(n)) {
      if (!is_atom(n)) consume(budget);
      return smallest_ball_holds(v, [&](std::span<const double> u) { return local(n, u, budget); });
    }
    switch (n.kind) {
      case Formula::Kind::And:
        return eval(*n.lhs, v, budget) && eval(*n.rhs, v, budget);
      case Formula::Kind::Or:
        return eval(*n.lhs, v, budget) || eval(*n.rhs, v, budget);
      case Formula::Kind::Exists:
        return exists_at(n, v, budget);
      default:
        throw Error("internal: unhandled formula node");
    }
  }

  std::optional<double> verdict(const Formula::Node& n, std::span<const double> m, std::size_t budget) {
    if (is_local(n)) {
      if (!is_atom(n)) consume(budget);
      return scan(m, [&](std::span<const double> u) { return local(n, u, budget); });
    }
    switch (n.kind) {
      case Formula::Kind::And: {
        const auto l = verdict(*n.lhs, m, budget);
        if (!l) return std::nullopt;
        const auto r = verdict(*n.rhs, m, budget);
        if (!r) return std::nullopt;
        return std::min(*l, *r);
      }
      case Formula::Kind::Or: {
        if (auto l = verdict(*n.lhs, m, budget)) return l;
        return verdict(*n.rhs, m, budget);
      }
      case Formula::Kind::Exists: {
        std::optional<double> found;
        for_some_witness(n.index, m, [&] {
          found = verdict(*n.lhs, m, budget);
          return found.has_value();
        });
        return found;
      }
      default:
        throw Error("internal: unhandled formula node");
    }
  }
};

ForcingEngine::ForcingEngine(const StructureBundle& sb, NeighborhoodPolicy pol, std::vector<Section> extras)
    : sb_(sb), pol_(pol), extras_(std::move(extras)), samples_(sb.base_dim(), pol.halvings + 1, pol.samples) {
  pol_.validate();
  for (const auto& s : extras_) {
    if (s.fiber_dim() != sb.fiber_dim()) throw ValidationError("witness section has the wrong fiber dimension");
  }
}

BaseBox ForcingEngine::domain_of(const std::vector<Section>& sections) const {
  BaseBox d = sb_.base();
  for (const auto& s : sections) d = d.intersect(s.domain());
  return d;
}

std::vector<Section> ForcingEngine::witness_family(const std::vector<Section>& sections) const {
  std::vector<Section> family(sections.begin(), sections.end());
  family.insert(family.end(), extras_.begin(), extras_.end());
  const auto& sig = sb_.signature();
  for (std::size_t c = 0; c < sig.constants().size(); ++c) {
    family.push_back(term_section(Term::constant(c), {}, sb_));
  }

  const std::size_t declared = family.size();
  constexpr std::size_t kMaxApplications = 64;
  std::size_t applied = 0;
  for (std::size_t f = 0; f < sig.functions().size() && declared > 0; ++f) {
    const std::size_t arity = sig.functions()[f].arity;
    std::vector<Term> args;
    for (std::size_t j = 0; j < arity; ++j) args.push_back(Term::variable(j));
    const Term t = Term::function(f, args);
    std::vector<std::size_t> pick(arity, 0);
    while (applied < kMaxApplications) {
      std::vector<Section> chosen;
      for (auto p : pick) chosen.push_back(family[p]);
      try {
        family.push_back(term_section(t, chosen, sb_));
        ++applied;
      } catch (const Error&) {
        // disjoint domains: no composite section
      }
      std::size_t j = 0;
      while (j < arity && ++pick[j] == declared) pick[j++] = 0;
      if (j == arity) break;
    }
  }

  const auto& fb = sb_.fiber_box();
  const std::size_t k = fb.dim();
  const std::size_t g = pol_.witness_grid;
  std::vector<std::size_t> idx(k, 0);
  for (;;) {
    FiberPoint value(k);
    for (std::size_t i = 0; i < k; ++i) {
      value[i] = g == 1 ? 0.5 * (fb.lo[i] + fb.hi[i])
                        : fb.lo[i] + (fb.hi[i] - fb.lo[i]) * static_cast<double>(idx[i]) / static_cast<double>(g - 1);
    }
    family.push_back(Section::constant(sb_.base(), value, "grid"));
    std::size_t i = 0;
    while (i < k && ++idx[i] == g) idx[i++] = 0;
    if (i == k) break;
  }
  return family;
}

namespace {

void check_arguments(const StructureBundle& sb, const Formula& phi, std::span<const double> m,
                     const std::vector<Section>& sections) {
  if (m.size() != sb.base_dim()) throw Error("base point has the wrong dimension");
  if (sections.size() < phi.free_count()) {
    throw Error("formula has " + std::to_string(phi.free_count()) + " free variables but " +
                std::to_string(sections.size()) + " sections were given");
  }
  if (!sb.base().contains(m)) throw OutOfDomain("point outside the base box");
  for (const auto& s : sections) {
    if (s.fiber_dim() != sb.fiber_dim()) throw Error("section '" + s.name() + "' has the wrong fiber dimension");
    if (!s.domain().contains(m)) throw OutOfDomain("point outside the domain of section '" + s.name() + "'");
  }
}

}  // namespace

ForcingVerdict ForcingEngine::force(const Formula& phi, std::span<const double> m,
                                    const std::vector<Section>& sections) const {
  check_arguments(sb_, phi, m, sections);
  Run run(*this, phi, sections);
  const auto w = run.verdict(*phi.root(), m, pol_.depth);
  ForcingVerdict v;
  v.decision = w ? Decision::Forced : Decision::NotForced;
  v.witness_eps = w;
  v.samples_evaluated = run.evaluated;
  v.depth_used = run.deepest;
  return v;
}

bool ForcingEngine::forced(const Formula& phi, std::span<const double> m, const std::vector<Section>& sections) const {
  check_arguments(sb_, phi, m, sections);
  Run run(*this, phi, sections);
  return run.eval(*phi.root(), m, pol_.depth);
}

ForcingVerdict force(const StructureBundle& sb, std::span<const double> m, const Formula& phi,
                     const std::vector<Section>& sections, const NeighborhoodPolicy& pol) {
  return ForcingEngine(sb, pol).force(phi, m, sections);
}

// ---------------------------------------------------------------------------

Grid Grid::over(const BaseBox& box, std::span<const double> anchor, double step) {
  if (!(step > 0.0)) throw ValidationError("grid step must be positive");
  if (anchor.size() != box.dim()) throw ValidationError("grid anchor has the wrong dimension");
  Grid g;
  g.anchor.assign(anchor.begin(), anchor.end());
  g.step = step;
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const auto lo = static_cast<long>(std::ceil((box.lo[i] - anchor[i]) / step - 1e-9));
    const auto hi = static_cast<long>(std::floor((box.hi[i] - anchor[i]) / step + 1e-9));
    if (hi < lo) throw ValidationError("grid step is larger than the region");
    g.lo.push_back(lo);
    g.count.push_back(hi - lo + 1);
  }
  return g;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (auto c : count) n *= static_cast<std::size_t>(c);
  return n;
}

std::vector<long> Grid::index_of(std::size_t flat) const {
  std::vector<long> idx(dim());
  for (std::size_t i = dim(); i-- > 0;) {
    const auto c = static_cast<std::size_t>(count[i]);
    idx[i] = lo[i] + static_cast<long>(flat % c);
    flat /= c;
  }
  return idx;
}

std::optional<std::size_t> Grid::flat_of(std::span<const long> index) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < dim(); ++i) {
    const long off = index[i] - lo[i];
    if (off < 0 || off >= count[i]) return std::nullopt;
    flat = flat * static_cast<std::size_t>(count[i]) + static_cast<std::size_t>(off);
  }
  return flat;
}

std::vector<double> Grid::point(std::size_t flat) const {
  const auto idx = index_of(flat);
  std::vector<double> p(dim());
  for (std::size_t i = 0; i < dim(); ++i) p[i] = anchor[i] + static_cast<double>(idx[i]) * step;
  return p;
}

std::size_t ExtensionSet::member_count() const {
  return static_cast<std::size_t>(std::count(member.begin(), member.end(), char{1}));
}

std::vector<std::vector<double>> ExtensionSet::members() const {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < member.size(); ++i) {
    if (member[i]) out.push_back(grid.point(i));
  }
  return out;
}

ExtensionSet spatial_extension(const StructureBundle& sb, const Formula& phi, const std::vector<Section>& sections,
                               const BaseBox& region, double grid_step, const NeighborhoodPolicy& pol) {
  if (!sb.base().contains_box(region)) throw ValidationError("region is not inside the base box");
  const ForcingEngine engine(sb, pol);
  ExtensionSet out;
  out.grid = Grid::over(region, std::vector<double>(region.dim(), 0.0), grid_step);
  const std::size_t n = out.grid.size();
  out.member.assign(n, 0);
  out.parent.assign(n, -1);
  out.tuple.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = out.grid.point(i);
    bool inside = true;
    for (const auto& s : sections) inside = inside && s.domain().contains(p);
    if (!inside) continue;
    out.member[i] = engine.forced(phi, p, sections) ? 1 : 0;
  }
  return out;
}

bool density_check(const StructureBundle& sb, const Formula& phi, const std::vector<Section>& sections,
                   std::span<const double> m, const NeighborhoodPolicy& pol) {
  const ForcingEngine engine(sb, pol);
  const BallSamples balls(sb.base_dim(), pol.halvings + 1, pol.samples);
  BaseBox domain = sb.base();
  for (const auto& s : sections) domain = domain.intersect(s.domain());
  if (!domain.contains(m)) throw OutOfDomain("point outside the base box or section domains");

  const double shrink = 1.0 / std::sqrt(static_cast<double>(pol.samples));
  auto near_forced = [&](std::span<const double> u, double eps) {
    if (engine.forced(phi, u, sections)) return true;
    const double r = eps * shrink;
    std::vector<double> v(u.size());
    for (std::size_t i = 0; i < pol.samples; ++i) {
      const auto p = balls.point(0, i);
      for (std::size_t a = 0; a < v.size(); ++a) v[a] = u[a] + r * p[a];
      if (!domain.contains(v)) continue;
      if (engine.forced(phi, v, sections)) return true;
    }
    return false;
  };

  for (std::size_t level = pol.halvings + 1; level-- > 0;) {
    const double eps = pol.radius(level);
    bool ok = near_forced(m, eps);
    std::vector<double> u(m.size());
    for (std::size_t l = level; ok && l <= pol.halvings; ++l) {
      const double r = pol.radius(l);
      for (std::size_t i = 0; ok && i < pol.samples; ++i) {
        const auto p = balls.point(l, i);
        for (std::size_t a = 0; a < u.size(); ++a) u[a] = m[a] + r * p[a];
        if (!domain.contains(u)) continue;
        ok = near_forced(u, eps);
      }
    }
    if (ok) return true;
  }
  return false;
}

bool positive_stability_check(const StructureBundle& sb, const Formula& phi, const std::vector<Section>& sections,
                              std::span<const double> m, const NeighborhoodPolicy& pol) {
  if (!phi.is_positive_without_equality()) {
    throw ValidationError("stability check needs a formula built from relation atoms with &, | and exists only");
  }
  const ForcingEngine engine(sb, pol);
  const auto fs = fiber_structure(sb, m);
  std::vector<FiberPoint> assignment(phi.slot_count());
  for (std::size_t i = 0; i < phi.free_count() && i < sections.size(); ++i) assignment[i] = sections[i].at(m);
  std::vector<FiberPoint> pool;
  for (const auto& w : engine.witness_family(sections)) {
    if (w.domain().contains(m)) pool.push_back(w.at(m));
  }
  if (!tarski_eval(phi, fs, assignment, pool, pol.tol_eq)) return true;
  return engine.forced(phi, m, sections);
}

namespace {

std::size_t nesting(const Formula::Node& n, bool exists_neighborhood) {
  switch (n.kind) {
    case Formula::Kind::Equal:
    case Formula::Kind::Relation:
      return 1;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      return std::max(nesting(*n.lhs, exists_neighborhood), nesting(*n.rhs, exists_neighborhood));
    case Formula::Kind::Implies:
      return 1 + std::max(nesting(*n.lhs, exists_neighborhood), nesting(*n.rhs, exists_neighborhood));
    case Formula::Kind::Not:
    case Formula::Kind::Forall:
      return 1 + nesting(*n.lhs, exists_neighborhood);
    case Formula::Kind::Exists:
      return (exists_neighborhood ? 1 : 0) + nesting(*n.lhs, exists_neighborhood);
  }
  return 1;
}

}  // namespace

std::size_t neighborhood_nesting(const Formula& phi, const NeighborhoodPolicy& pol) {
  return nesting(*phi.root(), pol.exists_neighborhood);
}

}  // namespace fibersem
