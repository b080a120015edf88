#include "fibersem/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numbers>
#include <random>

#include "fibersem/error.hpp"

namespace fibersem {

PathFamily::PathFamily(std::vector<SmoothMap> paths, std::vector<std::string> labels)
    : paths_(std::move(paths)), labels_(std::move(labels)) {
  if (paths_.size() != labels_.size()) throw Error("every path needs a label");
}

namespace {

bool stays_in(const SmoothMap& path, const BaseBox& box) {
  for (int i = 0; i <= 64; ++i) {
    const double t[1] = {-1.0 + 2.0 * i / 64.0};
    if (!box.contains(path.apply(t))) return false;
  }
  return true;
}

/// m + a * sum_p coeffs[p] t^(p+1).
SmoothMap polynomial_path(std::span<const double> m, const std::vector<std::vector<double>>& coeffs, double a) {
  const VarList vars = SmoothMap::source_vars(1);
  const Expr t = Expr::variable(0, vars);
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < m.size(); ++i) {
    Expr c = Expr::number(m[i], vars);
    for (std::size_t p = 0; p < coeffs.size(); ++p) {
      const double k = a * coeffs[p][i];
      if (k != 0.0) c = c + Expr::number(k, vars) * pow(t, static_cast<int>(p + 1));
    }
    comps.push_back(c);
  }
  return SmoothMap(BaseBox({-1.0}, {1.0}), std::move(comps));
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

PathFamily PathFamily::generate(const BaseBox& box, std::span<const double> m, const PathOptions& opt) {
  if (m.size() != box.dim()) throw Error("path base point has the wrong dimension");
  if (!box.contains(m)) throw OutOfDomain("path base point outside the base box");
  const std::size_t n = m.size();
  std::vector<SmoothMap> paths;
  std::vector<std::string> labels;

  auto add = [&](const std::vector<std::vector<double>>& coeffs, std::string label) {
    double a = opt.amplitude;
    for (int tries = 0; tries < 40; ++tries, a *= 0.5) {
      auto p = polynomial_path(m, coeffs, a);
      if (stays_in(p, box)) {
        paths.push_back(std::move(p));
        labels.push_back(std::move(label));
        return;
      }
    }
  };

  if (opt.include_constant) add({}, "constant");
  for (std::size_t i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> d(n, 0.0);
      d[i] = sign;
      add({d}, std::string(sign > 0 ? "+" : "-") + "axis" + std::to_string(i + 1));
    }
  }
  for (std::size_t j = 0; j < opt.arcs; ++j) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(opt.arcs);
    const std::size_t a0 = j % n;
    const std::size_t a1 = (j + 1) % n;
    std::vector<double> d(n, 0.0), bend(n, 0.0);
    d[a0] += std::cos(theta);
    d[a1] += std::sin(theta);
    bend[a0] += -0.5 * std::sin(theta);
    bend[a1] += 0.5 * std::cos(theta);
    add({d, bend}, "arc" + std::to_string(j));
  }
  std::mt19937_64 rng(opt.seed);
  for (std::size_t j = 0; j < opt.random_paths; ++j) {
    std::vector<std::vector<double>> coeffs(3, std::vector<double>(n));
    for (auto& row : coeffs) {
      for (auto& v : row) v = 2.0 * uniform01(rng) - 1.0;
    }
    add(coeffs, "cubic" + std::to_string(j));
  }
  return PathFamily(std::move(paths), std::move(labels));
}

PathFamily PathFamily::mapped(const SmoothMap& f) const {
  std::vector<SmoothMap> out;
  for (const auto& p : paths_) out.push_back(compose(f, p));
  return PathFamily(std::move(out), labels_);
}

PathFamily PathFamily::with(const SmoothMap& path, std::string label) const {
  auto paths = paths_;
  auto labels = labels_;
  paths.push_back(path);
  labels.push_back(std::move(label));
  return PathFamily(std::move(paths), std::move(labels));
}

// ---------------------------------------------------------------------------

double lift_reach(const Formula& phi, const NeighborhoodPolicy& pol) {
  const double r = 1.05 * static_cast<double>(neighborhood_nesting(phi, pol)) * pol.smallest_radius();
  return std::min(1.0, std::max(r, pol.step));
}

bool forced_along_path(const StructureBundle& sb, const Connection& c, const SmoothMap& path,
                       const std::vector<FiberPoint>& e, const Formula& phi, const NeighborhoodPolicy& pol) {
  if (path.source_dim() != 1) throw Error("paths have one parameter");
  const double reach = lift_reach(phi, pol);
  const double lo = std::max(path.source().lo[0], -reach);
  const double hi = std::min(path.source().hi[0], reach);
  if (!(lo <= 0.0 && 0.0 <= hi && lo < hi)) throw Error("path parameter interval must contain 0");
  const BaseBox interval({lo}, {hi});
  const auto pulled = pullback_bundle(sb, path, interval);
  std::vector<Section> lifts;
  lifts.reserve(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    lifts.push_back(lifted_section(c, path, e[k], lo, hi, pol.step, "lift" + std::to_string(k + 1)));
  }
  const double origin[1] = {0.0};
  return ForcingEngine(pulled, pol).forced(phi, origin, lifts);
}

ParallelVerdict parallel_forced(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                const std::vector<FiberPoint>& e, const Formula& phi, const PathFamily& fam,
                                const NeighborhoodPolicy& pol) {
  if (phi.free_count() > e.size()) throw Error("formula has more free variables than fiber points were given");
  for (const auto& a : e) {
    if (a.size() != sb.fiber_dim()) throw Error("fiber point has the wrong dimension");
  }
  ParallelVerdict v;
  v.decision = Decision::Forced;
  const double origin[1] = {0.0};
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const auto start = fam.paths()[i].apply(origin);
    for (std::size_t a = 0; a < m.size(); ++a) {
      if (std::fabs(start[a] - m[a]) > 1e-9) throw Error("path '" + fam.labels()[i] + "' does not pass through m");
    }
    ++v.paths_checked;
    if (!forced_along_path(sb, c, fam.paths()[i], e, phi, pol)) {
      v.decision = Decision::NotForced;
      v.counterexample = i;
      v.counterexample_label = fam.labels()[i];
      break;
    }
  }
  return v;
}

CompatibilityResult check_pullback_compatibility(const StructureBundle& sb, const Connection& c, const SmoothMap& f,
                                                 const BaseBox& source_box, std::span<const double> m,
                                                 const std::vector<std::vector<double>>& preimages,
                                                 const std::vector<FiberPoint>& e, const Formula& phi,
                                                 const PathFamily& source_family, const NeighborhoodPolicy& pol) {
  for (const auto& n : preimages) {
    const auto image = f.apply(n);
    for (std::size_t a = 0; a < m.size(); ++a) {
      if (std::fabs(image[a] - m[a]) > 1e-9) throw ValidationError("listed point is not a preimage of m");
    }
  }
  CompatibilityResult res;
  res.target_side = parallel_forced(sb, c, m, e, phi, source_family.mapped(f), pol).decision;
  const auto pulled = pullback_bundle(sb, f, source_box);
  const auto pulled_conn = pullback_connection(c, f, source_box);
  for (const auto& n : preimages) {
    const auto d = parallel_forced(pulled, pulled_conn, n, e, phi, source_family, pol).decision;
    res.source_sides.push_back(d);
    if (d != res.target_side) res.equal = false;
  }
  return res;
}

SmoothMap local_line(const BaseBox& box, std::span<const double> p, std::span<const double> d) {
  double lo = -1.0;
  double hi = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (d[i] == 0.0) continue;
    double a = (box.lo[i] - p[i]) / d[i];
    double b = (box.hi[i] - p[i]) / d[i];
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (!(lo < hi)) throw OutOfDomain("line through the point leaves the box immediately");
  const VarList vars = SmoothMap::source_vars(1);
  const Expr t = Expr::variable(0, vars);
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < p.size(); ++i) {
    comps.push_back(d[i] == 0.0 ? Expr::number(p[i], vars) : Expr::number(p[i], vars) + Expr::number(d[i], vars) * t);
  }
  return SmoothMap(BaseBox({lo}, {hi}), std::move(comps), "line");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<long>> king_moves(std::size_t dim) {
  std::vector<std::vector<long>> out;
  std::vector<long> off(dim, -1);
  for (;;) {
    if (std::any_of(off.begin(), off.end(), [](long v) { return v != 0; })) out.push_back(off);
    std::size_t i = dim;
    while (i-- > 0) {
      if (++off[i] <= 1) break;
      off[i] = -1;
      if (i == 0) return out;
    }
  }
}

std::vector<double> unit_direction(std::span<const double> q, std::span<const double> p) {
  std::vector<double> d(p.size());
  double len = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d[i] = q[i] - p[i];
    len += d[i] * d[i];
  }
  len = std::sqrt(len);
  for (auto& v : d) v /= len;
  return d;
}

/// Transports `tuple` (packed) along p -> q at unit speed and checks forcing
/// along the segment direction at every RK4 checkpoint after the start.
bool horizontal_segment(const StructureBundle& sb, const Connection& c, const Connection& csum,
                        std::span<const double> p, std::span<const double> q, const FiberPoint& tuple,
                        std::size_t copies, const Formula& phi, const NeighborhoodPolicy& pol, FiberPoint& out) {
  const auto d = unit_direction(q, p);
  double len = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) len += (q[i] - p[i]) * (q[i] - p[i]);
  len = std::sqrt(len);
  const VarList vars = SmoothMap::source_vars(1);
  const Expr t = Expr::variable(0, vars);
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < p.size(); ++i) comps.push_back(Expr::number(p[i], vars) + Expr::number(d[i], vars) * t);
  const SmoothMap seg(BaseBox({0.0}, {len}), std::move(comps), "segment");
  try {
    const auto tr = parallel_transport(csum, seg, tuple, 0.0, len, pol.step);
    for (std::size_t j = 1; j < tr.t.size(); ++j) {
      const double arg[1] = {tr.t[j]};
      const auto x = seg.apply(arg);
      const auto line = local_line(sb.base(), x, d);
      if (!forced_along_path(sb, c, line, unpack(tr.y[j], copies), phi, pol)) return false;
    }
    out = tr.terminal();
  } catch (const TransportEscape&) {
    return false;
  } catch (const OutOfDomain&) {
    return false;
  }
  return true;
}

bool horizontal_seed(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                     const std::vector<FiberPoint>& e, const Formula& phi, const NeighborhoodPolicy& pol) {
  const std::vector<double> zero(m.size(), 0.0);
  return forced_along_path(sb, c, local_line(sb.base(), m, zero), e, phi, pol);
}

ExtensionSet empty_set(const Grid& grid) {
  ExtensionSet out;
  out.grid = grid;
  out.member.assign(grid.size(), 0);
  out.parent.assign(grid.size(), -1);
  out.tuple.assign(grid.size(), {});
  return out;
}

std::size_t origin_row(const Grid& grid) {
  const std::vector<long> zero(grid.dim(), 0);
  const auto row = grid.flat_of(zero);
  if (!row) throw ValidationError("start point is outside the region");
  return *row;
}

}  // namespace

ExtensionSet horizontal_extension(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                  const std::vector<FiberPoint>& e, const Formula& phi, const BaseBox& region,
                                  double grid_step, const NeighborhoodPolicy& pol) {
  pol.validate();
  if (!sb.base().contains_box(region)) throw ValidationError("region is not inside the base box");
  if (!region.contains(m)) throw ValidationError("start point is outside the region");
  if (e.empty()) throw ValidationError("horizontal extension needs at least one fiber point");
  auto out = empty_set(Grid::over(region, m, grid_step));
  const std::size_t seed = origin_row(out.grid);
  if (!horizontal_seed(sb, c, m, e, phi, pol)) return out;

  const auto csum = direct_sum_connection(c, e.size());
  out.member[seed] = 1;
  out.tuple[seed] = pack(e);
  const auto moves = king_moves(out.grid.dim());
  std::deque<std::size_t> frontier{seed};
  while (!frontier.empty()) {
    const std::size_t row = frontier.front();
    frontier.pop_front();
    const auto idx = out.grid.index_of(row);
    const auto p = out.grid.point(row);
    for (const auto& mv : moves) {
      std::vector<long> nidx(idx);
      for (std::size_t i = 0; i < nidx.size(); ++i) nidx[i] += mv[i];
      const auto next = out.grid.flat_of(nidx);
      if (!next || out.member[*next]) continue;
      const auto q = out.grid.point(*next);
      FiberPoint carried;
      if (!horizontal_segment(sb, c, csum, p, q, out.tuple[row], e.size(), phi, pol, carried)) continue;
      out.member[*next] = 1;
      out.parent[*next] = static_cast<long>(row);
      out.tuple[*next] = std::move(carried);
      frontier.push_back(*next);
    }
  }
  return out;
}

bool recheck_horizontal(const StructureBundle& sb, const Connection& c, const ExtensionSet& ext, std::size_t row,
                        const Formula& phi, const NeighborhoodPolicy& pol) {
  if (row >= ext.member.size() || !ext.member[row]) return false;
  std::vector<std::size_t> chain{row};
  while (ext.parent[chain.back()] >= 0) {
    chain.push_back(static_cast<std::size_t>(ext.parent[chain.back()]));
    if (chain.size() > ext.member.size()) return false;
  }
  std::reverse(chain.begin(), chain.end());
  const std::size_t copies = ext.tuple[chain.front()].size() / sb.fiber_dim();
  const auto start = unpack(ext.tuple[chain.front()], copies);
  const auto m = ext.grid.point(chain.front());
  if (!horizontal_seed(sb, c, m, start, phi, pol)) return false;
  const auto csum = direct_sum_connection(c, copies);
  FiberPoint tuple = ext.tuple[chain.front()];
  for (std::size_t i = 1; i < chain.size(); ++i) {
    FiberPoint carried;
    if (!horizontal_segment(sb, c, csum, ext.grid.point(chain[i - 1]), ext.grid.point(chain[i]), tuple, copies, phi,
                            pol, carried)) {
      return false;
    }
    tuple = std::move(carried);
  }
  return points_equal(tuple, ext.tuple[row], 1e-12);
}

ExtensionSet vertical_extension(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                const std::vector<FiberPoint>& e, const Formula& phi, const BaseBox& region,
                                double grid_step, const PathFamily& fam, const NeighborhoodPolicy& pol,
                                double checkpoint_step) {
  pol.validate();
  if (e.empty()) throw ValidationError("vertical extension needs at least one fiber point");
  const auto start = pack(e);
  if (region.dim() != start.size()) throw ValidationError("fiber region must have one axis per tuple component");
  if (!region.contains(start)) throw ValidationError("start tuple is outside the fiber region");
  if (checkpoint_step <= 0.0) checkpoint_step = pol.step;
  const std::size_t copies = e.size();

  auto out = empty_set(Grid::over(region, start, grid_step));
  const std::size_t seed = origin_row(out.grid);
  auto forced_at = [&](std::span<const double> tuple) {
    return parallel_forced(sb, c, m, unpack(tuple, copies), phi, fam, pol).forced();
  };
  if (!forced_at(start)) return out;
  out.member[seed] = 1;
  out.tuple[seed] = start;

  std::vector<char> endpoint_failed(out.member.size(), 0);
  const auto moves = king_moves(out.grid.dim());
  std::deque<std::size_t> frontier{seed};
  while (!frontier.empty()) {
    const std::size_t row = frontier.front();
    frontier.pop_front();
    const auto idx = out.grid.index_of(row);
    const auto p = out.grid.point(row);
    for (const auto& mv : moves) {
      std::vector<long> nidx(idx);
      for (std::size_t i = 0; i < nidx.size(); ++i) nidx[i] += mv[i];
      const auto next = out.grid.flat_of(nidx);
      if (!next || out.member[*next] || endpoint_failed[*next]) continue;
      const auto q = out.grid.point(*next);
      if (!forced_at(q)) {
        endpoint_failed[*next] = 1;
        continue;
      }
      double len = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) len += (q[i] - p[i]) * (q[i] - p[i]);
      len = std::sqrt(len);
      const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(len / checkpoint_step - 1e-9)));
      bool ok = true;
      std::vector<double> x(p.size());
      for (std::size_t j = 1; ok && j < pieces; ++j) {
        const double s = static_cast<double>(j) / static_cast<double>(pieces);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = p[i] + s * (q[i] - p[i]);
        ok = forced_at(x);
      }
      if (!ok) continue;
      out.member[*next] = 1;
      out.parent[*next] = static_cast<long>(row);
      out.tuple[*next] = q;
      frontier.push_back(*next);
    }
  }
  return out;
}

DiagonalCheck diagonal_extension_check(const StructureBundle& sb, const Connection& c, std::span<const double> m,
                                       double a, const BaseBox& fiber_region, double fiber_step,
                                       const BaseBox& base_region, double base_step, const PathFamily& fam,
                                       const NeighborhoodPolicy& pol, double checkpoint_step) {
  DiagonalCheck res;
  if (sb.fiber_dim() != 1) {
    res.diagnostic = "diagonal check needs a one-dimensional fiber";
    return res;
  }
  const std::vector<double> start{a, a};
  if (fiber_region.dim() != 2 || !fiber_region.contains(start)) {
    res.diagnostic = "fiber region does not contain the start tuple (a, a), so it misses the diagonal";
    return res;
  }
  const auto phi = parse_formula("x1 = x2", sb.signature(), {"x1", "x2"});
  const std::vector<FiberPoint> e{{a}, {a}};

  const auto vert = vertical_extension(sb, c, m, e, phi, fiber_region, fiber_step, fam, pol, checkpoint_step);
  res.vertical_is_diagonal = true;
  for (std::size_t i = 0; i < vert.member.size(); ++i) {
    const auto idx = vert.grid.index_of(i);
    const bool diagonal = idx[0] == idx[1];
    if (static_cast<bool>(vert.member[i]) != diagonal) {
      res.vertical_is_diagonal = false;
      const auto p = vert.grid.point(i);
      res.diagnostic = "vertical extension disagrees with the diagonal at (" + std::to_string(p[0]) + ", " +
                       std::to_string(p[1]) + ")";
      break;
    }
  }

  const auto hor = horizontal_extension(sb, c, m, e, phi, base_region, base_step, pol);
  res.horizontal_is_everything = hor.member_count() == hor.member.size();
  if (!res.horizontal_is_everything && res.diagnostic.empty()) {
    res.diagnostic = "horizontal extension misses " + std::to_string(hor.member.size() - hor.member_count()) +
                     " grid points";
  }
  res.ok = res.vertical_is_diagonal && res.horizontal_is_everything;
  return res;
}

}  // namespace fibersem
