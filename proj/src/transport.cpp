#include "fibersem/transport.hpp"

#include <algorithm>
#include <cmath>

#include "fibersem/error.hpp"

namespace fibersem {

Connection::Connection(BaseBox base, BaseBox fiber_box, std::vector<std::vector<Expr>> lift, std::string name)
    : base_(std::move(base)), fiber_box_(std::move(fiber_box)), lift_(std::move(lift)), name_(std::move(name)) {
  if (lift_.size() != fiber_dim()) throw ValidationError("lift field needs one row per fiber axis");
  for (const auto& row : lift_) {
    if (row.size() != base_dim()) throw ValidationError("lift field needs one column per base axis");
    for (const auto& e : row) {
      if (e.var_count() != base_dim() + fiber_dim()) {
        throw ValidationError("lift entries must use x1..xn, y1..yk");
      }
    }
  }
}

Connection Connection::flat(BaseBox base, BaseBox fiber_box, std::string name) {
  const VarList vars = total_vars(base.dim(), fiber_box.dim());
  std::vector<std::vector<Expr>> lift(fiber_box.dim(), std::vector<Expr>(base.dim(), Expr::number(0.0, vars)));
  return Connection(std::move(base), std::move(fiber_box), std::move(lift), std::move(name));
}

Connection Connection::parse(BaseBox base, BaseBox fiber_box, const std::vector<std::vector<std::string>>& entries,
                             std::string name) {
  const VarList vars = total_vars(base.dim(), fiber_box.dim());
  std::vector<std::vector<Expr>> lift(fiber_box.dim(), std::vector<Expr>(base.dim(), Expr::number(0.0, vars)));
  if (entries.size() > fiber_box.dim()) throw ValidationError("too many lift rows");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].size() > base.dim()) throw ValidationError("too many lift columns");
    for (std::size_t j = 0; j < entries[i].size(); ++j) {
      if (!entries[i][j].empty()) lift[i][j] = parse_expr(entries[i][j], vars);
    }
  }
  return Connection(std::move(base), std::move(fiber_box), std::move(lift), std::move(name));
}

bool Connection::is_flat() const {
  for (const auto& row : lift_) {
    for (const auto& e : row) {
      if (!e.is_zero()) return false;
    }
  }
  return true;
}

void Connection::fiber_velocity(std::span<const double> m, std::span<const double> y, std::span<const double> v,
                                std::span<double> out) const {
  const std::size_t n = base_dim();
  const std::size_t k = fiber_dim();
  double values[32];
  std::vector<double> heap;
  double* buf = values;
  if (n + k > 32) {
    heap.resize(n + k);
    buf = heap.data();
  }
  std::copy(m.begin(), m.end(), buf);
  std::copy(y.begin(), y.end(), buf + n);
  const std::span<const double> point(buf, n + k);
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (v[j] != 0.0 && !lift_[i][j].is_zero()) acc += lift_[i][j].eval(point) * v[j];
    }
    out[i] = acc;
  }
}

FiberPoint Connection::vertical_part(std::span<const double> m, std::span<const double> y,
                                     std::span<const double> v_base, std::span<const double> v_fiber) const {
  FiberPoint lifted(fiber_dim());
  fiber_velocity(m, y, v_base, lifted);
  FiberPoint out(fiber_dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v_fiber[i] - lifted[i];
  return out;
}

namespace {

class LiftOde {
 public:
  LiftOde(const Connection& c, const SmoothMap& path) : c_(c), path_(path) {
    if (path.source_dim() != 1 || path.target_dim() != c.base_dim()) {
      throw Error("transport needs a path into the connection's base");
    }
  }

  void rhs(double t, std::span<const double> y, std::span<double> out) const {
    const double arg[1] = {t};
    const auto m = path_.apply(arg);
    if (!c_.base().contains(m, 1e-9)) throw TransportEscape("path leaves the base box at t = " + std::to_string(t));
    const auto v = path_.velocity(t);
    c_.fiber_velocity(m, y, v, out);
  }

 private:
  const Connection& c_;
  const SmoothMap& path_;
};

void check_fiber(const Connection& c, const FiberPoint& y, double t) {
  for (double v : y) {
    if (!std::isfinite(v)) throw TransportEscape("lift diverged at t = " + std::to_string(t));
  }
  if (!c.fiber_box().contains(y, 1e-9)) {
    throw TransportEscape("lift leaves the fiber box at t = " + std::to_string(t) +
                          " (connection is not complete on this box)");
  }
}

}  // namespace

TransportResult parallel_transport(const Connection& c, const SmoothMap& path, const FiberPoint& a0, double t0,
                                   double t1, double h) {
  if (!(h > 0.0)) throw Error("transport step must be positive");
  if (a0.size() != c.fiber_dim()) throw Error("initial fiber point has the wrong dimension");
  const LiftOde ode(c, path);
  const double span = t1 - t0;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(std::fabs(span) / h - 1e-9)));
  const double dt = span / static_cast<double>(steps);
  const std::size_t k = a0.size();

  TransportResult res;
  res.step = std::fabs(dt);
  res.t.reserve(steps + 1);
  res.y.reserve(steps + 1);
  res.dy.reserve(steps + 1);

  FiberPoint y = a0;
  check_fiber(c, y, t0);
  FiberPoint k1(k), k2(k), k3(k), k4(k), tmp(k);
  ode.rhs(t0, y, k1);
  res.t.push_back(t0);
  res.y.push_back(y);
  res.dy.push_back(k1);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + dt * static_cast<double>(s);
    for (std::size_t i = 0; i < k; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    ode.rhs(t + 0.5 * dt, tmp, k2);
    for (std::size_t i = 0; i < k; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    ode.rhs(t + 0.5 * dt, tmp, k3);
    for (std::size_t i = 0; i < k; ++i) tmp[i] = y[i] + dt * k3[i];
    const double tn = s + 1 == steps ? t1 : t0 + dt * static_cast<double>(s + 1);
    ode.rhs(tn, tmp, k4);
    for (std::size_t i = 0; i < k; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    check_fiber(c, y, tn);
    ode.rhs(tn, y, k1);
    res.t.push_back(tn);
    res.y.push_back(y);
    res.dy.push_back(k1);
  }
  return res;
}

Section lifted_section(const Connection& c, const SmoothMap& path, const FiberPoint& a0, double lo, double hi,
                       double h, std::string name) {
  if (!(lo <= 0.0 && hi >= 0.0 && lo < hi)) throw Error("lift interval must contain 0");
  TransportResult fwd;
  TransportResult bwd;
  if (hi > 0.0) fwd = parallel_transport(c, path, a0, 0.0, hi, h);
  if (lo < 0.0) bwd = parallel_transport(c, path, a0, 0.0, lo, h);
  if (fwd.t.empty()) {
    fwd.t = {0.0};
    fwd.y = {bwd.y.front()};
    fwd.dy = {bwd.dy.front()};
  }

  struct Table {
    std::vector<double> t;
    std::vector<FiberPoint> y;
    std::vector<FiberPoint> dy;
  };
  auto table = std::make_shared<Table>();
  for (std::size_t i = bwd.t.size(); i-- > 1;) {
    table->t.push_back(bwd.t[i]);
    table->y.push_back(bwd.y[i]);
    table->dy.push_back(bwd.dy[i]);
  }
  table->t.insert(table->t.end(), fwd.t.begin(), fwd.t.end());
  table->y.insert(table->y.end(), fwd.y.begin(), fwd.y.end());
  table->dy.insert(table->dy.end(), fwd.dy.begin(), fwd.dy.end());

  auto eval = [table](std::span<const double> base_point, std::span<double> out) {
    const double t = base_point[0];
    const auto& ts = table->t;
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    if (hi == 0) hi = 1;
    if (hi >= ts.size()) hi = ts.size() - 1;
    const std::size_t lo = hi - 1;
    const double width = ts[hi] - ts[lo];
    const double s = (t - ts[lo]) / width;
    if (s == 0.0) {
      std::copy(table->y[lo].begin(), table->y[lo].end(), out.begin());
      return;
    }
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = h00 * table->y[lo][i] + h10 * width * table->dy[lo][i] + h01 * table->y[hi][i] +
               h11 * width * table->dy[hi][i];
    }
  };
  return Section(BaseBox({lo}, {hi}), a0.size(), std::move(eval), std::move(name));
}

Connection pullback_connection(const Connection& c, const SmoothMap& h, const BaseBox& source_box) {
  if (h.target_dim() != c.base_dim()) throw Error("map target dimension does not match the connection base");
  const SmoothMap restricted(source_box, h.components(), h.name());
  check_image(restricted, c.base());

  const std::size_t s = h.source_dim();
  const std::size_t n = c.base_dim();
  const std::size_t k = c.fiber_dim();
  const VarList vars = total_vars(s, k);

  std::vector<Expr> repl = h.components_over(vars);
  for (std::size_t i = 0; i < k; ++i) repl.push_back(Expr::variable(s + i, vars));

  std::vector<Expr> coords;
  for (std::size_t i = 0; i < s; ++i) coords.push_back(Expr::variable(i, vars));
  const auto jac = h.jacobian();
  std::vector<std::vector<Expr>> jac_over(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < s; ++b) jac_over[a].push_back(substitute(jac[a][b], coords, vars));
  }

  std::vector<std::vector<Expr>> lift(k, std::vector<Expr>(s, Expr::number(0.0, vars)));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      if (c.lift()[i][a].is_zero()) continue;
      const Expr moved = substitute(c.lift()[i][a], repl, vars);
      for (std::size_t b = 0; b < s; ++b) lift[i][b] = lift[i][b] + moved * jac_over[a][b];
    }
  }
  return Connection(source_box, c.fiber_box(), std::move(lift), c.name() + "*");
}

Connection direct_sum_connection(const Connection& c, std::size_t copies) {
  if (copies == 0) throw ValidationError("direct sum needs at least one copy");
  const std::size_t n = c.base_dim();
  const std::size_t k = c.fiber_dim();
  const VarList vars = total_vars(n, k * copies);
  std::vector<double> lo, hi;
  std::vector<std::vector<Expr>> lift;
  for (std::size_t b = 0; b < copies; ++b) {
    std::vector<Expr> repl;
    for (std::size_t i = 0; i < n; ++i) repl.push_back(Expr::variable(i, vars));
    for (std::size_t i = 0; i < k; ++i) repl.push_back(Expr::variable(n + b * k + i, vars));
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<Expr> row;
      for (const auto& e : c.lift()[i]) row.push_back(substitute(e, repl, vars));
      lift.push_back(std::move(row));
    }
    lo.insert(lo.end(), c.fiber_box().lo.begin(), c.fiber_box().lo.end());
    hi.insert(hi.end(), c.fiber_box().hi.begin(), c.fiber_box().hi.end());
  }
  return Connection(c.base(), BaseBox(std::move(lo), std::move(hi)), std::move(lift), c.name());
}

double lift_uniqueness_gap(const Connection& c, const SmoothMap& path, const FiberPoint& a, double delta, double t0,
                           double t1, double h) {
  FiberPoint shifted = a;
  for (auto& v : shifted) v += delta;
  const auto first = parallel_transport(c, path, a, t0, t1, h);
  const auto second = parallel_transport(c, path, shifted, t0, t1, h);
  double gap = 0.0;
  for (std::size_t s = 0; s < first.y.size(); ++s) {
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::fabs(first.y[s][i] - second.y[s][i]));
  }
  return gap;
}

SmoothMap segment_path(std::span<const double> p, std::span<const double> q) {
  const VarList vars = SmoothMap::source_vars(1);
  const Expr t = Expr::variable(0, vars);
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = q[i] - p[i];
    comps.push_back(Expr::number(p[i], vars) + Expr::number(d, vars) * t);
  }
  return SmoothMap(BaseBox({0.0}, {1.0}), std::move(comps), "segment");
}

FiberPoint curvature_estimate(const Connection& c, std::span<const double> m, const FiberPoint& a, std::size_t i,
                              std::size_t j, double r, double h) {
  if (i >= c.base_dim() || j >= c.base_dim() || i == j) throw Error("curvature needs two distinct base axes");
  if (!(r > 0.0)) throw Error("loop size must be positive");
  std::vector<std::vector<double>> corners(5, std::vector<double>(m.begin(), m.end()));
  corners[1][i] += r;
  corners[2][i] += r;
  corners[2][j] += r;
  corners[3][j] += r;
  for (const auto& p : corners) {
    if (!c.base().contains(p)) throw TransportEscape("curvature loop leaves the base box");
  }
  // Parameter step such that each side takes at least 8 RK4 steps.
  const double step = std::min(h / r, 1.0 / 8.0);
  FiberPoint y = a;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto seg = segment_path(corners[s], corners[s + 1]);
    y = parallel_transport(c, seg, y, 0.0, 1.0, step).terminal();
  }
  FiberPoint out(a.size());
  for (std::size_t s = 0; s < a.size(); ++s) out[s] = (y[s] - a[s]) / (r * r);
  return out;
}

FiberPoint bracket_curvature(const Connection& c, std::span<const double> m, const FiberPoint& a, std::size_t i,
                             std::size_t j, double delta) {
  const std::size_t n = c.base_dim();
  const std::size_t k = c.fiber_dim();
  if (i >= n || j >= n || i == j) throw Error("curvature needs two distinct base axes");
  // Horizontal lift of e_axis at a total-space point p = (x, y): (e_axis, L(p) e_axis).
  auto field = [&](std::size_t axis, const std::vector<double>& p) {
    std::vector<double> v(n + k, 0.0);
    v[axis] = 1.0;
    std::vector<double> unit(n, 0.0);
    unit[axis] = 1.0;
    c.fiber_velocity(std::span<const double>(p.data(), n), std::span<const double>(p.data() + n, k), unit,
                     std::span<double>(v.data() + n, k));
    return v;
  };
  // Directional derivative of field(axis) along w at p.
  auto derivative_along = [&](std::size_t axis, const std::vector<double>& p, const std::vector<double>& w) {
    std::vector<double> plus(p), minus(p);
    for (std::size_t q = 0; q < p.size(); ++q) {
      plus[q] += delta * w[q];
      minus[q] -= delta * w[q];
    }
    const auto fp = field(axis, plus);
    const auto fm = field(axis, minus);
    std::vector<double> d(p.size());
    for (std::size_t q = 0; q < p.size(); ++q) d[q] = (fp[q] - fm[q]) / (2.0 * delta);
    return d;
  };
  std::vector<double> p(m.begin(), m.end());
  p.insert(p.end(), a.begin(), a.end());
  const auto x = field(i, p);
  const auto y = field(j, p);
  const auto dy_x = derivative_along(j, p, x);
  const auto dx_y = derivative_along(i, p, y);
  std::vector<double> bracket(n + k);
  for (std::size_t q = 0; q < n + k; ++q) bracket[q] = dy_x[q] - dx_y[q];
  return c.vertical_part(m, a, std::span<const double>(bracket.data(), n),
                         std::span<const double>(bracket.data() + n, k));
}

}  // namespace fibersem
