#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fibersem/error.hpp"
#include "fibersem/transport.hpp"

using namespace fibersem;

namespace {

const BaseBox kLine = BaseBox::cube(1, -1.0, 1.0);
const BaseBox kPlane = BaseBox::cube(2, -1.0, 1.0);
const BaseBox kFiber = BaseBox::cube(1, -4.0, 4.0);

SmoothMap unit_path() { return SmoothMap::parse(BaseBox::cube(1, 0.0, 1.0), {"t"}, "t"); }

// Vertical part of [X~, Y~] for X~ = d/dx1 + A d/dy, Y~ = d/dx2 + B d/dy:
// dB/dx1 + A dB/dy - dA/dx2 - B dA/dy, all derivatives symbolic.
double analytic_bracket(const Connection& c, const std::vector<double>& at) {
  const Expr& a = c.lift()[0][0];
  const Expr& b = c.lift()[0][1];
  const double av = a.eval(at), bv = b.eval(at);
  return derivative(b, 0).eval(at) + av * derivative(b, 2).eval(at) - derivative(a, 1).eval(at) -
         bv * derivative(a, 2).eval(at);
}

}  // namespace

TEST_CASE("flat transport is constant") {
  const auto c = Connection::flat(kPlane, kFiber);
  CHECK(c.is_flat());
  const auto path = SmoothMap::parse(BaseBox::cube(1, 0.0, 1.0), {"sin(3*t)/2", "t^2 - 0.5"});
  const auto res = parallel_transport(c, path, {1.25}, 0.0, 1.0);
  for (const auto& y : res.y) CHECK(y[0] == 1.25);
}

TEST_CASE("constant lift field gives a linear lift") {
  const auto c = Connection::parse(kLine, kFiber, {{"1"}});
  const auto res = parallel_transport(c, unit_path(), {0.0}, 0.0, 1.0);
  CHECK(std::fabs(res.terminal()[0] - 1.0) <= 1e-8);
  CHECK(res.t.back() == 1.0);
  const auto back = parallel_transport(c, unit_path(), {1.0}, 1.0, 0.0);
  CHECK(std::fabs(back.terminal()[0]) <= 1e-12);
}

TEST_CASE("exponential lift accuracy and fourth-order convergence") {
  const auto c = Connection::parse(kLine, kFiber, {{"y1"}});
  const double err = std::fabs(parallel_transport(c, unit_path(), {1.0}, 0.0, 1.0, 1e-3).terminal()[0] - std::numbers::e);
  CHECK(err <= 1e-6);
  double prev = 0.0;
  for (double h : {0.2, 0.1, 0.05, 0.025}) {
    const double e = std::fabs(parallel_transport(c, unit_path(), {1.0}, 0.0, 1.0, h).terminal()[0] - std::numbers::e);
    if (prev > 0.0) CHECK(prev / e >= 8.0);
    prev = e;
  }
}

TEST_CASE("leaving the fiber box is an escape") {
  const auto c = Connection::parse(kLine, kFiber, {{"y1"}});
  CHECK_THROWS_AS(parallel_transport(c, unit_path(), {3.9}, 0.0, 1.0), TransportEscape);
  const auto out = SmoothMap::parse(BaseBox::cube(1, 0.0, 1.0), {"2*t"});
  CHECK_THROWS_AS(parallel_transport(Connection::flat(kLine, kFiber), out, {0.0}, 0.0, 1.0), TransportEscape);
}

TEST_CASE("lifted sections interpolate the lift") {
  const auto c = Connection::parse(kLine, kFiber, {{"y1"}});
  const auto path = SmoothMap::parse(kLine, {"t"});
  const auto s = lifted_section(c, path, {1.0}, -0.5, 0.75);
  for (double t : {-0.5, -0.3217, 0.0, 0.0004, 0.41, 0.75}) {
    CHECK(s.at(std::vector<double>{t})[0] == doctest::Approx(std::exp(t)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(s.at(std::vector<double>{0.8}), OutOfDomain);
}

TEST_CASE("pullback connections follow the chain rule") {
  const auto c = Connection::parse(BaseBox::cube(1, -2.0, 2.0), kFiber, {{"1"}});
  const auto ident = pullback_connection(c, SmoothMap::identity(c.base()), c.base());
  CHECK(ident.lift()[0][0].eval(std::vector<double>{0.3, 0.1}) == 1.0);

  const auto h = SmoothMap::parse(kLine, {"2*t"});
  const auto pulled = pullback_connection(c, h, kLine);
  CHECK(pulled.lift()[0][0].eval(std::vector<double>{0.3, 0.1}) == doctest::Approx(2.0));
  const auto res = parallel_transport(pulled, unit_path(), {0.0}, 0.0, 0.75);
  CHECK(res.terminal()[0] == doctest::Approx(1.5).epsilon(1e-10));

  const auto sigma = SmoothMap::parse(kLine, {"t", "-t"});
  CHECK(pullback_connection(Connection::flat(kPlane, kFiber), sigma, kLine).is_flat());
}

TEST_CASE("pullback transport equals transport along the pushed path") {
  const auto c = Connection::parse(kPlane, kFiber, {{"y1*x2", "sin(x1) + y1/3"}});
  const auto f = SmoothMap::parse(kLine, {"0.4*t", "0.3 - 0.5*t^2"});
  const auto pulled = pullback_connection(c, f, kLine);
  const auto along = SmoothMap::parse(BaseBox::cube(1, 0.0, 1.0), {"t"});
  const auto pushed = compose(f, along);
  const double lhs = parallel_transport(pulled, along, {0.6}, 0.0, 1.0).terminal()[0];
  const double rhs = parallel_transport(c, pushed, {0.6}, 0.0, 1.0).terminal()[0];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("direct sums act blockwise") {
  const auto c = Connection::parse(kLine, kFiber, {{"y1"}});
  const auto one = direct_sum_connection(c, 1);
  CHECK(one.fiber_dim() == 1);
  CHECK(one.lift()[0][0].eval(std::vector<double>{0.1, 0.7}) == 0.7);
  const auto flat3 = direct_sum_connection(Connection::flat(kLine, kFiber), 3);
  CHECK(flat3.fiber_dim() == 3);
  CHECK(flat3.is_flat());
  const auto two = direct_sum_connection(c, 2);
  const auto res = parallel_transport(two, unit_path(), {1.0, -0.5}, 0.0, 1.0);
  CHECK(res.terminal()[0] == doctest::Approx(std::numbers::e));
  CHECK(res.terminal()[1] == doctest::Approx(-0.5 * std::numbers::e));
}

TEST_CASE("lift uniqueness gap") {
  const auto path = unit_path();
  const auto exp_conn = Connection::parse(kLine, kFiber, {{"y1"}});
  CHECK(lift_uniqueness_gap(exp_conn, path, {0.3}, 0.0, 0.0, 1.0) <= 1e-9);
  CHECK(lift_uniqueness_gap(Connection::flat(kLine, kFiber), path, {0.3}, 0.1, 0.0, 1.0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(std::fabs(lift_uniqueness_gap(exp_conn, path, {0.3}, 0.1, 0.0, 1.0) - 0.1 * std::numbers::e) <= 1e-6);
}

TEST_CASE("curvature of flat and coordinate-constant connections vanishes") {
  const std::vector<double> m{0.2, -0.1};
  CHECK(std::fabs(curvature_estimate(Connection::flat(kPlane, kFiber), m, {0.7}, 0, 1, 1e-2)[0]) <= 1e-10);
  const auto constant = Connection::parse(kPlane, kFiber, {{"1", "-1"}});
  CHECK(std::fabs(curvature_estimate(constant, m, {0.7}, 0, 1, 1e-2)[0]) <= 1e-6);
}

TEST_CASE("curvature matches the analytic bracket of the horizontal lifts") {
  const std::vector<std::string> pool{"x1*y1", "y1^2/4", "sin(x2) + y1", "x1 - x2*y1", "0", "0.5*y1*x1^2"};
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  int checked = 0;
  for (const auto& a : pool) {
    for (const auto& b : pool) {
      const auto c = Connection::parse(kPlane, kFiber, {{a, b}});
      const std::vector<double> m{u(rng), u(rng)};
      const double y = 0.5 + u(rng);
      const double exact = analytic_bracket(c, {m[0], m[1], y});
      const double fd = bracket_curvature(c, m, {y}, 0, 1)[0];
      CHECK(fd == doctest::Approx(exact).epsilon(1e-6).scale(1.0));
      if (std::fabs(exact) > 0.05) {
        const double hol = curvature_estimate(c, m, {y}, 0, 1, 1e-3)[0];
        CHECK_MESSAGE(std::fabs(hol - exact) <= 0.05 * std::fabs(exact), a << ", " << b);
        ++checked;
      }
    }
  }
  CHECK(checked >= 10);
}

TEST_CASE("vertical projection removes the horizontal part") {
  const auto c = Connection::parse(kPlane, kFiber, {{"y1", "x1"}});
  const std::vector<double> m{0.5, 0.1}, y{2.0}, vb{1.0, 3.0};
  const auto vp = c.vertical_part(m, y, vb, std::vector<double>{10.0});
  CHECK(vp[0] == doctest::Approx(10.0 - (2.0 * 1.0 + 0.5 * 3.0)));
}
