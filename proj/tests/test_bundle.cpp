#include <doctest.h>

#include <cmath>

#include "fibersem/bundle.hpp"
#include "fibersem/error.hpp"

using namespace fibersem;

namespace {

StructureBundle z_nonzero_bundle() {
  auto in = std::make_shared<Interpretation>();
  in->signature = Signature({{"R", 1}}, {{"f", 1}}, {"c"});
  in->base_dim = 2;
  in->fiber_dim = 1;
  in->guards.push_back(parse_expr("y1^2 + 0*x1", argument_vars(2, 1, 1), argument_aliases(2, 1, 1)));
  in->functions.push_back({parse_expr("2*y11", argument_vars(2, 1, 1), argument_aliases(2, 1, 1))});
  in->constants.push_back({parse_expr("x1 - x2", base_vars(2))});
  in->validate();
  return StructureBundle(BaseBox::cube(2, -1.0, 1.0), in, BaseBox::cube(1, -3.0, 3.0));
}

}  // namespace

TEST_CASE("boxes") {
  const BaseBox b({-1.0, 0.0}, {1.0, 2.0});
  CHECK(b.contains(std::vector<double>{0.0, 2.0}));
  CHECK_FALSE(b.contains(std::vector<double>{0.0, 2.1}));
  CHECK_THROWS_AS(BaseBox({1.0}, {1.0}), ValidationError);
  const auto i = b.intersect(BaseBox::cube(2, 0.5, 3.0));
  CHECK(i.lo == std::vector<double>{0.5, 0.5});
  CHECK(i.hi == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(b.intersect(BaseBox::cube(2, 5.0, 6.0)), ValidationError);
  CHECK(b.contains_box(i));
}

TEST_CASE("sections of the crossing pair") {
  const BaseBox line = BaseBox::cube(1, -1.0, 1.0);
  const Section s1(line, {parse_expr("x1", base_vars(1))}, "s1");
  const Section s2(line, {parse_expr("-x1", base_vars(1))}, "s2");
  CHECK(eval_section(s1, std::vector<double>{0.0}) == FiberPoint{0.0});
  CHECK(eval_section(s2, std::vector<double>{1.0}) == FiberPoint{-1.0});
  const auto c = Section::constant(line, {4.0, -1.0});
  for (double x : {-1.0, 0.2, 1.0}) CHECK(c.at(std::vector<double>{x}) == FiberPoint{4.0, -1.0});
  CHECK_THROWS_AS(s1.at(std::vector<double>{1.5}), OutOfDomain);
}

TEST_CASE("fiber structures pin the base point") {
  const auto sb = z_nonzero_bundle();
  const auto fs = fiber_structure(sb, std::vector<double>{0.0, 0.0});
  CHECK_FALSE(fs.holds(0, std::vector<FiberPoint>{{0.0}}));
  CHECK(fs.holds(0, std::vector<FiberPoint>{{0.5}}));
  CHECK(fiber_structure(sb, std::vector<double>{0.5, -0.5}).constant(0) == FiberPoint{1.0});
  CHECK_THROWS_AS(fiber_structure(sb, std::vector<double>{2.0, 0.0}), OutOfDomain);
}

TEST_CASE("direct sums and packing") {
  const auto sb = z_nonzero_bundle();
  CHECK(direct_sum(sb, 2).fiber_dim == 2);
  CHECK(direct_sum(sb, 1).fiber_dim == 1);
  const std::vector<FiberPoint> pts{{1.0, 2.0}, {3.0, 4.0}};
  const auto packed = pack(pts);
  CHECK(packed == FiberPoint{1.0, 2.0, 3.0, 4.0});
  CHECK(unpack(packed, 2) == pts);
}

TEST_CASE("pullback along the identity keeps every fiber") {
  const auto sb = z_nonzero_bundle();
  const auto pulled = pullback_bundle(sb, SmoothMap::identity(sb.base()), sb.base());
  for (double x : {-0.8, 0.0, 0.6}) {
    for (double y : {-0.4, 0.3}) {
      const std::vector<double> m{x, y};
      const auto a = fiber_structure(sb, m);
      const auto b = fiber_structure(pulled, m);
      for (double z : {-1.0, 0.0, 0.7}) {
        const std::vector<FiberPoint> arg{{z}};
        CHECK(a.guard(0, arg) == doctest::Approx(b.guard(0, arg)));
        CHECK(a.apply(0, arg) == b.apply(0, arg));
      }
      CHECK(a.constant(0) == b.constant(0));
    }
  }
}

TEST_CASE("pullback along a constant map repeats one fiber") {
  const auto sb = z_nonzero_bundle();
  const BaseBox src = BaseBox::cube(1, -1.0, 1.0);
  const auto h = SmoothMap::parse(src, {"0.25", "-0.5"}, "h");
  const auto pulled = pullback_bundle(sb, h, src);
  const auto ref = fiber_structure(sb, std::vector<double>{0.25, -0.5});
  for (double t : {-1.0, -0.3, 0.0, 0.9}) {
    const auto fs = fiber_structure(pulled, std::vector<double>{t});
    CHECK(fs.constant(0) == ref.constant(0));
    for (int i = -6; i <= 6; ++i) {
      const std::vector<FiberPoint> arg{{0.5 * i}};
      CHECK(fs.guard(0, arg) == ref.guard(0, arg));
      CHECK(fs.apply(0, arg) == ref.apply(0, arg));
    }
  }
}

TEST_CASE("terms of sections are sections") {
  const auto sb = z_nonzero_bundle();
  const Section s(sb.base(), {parse_expr("x1", base_vars(2))}, "s");
  const auto var = term_section(Term::variable(0), {s}, sb);
  const auto doubled = term_section(Term::function(0, {Term::variable(0)}), {s}, sb);
  const auto constant = term_section(Term::constant(0), {s}, sb);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> m{-1.0 + 2.0 * i / 49.0, 0.3 - 0.01 * i};
    CHECK(var.at(m) == s.at(m));
    CHECK(doubled.at(m)[0] == doctest::Approx(2.0 * m[0]));
    CHECK(constant.at(m)[0] == doctest::Approx(m[0] - m[1]));
  }
}

TEST_CASE("pulled-back sections compose") {
  const auto sb = z_nonzero_bundle();
  const Section s(sb.base(), {parse_expr("x1 + x2", base_vars(2))}, "s");
  const BaseBox src = BaseBox::cube(1, -1.0, 1.0);
  const auto sigma = SmoothMap::parse(src, {"t", "-t"}, "sigma");
  const auto ps = pullback_section(s, sigma, src);
  for (double t : {-1.0, -0.2, 0.5}) CHECK(std::fabs(ps.at(std::vector<double>{t})[0]) <= 1e-15);
}

TEST_CASE("smooth maps") {
  const BaseBox src = BaseBox::cube(2, -1.0, 1.0);
  const auto f = SmoothMap::parse(src, {"u1*u2", "sin(u1) + u2^2"}, "f");
  const auto jac = f.jacobian();
  const std::vector<double> p{0.3, -0.6};
  const double h = 1e-6;
  for (std::size_t j = 0; j < 2; ++j) {
    auto up = p, down = p;
    up[j] += h;
    down[j] -= h;
    const auto fu = f.apply(up), fd = f.apply(down);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(jac[i][j].eval(p) == doctest::Approx((fu[i] - fd[i]) / (2.0 * h)).epsilon(1e-7));
    }
  }
  const auto path = SmoothMap::parse(BaseBox::cube(1, 0.0, 1.0), {"t^2", "3*t"});
  const auto v = path.velocity(0.5);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(3.0));

  const auto inner = SmoothMap::parse(BaseBox::cube(1, -1.0, 1.0), {"t/2", "t/3"});
  const auto both = compose(f, inner);
  CHECK(both.apply(std::vector<double>{0.6})[0] == doctest::Approx(0.3 * 0.2));
}

TEST_CASE("images are checked against the target box") {
  const BaseBox target = BaseBox::cube(1, -1.0, 1.0);
  CHECK_NOTHROW(check_image(SmoothMap::parse(BaseBox::cube(1, -1.0, 1.0), {"t^3"}), target));
  CHECK_THROWS_AS(check_image(SmoothMap::parse(BaseBox::cube(1, -1.0, 1.0), {"2*t"}), target), ImageEscape);
}
