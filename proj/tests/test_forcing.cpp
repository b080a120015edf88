#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "fibersem/error.hpp"
#include "fibersem/forcing.hpp"

using namespace fibersem;

namespace {

std::shared_ptr<Interpretation> interp(std::size_t n, const std::string& guard) {
  auto in = std::make_shared<Interpretation>();
  in->signature = Signature({{"R", 1}}, {}, {});
  in->base_dim = n;
  in->fiber_dim = 1;
  in->guards.push_back(parse_expr(guard, argument_vars(n, 1, 1), argument_aliases(n, 1, 1)));
  in->validate();
  return in;
}

StructureBundle plane(const std::string& guard) {
  return StructureBundle(BaseBox::cube(2, -1.0, 1.0), interp(2, guard), BaseBox::cube(1, -3.0, 3.0));
}

Section section(const BaseBox& box, const std::string& text, std::size_t n) {
  return Section(box, {parse_expr(text, base_vars(n))}, text);
}

Formula formula(const StructureBundle& sb, const std::string& text, std::vector<std::string> free = {"x1"}) {
  return parse_formula(text, sb.signature(), free);
}

const std::vector<double> kOrigin2{0.0, 0.0};

}  // namespace

TEST_CASE("radius schedule") {
  NeighborhoodPolicy pol;
  CHECK(pol.radius(0) == 0.5);
  CHECK(pol.radius(3) == 0.0625);
  CHECK(pol.smallest_radius() == 0.5 / 256.0);
  pol.eps0 = 0.0;
  CHECK_THROWS_AS(pol.validate(), ValidationError);
  pol = {};
  pol.samples = 0;
  CHECK_THROWS_AS(pol.validate(), ValidationError);
}

TEST_CASE("ball samples lie in the unit ball and avoid the axes") {
  const BallSamples bs(2, 9, 64);
  for (std::size_t k = 0; k < bs.levels(); ++k) {
    for (std::size_t i = 0; i < bs.per_level(); ++i) {
      const auto p = bs.point(k, i);
      CHECK(p[0] * p[0] + p[1] * p[1] <= 1.0);
      CHECK(p[0] != 0.0);
      CHECK(p[0] + p[1] != 0.0);
    }
  }
}

TEST_CASE("equality of crossing sections is not forced") {
  const BaseBox line = BaseBox::cube(1, -1.0, 1.0);
  const StructureBundle sb(line, interp(1, "y1"), BaseBox::cube(1, -2.0, 2.0));
  const std::vector<Section> s{section(line, "x1", 1), section(line, "-x1", 1)};
  const auto phi = formula(sb, "x1 = x2", {"x1", "x2"});
  const std::vector<double> m{0.0};
  CHECK(tarski_eval(phi, fiber_structure(sb, m), std::vector<FiberPoint>{s[0].at(m), s[1].at(m)}, {}));
  CHECK(force(sb, m, phi, s).decision == Decision::NotForced);
  const std::vector<Section> same{s[0], s[0]};
  const auto v = force(sb, m, phi, same);
  CHECK(v.forced());
  CHECK(*v.witness_eps == 0.5);
}

TEST_CASE("double negation survives at the origin but not on the pullback") {
  const auto sb = plane("y1^2");
  const Section s = section(sb.base(), "x1 + x2", 2);
  const auto phi = formula(sb, "!!R(x1)");
  CHECK(force(sb, kOrigin2, phi, {s}).forced());
  CHECK_FALSE(force(sb, kOrigin2, formula(sb, "R(x1)"), {s}).forced());

  const BaseBox src = BaseBox::cube(1, -1.0, 1.0);
  const auto sigma = SmoothMap::parse(src, {"t", "-t"});
  const auto pulled = pullback_bundle(sb, sigma, src);
  const auto ps = pullback_section(s, sigma, src);
  CHECK(force(pulled, std::vector<double>{0.0}, phi, {ps}).decision == Decision::NotForced);
}

TEST_CASE("identity is forced at the largest radius") {
  const auto sb = plane("y1 - x1");
  const Section s = section(sb.base(), "x1*x2", 2);
  for (const auto& m : {kOrigin2, std::vector<double>{0.9, -0.3}}) {
    const auto v = force(sb, m, formula(sb, "x1 = x1"), {s});
    REQUIRE(v.forced());
    CHECK(*v.witness_eps == 0.5);
  }
}

TEST_CASE("spatial extension of R(s) misses exactly the line x1 + x2 = 0") {
  const auto sb = plane("y1^2");
  const Section s = section(sb.base(), "x1 + x2", 2);
  const auto ext = spatial_extension(sb, formula(sb, "R(x1)"), {s}, sb.base(), 0.1);
  REQUIRE(ext.member.size() == 21 * 21);
  for (std::size_t i = 0; i < ext.member.size(); ++i) {
    const auto u = ext.grid.point(i);
    CHECK(static_cast<bool>(ext.member[i]) == (std::fabs(u[0] + u[1]) > 1e-9));
  }
  CHECK(spatial_extension(sb, formula(sb, "x1 = x1"), {s}, sb.base(), 0.25).member_count() == 81);
  CHECK(spatial_extension(sb, formula(sb, "!(x1 = x1)"), {s}, sb.base(), 0.25).member_count() == 0);
}

TEST_CASE("density") {
  const auto sb = plane("y1^2");
  const Section s = section(sb.base(), "x1 + x2", 2);
  CHECK(density_check(sb, formula(sb, "R(x1)"), {s}, kOrigin2));
  const auto never = plane("-1 + 0*y1");
  CHECK_FALSE(density_check(never, formula(never, "R(x1)"), {s}, kOrigin2));
  const auto always = plane("1 + 0*y1");
  CHECK(density_check(always, formula(always, "R(x1)"), {s}, kOrigin2));
}

TEST_CASE("positive stability") {
  const auto sb = plane("y1 - 0.25");
  const Section s = section(sb.base(), "0.5 + x1", 2);
  CHECK(positive_stability_check(sb, formula(sb, "R(x1)"), {s}, kOrigin2));
  CHECK(force(sb, kOrigin2, formula(sb, "R(x1)"), {s}).forced());
  CHECK(positive_stability_check(sb, formula(sb, "R(x1)"), {s}, std::vector<double>{-0.5, 0.0}));
  CHECK_THROWS_AS(positive_stability_check(sb, formula(sb, "R(x1) & x1 = x1"), {s}, kOrigin2), ValidationError);
  CHECK_THROWS_AS(positive_stability_check(sb, formula(sb, "!R(x1)"), {s}, kOrigin2), ValidationError);
}

TEST_CASE("depth budget") {
  const auto sb = plane("y1");
  const Section s = section(sb.base(), "x1", 2);
  NeighborhoodPolicy pol;
  pol.depth = 3;
  CHECK_NOTHROW(force(sb, kOrigin2, formula(sb, "!!!R(x1)"), {s}, pol));
  CHECK_THROWS_AS(force(sb, kOrigin2, formula(sb, "!!!!R(x1)"), {s}, pol), DepthExhausted);
  CHECK(neighborhood_nesting(formula(sb, "!!R(x1)"), pol) >= 2);
}

TEST_CASE("free variables need sections") {
  const auto sb = plane("y1");
  CHECK_THROWS_AS(force(sb, kOrigin2, formula(sb, "x1 = x2", {"x1", "x2"}), {section(sb.base(), "x1", 2)}), Error);
  CHECK_THROWS_AS(force(sb, std::vector<double>{3.0, 0.0}, formula(sb, "R(x1)"), {section(sb.base(), "x1", 2)}),
                  Error);
}

TEST_CASE("forced negation-free formulas are classically true") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<std::string> templates{"R(x1)",           "R(x1) & R(x2)", "R(x1) | x1 = x2", "exists v. R(v) & R(x2)",
                                           "forall v. R(v)",  "x1 = x2",       "R(x2) | R(x1)",   "exists v. v = x1 & R(v)"};
  int forced = 0;
  for (int trial = 0; trial < 60; ++trial) {
    char guard[96];
    std::snprintf(guard, sizeof guard, "%.4f + %.4f*x1 + y1 + %.4f*y1^2", 0.3 * u(rng), u(rng), u(rng));
    const auto sb = plane(guard);
    char a[64], b[64];
    std::snprintf(a, sizeof a, "%.4f + %.4f*x2", u(rng), u(rng));
    std::snprintf(b, sizeof b, "%.4f*x1", u(rng));
    const std::vector<Section> s{section(sb.base(), a, 2), section(sb.base(), b, 2)};
    const std::vector<double> m{0.8 * u(rng), 0.8 * u(rng)};
    const ForcingEngine engine(sb, {});
    std::vector<FiberPoint> pool;
    for (const auto& w : engine.witness_family(s)) pool.push_back(w.at(m));
    const std::vector<FiberPoint> values{s[0].at(m), s[1].at(m)};
    for (const auto& text : templates) {
      const auto phi = formula(sb, text, {"x1", "x2"});
      if (engine.forced(phi, m, s)) {
        ++forced;
        CHECK_MESSAGE(tarski_eval(phi, fiber_structure(sb, m), values, pool), text << " with guard " << guard);
      }
    }
  }
  CHECK(forced > 50);
}

TEST_CASE("verdicts are deterministic") {
  const auto sb = plane("y1^2 - x1*x2");
  const Section s = section(sb.base(), "x1 - x2^2", 2);
  const auto phi = formula(sb, "!!(R(x1) | exists v. R(v) & !R(x1))");
  const auto a = force(sb, std::vector<double>{0.1, 0.2}, phi, {s});
  const auto b = force(sb, std::vector<double>{0.1, 0.2}, phi, {s});
  CHECK(a.decision == b.decision);
  CHECK(a.witness_eps == b.witness_eps);
  CHECK(a.samples_evaluated == b.samples_evaluated);
}
