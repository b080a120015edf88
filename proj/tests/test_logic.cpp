#include <doctest.h>

#include <functional>
#include <random>

#include "fibersem/error.hpp"
#include "fibersem/logic.hpp"

using namespace fibersem;

namespace {

std::shared_ptr<Interpretation> one_dim(const std::string& guard) {
  auto in = std::make_shared<Interpretation>();
  in->signature = Signature({{"R", 1}}, {{"f", 1}}, {"c"});
  in->base_dim = 1;
  in->fiber_dim = 1;
  in->guards.push_back(parse_expr(guard, argument_vars(1, 1, 1), argument_aliases(1, 1, 1)));
  in->functions.push_back({parse_expr("2*y11", argument_vars(1, 1, 1), argument_aliases(1, 1, 1))});
  in->constants.push_back({parse_expr("x1", base_vars(1))});
  in->validate();
  return in;
}

}  // namespace

TEST_CASE("formula trees") {
  const Signature sig({{"R", 1}}, {}, {});
  const auto dn = parse_formula("!!R(s)", sig, {"s"});
  REQUIRE(dn.root()->kind == Formula::Kind::Not);
  REQUIRE(dn.root()->lhs->kind == Formula::Kind::Not);
  CHECK(dn.root()->lhs->lhs->kind == Formula::Kind::Relation);
  CHECK(dn.root()->lhs->lhs->terms.at(0).index == 0);

  CHECK(parse_formula("x1 = x2", sig, {"x1", "x2"}).root()->kind == Formula::Kind::Equal);
  const auto ex = parse_formula("exists v. R(v)", sig, {});
  REQUIRE(ex.root()->kind == Formula::Kind::Exists);
  CHECK(ex.root()->lhs->kind == Formula::Kind::Relation);
  CHECK(ex.slot_count() == 1);
}

TEST_CASE("precedence: ! over & over | over ->") {
  const Signature sig({{"R", 1}}, {}, {});
  const auto f = parse_formula("!R(x1) & R(x2) | R(x1) -> R(x2)", sig, {"x1", "x2"});
  REQUIRE(f.root()->kind == Formula::Kind::Implies);
  REQUIRE(f.root()->lhs->kind == Formula::Kind::Or);
  REQUIRE(f.root()->lhs->lhs->kind == Formula::Kind::And);
  CHECK(f.root()->lhs->lhs->lhs->kind == Formula::Kind::Not);
}

TEST_CASE("formula errors") {
  const Signature sig({{"R", 1}, {"S", 2}}, {}, {});
  CHECK_THROWS_AS(parse_formula("R(x1, x1)", sig, {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_formula("T(x1)", sig, {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_formula("R(z)", sig, {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_formula("R(x1) &", sig, {"x1"}), ParseError);
  CHECK_THROWS_AS(Signature({{"R", 1}, {"R", 2}}, {}, {}), ValidationError);
}

TEST_CASE("syntactic classes") {
  const Signature sig({{"R", 1}}, {}, {});
  CHECK(parse_formula("R(x1) & exists v. R(v) | R(x1)", sig, {"x1"}).is_positive_without_equality());
  CHECK_FALSE(parse_formula("R(x1) & x1 = x1", sig, {"x1"}).is_positive_without_equality());
  CHECK_FALSE(parse_formula("!R(x1)", sig, {"x1"}).is_positive_without_equality());
  CHECK(parse_formula("!!R(x1)", sig, {"x1"}).negation_depth() == 2);
  CHECK(parse_formula("R(x1) -> !R(x1)", sig, {"x1"}).negation_depth() == 2);
  CHECK(parse_formula("forall v. R(v)", sig, {}).negation_depth() == 1);
}

TEST_CASE("terms") {
  const auto in = one_dim("y1^2");
  const FiberStructure fs(in, {3.0});
  const std::vector<FiberPoint> a{{5.0}};
  CHECK(eval_term(Term::variable(0), fs, a) == FiberPoint{5.0});
  CHECK(eval_term(Term::constant(0), fs, a) == FiberPoint{3.0});
  CHECK(eval_term(Term::function(0, {Term::variable(0)}), fs, a) == FiberPoint{10.0});
  CHECK(eval_term(Term::function(0, {Term::function(0, {Term::constant(0)})}), fs, a) == FiberPoint{12.0});
}

TEST_CASE("truth in a fiber where R means z != 0") {
  const auto in = one_dim("y1^2");
  const FiberStructure fs(in, {0.0});
  const auto r = parse_formula("R(x1)", in->signature, {"x1"});
  const std::vector<FiberPoint> zero{{0.0}}, one{{1.0}};
  CHECK_FALSE(tarski_eval(r, fs, zero, {}));
  CHECK(tarski_eval(r, fs, one, {}));
  const auto refl = parse_formula("x1 = x1", in->signature, {"x1"});
  for (double v : {-2.0, 0.0, 0.3}) CHECK(tarski_eval(refl, fs, std::vector<FiberPoint>{{v}}, {}));
}

TEST_CASE("quantifiers range over the witness pool") {
  const auto in = one_dim("y1 - 1");
  const FiberStructure fs(in, {0.0});
  const auto ex = parse_formula("exists v. R(v)", in->signature, {});
  const auto all = parse_formula("forall v. R(v)", in->signature, {});
  const std::vector<FiberPoint> low{{0.0}, {0.5}}, mixed{{0.0}, {2.0}}, high{{2.0}, {3.0}};
  CHECK_FALSE(tarski_eval(ex, fs, {}, low));
  CHECK(tarski_eval(ex, fs, {}, mixed));
  CHECK_FALSE(tarski_eval(all, fs, {}, mixed));
  CHECK(tarski_eval(all, fs, {}, high));
}

TEST_CASE("connectives agree with a direct boolean oracle") {
  const auto in = std::make_shared<Interpretation>();
  in->signature = Signature({{"R", 1}, {"S", 2}}, {}, {});
  in->base_dim = 1;
  in->fiber_dim = 1;
  in->guards.push_back(parse_expr("y1 - x1", argument_vars(1, 1, 1), argument_aliases(1, 1, 1)));
  in->guards.push_back(parse_expr("y11 - y21", argument_vars(1, 1, 2), argument_aliases(1, 1, 2)));
  in->validate();

  using Oracle = std::function<bool(double m, double a, double b)>;
  const std::vector<std::pair<std::string, Oracle>> cases{
      {"R(x1) & !R(x2)", [](double m, double a, double b) { return a > m && !(b > m); }},
      {"R(x1) | S(x2, x1)", [](double m, double a, double b) { return a > m || b > a; }},
      {"R(x1) -> S(x1, x2)", [](double m, double a, double b) { return !(a > m) || a > b; }},
      {"!(x1 = x2) -> R(x2)", [](double m, double a, double b) { return a == b || b > m; }},
      {"S(x1, x2) <-> !S(x2, x1)", [](double, double a, double b) { return (a > b) == !(b > a); }},
  };
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(-2, 2);
  for (const auto& [text, oracle] : cases) {
    const auto phi = parse_formula(text, in->signature, {"x1", "x2"});
    for (int trial = 0; trial < 60; ++trial) {
      const double m = pick(rng) * 0.5;
      const double a = pick(rng) * 0.5;
      const double b = pick(rng) * 0.5;
      const FiberStructure fs(in, {m});
      CHECK_MESSAGE(tarski_eval(phi, fs, std::vector<FiberPoint>{{a}, {b}}, {}) == oracle(m, a, b), text);
    }
  }
}

TEST_CASE("equality uses the tolerance componentwise") {
  CHECK(points_equal({1.0, 2.0}, {1.0 + 1e-12, 2.0}, 1e-9));
  CHECK_FALSE(points_equal({1.0, 2.0}, {1.0, 2.0 + 1e-6}, 1e-9));
}

TEST_CASE("interpretation tables must match the signature") {
  auto in = std::make_shared<Interpretation>();
  in->signature = Signature({{"R", 1}}, {}, {});
  in->base_dim = 1;
  in->fiber_dim = 1;
  CHECK_THROWS_AS(in->validate(), ValidationError);
}
