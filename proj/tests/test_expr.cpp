#include <doctest.h>

#include <cmath>
#include <random>

#include "fibersem/error.hpp"
#include "fibersem/expr.hpp"

using namespace fibersem;

namespace {

double central_difference(const Expr& e, std::vector<double> p, std::size_t i, double h = 1e-6) {
  const double x = p[i];
  p[i] = x + h;
  const double up = e.eval(p);
  p[i] = x - h;
  const double down = e.eval(p);
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("grammar builds the expected trees") {
  const auto e = parse_expr("x1 + x2", {"x1", "x2"});
  CHECK(e.kind() == Expr::Kind::Add);
  CHECK(e.root()->lhs->kind == Expr::Kind::Variable);
  CHECK(e.root()->lhs->index == 0);
  CHECK(e.root()->rhs->index == 1);

  const auto ball = parse_expr("1 - y1^2 - y2^2", {"y1", "y2"});
  CHECK(ball.kind() == Expr::Kind::Sub);
  CHECK(ball.depends_on(0));
  CHECK(ball.depends_on(1));
}

TEST_CASE("precedence and unary minus") {
  CHECK(eval_expr(parse_expr("2 + 3 * 4", std::vector<std::string>{}), {}) == 14.0);
  CHECK(eval_expr(parse_expr("-x1^2", {"x1"}), {{"x1", 3.0}}) == -9.0);
  CHECK(eval_expr(parse_expr("(1 + 2) * x1", {"x1"}), {{"x1", 2.0}}) == 6.0);
  CHECK(eval_expr(parse_expr("x1 / 4 - 1", {"x1"}), {{"x1", 2.0}}) == -0.5);
}

TEST_CASE("undeclared variable is reported with its name") {
  try {
    parse_expr("x1 + q", {"x1"});
    FAIL("expected UndeclaredVariable");
  } catch (const UndeclaredVariable& err) {
    CHECK(err.name() == "q");
    CHECK(err.offset() == 5);
  }
}

TEST_CASE("malformed text is a parse error") {
  CHECK_THROWS_AS(parse_expr("x1 +", {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_expr("(x1", {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_expr("x1 x1", {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_expr("", {"x1"}), ParseError);
}

TEST_CASE("evaluation") {
  CHECK(eval_expr(parse_expr("x1 + x2", {"x1", "x2"}), {{"x1", 1.0}, {"x2", 2.0}}) == 3.0);
  const double h = std::sqrt(2.0) / 2.0;
  CHECK(std::fabs(eval_expr(parse_expr("1 - y1^2 - y2^2", {"y1", "y2"}), {{"y1", h}, {"y2", h}})) <= 1e-12);
  CHECK(eval_expr(parse_expr("exp(0) + cos(0) + abs(-2) + sqrt(9)", std::vector<std::string>{}), {}) == 7.0);
}

TEST_CASE("domain errors name the offending subtree") {
  CHECK_THROWS_AS(eval_expr(parse_expr("sqrt(x1)", {"x1"}), {{"x1", -1.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(parse_expr("1 / x1", {"x1"}), {{"x1", 0.0}}), DomainError);
  try {
    eval_expr(parse_expr("2 + sqrt(x1)", {"x1"}), {{"x1", -1.0}});
  } catch (const DomainError& err) {
    CHECK(err.subtree().find("sqrt") != std::string::npos);
  }
}

TEST_CASE("forward-mode derivatives") {
  CHECK(diff_expr(parse_expr("x1^2", {"x1"}), {{"x1", 3.0}}, "x1") == doctest::Approx(6.0));
  CHECK(diff_expr(parse_expr("sin(x1)", {"x1"}), {{"x1", 0.0}}, "x1") == doctest::Approx(1.0));
  const auto prod = parse_expr("x1*x2", {"x1", "x2"});
  CHECK(diff_expr(prod, {{"x1", 2.0}, {"x2", 5.0}}, "x2") == doctest::Approx(central_difference(prod, {2.0, 5.0}, 1)));
  CHECK_THROWS_AS(diff_expr(parse_expr("abs(x1)", {"x1"}), {{"x1", 0.0}}, "x1"), NonDifferentiable);
  CHECK_THROWS_AS(diff_expr(parse_expr("sqrt(x1)", {"x1"}), {{"x1", 0.0}}, "x1"), NonDifferentiable);
}

TEST_CASE("aliases resolve to declared positions") {
  const auto vars = make_vars({"x1", "y11"});
  const auto e = parse_expr("x1 + 10*y1", vars, {{"y1", 1}});
  CHECK(e.eval(std::vector<double>{1.0, 2.0}) == 21.0);
}

TEST_CASE("symbolic, forward-mode and finite-difference derivatives agree") {
  const std::vector<std::string> pool{"sin(x1*x2) + x1^3",       "exp(-x1^2) * cos(x2)",   "x1 / (2 + x2^2)",
                                      "sqrt(4 + x1^2 + x2^2)",   "(x1 - x2)^4 - 3*x1*x2",  "cos(sin(x1) + x2) * x2"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (const auto& text : pool) {
    const auto e = parse_expr(text, {"x1", "x2"});
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<double> p{u(rng), u(rng)};
      for (std::size_t i = 0; i < 2; ++i) {
        const double fd = central_difference(e, p, i);
        CHECK(e.diff(p, i) == doctest::Approx(fd).epsilon(1e-6));
        CHECK(derivative(e, i).eval(p) == doctest::Approx(e.diff(p, i)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("printing parses back to the same function") {
  const std::vector<std::string> pool{"-x1^2 + 3*x2", "x1 - (x2 - 1)", "2/(x1 + 3)", "sin(x1)^2 + cos(x2)^2",
                                      "-(x1*x2) - -x1"};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& text : pool) {
    const auto e = parse_expr(text, {"x1", "x2"});
    const auto back = parse_expr(to_string(e), {"x1", "x2"});
    for (int trial = 0; trial < 10; ++trial) {
      const std::vector<double> p{u(rng), u(rng)};
      CHECK(back.eval(p) == doctest::Approx(e.eval(p)).epsilon(1e-14));
    }
  }
}

TEST_CASE("substitution composes") {
  const auto outer = parse_expr("x1^2 + x2", {"x1", "x2"});
  const auto target = make_vars({"t"});
  const std::vector<Expr> repl{parse_expr("2*t", target), parse_expr("sin(t)", target)};
  const auto composed = substitute(outer, repl, target);
  for (double t : {-0.7, 0.0, 0.3, 1.1}) {
    CHECK(composed.eval(std::vector<double>{t}) == doctest::Approx(4.0 * t * t + std::sin(t)));
  }
}

TEST_CASE("constant folding") {
  CHECK(parse_expr("2 * 3 + 1", std::vector<std::string>{}).is_constant());
  CHECK(derivative(parse_expr("x1^2 + 3", {"x1", "x2"}), 1).is_zero());
  CHECK_FALSE(parse_expr("x1 - x1 + 1", {"x1"}).is_constant());
}
