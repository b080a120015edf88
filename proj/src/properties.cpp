#include "fibersem/properties.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <random>

#include "fibersem/error.hpp"

namespace fibersem {

namespace {

class Dice {
 public:
  explicit Dice(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  bool coin() { return (rng_() >> 63) != 0; }
  std::uint64_t next() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "(%.6g)", v);
  return buf;
}

std::string var(char prefix, std::size_t i) { return std::string(1, prefix) + std::to_string(i); }

std::shared_ptr<Interpretation> make_interp(Signature sig, std::size_t n, std::size_t k) {
  auto in = std::make_shared<Interpretation>();
  in->signature = std::move(sig);
  in->base_dim = n;
  in->fiber_dim = k;
  return in;
}

// ---------------------------------------------------------------------------

struct PullbackInstance {
  StructureBundle sb;
  Connection c;
  SmoothMap f;
  BaseBox source;
  std::vector<double> n;
  std::vector<FiberPoint> e;
  Formula phi;
  std::string text;
};

PullbackInstance pullback_instance(Dice& dice) {
  const std::size_t n = 1 + dice.pick(2);
  const std::size_t s = 1 + dice.pick(2);
  const BaseBox target = BaseBox::cube(n, -1.0, 1.0);
  const BaseBox fiber = BaseBox::cube(1, -3.0, 3.0);
  const BaseBox source = BaseBox::cube(s, -1.0, 1.0);
  const std::string xl = var('x', n);

  const double a = std::round(dice.uniform(-1.0, 1.0) * 2.0) / 2.0;
  std::string guard;
  switch (dice.pick(6)) {
    case 0: guard = "y1^2"; break;
    case 1: guard = "y1 - " + num(a); break;
    case 2: guard = "1 - x1^2 - y1^2"; break;
    case 3: guard = "sin(3*y1) + " + num(0.5 * a); break;
    case 4: guard = "y1*" + xl + " + " + num(0.5 * a); break;
    default: guard = num(dice.uniform(-1.0, 1.0)) + "*x1 + y1"; break;
  }
  const Signature sig({{"R", 1}}, {}, {});
  auto interp = make_interp(sig, n, 1);
  interp->guards.push_back(parse_expr(guard, argument_vars(n, 1, 1), argument_aliases(n, 1, 1)));
  interp->validate();

  std::vector<std::vector<std::string>> lift(1, std::vector<std::string>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double c = dice.uniform(-1.0, 1.0);
    switch (dice.pick(6)) {
      case 0: lift[0][j] = "0"; break;
      case 1: lift[0][j] = num(c); break;
      case 2: lift[0][j] = "y1"; break;
      case 3: lift[0][j] = num(c) + "*x1"; break;
      case 4: lift[0][j] = num(c) + "*y1*" + var('x', j + 1); break;
      default: lift[0][j] = "sin(" + var('x', j + 1) + ")"; break;
    }
  }
  Connection conn = Connection::parse(target, fiber, lift, "L");

  std::vector<std::string> fcomps;
  const std::string first = s == 1 ? "t" : "u1";
  const std::string last = s == 1 ? "t" : "u2";
  for (std::size_t i = 0; i < n; ++i) {
    fcomps.push_back(num(dice.uniform(-0.3, 0.3)) + " + " + num(dice.uniform(-0.35, 0.35)) + "*" + first + " + " +
                     num(dice.uniform(-0.35, 0.35)) + "*" + last + "^2");
  }
  SmoothMap f = SmoothMap::parse(source, fcomps, "f");

  std::vector<double> pre(s);
  for (auto& v : pre) v = dice.uniform(-0.5, 0.5);

  auto fiber_value = [&] { return dice.coin() ? std::round(dice.uniform(-2.0, 2.0)) / 2.0 : dice.uniform(-1.0, 1.0); };
  FiberPoint e1{fiber_value()};
  FiberPoint e2 = dice.coin() ? e1 : FiberPoint{fiber_value()};

  static const std::vector<std::string> formulas{
      "R(x1)",          "!R(x1)",        "!!R(x1)",          "x1 = x2",
      "R(x1) -> R(x2)", "exists v. R(v)", "R(x1) & !R(x2)",  "R(x1) | x1 = x2",
      "!(x1 = x2)",     "forall v. R(v) | R(x1)"};
  const std::string phi_text = formulas[dice.pick(formulas.size())];
  Formula phi = parse_formula(phi_text, sig, {"x1", "x2"});

  std::string text = "n=" + std::to_string(n) + " s=" + std::to_string(s) + " guard=" + guard + " L=[";
  for (std::size_t j = 0; j < n; ++j) text += (j ? ", " : "") + lift[0][j];
  text += "] f=(";
  for (std::size_t i = 0; i < n; ++i) text += (i ? ", " : "") + fcomps[i];
  char buf[96];
  std::snprintf(buf, sizeof buf, ") e=(%g, %g) phi=", e1[0], e2[0]);
  text += buf + phi_text;

  return {StructureBundle(target, interp, fiber), std::move(conn), std::move(f), source, std::move(pre),
          {std::move(e1), std::move(e2)}, std::move(phi), std::move(text)};
}

// ---------------------------------------------------------------------------

std::string random_guard(Dice& dice, std::size_t n, std::size_t k, std::size_t arity) {
  std::string g = num(dice.uniform(-0.5, 0.5));
  for (std::size_t i = 1; i <= n; ++i) g += " + " + num(dice.uniform(-1.0, 1.0)) + "*" + var('x', i);
  for (std::size_t j = 1; j <= arity; ++j) {
    for (std::size_t i = 1; i <= k; ++i) {
      const std::string y = arity == 1 ? var('y', i) : "y" + std::to_string(j) + std::to_string(i);
      g += " + " + num(dice.uniform(-1.0, 1.0)) + "*" + y;
      if (dice.coin()) g += " + " + num(dice.uniform(-1.0, 1.0)) + "*" + y + "^2";
    }
  }
  if (arity == 2) g += " + " + num(dice.uniform(-1.0, 1.0)) + "*y11*y2" + std::to_string(k);
  return g;
}

std::string random_positive(Dice& dice, std::size_t depth, std::vector<std::string>& names, std::size_t& fresh) {
  auto term = [&] { return names[dice.pick(names.size())]; };
  if (depth == 0 || dice.pick(3) == 0) {
    if (dice.coin()) return "R(" + term() + ")";
    return "S(" + term() + ", " + term() + ")";
  }
  switch (dice.pick(3)) {
    case 0:
      return "(" + random_positive(dice, depth - 1, names, fresh) + " & " + random_positive(dice, depth - 1, names, fresh) +
             ")";
    case 1:
      return "(" + random_positive(dice, depth - 1, names, fresh) + " | " + random_positive(dice, depth - 1, names, fresh) +
             ")";
    default: {
      const std::string v = "v" + std::to_string(++fresh);
      names.push_back(v);
      const std::string body = random_positive(dice, depth - 1, names, fresh);
      names.pop_back();
      return "(exists " + v + ". " + body + ")";
    }
  }
}

}  // namespace

PropertyReport pullback_compatibility_suite(std::size_t trials, std::uint64_t seed, const NeighborhoodPolicy& pol,
                                            const PathOptions& paths) {
  PropertyReport rep;
  Dice dice(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    ++rep.trials;
    const auto inst = pullback_instance(dice);
    PathOptions opt = paths;
    opt.seed = dice.next();
    try {
      const auto fam = PathFamily::generate(inst.source, inst.n, opt);
      const auto m = inst.f.apply(inst.n);
      const auto res = check_pullback_compatibility(inst.sb, inst.c, inst.f, inst.source, m, {inst.n}, inst.e,
                                                    inst.phi, fam, pol);
      if (res.target_side == Decision::Forced) ++rep.forced_instances;
      if (res.equal) {
        ++rep.passed;
      } else {
        rep.failures.push_back("trial " + std::to_string(t) + ": target " + to_string(res.target_side) + ", source " +
                               to_string(res.source_sides.front()) + "; " + inst.text);
      }
    } catch (const Error& err) {
      rep.failures.push_back("trial " + std::to_string(t) + ": error " + err.what() + "; " + inst.text);
    }
  }
  return rep;
}

PropertyReport positive_stability_suite(std::size_t trials, std::uint64_t seed, const NeighborhoodPolicy& pol) {
  PropertyReport rep;
  Dice dice(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    ++rep.trials;
    const std::size_t n = 1 + dice.pick(2);
    const std::size_t k = 1 + dice.pick(2);
    const BaseBox base = BaseBox::cube(n, -1.0, 1.0);
    const BaseBox fiber = BaseBox::cube(k, -2.0, 2.0);
    const Signature sig({{"R", 1}, {"S", 2}}, {}, {});
    auto interp = make_interp(sig, n, k);
    const std::string gr = random_guard(dice, n, k, 1);
    const std::string gs = random_guard(dice, n, k, 2);
    interp->guards.push_back(parse_expr(gr, argument_vars(n, k, 1), argument_aliases(n, k, 1)));
    interp->guards.push_back(parse_expr(gs, argument_vars(n, k, 2), argument_aliases(n, k, 2)));
    interp->validate();
    const StructureBundle sb(base, interp, fiber);

    std::vector<Section> sections;
    const VarList bvars = base_vars(n);
    for (std::size_t s = 0; s < 2; ++s) {
      std::vector<Expr> comps;
      for (std::size_t i = 0; i < k; ++i) {
        comps.push_back(parse_expr(num(dice.uniform(-1.0, 1.0)) + " + " + num(dice.uniform(-1.0, 1.0)) + "*x1 + " +
                                       num(dice.uniform(-1.0, 1.0)) + "*" + var('x', n),
                                   bvars));
      }
      sections.emplace_back(base, std::move(comps), "s" + std::to_string(s + 1));
    }
    std::vector<std::string> names{"x1", "x2"};
    std::size_t fresh = 0;
    const std::string text = random_positive(dice, 3, names, fresh);
    const Formula phi = parse_formula(text, sig, {"x1", "x2"});
    std::vector<double> m(n);
    for (auto& v : m) v = dice.uniform(-0.8, 0.8);

    try {
      if (positive_stability_check(sb, phi, sections, m, pol)) {
        ++rep.passed;
        if (ForcingEngine(sb, pol).forced(phi, m, sections)) ++rep.forced_instances;
      } else {
        rep.failures.push_back("trial " + std::to_string(t) + ": true at m but not forced; phi=" + text + " R=" + gr +
                               " S=" + gs);
      }
    } catch (const Error& err) {
      rep.failures.push_back("trial " + std::to_string(t) + ": error " + err.what());
    }
  }
  return rep;
}

}  // namespace fibersem
