#include "fibersem/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "fibersem/error.hpp"
#include "fibersem/model.hpp"
#include "fibersem/parallel.hpp"
#include "fibersem/properties.hpp"
#include "fibersem/transport.hpp"

namespace fibersem {

namespace {

struct Outcome {
  std::string observed;
  bool pass = false;
};

struct RowSpec {
  std::string key;
  std::string group;
  std::string expected;
  std::function<Outcome(const SuiteOptions&)> run;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Model model(const SuiteOptions& opt, const std::string& file) { return load_model(opt.models_dir + "/" + file); }

Formula formula(const Model& m, const std::string& text, std::vector<std::string> free = {"x1"}) {
  return parse_formula(text, m.bundle().signature(), free);
}

std::pair<double, double> interval_ends(const ExtensionSet& set) {
  const auto members = set.members();
  if (members.empty()) return {NAN, NAN};
  double lo = members.front()[0];
  double hi = lo;
  for (const auto& p : members) {
    lo = std::min(lo, p[0]);
    hi = std::max(hi, p[0]);
  }
  return {lo, hi};
}

/// A member set is an interval when every grid point between its ends is in.
bool contiguous(const ExtensionSet& set) {
  const auto [lo, hi] = interval_ends(set);
  for (std::size_t i = 0; i < set.member.size(); ++i) {
    const double x = set.grid.point(i)[0];
    if (x >= lo && x <= hi && !set.member[i]) return false;
  }
  return true;
}

Outcome ball_extension(const SuiteOptions& opt, const std::string& conn, double expected_end) {
  const auto m = model(opt, "unit_ball.model");
  const double origin[1] = {0.0};
  const auto ext = horizontal_extension(m.bundle(), m.connection(conn), origin, {{0.0}}, formula(m, "R(x1)"),
                                        m.bundle().base(), 0.01, opt.policy);
  const auto [lo, hi] = interval_ends(ext);
  const bool ok = contiguous(ext) && std::fabs(lo + expected_end) <= 0.02 && std::fabs(hi - expected_end) <= 0.02;
  return {"interval [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "], " + std::to_string(ext.member_count()) +
              " grid points",
          ok};
}

std::vector<RowSpec> rows() {
  std::vector<RowSpec> r;

  r.push_back({"equality-instability", "pointwise", "s1(0) = s2(0) classically; x1 = x2 NotForced at 0",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "equality_instability.model");
                 const auto phi = formula(m, "x1 = x2", {"x1", "x2"});
                 const double origin[1] = {0.0};
                 const std::vector<Section> s{m.section("s1"), m.section("s2")};
                 const auto fs = fiber_structure(m.bundle(), origin);
                 const std::vector<FiberPoint> values{s[0].at(origin), s[1].at(origin)};
                 const bool classical = tarski_eval(phi, fs, values, {}, opt.policy.tol_eq);
                 const auto v = force(m.bundle(), origin, phi, s, opt.policy);
                 return {std::string("classical ") + (classical ? "true" : "false") + ", " + to_string(v.decision),
                         classical && !v.forced()};
               }});

  r.push_back({"double-negation-origin", "pointwise", "!!R(s) Forced at (0,0)", [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "pullback_counterexample.model");
                 const double origin[2] = {0.0, 0.0};
                 const auto v = force(m.bundle(), origin, formula(m, "!!R(x1)"), {m.section("s")}, opt.policy);
                 return {to_string(v.decision) + (v.forced() ? " (eps " + fmt("%g", *v.witness_eps) + ")" : ""),
                         v.forced()};
               }});

  r.push_back({"double-negation-pullback", "pointwise", "!!R(s o sigma) NotForced at 0 on the sigma-pullback",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "pullback_counterexample.model");
                 const auto& sigma = m.map("sigma");
                 const auto pulled = pullback_bundle(m.bundle(), sigma, sigma.source());
                 const auto s = pullback_section(m.section("s"), sigma, sigma.source());
                 const double origin[1] = {0.0};
                 const auto v = force(pulled, origin, formula(m, "!!R(x1)"), {s}, opt.policy);
                 return {to_string(v.decision), !v.forced()};
               }});

  r.push_back({"density-double-negation", "pointwise", "R(s) dense at (0,0), agreeing with !!R(s) Forced",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "pullback_counterexample.model");
                 const double origin[2] = {0.0, 0.0};
                 const bool dense = density_check(m.bundle(), formula(m, "R(x1)"), {m.section("s")}, origin, opt.policy);
                 const auto v = force(m.bundle(), origin, formula(m, "!!R(x1)"), {m.section("s")}, opt.policy);
                 return {std::string(dense ? "dense" : "not dense") + ", !!R " + to_string(v.decision),
                         dense && v.forced()};
               }});

  r.push_back({"parallel-counterexample", "parallel", "!R(s) Forced at 0 but not parallel forced under the shear",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "parallel_counterexample.model");
                 const double origin[1] = {0.0};
                 const auto phi = formula(m, "!R(x1)");
                 const auto v = force(m.bundle(), origin, phi, {m.section("s")}, opt.policy);
                 PathOptions po;
                 po.seed = opt.seed;
                 const auto fam = PathFamily::generate(m.bundle().base(), origin, po);
                 const auto pv = parallel_forced(m.bundle(), m.connection("shear"), origin, {{0.0}}, phi, fam, opt.policy);
                 return {"pointwise " + to_string(v.decision) + ", parallel " + to_string(pv.decision) +
                             (pv.counterexample ? " along " + pv.counterexample_label : ""),
                         v.forced() && !pv.forced() && pv.counterexample.has_value()};
               }});

  r.push_back({"parallel-ball-centre", "parallel", "R(x1) parallel forced at the centre of the ball, flat",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "unit_ball.model");
                 const double origin[1] = {0.0};
                 PathOptions po;
                 po.seed = opt.seed;
                 const auto fam = PathFamily::generate(m.bundle().base(), origin, po);
                 const auto pv = parallel_forced(m.bundle(), m.connection("flat"), origin, {{0.0}}, formula(m, "R(x1)"),
                                                 fam, opt.policy);
                 return {to_string(pv.decision) + " over " + std::to_string(pv.paths_checked) + " paths", pv.forced()};
               }});

  r.push_back({"ball-flat-extension", "extension", "interval with ends within 0.02 of -1 and 1",
               [](const SuiteOptions& opt) { return ball_extension(opt, "flat", 1.0); }});
  r.push_back({"ball-shear-extension", "extension", "interval with ends within 0.02 of -0.7071 and 0.7071",
               [](const SuiteOptions& opt) { return ball_extension(opt, "shear", std::numbers::sqrt2 / 2.0); }});

  r.push_back({"axis-complement-negation", "extension", "!R members are exactly the first-axis grid points",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "axis_complement.model");
                 const double origin[2] = {0.0, 0.0};
                 const auto ext = horizontal_extension(m.bundle(), m.connection("flat"), origin, {{0.0}},
                                                       formula(m, "!R(x1)"), m.bundle().base(), 0.05, opt.policy);
                 std::size_t wrong = 0;
                 std::size_t axis = 0;
                 for (std::size_t i = 0; i < ext.member.size(); ++i) {
                   const bool on_axis = ext.grid.point(i)[1] == 0.0;
                   axis += on_axis ? 1 : 0;
                   if (static_cast<bool>(ext.member[i]) != on_axis) ++wrong;
                 }
                 return {std::to_string(ext.member_count()) + " members, " + std::to_string(axis) + " axis points, " +
                             std::to_string(wrong) + " mismatches",
                         wrong == 0};
               }});

  r.push_back({"axis-complement-relation", "extension", "R extension from the origin is empty",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "axis_complement.model");
                 const double origin[2] = {0.0, 0.0};
                 const auto ext = horizontal_extension(m.bundle(), m.connection("flat"), origin, {{0.0}},
                                                       formula(m, "R(x1)"), m.bundle().base(), 0.05, opt.policy);
                 return {std::to_string(ext.member_count()) + " members", ext.member_count() == 0};
               }});

  for (const std::string conn : {"flat", "shear"}) {
    r.push_back({"diagonal-" + conn, "extension", "vertical extension of x1 = x2 is the diagonal; horizontal is all",
                 [conn](const SuiteOptions& opt) -> Outcome {
                   const auto m = model(opt, "diagonal.model");
                   const double origin[1] = {0.0};
                   PathOptions po;
                   po.seed = opt.seed;
                   const auto fam = PathFamily::generate(m.bundle().base(), origin, po);
                   const auto res = diagonal_extension_check(m.bundle(), m.connection(conn), origin, 0.0,
                                                             BaseBox({-1.0, -1.0}, {1.0, 1.0}), 0.25, m.bundle().base(),
                                                             0.1, fam, opt.policy);
                   return {std::string(res.vertical_is_diagonal ? "diagonal" : "not diagonal") + ", " +
                               (res.horizontal_is_everything ? "whole base" : "partial base") +
                               (res.diagnostic.empty() ? "" : " (" + res.diagnostic + ")"),
                           res.ok};
                 }});
  }

  r.push_back({"transport-exponential", "transport",
               "y' = y x1' lifts 1 to e within 1e-6 at h = 1e-3; each halving of h gains at least 8x",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "transport.model");
                 const auto& c = m.connection("scaling");
                 const auto& line = m.map("line");
                 const double err = std::fabs(parallel_transport(c, line, {1.0}, 0.0, 1.0, 1e-3).terminal()[0] -
                                              std::numbers::e);
                 // Below h ~ 5e-3 the error sits at the rounding floor, so the
                 // order is measured on a coarser halving chain.
                 double ratio = INFINITY;
                 double prev = 0.0;
                 for (double h : {0.1, 0.05, 0.025, 0.0125}) {
                   const double e = std::fabs(parallel_transport(c, line, {1.0}, 0.0, 1.0, h).terminal()[0] -
                                              std::numbers::e);
                   if (prev > 0.0) ratio = std::min(ratio, prev / e);
                   prev = e;
                 }
                 return {"error " + fmt("%.2e", err) + ", worst halving ratio " + fmt("%.2f", ratio) +
                             " (h 0.1 to 0.0125)",
                         err <= 1e-6 && ratio >= 8.0};
               }});

  r.push_back({"lift-uniqueness", "transport", "gap at delta = 0 below 1e-9 for every shipped connection",
               [](const SuiteOptions& opt) -> Outcome {
                 double worst = 0.0;
                 std::size_t count = 0;
                 for (const char* file : {"equality_instability.model", "pullback_counterexample.model",
                                          "parallel_counterexample.model", "unit_ball.model", "axis_complement.model",
                                          "transport.model", "diagonal.model"}) {
                   const auto m = model(opt, file);
                   const auto& base = m.bundle().base();
                   const auto& fb = m.bundle().fiber_box();
                   std::vector<double> p(base.dim()), q(base.dim());
                   for (std::size_t i = 0; i < base.dim(); ++i) {
                     p[i] = 0.5 * (base.lo[i] + base.hi[i]);
                     q[i] = p[i] + 0.25 * (base.hi[i] - base.lo[i]);
                   }
                   FiberPoint a(fb.dim());
                   for (std::size_t i = 0; i < fb.dim(); ++i) a[i] = 0.5 * (fb.lo[i] + fb.hi[i]) + 0.05 * (fb.hi[i] - fb.lo[i]);
                   const auto path = segment_path(p, q);
                   for (const auto& c : m.connections()) {
                     worst = std::max(worst, lift_uniqueness_gap(c, path, a, 0.0, 0.0, 1.0, opt.policy.step));
                     ++count;
                   }
                 }
                 return {std::to_string(count) + " connections, worst gap " + fmt("%.1e", worst), worst <= 1e-9};
               }});

  r.push_back({"curvature-flat", "transport", "flat connection holonomy below 1e-10",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "transport.model");
                 const double p[2] = {0.2, -0.1};
                 const auto est = curvature_estimate(m.connection("flat"), p, {0.7}, 0, 1, 1e-3, opt.policy.step);
                 return {"estimate " + fmt("%.1e", est[0]), std::fabs(est[0]) <= 1e-10};
               }});

  r.push_back({"curvature-twisted", "transport", "holonomy of L = [y1, x1*y1] within 5% of the bracket",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto m = model(opt, "transport.model");
                 const double p[2] = {0.2, -0.1};
                 const auto& c = m.connection("twisted");
                 const auto est = curvature_estimate(c, p, {0.7}, 0, 1, 1e-3, opt.policy.step);
                 const auto ref = bracket_curvature(c, p, {0.7}, 0, 1);
                 const double rel = std::fabs(est[0] - ref[0]) / std::fabs(ref[0]);
                 return {"estimate " + fmt("%.6f", est[0]) + ", bracket " + fmt("%.6f", ref[0]), rel <= 0.05};
               }});

  r.push_back({"pullback-theorem", "theorems", "all random pullback instances agree",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto rep = pullback_compatibility_suite(opt.trials, opt.seed, opt.policy);
                 return {std::to_string(rep.passed) + "/" + std::to_string(rep.trials) + " agree (" +
                             std::to_string(rep.forced_instances) + " Forced)" +
                             (rep.failures.empty() ? "" : "; first: " + rep.failures.front()),
                         rep.ok()};
               }});

  r.push_back({"positive-stability", "theorems", "all random positive formulas true at m are forced at m",
               [](const SuiteOptions& opt) -> Outcome {
                 const auto rep = positive_stability_suite(opt.trials, opt.seed, opt.policy);
                 return {std::to_string(rep.passed) + "/" + std::to_string(rep.trials) + " stable (" +
                             std::to_string(rep.forced_instances) + " Forced)" +
                             (rep.failures.empty() ? "" : "; first: " + rep.failures.front()),
                         rep.ok()};
               }});
  return r;
}

}  // namespace

std::vector<std::string> suite_groups() { return {"pointwise", "parallel", "extension", "transport", "theorems"}; }

std::vector<std::string> suite_keys() {
  std::vector<std::string> keys;
  for (const auto& r : rows()) keys.push_back(r.key);
  return keys;
}

std::vector<SuiteRow> run_suite(const SuiteOptions& opt) {
  opt.policy.validate();
  const auto specs = rows();
  for (const auto& name : opt.only) {
    const auto groups = suite_groups();
    const bool known = std::find(groups.begin(), groups.end(), name) != groups.end() ||
                       std::any_of(specs.begin(), specs.end(), [&](const RowSpec& s) { return s.key == name; });
    if (!known) throw ValidationError("unknown suite row or group '" + name + "'");
  }
  std::vector<SuiteRow> out;
  for (const auto& spec : specs) {
    if (!opt.only.empty() &&
        std::find(opt.only.begin(), opt.only.end(), spec.key) == opt.only.end() &&
        std::find(opt.only.begin(), opt.only.end(), spec.group) == opt.only.end()) {
      continue;
    }
    SuiteRow row{spec.key, spec.group, spec.expected, {}, false, 0.0};
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto res = spec.run(opt);
      row.observed = res.observed;
      row.pass = res.pass;
    } catch (const std::exception& err) {
      row.observed = std::string("error: ") + err.what();
      row.pass = false;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace fibersem
