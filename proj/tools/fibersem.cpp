// fibersem command-line front end. Exit codes: 0 computed, 1 negative
// verdict under --assert, 2 error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fibersem/emit.hpp"
#include "fibersem/error.hpp"
#include "fibersem/model.hpp"
#include "fibersem/parallel.hpp"
#include "fibersem/properties.hpp"
#include "fibersem/suite.hpp"

#ifndef FIBERSEM_MODELS_DIR
#define FIBERSEM_MODELS_DIR "models"
#endif

using namespace fibersem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kEngineVersion = "fibersem 1.0.0";

struct Flags {
  std::string model;
  std::string at;
  std::string fiber;
  std::string formula;
  std::string conn;
  std::vector<std::string> sections;
  std::string region;
  double grid = 0.01;
  double checkpoint = 0.0;
  NeighborhoodPolicy pol;
  std::size_t paths = 16;
  std::uint64_t seed = 7;
  std::size_t trials = 200;
  bool assert_verdict = false;
  std::string report;
  std::vector<std::string> only;
  std::string csv;
  std::string svg;
  std::string models_dir = FIBERSEM_MODELS_DIR;
};

std::vector<double> parse_point(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ValidationError("bad number '" + item + "' in " + what);
    }
  }
  if (out.empty()) throw ValidationError(what + " is empty");
  return out;
}

std::vector<FiberPoint> parse_tuple(const std::string& text) {
  std::vector<FiberPoint> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_point(item, "--fiber"));
  return out;
}

BaseBox parse_region(const std::string& text, const BaseBox& fallback) {
  if (text.empty()) return fallback;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("--region expects lo1,..:hi1,..");
  return BaseBox(parse_point(text.substr(0, colon), "--region"), parse_point(text.substr(colon + 1), "--region"));
}

std::vector<double> at_point(const Flags& f, const Model& m) {
  std::vector<double> p = f.at.empty() ? std::vector<double>(m.bundle().base_dim(), 0.0) : parse_point(f.at, "--at");
  if (p.size() != m.bundle().base_dim()) {
    throw ValidationError("--at has " + std::to_string(p.size()) + " coordinates, the base has " +
                          std::to_string(m.bundle().base_dim()));
  }
  return p;
}

std::vector<std::string> x_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= count; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

NeighborhoodPolicy model_policy(const Flags& f, const Model& m) {
  NeighborhoodPolicy pol = f.pol;
  if (m.witness_grid()) pol.witness_grid = *m.witness_grid();
  pol.validate();
  return pol;
}

PathFamily family(const Flags& f, const Model& m, std::span<const double> at) {
  PathOptions po;
  po.random_paths = f.paths;
  po.seed = f.seed;
  return PathFamily::generate(m.bundle().base(), at, po);
}

json policy_json(const NeighborhoodPolicy& p) {
  return {{"eps0", p.eps0},         {"eps_halvings", p.halvings}, {"samples", p.samples},
          {"depth", p.depth},       {"tol_eq", p.tol_eq},         {"witness_grid", p.witness_grid},
          {"step", p.step},         {"exists_neighborhood", p.exists_neighborhood}};
}

json set_json(const ExtensionSet& set) {
  json members = json::array();
  for (const auto& p : set.members()) members.push_back(p);
  return {{"grid_points", set.member.size()}, {"member_count", set.member_count()}, {"members", members}};
}

void emit_set(const Flags& f, const ExtensionSet& set, const std::vector<std::string>& axes, const std::string& title) {
  if (!f.csv.empty()) {
    std::ofstream out(f.csv);
    if (!out) throw Error("cannot write " + f.csv);
    write_csv(out, set, axes);
  }
  if (!f.svg.empty()) {
    std::ofstream out(f.svg);
    if (!out) throw Error("cannot write " + f.svg);
    write_svg(out, set, title);
  }
}

void describe_set(const ExtensionSet& set) {
  std::cout << "members: " << set.member_count() << " of " << set.member.size() << " grid points\n";
  if (set.grid.dim() == 1 && set.member_count() > 0) {
    const auto pts = set.members();
    double lo = pts.front()[0], hi = lo;
    for (const auto& p : pts) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
    std::printf("range: [%.6g, %.6g]\n", lo, hi);
  }
}

// Each command fills `verdict` and returns whether the verdict is positive.

bool cmd_force(const Flags& f, json& verdict) {
  const Model m = load_model(f.model);
  const auto pol = model_policy(f, m);
  const auto at = at_point(f, m);
  std::vector<Section> sections;
  for (const auto& name : f.sections) sections.push_back(m.section(name));
  auto free = x_names(sections.size());
  for (const auto& s : m.sections()) {
    free.push_back(s.name());
    sections.push_back(s);
  }
  const auto phi = parse_formula(f.formula, m.bundle().signature(), free);
  const auto v = force(m.bundle(), at, phi, sections, pol);
  std::cout << to_string(v.decision);
  if (v.witness_eps) std::printf(" (eps %.6g)", *v.witness_eps);
  std::cout << "\nsamples evaluated: " << v.samples_evaluated << "\n";
  verdict = {{"decision", to_string(v.decision)},
             {"witness_eps", v.witness_eps ? json(*v.witness_eps) : json(nullptr)},
             {"samples_evaluated", v.samples_evaluated},
             {"depth_used", v.depth_used}};
  return v.forced();
}

bool cmd_parallel(const Flags& f, json& verdict) {
  const Model m = load_model(f.model);
  const auto pol = model_policy(f, m);
  const auto at = at_point(f, m);
  const auto e = parse_tuple(f.fiber);
  const auto phi = parse_formula(f.formula, m.bundle().signature(), x_names(e.size()));
  const auto fam = family(f, m, at);
  const auto v = parallel_forced(m.bundle(), m.connection(f.conn), at, e, phi, fam, pol);
  std::cout << to_string(v.decision) << " over " << v.paths_checked << " of " << fam.size() << " paths\n";
  if (v.counterexample) std::cout << "counterexample path: " << v.counterexample_label << "\n";
  verdict = {{"decision", to_string(v.decision)},
             {"paths", fam.size()},
             {"paths_checked", v.paths_checked},
             {"counterexample", v.counterexample ? json(v.counterexample_label) : json(nullptr)}};
  return v.forced();
}

bool cmd_extension(const std::string& kind, const Flags& f, json& verdict) {
  const Model m = load_model(f.model);
  const auto pol = model_policy(f, m);
  ExtensionSet set;
  std::vector<std::string> axes;
  if (kind == "spatial") {
    std::vector<Section> sections;
    for (const auto& name : f.sections) sections.push_back(m.section(name));
    const auto phi = parse_formula(f.formula, m.bundle().signature(), x_names(sections.size()));
    set = spatial_extension(m.bundle(), phi, sections, parse_region(f.region, m.bundle().base()), f.grid, pol);
    axes = x_names(m.bundle().base_dim());
  } else {
    const auto at = at_point(f, m);
    const auto e = parse_tuple(f.fiber);
    const auto phi = parse_formula(f.formula, m.bundle().signature(), x_names(e.size()));
    const auto& c = m.connection(f.conn);
    if (kind == "horizontal") {
      set = horizontal_extension(m.bundle(), c, at, e, phi, parse_region(f.region, m.bundle().base()), f.grid, pol);
      axes = x_names(m.bundle().base_dim());
    } else {
      const auto& fb = m.bundle().fiber_box();
      std::vector<double> lo, hi;
      for (std::size_t j = 0; j < e.size(); ++j) {
        lo.insert(lo.end(), fb.lo.begin(), fb.lo.end());
        hi.insert(hi.end(), fb.hi.begin(), fb.hi.end());
      }
      set = vertical_extension(m.bundle(), c, at, e, phi, parse_region(f.region, BaseBox(lo, hi)), f.grid,
                               family(f, m, at), pol, f.checkpoint);
      for (std::size_t j = 1; j <= e.size(); ++j) {
        for (std::size_t i = 1; i <= fb.dim(); ++i) {
          axes.push_back(e.size() == 1 ? "y" + std::to_string(i) : "y" + std::to_string(j) + std::to_string(i));
        }
      }
    }
  }
  describe_set(set);
  emit_set(f, set, axes, kind + " extension of " + f.formula);
  verdict = set_json(set);
  return set.member_count() > 0;
}

bool cmd_check(const std::string& which, const Flags& f, json& verdict) {
  auto pol = f.pol;
  pol.validate();
  const auto rep = which == "pullback-theorem" ? pullback_compatibility_suite(f.trials, f.seed, pol)
                                               : positive_stability_suite(f.trials, f.seed, pol);
  std::cout << rep.passed << "/" << rep.trials << " pass (" << rep.forced_instances << " Forced)\n";
  for (const auto& line : rep.failures) std::cout << "  " << line << "\n";
  verdict = {{"trials", rep.trials},
             {"passed", rep.passed},
             {"forced_instances", rep.forced_instances},
             {"failures", rep.failures}};
  return rep.ok();
}

bool cmd_suite(const Flags& f, json& verdict, json& timings) {
  SuiteOptions opt;
  opt.models_dir = f.models_dir;
  opt.only = f.only;
  opt.seed = f.seed;
  opt.trials = f.trials;
  opt.policy = f.pol;
  const auto rows = run_suite(opt);
  bool all = true;
  verdict = json::array();
  timings = json::object();
  std::printf("%-28s %-10s %-5s %s\n", "row", "group", "pass", "observed");
  for (const auto& r : rows) {
    all = all && r.pass;
    std::printf("%-28s %-10s %-5s %s\n", r.key.c_str(), r.group.c_str(), r.pass ? "PASS" : "FAIL", r.observed.c_str());
    if (!r.pass) std::printf("%-28s expected: %s\n", "", r.expected.c_str());
    verdict.push_back({{"row", r.key}, {"group", r.group}, {"pass", r.pass}, {"expected", r.expected},
                       {"observed", r.observed}});
    timings[r.key] = r.seconds;
  }
  std::printf("%zu/%zu rows pass\n", static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(),
                                                                             [](const SuiteRow& r) { return r.pass; })),
              rows.size());
  return all;
}

void add_policy(CLI::App* app, Flags& f) {
  app->add_option("--eps0", f.pol.eps0, "largest neighborhood radius");
  app->add_option("--eps-halvings", f.pol.halvings, "number of radius halvings");
  app->add_option("--samples", f.pol.samples, "samples per radius level");
  app->add_option("--depth", f.pol.depth, "neighborhood depth budget");
  app->add_option("--step", f.pol.step, "RK4 step");
  app->add_flag("--exists-neighborhood", f.pol.exists_neighborhood, "existentials also look at a neighborhood");
  app->add_option("--seed", f.seed, "seed for paths and random instances");
  app->add_flag("--assert", f.assert_verdict, "exit 1 on a negative verdict");
  app->add_option("--report", f.report, "write a JSON report");
}

void add_point(CLI::App* app, Flags& f) {
  app->add_option("model", f.model, "model file")->required();
  app->add_option("--at", f.at, "base point, comma separated");
  app->add_option("--formula", f.formula, "formula")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forcing and parallel forcing over bundles of structures"};
  app.require_subcommand(1);
  Flags f;

  auto* force_cmd = app.add_subcommand("force", "pointwise forcing at a base point");
  add_point(force_cmd, f);
  force_cmd->add_option("--section", f.sections, "sections bound to x1, x2, ...")->delimiter(',');
  add_policy(force_cmd, f);

  auto* par_cmd = app.add_subcommand("parallel", "parallel forcing along a path family");
  add_point(par_cmd, f);
  par_cmd->add_option("--conn", f.conn, "connection name")->required();
  par_cmd->add_option("--fiber", f.fiber, "fiber tuple, points separated by ';'");
  par_cmd->add_option("--paths", f.paths, "random cubic paths in the family");
  add_policy(par_cmd, f);

  auto* ext_cmd = app.add_subcommand("extension", "extension sets on a grid");
  ext_cmd->require_subcommand(1);
  std::string ext_kind;
  for (const char* kind : {"horizontal", "vertical", "spatial"}) {
    auto* sub = ext_cmd->add_subcommand(kind, std::string(kind) + " extension");
    add_point(sub, f);
    sub->add_option("--grid", f.grid, "grid step");
    sub->add_option("--region", f.region, "grid box lo1,..:hi1,..");
    sub->add_option("--csv", f.csv, "write the grid as CSV");
    sub->add_option("--svg", f.svg, "write an SVG scatter");
    if (std::string(kind) == "spatial") {
      sub->add_option("--section", f.sections, "sections bound to x1, x2, ...")->delimiter(',');
    } else {
      sub->add_option("--conn", f.conn, "connection name")->required();
      sub->add_option("--fiber", f.fiber, "fiber tuple, points separated by ';'");
    }
    if (std::string(kind) == "vertical") {
      sub->add_option("--paths", f.paths, "random cubic paths in the family");
      sub->add_option("--checkpoint", f.checkpoint, "checkpoint spacing along tuple segments");
    }
    add_policy(sub, f);
    sub->callback([&ext_kind, kind] { ext_kind = kind; });
  }

  auto* check_cmd = app.add_subcommand("check", "seeded property suites");
  check_cmd->require_subcommand(1);
  std::string check_kind;
  for (const char* kind : {"pullback-theorem", "lemma"}) {
    auto* sub = check_cmd->add_subcommand(kind);
    sub->add_option("--trials", f.trials, "random instances");
    add_policy(sub, f);
    sub->callback([&check_kind, kind] { check_kind = kind; });
  }

  auto* suite_cmd = app.add_subcommand("suite", "run every golden example and property suite");
  suite_cmd->add_option("--only", f.only, "row keys or groups")->delimiter(',');
  suite_cmd->add_option("--models", f.models_dir, "directory of shipped models");
  suite_cmd->add_option("--trials", f.trials, "random instances per property suite");
  add_policy(suite_cmd, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string command;
  for (int i = 1; i < argc; ++i) command += (i > 1 ? " " : "") + std::string(argv[i]);

  json report = {{"command", command}, {"engine_version", kEngineVersion}, {"seed", f.seed}};
  json verdict;
  json timings = json::object();
  bool positive = false;
  const auto start = std::chrono::steady_clock::now();
  try {
    if (force_cmd->parsed()) {
      positive = cmd_force(f, verdict);
    } else if (par_cmd->parsed()) {
      positive = cmd_parallel(f, verdict);
    } else if (ext_cmd->parsed()) {
      positive = cmd_extension(ext_kind, f, verdict);
    } else if (check_cmd->parsed()) {
      positive = cmd_check(check_kind, f, verdict);
    } else {
      positive = cmd_suite(f, verdict, timings);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  timings["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!f.report.empty()) {
    report["policy"] = policy_json(f.pol);
    report["verdicts"] = verdict;
    report["timings"] = timings;
    std::ofstream out(f.report);
    if (!out) {
      std::cerr << "error: cannot write " << f.report << "\n";
      return 2;
    }
    out << report.dump(2) << "\n";
  }
  return f.assert_verdict && !positive ? 1 : 0;
}
