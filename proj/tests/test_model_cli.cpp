#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fibersem/emit.hpp"
#include "fibersem/error.hpp"
#include "fibersem/model.hpp"
#include "fibersem/suite.hpp"

using namespace fibersem;
namespace fs = std::filesystem;

namespace {

const std::string kModels = FIBERSEM_MODELS_DIR;

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / ("fibersem_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(FIBERSEM_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string model(const std::string& name) { return kModels + "/" + name; }

}  // namespace

TEST_CASE("the shipped pullback example loads") {
  const auto m = load_model(model("pullback_counterexample.model"));
  CHECK(m.bundle().base_dim() == 2);
  CHECK(m.bundle().fiber_dim() == 1);
  CHECK(m.bundle().signature().relation("R").has_value());
  const std::vector<double> p{0.25, 0.5};
  CHECK(m.section("s").at(p)[0] == doctest::Approx(0.75));
  const auto sigma = m.map("sigma").apply(std::vector<double>{0.4});
  CHECK(sigma[0] == doctest::Approx(0.4));
  CHECK(sigma[1] == doctest::Approx(-0.4));
  const auto fs = fiber_structure(m.bundle(), std::vector<double>{0.0, 0.0});
  CHECK_FALSE(fs.holds(0, std::vector<FiberPoint>{{0.0}}));
  CHECK(fs.holds(0, std::vector<FiberPoint>{{0.1}}));
}

TEST_CASE("the shipped ball example loads") {
  const auto m = load_model(model("unit_ball.model"));
  CHECK(m.connection("flat").is_flat());
  CHECK(m.connection("shear").lift()[0][0].eval(std::vector<double>{0.0, 0.0}) == 1.0);
  const auto fs = fiber_structure(m.bundle(), std::vector<double>{0.5});
  CHECK(fs.holds(0, std::vector<FiberPoint>{{0.5}}));
  CHECK_FALSE(fs.holds(0, std::vector<FiberPoint>{{0.9}}));
}

TEST_CASE("every shipped model loads") {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(kModels)) {
    if (entry.path().extension() != ".model") continue;
    CHECK_NOTHROW(load_model(entry.path().string()));
    ++count;
  }
  CHECK(count >= 7);
}

TEST_CASE("missing names are validation errors") {
  const auto m = load_model(model("unit_ball.model"));
  CHECK_THROWS_AS(m.section("nope"), ValidationError);
  CHECK_THROWS_AS(m.connection("nope"), ValidationError);
  CHECK_THROWS_AS(m.map("nope"), ValidationError);
}

TEST_CASE("model parse errors carry line numbers") {
  const std::string head = "[base]\ndim = 1\nlo = -1\nhi = 1\n[fiber]\ndim = 1\nlo = -1\nhi = 1\n";
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_model(text, "t.model");
    } catch (const ParseError& err) {
      CHECK(std::string(err.what()).rfind("t.model:", 0) == 0);
      return err.line();
    }
    return 0;
  };
  CHECK(line_of(head + "[relation R]\narity = 1\nguard = \"y1 + q\"\n") == 11);
  CHECK(line_of(head + "[section s]\ny1 = x1\n") == 10);
  CHECK(line_of(head + "[connection c]\nL31 = \"1\"\n") == 10);
  CHECK(line_of(head + "[widget w]\n") == 9);
  CHECK(line_of("[base]\ndim = 1\nlo = -1\n") > 0);
  CHECK(line_of(head + "[section s]\ny1 = \"x1\n") == 10);
  CHECK(line_of(head + "[map f]\nsource = 1\nlo = -1\nhi = 1\nx1 = \"2*t\"\n") > 0);
}

TEST_CASE("functions, constants and witness grid") {
  const std::string text =
      "[base]\ndim = 1\nlo = -1\nhi = 1\n"
      "[fiber]\ndim = 1\nlo = -2\nhi = 2\ngrid = 7\n"
      "[function f]\narity = 1\ny1 = \"2*y11\"\n"
      "[constant c]\ny1 = \"x1\"\n"
      "[relation S]\narity = 2\nguard = \"y11 - y21\"\n";
  const auto m = parse_model(text);
  CHECK(m.witness_grid() == 7u);
  const auto fs = fiber_structure(m.bundle(), std::vector<double>{0.5});
  CHECK(fs.constant(0) == FiberPoint{0.5});
  CHECK(fs.apply(0, std::vector<FiberPoint>{{1.5}}) == FiberPoint{3.0});
  CHECK(fs.holds(0, std::vector<FiberPoint>{{1.0}, {0.0}}));
}

TEST_CASE("CSV and SVG layouts") {
  ExtensionSet set;
  set.grid = Grid::over(BaseBox::cube(1, -1.0, 1.0), std::vector<double>{0.0}, 0.5);
  set.member = {0, 1, 1, 1, 0};
  set.parent = {-1, 2, -1, 2, -1};
  set.tuple.resize(5);
  std::ostringstream csv;
  write_csv(csv, set, {"x1"});
  CHECK(csv.str() == "x1,member,path_id\n-1,0,-1\n-0.5,1,2\n0,1,-1\n0.5,1,2\n1,0,-1\n");

  std::ostringstream svg;
  write_svg(svg, set, "a < b");
  const auto s = svg.str();
  CHECK(s.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 800\"", 0) == 0);
  CHECK(s.find("a &lt; b") != std::string::npos);
  std::size_t black = 0, grey = 0;
  for (std::size_t pos = 0; (pos = s.find("fill=\"black\"", pos)) != std::string::npos; ++pos) ++black;
  for (std::size_t pos = 0; (pos = s.find("fill=\"#dddddd\"", pos)) != std::string::npos; ++pos) ++grey;
  CHECK(black == 3);
  CHECK(grey == 2);
}

TEST_CASE("suite keys, groups and row isolation") {
  CHECK(suite_keys().size() == 18);
  SuiteOptions opt;
  opt.models_dir = kModels;
  opt.only = {"nonsense"};
  CHECK_THROWS_AS(run_suite(opt), ValidationError);

  const auto dir = scratch_dir() / "models";
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(kModels)) fs::copy_file(entry.path(), dir / entry.path().filename());
  std::ofstream(dir / "unit_ball.model") << "[base]\ndim = 1\nlo = -2\n";
  opt.models_dir = dir.string();
  opt.only = {"extension", "pointwise"};
  const auto rows = run_suite(opt);
  CHECK(rows.size() == 10);
  for (const auto& r : rows) {
    const bool broken = r.key.rfind("ball-", 0) == 0;
    CHECK_MESSAGE(r.pass != broken, r.key << ": " << r.observed);
    if (broken) CHECK(r.observed.find("unit_ball.model") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch_dir();
  const auto out = dir / "out.txt";
  CHECK(run_cli("force " + model("pullback_counterexample.model") + " --at 0,0 --formula '!!R(s)'", out) == 0);
  CHECK(slurp(out).rfind("Forced", 0) == 0);
  CHECK(run_cli("force " + model("pullback_counterexample.model") + " --at 0,0 --formula 'R(s)' --assert", out) == 1);
  CHECK(run_cli("force " + model("pullback_counterexample.model") + " --at 0,0 --formula 'R(s)'", out) == 0);
  CHECK(run_cli("force " + model("pullback_counterexample.model") + " --at 0,0 --formula 'R(t)'", out) == 2);
  CHECK(run_cli("force " + model("pullback_counterexample.model") + " --at 0 --formula 'R(s)'", out) == 2);
  CHECK(run_cli("force /nonexistent.model --formula 'R(s)'", out) == 2);
  CHECK(run_cli("force --no-such-flag", out) == 2);
  CHECK(run_cli("", out) == 2);
  CHECK(run_cli("parallel " + model("parallel_counterexample.model") +
                    " --conn shear --at 0 --fiber 0 --formula '!R(x1)' --assert",
                out) == 1);
  CHECK(slurp(out).find("counterexample path") != std::string::npos);
  CHECK(run_cli("parallel " + model("parallel_counterexample.model") +
                    " --conn flat --at 0 --fiber 0 --formula '!R(x1)' --assert",
                out) == 0);
  CHECK(run_cli("check lemma --trials 5 --assert", out) == 0);
  CHECK(run_cli("suite --only nonsense", out) == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli extension output and reproducible reports") {
  const auto dir = scratch_dir();
  const auto out = dir / "out.txt";
  const std::string args = "extension horizontal " + model("unit_ball.model") +
                           " --conn shear --at 0 --fiber 0 --formula 'R(x1)' --grid 0.01 --csv " +
                           (dir / "ext.csv").string() + " --svg " + (dir / "ext.svg").string() + " --report ";
  REQUIRE(run_cli(args + (dir / "a.json").string(), out) == 0);
  CHECK(slurp(out).find("range: [-0.7, 0.7]") != std::string::npos);
  REQUIRE(run_cli(args + (dir / "b.json").string(), out) == 0);
  const auto a = nlohmann::json::parse(slurp(dir / "a.json"));
  const auto b = nlohmann::json::parse(slurp(dir / "b.json"));
  CHECK(a["verdicts"].dump() == b["verdicts"].dump());
  CHECK(a["policy"]["eps0"] == 0.5);
  CHECK(a.contains("engine_version"));
  CHECK(a.contains("seed"));
  CHECK(a["timings"].contains("total_seconds"));
  const auto csv = slurp(dir / "ext.csv");
  CHECK(csv.rfind("x1,member,path_id\n", 0) == 0);
  CHECK(csv.find("\n0.7,1,") != std::string::npos);
  CHECK(csv.find("\n0.71,0,-1\n") != std::string::npos);
  CHECK(slurp(dir / "ext.svg").find("viewBox=\"0 0 800 800\"") != std::string::npos);
  fs::remove_all(dir);
}
