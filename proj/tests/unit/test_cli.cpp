#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
using Json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  Json json() const { return Json::parse(out); }
};

Run run(const std::string& args, const std::string& env = "") {
  std::string cmd = env + " " STRICTBOUNDS_CLI " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path tmp(const std::string& name) {
  std::filesystem::path d(STRICTBOUNDS_TEST_TMP);
  std::filesystem::create_directories(d);
  return d / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST_CASE("interval command", "[cli]") {
  auto r = run("interval --preset oneD --y \"-1\" --method osb --alpha 0.05");
  REQUIRE(r.code == 0);
  auto j = r.json();
  CHECK(j["command"] == "interval");
  CHECK(j["version"].is_string());
  CHECK(j["seed"].is_number_unsigned());
  CHECK(j["config"]["alpha"] == 0.05);
  CHECK(j["result"]["alpha"] == 0.05);
  CHECK(j["result"]["lower"].get<double>() == 0.0);
  CHECK(j["result"]["upper"].get<double>() == Approx(1.2004).margin(1e-4));

  auto s = run("interval --preset oneD --y 2 --method ssb --alpha 0.05").json();
  CHECK(s["result"]["lower"].get<double>() == Approx(0.04).margin(1e-4));
  CHECK(s["result"]["upper"].get<double>() == Approx(3.96).margin(1e-4));

  auto c = run("interval --preset twoD --y 0.3,0.1 --method closed-form --alpha 0.05").json();
  const double w = c["result"]["upper"].get<double>() - c["result"]["lower"].get<double>();
  CHECK(w == Approx(2 * 1.959963984540054 * std::sqrt(2.0)).epsilon(1e-9));

  auto sing = tmp("singular.json");
  write(sing, R"({"K": [[1, 1], [1, 1]], "h": [1, 0], "constraints": {"type": "nonneg"}})");
  CHECK(run("interval --model " + sing.string() + " --y 1,1 --method closed-form --alpha 0.05").code == 3);
}

TEST_CASE("interval input errors", "[cli]") {
  auto r = run("interval --preset oneD --y 2 --method osb");
  CHECK(r.code == 1);
  CHECK_THAT(r.out, ContainsSubstring("alpha"));
  CHECK(run("interval --preset oneD --y 2,3 --method osb --alpha 0.05").code == 1);
  CHECK(run("interval --preset oneD --y 2 --method nope --alpha 0.05").code == 1);
  CHECK(run("interval --preset oneD --y 2 --method osb --alpha 1.5").code == 1);
  CHECK(run("interval --preset nowhere --y 2 --method osb --alpha 0.05").code == 1);
  CHECK(run("bogus").code == 1);
  CHECK(run("--help").code == 0);
}

TEST_CASE("empty intervals exit with code 2", "[cli]") {
  auto r = run("interval --preset oneD --y \"-3\" --method ssb --alpha 0.05");
  CHECK(r.code == 2);
  auto j = r.json();
  CHECK(j["result"]["empty"] == true);
  CHECK(j["result"]["lower"].is_null());
}

TEST_CASE("model files", "[cli]") {
  auto good = tmp("good.json");
  write(good, R"({"K": [[1, 0], [0, 1]], "h": [1, -1], "constraints": {"type": "nonneg"}})");
  auto r = run("interval --model " + good.string() + " --y 1,-2 --method osb --alpha 0.05");
  REQUIRE(r.code == 0);
  CHECK(r.json()["result"]["s2"].get<double>() == Approx(4.0));

  auto bad = tmp("bad.json");
  write(bad, R"({"K": [[1, 0], [0, 1]], "constraints": {"type": "nonneg"}})");
  auto b = run("interval --model " + bad.string() + " --y 1,-2 --method osb --alpha 0.05");
  CHECK(b.code == 1);
  CHECK_THAT(b.out, ContainsSubstring("'h'"));

  auto yfile = tmp("y.csv");
  write(yfile, "1.0, -2.0\n");
  auto f = run("interval --model " + good.string() + " --y-file " + yfile.string() + " --method ssb --alpha 0.05");
  CHECK(f.code == 0);
}

TEST_CASE("coverage CSV is reproducible", "[cli]") {
  auto a = tmp("cov_a.csv"), b = tmp("cov_b.csv");
  auto ra = run("coverage --preset oneD --reps 20000 --seed 1 --format csv -o " + a.string());
  auto rb = run("coverage --preset oneD --reps 20000 --seed 1 --format csv --threads 2 -o " + b.string());
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  auto ta = slurp(a);
  CHECK_FALSE(ta.empty());
  CHECK(ta == slurp(b));
  CHECK(ta.rfind("truth,method,alpha,coverage", 0) == 0);
  auto side = Json::parse(slurp(a.string() + ".json"));
  CHECK(side["command"] == "coverage");
  CHECK(side["seed"] == 1);
}

TEST_CASE("CI_SEED sets the default seed", "[cli]") {
  auto r = run("interval --preset oneD --simulate-from 0.5 --method osb --alpha 0.05", "CI_SEED=777");
  REQUIRE(r.code == 0);
  CHECK(r.json()["seed"] == 777);
  auto again = run("interval --preset oneD --simulate-from 0.5 --method osb --alpha 0.05", "CI_SEED=777");
  CHECK(again.json()["result"] == r.json()["result"]);
  auto flag = run("interval --preset oneD --simulate-from 0.5 --method osb --alpha 0.05 --seed 5", "CI_SEED=777");
  CHECK(flag.json()["seed"] == 5);
}

TEST_CASE("other subcommands", "[cli]") {
  auto d = run("dominance --preset twoD --xstar 0,0 --n 20000 --seed 3");
  REQUIRE(d.code == 0);
  CHECK(d.json()["result"].contains("verdict"));

  auto m = run("maxq --preset twoD --level 0.95 --budget 10 --n-per-eval 2000 --seed 3");
  REQUIRE(m.code == 0);
  CHECK(m.json()["result"]["q"].get<double>() > 2.0);

  auto x = run("counterexample --check coupling --n 20000 --seed 3");
  REQUIRE(x.code == 0);
  CHECK(x.json()["result"]["violations"] == 0);

  auto q = run("quantile-curve --t-grid 0.1,1 --n 5000 --seed 3 --format csv");
  REQUIRE(q.code == 0);
  CHECK(q.out.rfind("t,q,ci_lo,ci_hi,exceeds_chi2", 0) == 0);
}
