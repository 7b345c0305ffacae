#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cashband/io.hpp"
#include "cashband/verifier.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cashband;

namespace {

constexpr const char* kCliPath = CASHBAND_CLI_PATH;
constexpr const char* kConfigDir = CASHBAND_CONFIG_DIR;

struct CmdResult {
  int status = -1;
  std::string out;  // stdout and stderr combined
};

std::string temp_path(const char* tag) {
  static int seq = 0;
  return "/tmp/cashband_test_" + std::to_string(::getpid()) + "_" + std::to_string(seq++) + "_" +
         tag;
}

CmdResult run_cli(const std::string& args) {
  const std::string capture = temp_path("capture.txt");
  const std::string cmd = std::string(kCliPath) + " " + args + " > " + capture + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  if (raw != -1 && WIFEXITED(raw)) r.status = WEXITSTATUS(raw);
  std::ifstream in(capture);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  std::remove(capture.c_str());
  return r;
}

std::string config_file(const char* name) { return std::string(kConfigDir) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(static_cast<bool>(out));
  out << text;
}

const char* kMinimalModel =
    "{\"model\":{\"rho\":0.1,\"alpha\":0.0,\"sigma\":5.4,\"kappa\":0.5,"
    "\"c_neg\":1.0,\"c_pos\":1.0,\"l_cost\":4.0,\"u_cost\":2.0}}";

}  // namespace

TEST_CASE("config parser enforces the schema") {
  const RunConfig rc = parse_run_config(kMinimalModel);
  REQUIRE(rc.model.has_value());
  CHECK(rc.model->sigma == 5.4);
  CHECK_FALSE(rc.sweep.has_value());
  CHECK(rc.mode == GeneratorMode::WorstCase);

  CHECK_THROWS_AS(parse_run_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"models\":{}}"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"model\":{\"rho\":0.1}}"), ConfigError);
  // drift must be given exactly once, either style
  CHECK_THROWS_AS(
      parse_run_config("{\"model\":{\"rho\":0.1,\"alpha\":0.0,\"eta\":0.4,\"sigma\":2.0,"
                       "\"kappa\":0.5,\"c_neg\":1,\"c_pos\":1,\"l_cost\":1,\"u_cost\":1}}"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_run_config("{\"model\":{\"rho\":0.1,\"sigma\":2.0,\"kappa\":0.5,"
                       "\"c_neg\":1,\"c_pos\":1,\"l_cost\":1,\"u_cost\":1}}"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_run_config("{\"model\":{\"rho\":0.1,\"alpha\":0,\"sigma\":2.0,\"kappa\":0.5,"
                       "\"c_neg\":1,\"c_pos\":1,\"l_cost\":1,\"u_cost\":1,\"extra\":0}}"),
      ConfigError);
  CHECK_THROWS_AS(parse_run_config("{\"sweep\":{\"axis\":\"sigma\",\"grid\":[1,2]}}"),
                  ConfigError);

  std::string with_sim = kMinimalModel;
  with_sim.insert(with_sim.size() - 1,
                  ",\"simulation\":{\"n_paths\":100,\"dt\":0.01,\"horizon\":100.0,"
                  "\"seed\":7,\"x0\":1.5,\"mode\":\"fixed_plus\"}");
  const RunConfig sim = parse_run_config(with_sim);
  CHECK(sim.simulation.n_paths == 100);
  CHECK(sim.simulation.seed == 7);
  CHECK(sim.simulation.x0 == 1.5);
  CHECK(sim.mode == GeneratorMode::FixedPlus);

  std::string bad_mode = kMinimalModel;
  bad_mode.insert(bad_mode.size() - 1, ",\"simulation\":{\"mode\":\"pessimist\"}");
  CHECK_THROWS_AS(parse_run_config(bad_mode), ConfigError);

  std::string bad_seed = kMinimalModel;
  bad_seed.insert(bad_seed.size() - 1, ",\"simulation\":{\"seed\":-3}");
  CHECK_THROWS_AS(parse_run_config(bad_seed), ConfigError);

  std::string with_sweep = kMinimalModel;
  with_sweep.insert(with_sweep.size() - 1,
                    ",\"sweep\":{\"axis\":\"sigma\",\"grid\":{\"lo\":1,\"hi\":3,\"count\":5},"
                    "\"overlays\":[{\"parameter\":\"kappa\",\"value\":0.0}],"
                    "\"warm_start\":false}");
  const RunConfig sw = parse_run_config(with_sweep);
  REQUIRE(sw.sweep.has_value());
  CHECK(sw.sweep->grid.size() == 5);
  CHECK(sw.sweep->grid.front() == 1.0);
  CHECK(sw.sweep->grid.back() == 3.0);
  CHECK(sw.sweep->overlays.size() == 1);
  CHECK_FALSE(sw.sweep->warm_start);

  std::string bad_sweep = with_sweep;
  bad_sweep.replace(bad_sweep.find("\"sigma\""), 7, "\"gamma\"");
  CHECK_THROWS_AS(parse_run_config(bad_sweep), ConfigError);
}

TEST_CASE("solution json round trips exactly") {
  const RunConfig rc = parse_run_config(kMinimalModel);
  const BandSolution sol = solve_band(*rc.model);
  const std::string text = solution_to_json(sol);
  const BandSolution back = solution_from_json(text);
  CHECK(back.x_lower == sol.x_lower);
  CHECK(back.x_star == sol.x_star);
  CHECK(back.x_upper == sol.x_upper);
  CHECK(back.coeff_a == sol.coeff_a);
  CHECK(back.coeff_b == sol.coeff_b);
  CHECK(back.coeff_c == sol.coeff_c);
  CHECK(back.coeff_d == sol.coeff_d);
  CHECK(back.cost(0.0).value == doctest::Approx(sol.cost(0.0).value).epsilon(1e-12));
  CHECK(verify(back).pass);

  CHECK_THROWS_AS(solution_from_json("{}"), ConfigError);
  CHECK_THROWS_AS(solution_from_json("broken"), ConfigError);
}

TEST_CASE("path csv has the expected layout") {
  PathRecord rec;
  rec.t = {0.0, 0.5};
  rec.x = {1.0, 0.25};
  rec.dl = {0.0, 0.125};
  rec.du = {2.0, 0.0};
  std::ostringstream out;
  write_path_csv(rec, out);
  CHECK(out.str() == "t,x,dl,du\n0,1,0,2\n0.5,0.25,0.125,0\n");
}

TEST_CASE("solve command emits a convergent solution") {
  const CmdResult r = run_cli("solve --config " + config_file("solve_base.json"));
  REQUIRE(r.status == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("x_lower").get<double>() < 0.0);
  CHECK(j.at("x_upper").get<double>() > 0.0);
  CHECK(j.at("x_lower").get<double>() < j.at("x_star").get<double>());
  CHECK(j.at("residual_norm").get<double>() < 1e-9);
  CHECK(j.at("model").at("sigma").get<double>() == 5.4);
}

TEST_CASE("verify command audits solution files") {
  const std::string sol_path = temp_path("solution.json");
  const CmdResult solved =
      run_cli("solve --config " + config_file("solve_base.json") + " --out " + sol_path);
  REQUIRE(solved.status == 0);

  const std::string cfg = config_file("solve_base.json");
  const CmdResult ok = run_cli("verify --config " + cfg + " --out " + sol_path);
  CHECK(ok.status == 0);
  CHECK(ok.out.find("overall            PASS") != std::string::npos);

  nlohmann::json j = nlohmann::json::parse(slurp(sol_path));
  j["x_lower"] = j["x_lower"].get<double>() + 1e-3;
  spit(sol_path, j.dump());
  const CmdResult bad = run_cli("verify --config " + cfg + " --out " + sol_path);
  CHECK(bad.status == 1);
  CHECK(bad.out.find("FAIL") != std::string::npos);
  CHECK(bad.out.find("barrier_curvature") != std::string::npos);

  std::remove(sol_path.c_str());

  // without a solution file the command solves first, then audits
  const CmdResult direct = run_cli("verify --config " + config_file("verify_base.json"));
  CHECK(direct.status == 0);
}

TEST_CASE("parse and io failures exit with code 2") {
  const std::string broken = temp_path("broken.json");
  spit(broken, "{ this is not json");
  CHECK(run_cli("solve --config " + broken).status == 2);
  std::remove(broken.c_str());

  const std::string unknown = temp_path("unknown.json");
  std::string text = kMinimalModel;
  text.insert(text.size() - 1, ",\"plotting\":{}");
  spit(unknown, text);
  CHECK(run_cli("solve --config " + unknown).status == 2);
  std::remove(unknown.c_str());

  CHECK(run_cli("solve --config /nonexistent/cfg.json").status == 2);
  CHECK(run_cli("solve").status == 2);
  CHECK(run_cli("explode --config x.json").status == 2);
  CHECK(run_cli("sweep --config " + config_file("solve_base.json")).status == 2);
}

TEST_CASE("infeasible prices exit with code 3") {
  const std::string path = temp_path("infeasible.json");
  spit(path,
       "{\"model\":{\"rho\":0.1,\"alpha\":0.0,\"sigma\":5.4,\"kappa\":0.5,"
       "\"c_neg\":0.3,\"c_pos\":1.0,\"l_cost\":4.0,\"u_cost\":2.0}}");
  const CmdResult r = run_cli("solve --config " + path);
  CHECK(r.status == 3);
  CHECK(r.out.find("c_neg") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("simulate command reports a z score deterministically") {
  const std::string cfg = config_file("simulate_base.json");
  const CmdResult a = run_cli("simulate --config " + cfg);
  REQUIRE(a.status == 0);
  CHECK(a.out.find("mean_cost") != std::string::npos);
  CHECK(a.out.find("std_error") != std::string::npos);
  CHECK(a.out.find("analytic_cost") != std::string::npos);
  CHECK(a.out.find("z_score") != std::string::npos);

  const CmdResult b = run_cli("simulate --config " + cfg);
  CHECK(b.status == 0);
  CHECK(a.out == b.out);

  const CmdResult c = run_cli("simulate --config " + cfg + " --seed 9");
  CHECK(c.out != a.out);

  const std::string csv = temp_path("path.csv");
  const CmdResult with_path = run_cli("simulate --config " + cfg + " --out " + csv);
  CHECK(with_path.status == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("t,x,dl,du\n", 0) == 0);
  std::remove(csv.c_str());
}

TEST_CASE("sweep command writes the csv and flags failed rows") {
  const std::string csv = temp_path("sweep.csv");
  const CmdResult ok =
      run_cli("sweep --config " + config_file("sweep_drift.json") + " --out " + csv);
  REQUIRE(ok.status == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("axis_value,", 0) == 0);
  int lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == 10);  // header plus nine grid points
  std::remove(csv.c_str());

  const std::string bad_cfg = temp_path("sweep_bad.json");
  spit(bad_cfg,
       "{\"model\":{\"rho\":0.1,\"alpha\":0.0,\"sigma\":5.4,\"kappa\":0.5,"
       "\"c_neg\":1.0,\"c_pos\":1.0,\"l_cost\":2.0,\"u_cost\":2.0},"
       "\"sweep\":{\"axis\":\"l_cost\",\"grid\":[2.0,50.0]}}");
  const std::string bad_csv = temp_path("sweep_bad.csv");
  const CmdResult partial = run_cli("sweep --config " + bad_cfg + " --out " + bad_csv);
  CHECK(partial.status == 5);
  const std::string bad_text = slurp(bad_csv);
  int bad_lines = 0;
  for (char ch : bad_text)
    if (ch == '\n') ++bad_lines;
  CHECK(bad_lines == 3);  // the csv is still written in full
  std::remove(bad_cfg.c_str());
  std::remove(bad_csv.c_str());
}

TEST_CASE("every shipped config passes its own subcommand") {
  int tested = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kConfigDir)) {
    if (entry.path().extension() != ".json") continue;
    const std::string name = entry.path().filename().string();
    const std::string subcommand = name.substr(0, name.find('_'));
    const CmdResult r = run_cli(subcommand + " --config " + entry.path().string());
    INFO("config ", name);
    CHECK(r.status == 0);
    ++tested;
  }
  CHECK(tested >= 7);
}
