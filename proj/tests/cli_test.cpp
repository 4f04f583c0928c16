#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "graphsolver/cli.hpp"
#include "graphsolver/em.hpp"
#include "graphsolver/mesh.hpp"
#include "support.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace graphsolver;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;

  nlohmann::json last_json() const {
    std::istringstream lines(out);
    std::string line, last;
    while (std::getline(lines, line)) {
      if (!line.empty()) last = line;
    }
    return nlohmann::json::parse(last);
  }
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "graphsolver");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

const std::vector<std::string> small_sphere{"--shape", "spheroid", "--param", "Rx=0.1", "--param", "Ry=0.1",
                                            "--param", "Rz=0.1"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("flag errors exit 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"bake"}).code == 2);
  CHECK(run({"genmesh", "--out", "x.obj", "--colour", "red"}).code == 2);
  CHECK(run(with({"genmesh"}, small_sphere)).code == 2);
  CHECK(run({"genmesh", "--shape", "blob", "--out", "x.obj"}).code == 2);
  CHECK(run({"genmesh", "--shape", "spheroid", "--param", "Rx", "--out", "x.obj"}).code == 2);
  CHECK(run({"genmesh", "--shape", "spheroid", "--param", "Rx=abc", "--out", "x.obj"}).code == 2);
  CHECK(run({"mie", "--radius", "-1", "--out", "x.csv"}).code == 2);
  const auto e = run({"bake"});
  const auto err = nlohmann::json::parse(e.err.substr(0, e.err.find('\n')));
  CHECK(err.at("error") == "bad_flags");
}

TEST_CASE("help exits 0") { CHECK(run({"--help"}).code == 0); }

TEST_CASE("genmesh and config files") {
  const auto dir = testing::fresh_dir("cli_genmesh");
  const auto obj = dir + "/s.obj";
  const auto r = run(with({"genmesh", "--density", "0.1", "--out", obj}, small_sphere));
  REQUIRE(r.code == 0);
  const auto j = r.last_json();
  CHECK(2 * j.at("n_rwg").get<int>() == 3 * j.at("triangles").get<int>());
  CHECK(j.at("closed") == true);
  const auto tri = mesh::import_obj_file(obj);
  CHECK(tri.triangle_count() == j.at("triangles").get<std::size_t>());
  CHECK(r.err.find("\"subcommand\":\"genmesh\"") != std::string::npos);

  const auto cfg = dir + "/cfg.json";
  std::ofstream(cfg) << R"({"shape": "spheroid", "param": ["Rx=0.1", "Ry=0.1", "Rz=0.1"], "density": 0.1, "out": ")"
                     << dir << R"(/c.obj"})";
  const auto c = run({"genmesh", "--config", cfg});
  REQUIRE(c.code == 0);
  CHECK(c.last_json().at("triangles") == j.at("triangles"));

  // explicit flags win over the file
  const auto finer = run({"genmesh", "--config", cfg, "--density", "0.05"});
  REQUIRE(finer.code == 0);
  CHECK(finer.last_json().at("triangles").get<int>() > j.at("triangles").get<int>());

  std::ofstream(dir + "/unknown.json") << R"({"shape": "spheroid", "flavour": 1})";
  CHECK(run({"genmesh", "--config", dir + "/unknown.json"}).code == 2);
  std::ofstream(dir + "/broken.json") << R"({"shape": )";
  CHECK(run({"genmesh", "--config", dir + "/broken.json"}).code == 2);
  CHECK(run({"genmesh", "--config", dir + "/missing.json"}).code == 2);
  CHECK(run({"genmesh", "--config"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("solve, mie and eval-rcs") {
  const auto dir = testing::fresh_dir("cli_solve");
  const auto obj = dir + "/s.obj";
  REQUIRE(run(with({"genmesh", "--density", "0.03", "--freq", "299792458", "--out", obj}, small_sphere)).code == 0);
  CHECK(run({"solve", "--out", dir + "/x"}).code == 2);
  CHECK(run(with({"solve", "--mesh", obj, "--out", dir + "/x"}, small_sphere)).code == 2);

  const auto s = run({"solve", "--mesh", obj, "--freq", "299792458", "--rcs-step", "5", "--out", dir + "/mom"});
  INFO(s.err);
  REQUIRE(s.code == 0);
  const auto j = s.last_json();
  CHECK(j.at("residual").get<double>() <= em::kMaxResidual);
  em::SolutionHeader header;
  const auto u = em::read_solution_file(dir + "/mom/solution.bin", &header);
  CHECK(u.size() == j.at("n_rwg").get<Eigen::Index>());
  CHECK(header.alpha == 0.5);
  CHECK(header.frequency == 299792458.0);
  CHECK(em::read_rcs_csv_file(dir + "/mom/rcs.csv").angles.size() == 72);
  CHECK(fs::exists(dir + "/mom/currents.csv"));

  const auto m = run({"mie", "--radius", "0.1", "--freq", "299792458", "--rcs-step", "5", "--out", dir + "/mie.csv"});
  REQUIRE(m.code == 0);
  CHECK(m.last_json().at("ka").get<double>() == doctest::Approx(2 * M_PI * 0.1));

  const auto loose = run({"eval-rcs", dir + "/mom/rcs.csv", dir + "/mie.csv", "--max-db", "100"});
  CHECK(loose.code == 0);
  const double err = loose.last_json().at("max_abs_db").get<double>();
  CHECK(err > 0.0);
  CHECK(err < 3.0);
  CHECK(run({"eval-rcs", dir + "/mom/rcs.csv", dir + "/mie.csv", "--max-db", "0"}).code == 1);
  CHECK(run({"eval-rcs", dir + "/mie.csv", dir + "/mie.csv", "--max-db", "0"}).code == 0);
  CHECK(run({"eval-rcs", dir + "/missing.csv", dir + "/mie.csv"}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("worker count from the environment") {
  const auto dir = testing::fresh_dir("cli_workers");
  const auto args = with({"solve", "--density", "0.15", "--out", dir + "/a"}, small_sphere);
  ::setenv("GRAPHSOLVER_WORKERS", "3", 1);
  const auto a = run(args);
  INFO(a.err);
  CHECK(a.code == 0);
  CHECK(a.err.find("\"workers\":\"3\"") != std::string::npos);
  ::setenv("GRAPHSOLVER_WORKERS", "zero", 1);
  CHECK(run(args).code == 2);
  ::unsetenv("GRAPHSOLVER_WORKERS");
  CHECK(run(with(args, {"--workers", "0"})).code == 2);
  const auto b = run(with({"solve", "--density", "0.15", "--out", dir + "/b"}, small_sphere));
  REQUIRE(b.code == 0);
  CHECK(em::read_solution_file(dir + "/a/solution.bin") == em::read_solution_file(dir + "/b/solution.bin"));
  fs::remove_all(dir);
}

TEST_CASE("runtime failures exit 1") {
  const auto dir = testing::fresh_dir("cli_runtime");
  std::ofstream(dir + "/junk.gsnn") << "not a model";
  CHECK(run({"predict", "--model", dir + "/junk.gsnn", "--sample", dir + "/none.gsb", "--out", dir + "/p.csv"}).code ==
        1);
  CHECK(run({"eval", "--model", dir + "/junk.gsnn", "--data", dir}).code == 1);
  fs::remove_all(dir);
}
