#include "fiberkit/app.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace fiberkit;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "fiberkit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("fiberkit_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const fs::path d = scratch("usage");
  CHECK(run({"laplace", "--mesh", (d / "missing.vtk").string(), "--out", (d / "o.vtk").string()}) == 2);
  CHECK(run({"mesh", "--bogus"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"--help"}) == 0);
  std::ofstream(d / "bad.ini") << "[eikonal]\nsigma_f = -1\n";
  CHECK(run({"--config", (d / "bad.ini").string(), "circ", "--out", (d / "c.csv").string()}) == 2);
  CHECK_FALSE(fs::exists(d / "c.csv"));
}

TEST_CASE("numeric failures exit with 1") {
  const fs::path d = scratch("numeric");
  std::ofstream(d / "div.ini") << "[circulation]\ndt = 0.05\n";
  CHECK(run({"--config", (d / "div.ini").string(), "circ", "--out", (d / "c.csv").string(), "--beats", "2"}) == 1);
  CHECK_FALSE(fs::exists(d / "c.csv"));
}

TEST_CASE("thread count from flag and environment") {
  const fs::path d = scratch("threads");
  const std::string out = (d / "c.csv").string();
  ::setenv("FIBERKIT_THREADS", "abc", 1);
  CHECK(run({"circ", "--out", out, "--beats", "1"}) == 2);
  CHECK(run({"--threads", "1", "circ", "--out", out, "--beats", "1"}) == 0);
  ::setenv("FIBERKIT_THREADS", "1", 1);
  CHECK(run({"circ", "--out", out, "--beats", "1"}) == 0);
  ::unsetenv("FIBERKIT_THREADS");
}

TEST_CASE("outputs carry a provenance header and are deterministic") {
  const fs::path d = scratch("prov");
  REQUIRE(run({"--seed", "7", "circ", "--out", (d / "a.csv").string(), "--beats", "2"}) == 0);
  REQUIRE(run({"--seed", "7", "circ", "--out", (d / "b.csv").string(), "--beats", "2"}) == 0);
  const std::string a = slurp(d / "a.csv");
  CHECK(a.rfind("# fiberkit ", 0) == 0);
  CHECK(a.find("config=") != std::string::npos);
  CHECK(a.find("seed=7") != std::string::npos);
  CHECK(a == slurp(d / "b.csv"));

  REQUIRE(run({"mesh", "--out", (d / "m.vtk").string(), "--edge-length", "0.001"}) == 0);
  std::istringstream vtk(slurp(d / "m.vtk"));
  std::string l1, l2;
  std::getline(vtk, l1);
  std::getline(vtk, l2);
  CHECK(l2.rfind("fiberkit ", 0) == 0);
}

TEST_CASE("mesh to laplace chain") {
  const fs::path d = scratch("chain");
  REQUIRE(run({"mesh", "--out", (d / "m.vtk").string(), "--edge-length", "0.001"}) == 0);
  REQUIRE(run({"laplace", "--mesh", (d / "m.vtk").string(), "--out", (d / "l.vtk").string()}) == 0);
  const std::string l = slurp(d / "l.vtk");
  CHECK(l.find("phi") != std::string::npos);
  CHECK(l.find("psi") != std::string::npos);
  CHECK(run({"laplace", "--mesh", (d / "m.vtk").string(), "--out", (d / "x.vtk").string(), "--bc", "Nowhere=1"}) == 2);
}
