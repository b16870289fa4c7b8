#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using sdemu::test::source_path;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("sdemu-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string file(const std::string& name, const std::string& text = {}) const {
    const auto p = (path / name).string();
    if (!text.empty()) std::ofstream(p, std::ios::binary) << text;
    return p;
  }
};

// Runs the CLI with stdout and stderr discarded, returning the exit code.
int sdemu_cli(const std::string& args) {
  const std::string cmd = std::string(SDEMU_BINARY) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string bench(const char* name) { return source_path(std::string("bench/") + name + ".s"); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("verify exit codes") {
  CHECK(sdemu_cli("verify " + bench("loaduse")) == 0);
  CHECK(sdemu_cli("verify " + bench("branchy") + " --mutation add-sub-swap") == 2);
  CHECK(sdemu_cli("verify " + bench("loaduse") + " --set no_such_key=1") == 1);
  CHECK(sdemu_cli("verify " + bench("loaduse") + " --fifo-depth 3") == 1);
  CHECK(sdemu_cli("verify " + bench("loaduse") + " --set watchdog_cycles=20") == 4);
}

TEST_CASE("parse errors exit with 3") {
  TempDir d;
  CHECK(sdemu_cli("covergen " + d.file("bad.sv", "module m(input a;\nendmodule\n")) == 3);
  CHECK(sdemu_cli("covergen " + source_path("corpus/sv/01_basic.sv")) == 0);
  CHECK(sdemu_cli("asm " + d.file("bad.s", "addi x1, x0\n")) == 3);
  CHECK(sdemu_cli("run " + d.file("bad2.s", "frob x1\n")) == 3);
}

TEST_CASE("profiling does not change DUT cycles") {
  TempDir d;
  const auto a = (d.path / "a").string(), b = (d.path / "b").string();
  REQUIRE(sdemu_cli("profile " + bench("chase") + " --interval 1 --dir " + a) == 0);
  REQUIRE(sdemu_cli("profile " + bench("chase") + " --interval 100 --dir " + b) == 0);
  auto ja = nlohmann::json::parse(slurp(a + "/summary.json"));
  auto jb = nlohmann::json::parse(slurp(b + "/summary.json"));
  CHECK(ja["dut_cycles"] == jb["dut_cycles"]);
  CHECK(ja["host_ticks"] > jb["host_ticks"]);
  for (auto f : {"stall_stack.csv", "per_pc.csv", "slowdown.json"}) CHECK(fs::exists(fs::path(a) / f));
}

TEST_CASE("an immediate exit takes the pipeline fill") {
  TempDir d;
  const auto out = d.file("s.json");
  REQUIRE(sdemu_cli("run " + d.file("exit.s", "ebreak\n") + " -o " + out) == 0);
  CHECK(nlohmann::json::parse(slurp(out))["dut_cycles"] == 5);
}

TEST_CASE("same config gives byte-identical reports") {
  TempDir d;
  const auto cfg = d.file("c.cfg", "program = " + bench("stream") + "\ninterval = 7\nseed = 3\nlockstep = 1\n");
  for (auto cmd : {"run", "coverage", "verify"}) {
    CAPTURE(cmd);
    const auto a = d.file(std::string(cmd) + "1.json"), b = d.file(std::string(cmd) + "2.json");
    REQUIRE(sdemu_cli(std::string(cmd) + " -c " + cfg + " --random-host -o " + a) == 0);
    REQUIRE(sdemu_cli(std::string(cmd) + " -c " + cfg + " --random-host -o " + b) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK_FALSE(slurp(a).empty());
  }
}

}  // TEST_SUITE
