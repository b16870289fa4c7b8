#include "doctest.h"
#include "sdemu/config.hpp"

using namespace sdemu;
using namespace sdemu::config;

TEST_SUITE("config") {

TEST_CASE("keys set their fields") {
  RunConfig c;
  apply(c, "interval", "10");
  apply(c, "fifo_depth", "0x10");
  apply(c, "lockstep", "on");
  apply(c, "transport", "bridged");
  apply(c, "mutation", "stale-load-data");
  apply(c, "predictor", "static");
  CHECK(c.kernel.sample_interval == 10);
  CHECK(c.kernel.shell.fifo_depth == 16);
  CHECK(c.kernel.lockstep);
  CHECK(c.kernel.transport == kernel::HostTransport::Bridged);
  CHECK(c.kernel.pipeline.mutation == dut::Mutation::StaleLoadData);
  CHECK(c.kernel.pipeline.predictor == dut::PredictorKind::StaticNotTaken);
}

TEST_CASE("bad keys and values are config errors") {
  RunConfig c;
  CHECK_THROWS_AS(apply(c, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(apply(c, "interval", "-3"), ConfigError);
  CHECK_THROWS_AS(apply(c, "interval", "12abc"), ConfigError);
  CHECK_THROWS_AS(apply(c, "lockstep", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply(c, "mutation", "flip-everything"), ConfigError);
  CHECK_THROWS_AS(apply(c, "fifo_depth", "0x100000000"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "interval"), ConfigError);
}

TEST_CASE("config text") {
  RunConfig c;
  apply_text(c, "# header\n\ninterval = 5  # trailing\n  seed=99\nprogram = bench/x.s\n");
  CHECK(c.kernel.sample_interval == 5);
  CHECK(c.kernel.host.seed == 99);
  CHECK(c.program == "bench/x.s");
  try {
    apply_text(c, "interval = 1\nbogus = 2\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_text(c, "interval 3\n"), ConfigError);
}

TEST_CASE("later settings override earlier ones") {
  RunConfig c;
  apply_text(c, "interval = 5\n");
  apply_override(c, "interval=7");
  CHECK(c.kernel.sample_interval == 7);
}

TEST_CASE("every key is listed and accepted") {
  CHECK(keys().size() >= 30);
  for (const auto& [k, help] : keys()) {
    CAPTURE(k);
    CHECK_FALSE(help.empty());
  }
}

TEST_CASE("escapes") {
  CHECK(unescape("a\\nb") == "a\nb");
  CHECK(unescape("\\x41\\t\\\\") == "A\t\\");
  CHECK(unescape("\\x10\\x21") == std::string("\x10\x21"));
  CHECK(unescape("\\q") == "\\q");
  CHECK_THROWS_AS(unescape("\\xZ1"), ConfigError);
  RunConfig c;
  apply(c, "stdin", "hi\\n");
  CHECK(c.kernel.stdin_script == "hi\n");
}

}  // TEST_SUITE
