#include <random>

#include "doctest.h"
#include "json.hpp"
#include "sdemu/kernel.hpp"
#include "sdemu/runner.hpp"
#include "support.hpp"

using namespace sdemu;
using namespace sdemu::kernel;

namespace {

const char* kStraightLine = "addi x1,x0,1\naddi x2,x0,2\naddi x3,x0,3\naddi x4,x0,4\naddi x5,x0,5\naddi x6,x0,6\nebreak\n";

std::uint64_t partition(const RunSummary& s) { return s.dut_cycles + s.gated_total() + s.idle_ticks; }

struct Trace {
  std::uint64_t cycles = 0;
  std::vector<CommitRecord> commits;
  std::string output;
};

Trace traced(const KernelConfig& cfg, const ProgramImage& img) {
  runner::Options opt;
  opt.dut_trace = true;
  auto r = runner::run(cfg, img, opt);
  REQUIRE(r.watchdog.empty());
  REQUIRE(r.summary.halted);
  return {r.summary.dut_cycles, r.dut_trace, r.output};
}

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("gate reasons are a set") {
  GateController g;
  CHECK(g.running());
  g.request(GateReason::TimerWait);
  CHECK(g.gated());
  g.request(GateReason::TimerWait);
  g.release(GateReason::TimerWait);
  CHECK(g.running());
  g.request(GateReason::TimerWait);
  g.request(GateReason::Backpressure);
  g.release(GateReason::Backpressure);
  CHECK(g.gated());
  CHECK(g.has(GateReason::TimerWait));
  g.release(GateReason::HostPause);  // absent, no effect
  CHECK(g.charged() == GateReason::TimerWait);
  g.request(GateReason::HostPause);
  CHECK(g.charged() == GateReason::HostPause);
}

TEST_CASE("free run without host work") {
  Kernel k({}, test::bench("loaduse"));
  auto s = k.run_until(StopCondition::at_cycles(100));
  CHECK(s.dut_cycles == 100);
  CHECK(s.host_ticks == 100);
  CHECK(s.gated_total() == 0);
  auto tr = k.tick();
  CHECK(tr.advanced_dut);
  CHECK(tr.gate_reasons == 0);
  CHECK(k.dut_cycle() == 101);
}

TEST_CASE("straight-line programs finish after the pipeline fill") {
  Kernel k({}, test::program(kStraightLine));
  auto s = k.run_until(StopCondition::halted());
  CHECK(s.dut_cycles == 4 + 7);
  CHECK(s.halted);

  Kernel one({}, test::program("ebreak\n"));
  CHECK(one.run_until(StopCondition::halted()).dut_cycles == 5);
}

TEST_CASE("sampling every cycle through a one-record FIFO") {
  KernelConfig cfg;
  cfg.shell.fifo_depth = 2;
  cfg.sample_interval = 1;
  cfg.host.ticks_per_sample = 5;
  Kernel k(cfg, test::bench("loaduse"));
  auto s = k.run_until(StopCondition::at_cycles(10));
  CHECK(s.dut_cycles == 10);
  CHECK(s.host_ticks >= 46);
  CHECK(s.host_ticks <= 55);
  CHECK(s.gated[static_cast<std::size_t>(GateReason::Backpressure)] > 0);
  CHECK(partition(s) == s.host_ticks);
}

TEST_CASE("backpressure holds the cycle until the host drains") {
  KernelConfig cfg;
  cfg.shell.fifo_depth = 2;
  cfg.sample_interval = 1;
  cfg.host.ticks_per_sample = 10;
  Kernel k(cfg, test::bench("loaduse"));
  const unsigned f = binding::kSampleFifo;
  bool saw_block = false, saw_resume = false;
  for (int t = 0; t < 200; ++t) {
    const auto before_cycle = k.dut_cycle();
    const auto before_occ = k.shell().d2h(f).size();
    auto rep = k.tick();
    const bool bp = rep.gate_reasons & (1u << static_cast<unsigned>(GateReason::Backpressure));
    if (bp) {
      saw_block = true;
      CHECK_FALSE(rep.advanced_dut);
      CHECK(k.dut_cycle() == before_cycle);
      CHECK(k.shell().d2h(f).space() < 2);
    }
    if (rep.advanced_dut && before_occ == 2 && saw_block) saw_resume = true;
  }
  CHECK(saw_block);
  CHECK(saw_resume);
}

TEST_CASE("step while paused") {
  Kernel k({}, test::bench("loaduse"));
  k.run_until(StopCondition::at_cycles(5));
  k.command({pshell::CommandCode::Pause, 0});
  for (int i = 0; i < 4; ++i) CHECK_FALSE(k.tick().advanced_dut);
  k.command({pshell::CommandCode::Step, 3});
  int advanced = 0;
  TickReport last;
  for (int i = 0; i < 10; ++i) {
    last = k.tick();
    advanced += last.advanced_dut;
  }
  CHECK(advanced == 3);
  CHECK(k.gate().has(GateReason::StepExhausted));
  CHECK(k.dut_cycle() == 8);
  k.command({pshell::CommandCode::Run, 0});
  CHECK(k.tick().advanced_dut);
}

TEST_CASE("step commands arrive through the control block") {
  Kernel k({}, test::bench("loaduse"));
  auto& s = k.shell();
  s.mmio_write(s.map().control(pshell::ControlReg::Command), 1);
  k.tick();
  const auto c0 = k.dut_cycle();
  s.mmio_write(s.map().control(pshell::ControlReg::StepCount), 2);
  s.mmio_write(s.map().control(pshell::ControlReg::Command), 2);
  for (int i = 0; i < 5; ++i) k.tick();
  CHECK(k.dut_cycle() == c0 + 2);
  CHECK(s.mmio_read(s.map().control(pshell::ControlReg::CycleLo)) == c0 + 2);
  CHECK((s.mmio_read(s.map().control(pshell::ControlReg::Status)) & 1) == 1);
}

TEST_CASE("gated ticks change nothing and cycles never outrun ticks") {
  KernelConfig cfg;
  cfg.host = HostCostModel::randomized(3);
  cfg.sample_interval = 3;
  cfg.lockstep = true;
  cfg.shell.fifo_depth = 4;
  Kernel k(cfg, test::bench("chase"));
  for (int t = 0; t < 200000 && !k.pipeline().halted(); ++t) {
    const auto c = k.dut_cycle();
    const auto regs = k.pipeline().regs();
    auto rep = k.tick();
    if (rep.gate_reasons && !k.pipeline().halted()) {
      REQUIRE_FALSE(rep.advanced_dut);
      REQUIRE(k.dut_cycle() == c);
      REQUIRE(k.pipeline().regs() == regs);
    }
    REQUIRE(k.dut_cycle() <= k.host_tick());
  }
  CHECK(k.pipeline().halted());
  CHECK(partition(k.summary()) == k.summary().host_ticks);
}

TEST_CASE("non-interference across host models") {
  for (auto name : {"chase", "hello"}) {
    CAPTURE(name);
    auto img = test::bench(name);
    const auto ref = traced({}, img);
    std::mt19937 rng(21);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      KernelConfig cfg;
      cfg.host = HostCostModel::randomized(seed);
      cfg.shell.fifo_depth = 2u << (rng() % 6);
      cfg.sample_interval = std::array<std::uint64_t, 4>{0, 1, 10, 100}[rng() % 4];
      cfg.lockstep = rng() % 2;
      cfg.transport = rng() % 3 == 0 ? HostTransport::Bridged : HostTransport::Direct;
      auto t = traced(cfg, img);
      CHECK(t.cycles == ref.cycles);
      CHECK(t.commits == ref.commits);
      CHECK(t.output == ref.output);
    }
  }
}

TEST_CASE("pause and step patterns do not change DUT behaviour") {
  auto img = test::bench("stream");
  const auto ref = traced({}, img);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    std::mt19937 rng(seed);
    KernelConfig cfg;
    cfg.host = HostCostModel::randomized(seed);
    Kernel k(cfg, img);
    std::vector<CommitRecord> commits;
    k.set_cycle_hook([&](std::uint64_t, const dut::CycleOutput& o) {
      if (o.committed) commits.push_back(*o.committed);
    });
    for (std::uint64_t t = 0; !k.pipeline().halted() && t < 5'000'000; ++t) {
      switch (rng() % 400) {
        case 0: k.command({pshell::CommandCode::Pause, 0}); break;
        case 1: k.command({pshell::CommandCode::Step, static_cast<Word>(rng() % 20)}); break;
        case 2:
        case 3: k.command({pshell::CommandCode::Run, 0}); break;
        default: break;
      }
      k.tick();
    }
    REQUIRE(k.pipeline().halted());
    CHECK(k.dut_cycle() == ref.cycles);
    CHECK(commits == ref.commits);
  }
}

TEST_CASE("watchdog") {
  KernelConfig cfg;
  cfg.watchdog_cycles = 50;
  Kernel k(cfg, test::bench("loaduse"));
  CHECK_THROWS_AS(k.run_until(StopCondition::halted()), WatchdogError);
  auto r = runner::run(cfg, test::bench("loaduse"));
  CHECK_FALSE(r.watchdog.empty());
  CHECK(r.exit_status() == 4);
}

TEST_CASE("summary json") {
  Kernel k({}, test::program("ebreak\n"));
  auto j = nlohmann::json::parse(k.run_until(StopCondition::halted()).to_json());
  CHECK(j["dut_cycles"] == 5);
  CHECK(j["host_ticks"] == 5);
  for (auto key : {"backpressure", "timer_wait", "host_pause", "step_exhausted"}) CHECK(j["gated"][key] == 0);
}

TEST_CASE("sendchar output reaches the host in order") {
  auto r = runner::run({}, test::bench("hello"));
  std::string expect;
  for (int i = 0; i < 9; ++i) expect += "Hello, world!\n";
  CHECK(r.output == expect);
}

TEST_CASE("getchar consumes the stdin script") {
  auto img = test::program(R"(
    li a7, 2
    ecall
    mv s0, a0
    ecall
    add s0, s0, a0
    li a7, 1
    mv a0, s0
    ecall
    li a7, 3
    li a0, 0
    ecall
  )");
  KernelConfig cfg;
  cfg.stdin_script = "\x10\x21";
  cfg.lockstep = true;
  auto r = runner::run(cfg, img);
  CHECK_FALSE(r.divergence);
  CHECK(r.output == "1");
  auto slow = cfg;
  slow.host = HostCostModel::randomized(4);
  auto r2 = runner::run(slow, img);
  CHECK(r2.summary.dut_cycles == r.summary.dut_cycles);
}

TEST_CASE("bound shell config never goes below the record width") {
  pshell::PShellConfig c;
  c.fifo_depth = 2;
  auto b = bound_shell_config(c);
  CHECK(b.num_fifos_d2h == binding::kNumD2h);
  CHECK(b.num_fifos_h2d == binding::kNumH2d);
  pshell::PShell s(b);
  for (unsigned f = 0; f < binding::kNumD2h; ++f) CHECK(s.d2h(f).depth() >= binding::kRecordWords[f]);
}

TEST_CASE("randomized host models are valid and reproducible") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto a = HostCostModel::randomized(seed), b = HostCostModel::randomized(seed);
    CHECK_NOTHROW(a.validate());
    CHECK(a.ticks_per_sample == b.ticks_per_sample);
    CHECK(a.data_delay_max == b.data_delay_max);
  }
  HostCostModel bad;
  bad.ticks_per_io = 0;
  CHECK_THROWS(bad.validate());
}

}  // TEST_SUITE
