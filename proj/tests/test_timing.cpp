#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "sdemu/kernel.hpp"
#include "sdemu/timing.hpp"
#include "support.hpp"

using namespace sdemu;
using namespace sdemu::timing;

namespace {

// Cycle-by-cycle bank occupancy: a request waits until its bank has a free
// cycle, then holds the bank for bank_busy cycles.
struct BankReplay {
  DramModelParams p;
  std::map<unsigned, std::set<std::uint64_t>> busy;

  unsigned service(Word addr, std::uint64_t issue) {
    const unsigned bank = (addr / p.line_bytes) % p.bank_count;
    std::uint64_t c = issue;
    while (busy[bank].count(c)) ++c;
    for (unsigned k = 0; k < p.bank_busy; ++k) busy[bank].insert(c + k);
    return p.base_latency + static_cast<unsigned>(c - issue);
  }
};

IoRequest read_at(Word addr, std::uint64_t cycle, Word id = 0) {
  return IoRequest{id, ReqKind::Read, addr, 0, cycle};
}

}  // namespace

TEST_SUITE("timing") {

TEST_CASE("dram examples") {
  DramModel m;
  CHECK(m.service(read_at(0x80000000, 0)) == 20);
  CHECK(m.service(read_at(0x80000000, 1)) == 29);

  DramModel n;
  CHECK(n.service(read_at(0x80000000, 0)) == 20);
  CHECK(n.service(read_at(0x80000040, 1)) == 20);

  BankReplay r;
  CHECK(r.service(0x80000000, 0) == 20);
  CHECK(r.service(0x80000000, 1) == 29);
}

TEST_CASE("bank mapping uses the bits above the line offset") {
  DramModelParams p;
  CHECK(p.bank_of(0x00) == 0);
  CHECK(p.bank_of(0x3C) == 0);
  CHECK(p.bank_of(0x40) == 1);
  CHECK(p.bank_of(0x1C0) == 7);
  CHECK(p.bank_of(0x200) == 0);
  p.bank_count = 6;
  CHECK_THROWS(p.validate());
  p.bank_count = 8;
  p.base_latency = 0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("dram model matches the occupancy replay") {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    std::mt19937 rng(seed);
    DramModelParams p;
    p.bank_busy = 1 + rng() % 16;
    p.base_latency = 1 + rng() % 30;
    DramModel m(p);
    BankReplay r{p, {}};
    std::uint64_t cycle = 0;
    for (int i = 0; i < 2000; ++i) {
      cycle += rng() % 6;
      const Word addr = 0x80000000 + 4 * (rng() % 1024);
      REQUIRE(m.service(read_at(addr, cycle)) == r.service(addr, cycle));
    }
  }
}

TEST_CASE("timer holds early data until expiry") {
  HardwareTimer t;
  t.programmed_latency = 20;
  t.armed = true;
  for (unsigned e = 0; e < 20; ++e) {
    if (e == 5) t.data_ready = true;
    REQUIRE(peek(t) == TimerStatus::Held);
    timer_step(t);
  }
  CHECK(try_deliver(t) == TimerStatus::Delivered);
  CHECK(t.elapsed == 20);
  CHECK_THROWS_AS(try_deliver(t), std::logic_error);
}

TEST_CASE("expired timer without data gates") {
  HardwareTimer t;
  CHECK(peek(t) == TimerStatus::GateNeeded);  // not yet programmed
  t.programmed_latency = 3;
  t.armed = true;
  for (int i = 0; i < 3; ++i) timer_step(t);
  CHECK(try_deliver(t) == TimerStatus::GateNeeded);
  CHECK_FALSE(t.delivered);
  t.data_ready = true;
  CHECK(try_deliver(t) == TimerStatus::Delivered);
}

TEST_CASE("late data gates for exactly the missing host ticks") {
  // Host loop at timer-bank level: the DUT runs whenever no gate is needed.
  TimerBank bank;
  std::uint64_t cycle = 100, gated = 0;
  bank.open(0, 0x80000000, cycle);
  bank.commit_cycle(cycle++);
  bank.arm(0, 20);
  std::uint64_t tick = 0, expired_at = 0;
  while (bank.outstanding()) {
    ++tick;
    const auto& t = bank.timers().front();
    if (!expired_at && t.elapsed == t.programmed_latency) expired_at = tick;
    if (expired_at && tick == expired_at + 7) bank.set_data_ready(0);
    if (bank.gate_needed()) {
      ++gated;
      continue;
    }
    bank.commit_cycle(cycle++);
  }
  CHECK(gated == 7);
  REQUIRE(bank.trace().size() == 1);
  CHECK(bank.trace()[0].issue == 100);
  CHECK(bank.trace()[0].deliver == 120);
  CHECK(bank.trace()[0].deliver - bank.trace()[0].issue == 20);
  CHECK(bank.trace()[0].to_string() == "req=0 addr=0x80000000 issue=100 L=20 deliver=120");
}

TEST_CASE("latency fidelity under random arming and arrival") {
  std::mt19937 rng(3);
  TimerBank bank(4);
  std::map<Word, unsigned> programmed;
  std::map<Word, std::uint64_t> ready_at;
  std::uint64_t cycle = 0, tick = 0;
  Word next = 0;
  while (bank.trace().size() < 3000) {
    ++tick;
    std::vector<Word> open_ids;
    for (const auto& t : bank.timers()) open_ids.push_back(t.req_id);
    for (Word id : open_ids) {
      if (!programmed.count(id) && rng() % 3 == 0) {
        programmed[id] = 1 + rng() % 40;
        ready_at[id] = tick + rng() % 60;
        bank.arm(id, programmed[id]);
      }
      if (ready_at.count(id) && ready_at[id] <= tick) bank.set_data_ready(id);
    }
    if (bank.gate_needed()) continue;
    if (!bank.full_after_delivery() && rng() % 4 == 0) bank.open(next++, 0, cycle);
    bank.commit_cycle(cycle++);
  }
  for (const auto& e : bank.trace()) {
    REQUIRE(e.latency == programmed.at(e.req_id));
    REQUIRE(e.deliver - e.issue == e.latency);
  }
}

TEST_CASE("independent instructions retire during a miss") {
  auto img = test::program(R"(
    li x2, 0x80000000
    lw x5, 0(x2)
    addi x6, x0, 1
    addi x7, x0, 2
    addi x8, x0, 3
    addi x9, x0, 4
    addi x10, x0, 5
    add x11, x5, x6
    li a7, 3
    li a0, 0
    ecall
  )");
  kernel::KernelConfig cfg;
  kernel::Kernel k(cfg, img);
  std::vector<std::uint64_t> commit_cycles;
  k.set_cycle_hook([&](std::uint64_t c, const dut::CycleOutput& o) {
    if (o.committed) commit_cycles.push_back(c);
  });
  k.run_until(kernel::StopCondition::halted());
  REQUIRE(k.timers().trace().size() == 1);
  const auto& e = k.timers().trace()[0];
  CHECK(e.deliver - e.issue == e.latency);
  const auto during = std::count_if(commit_cycles.begin(), commit_cycles.end(),
                                    [&](std::uint64_t c) { return c > e.issue && c < e.deliver; });
  CHECK(during >= 5);
}

}  // TEST_SUITE
