#include <deque>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sdemu/pshell.hpp"

using namespace sdemu;
using namespace sdemu::pshell;

namespace {

PShellConfig two_by_two(unsigned depth) {
  PShellConfig c;
  c.num_fifos_h2d = 2;
  c.num_fifos_d2h = 2;
  c.fifo_depth = depth;
  return c;
}

}  // namespace

TEST_SUITE("pshell") {

TEST_CASE("csr persistence") {
  PShell s;
  const Word a = s.map().out_csr(0);
  CHECK(s.mmio_write(a, 0xDEADBEEF) == WriteAck::Ok);
  CHECK(s.mmio_read(a) == 0xDEADBEEF);
  CHECK(s.mmio_read(a) == 0xDEADBEEF);
  CHECK(s.dut_read_csr(0) == 0xDEADBEEF);
  s.mmio_write(s.map().out_csr(2), 7);
  CHECK(s.mmio_read(s.map().out_csr(2)) == 7);
  s.dut_write_csr(5, 99);
  CHECK(s.mmio_read(s.map().in_csr(5)) == 99);
  CHECK(s.violation_count() == 0);
}

TEST_CASE("host cannot write DUT-owned csrs") {
  PShell s;
  s.dut_write_csr(1, 3);
  CHECK(s.mmio_write(s.map().in_csr(1), 9) == WriteAck::Reserved);
  CHECK(s.mmio_read(s.map().in_csr(1)) == 3);
  CHECK(s.violations().back().kind == ViolationKind::ReservedOp);
}

TEST_CASE("write without credit is dropped and logged once") {
  PShellConfig c;
  c.fifo_depth = 2;
  PShell s(c);
  const Word port = s.map().h2d_data(0);
  CHECK(s.mmio_write(port, 10) == WriteAck::Ok);
  CHECK(s.mmio_write(port, 11) == WriteAck::Ok);
  CHECK(s.mmio_write(port, 12) == WriteAck::Dropped);
  CHECK(s.h2d(0).size() == 2);
  CHECK(s.dut_fifo_pop(0) == Word{10});
  CHECK(s.dut_fifo_pop(0) == Word{11});
  CHECK_FALSE(s.dut_fifo_pop(0));
  REQUIRE(s.violations().size() == 1);
  CHECK(s.violations()[0].kind == ViolationKind::WriteNoCredit);
  CHECK(s.violations()[0].address == port);
}

TEST_CASE("unmapped write changes nothing") {
  PShell s;
  s.mmio_write(s.map().out_csr(0), 1);
  CHECK(s.mmio_write(0xFFFF0000, 5) == WriteAck::Unmapped);
  CHECK(s.mmio_read(s.map().out_csr(0)) == 1);
  for (unsigned i = 1; i < s.config().num_csrs_out; ++i) CHECK(s.dut_read_csr(i) == 0);
  CHECK(s.h2d(0).empty());
  REQUIRE(s.violation_count() == 1);
  CHECK(s.violations()[0].kind == ViolationKind::UnmappedAddress);
  CHECK(s.mmio_read(0xFFFF0000) == kEmptyRead);
  CHECK(s.mmio_read(s.map().out_csr(0) + 2) == kEmptyRead);  // unaligned
  CHECK(s.violation_count() == 3);
}

TEST_CASE("empty read returns the sentinel") {
  PShell s;
  CHECK(s.mmio_read(s.map().d2h_data(1)) == 0xFFFFFFFF);
  CHECK(s.mmio_read(s.map().d2h_occupancy(1)) == 0);
  REQUIRE(s.violation_count() == 1);
  CHECK(s.violations()[0].kind == ViolationKind::ReadEmpty);
}

TEST_CASE("occupancy and data trace") {
  PShell s;
  s.dut_fifo_push(0, 5);
  s.dut_fifo_push(0, 9);
  CHECK(s.mmio_read(s.map().d2h_occupancy(0)) == 2);
  CHECK(s.mmio_read(s.map().d2h_data(0)) == 5);
  CHECK(s.mmio_read(s.map().d2h_occupancy(0)) == 1);
  CHECK(s.violation_count() == 0);
}

TEST_CASE("dut push and pop") {
  PShellConfig c;
  c.fifo_depth = 4;
  PShell s(c);
  for (Word w = 0; w < 3; ++w) REQUIRE(s.dut_fifo_push(0, w) == PushResult::Accepted);
  CHECK(s.dut_fifo_push(0, 3) == PushResult::Accepted);
  CHECK(s.d2h(0).occupancy() == 4);
  CHECK(s.dut_fifo_push(0, 4) == PushResult::WouldBlock);
  CHECK(s.d2h(0).occupancy() == 4);
  CHECK(s.mmio_read(s.map().d2h_data(0)) == 0);
  CHECK(s.dut_fifo_push(0, 4) == PushResult::Accepted);

  // mirror cases on the host-to-DUT side
  CHECK_FALSE(s.dut_fifo_pop(0));
  s.mmio_write(s.map().h2d_data(0), 21);
  CHECK(s.mmio_read(s.map().h2d_credits(0)) == 3);
  CHECK(s.dut_fifo_pop(0) == Word{21});
  CHECK(s.mmio_read(s.map().h2d_credits(0)) == 4);
  for (Word w = 0; w < 4; ++w) s.mmio_write(s.map().h2d_data(0), w);
  CHECK(s.mmio_write(s.map().h2d_data(0), 9) == WriteAck::Dropped);
  CHECK(s.dut_fifo_pop(0) == Word{0});
  CHECK(s.mmio_write(s.map().h2d_data(0), 9) == WriteAck::Ok);
}

TEST_CASE("record push is all or nothing") {
  PShellConfig c;
  c.fifo_depth = 4;
  PShell s(c);
  const Word rec[] = {1, 2, 3};
  CHECK(s.dut_fifo_push_record(2, rec) == PushResult::Accepted);
  CHECK(s.dut_fifo_push_record(2, rec) == PushResult::WouldBlock);
  CHECK(s.d2h(2).size() == 3);
}

TEST_CASE("address map arithmetic") {
  PShell s;
  CHECK(s.map().out_csr(3) == 0x4000000C);
  CHECK(s.map().in_csr(0) == 0x40001000);
  CHECK(s.map().h2d_data(0) == 0x40002000);
  CHECK(s.map().d2h_data(2) == 0x40003020);
  CHECK(s.map().d2h_occupancy(0) == 0x40003004);
  CHECK(s.map().control(ControlReg::Command) == 0x40004000);
  PShell two(two_by_two(8));
  CHECK(two.map().h2d_credits(1) == 0x40002014);
  auto loc = two.map().locate(0x40002014);
  REQUIRE(loc);
  CHECK(loc->kind == RegionKind::H2dCredits);
  CHECK(loc->index == 1);
}

TEST_CASE("oversized regions are rejected") {
  PShellConfig c;
  c.num_csrs_out = 2048;
  CHECK_THROWS_AS(PShell{c}, ConfigError);
  c.num_csrs_out = 1024;
  CHECK_NOTHROW(PShell{c});
  PShellConfig d;
  d.fifo_depth = 3;
  CHECK_THROWS_AS(PShell{d}, ConfigError);
}

TEST_CASE("violation log dump format") {
  PShell s;
  s.set_host_tick(17);
  s.mmio_read(0x50000000);
  std::ostringstream os;
  s.dump_violations(os);
  CHECK(os.str() == "tick=17 kind=unmapped-address addr=0x50000000\n");
}

TEST_CASE("control block step command") {
  PShell s;
  s.mmio_write(s.map().control(ControlReg::StepCount), 3);
  s.mmio_write(s.map().control(ControlReg::Command), 2);
  auto c = s.take_command();
  REQUIRE(c);
  CHECK(c->code == CommandCode::Step);
  CHECK(c->step_count == 3);
  CHECK_FALSE(s.take_command());
  CHECK(s.mmio_write(s.map().control(ControlReg::CycleLo), 1) == WriteAck::Reserved);
}

// Random host and DUT traffic checked against a plain queue model. Every
// call must return; counts and the violation log must match the model.
TEST_CASE("fuzz: lockup freedom, conservation, violation completeness") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    std::mt19937 rng(seed);
    const unsigned depth = 2u << (rng() % 3);
    PShell s(two_by_two(depth));
    std::deque<Word> h2d[2], d2h[2];
    std::uint64_t pushed[2] = {0, 0}, popped[2] = {0, 0};
    std::vector<std::pair<ViolationKind, Word>> expect;
    std::vector<Word> out_csr(8, 0);

    for (int step = 0; step < 4000; ++step) {
      const unsigned f = rng() % 2;
      const Word data = rng();
      switch (rng() % 10) {
        case 0: {  // host write to an h2d data port
          const Word a = 0x40002000 + 0x10 * f;
          auto ack = s.mmio_write(a, data);
          if (h2d[f].size() < depth) {
            h2d[f].push_back(data);
            CHECK(ack == WriteAck::Ok);
          } else {
            expect.emplace_back(ViolationKind::WriteNoCredit, a);
            CHECK(ack == WriteAck::Dropped);
          }
          break;
        }
        case 1: {  // host read of a d2h data port
          const Word a = 0x40003000 + 0x10 * f;
          Word got = s.mmio_read(a);
          if (d2h[f].empty()) {
            expect.emplace_back(ViolationKind::ReadEmpty, a);
            CHECK(got == 0xFFFFFFFF);
          } else {
            CHECK(got == d2h[f].front());
            d2h[f].pop_front();
            ++popped[f];
          }
          break;
        }
        case 2:
          CHECK(s.mmio_read(0x40002004 + 0x10 * f) == depth - h2d[f].size());
          break;
        case 3:
          CHECK(s.mmio_read(0x40003004 + 0x10 * f) == d2h[f].size());
          break;
        case 4: {
          const unsigned i = rng() % 8;
          s.mmio_write(0x40000000 + 4 * i, data);
          out_csr[i] = data;
          break;
        }
        case 5: {  // anywhere, mostly unmapped
          Word a = rng();
          if (a >= 0x40000000 && a < 0x40005000) a |= 1;  // unaligned inside the shell
          if (rng() % 2) s.mmio_write(a, data); else CHECK(s.mmio_read(a) == kEmptyRead);
          expect.emplace_back(ViolationKind::UnmappedAddress, a);
          break;
        }
        case 6:
        case 7: {
          auto r = s.dut_fifo_push(f, data);
          if (d2h[f].size() < depth) {
            CHECK(r == PushResult::Accepted);
            d2h[f].push_back(data);
            ++pushed[f];
          } else {
            CHECK(r == PushResult::WouldBlock);
          }
          break;
        }
        default: {
          auto w = s.dut_fifo_pop(f);
          if (h2d[f].empty()) {
            CHECK_FALSE(w);
          } else {
            REQUIRE(w);
            CHECK(*w == h2d[f].front());
            h2d[f].pop_front();
          }
          break;
        }
      }
      for (unsigned k = 0; k < 2; ++k) {
        REQUIRE(s.d2h(k).pushes_accepted() - s.d2h(k).pops() == s.d2h(k).occupancy());
        REQUIRE(s.d2h(k).pushes_accepted() == pushed[k]);
        REQUIRE(s.d2h(k).pops() == popped[k]);
        REQUIRE(s.h2d(k).credits() + s.h2d(k).size() == depth);
        REQUIRE(s.d2h(k).occupancy() + s.d2h(k).space() == depth);
      }
    }
    REQUIRE(s.violations().size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(s.violations()[i].kind == expect[i].first);
      CHECK(s.violations()[i].address == expect[i].second);
    }
    for (unsigned i = 0; i < 8; ++i) CHECK(s.dut_read_csr(i) == out_csr[i]);
  }
}

}  // TEST_SUITE
