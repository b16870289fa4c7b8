#include <random>

#include "doctest.h"
#include "sdemu/profiler.hpp"
#include "sdemu/runner.hpp"
#include "support.hpp"

using namespace sdemu;
using namespace sdemu::profiler;
using dut::StallClass;

namespace {

std::uint8_t ev(StallClass c) { return event_of(c); }

// Builds a trace from (event, run length) pairs.
std::vector<std::uint8_t> trace_of(std::initializer_list<std::pair<std::uint8_t, int>> runs) {
  std::vector<std::uint8_t> t;
  for (auto [e, n] : runs) t.insert(t.end(), n, e);
  return t;
}

Aggregator sample_trace(const std::vector<std::uint8_t>& t, std::uint64_t interval) {
  Aggregator a(interval);
  for (std::uint64_t c = 0; c < t.size(); ++c)
    if (sampled(c, interval)) a.add(Sample{c, 0x100, t[c]});
  return a;
}

StallStack exact(const std::vector<std::uint8_t>& t) {
  StallStack s;
  for (auto e : t) ++s.cycles[e];
  return s;
}

double slowdown(const char* bench, std::uint64_t interval, unsigned depth) {
  kernel::KernelConfig cfg;
  cfg.sample_interval = interval;
  cfg.host.ticks_per_sample = 32;
  cfg.shell.fifo_depth = depth;
  auto r = runner::run(cfg, test::bench(bench));
  REQUIRE(r.watchdog.empty());
  return SlowdownReport{interval, r.summary.host_ticks, r.summary.dut_cycles}.slowdown();
}

}  // namespace

TEST_SUITE("profiler") {

TEST_CASE("attribution examples") {
  dut::PipelineView v;
  auto s = attribute(7, CommitRecord{0x80, isa::kNop, 0, 0}, std::nullopt, v);
  CHECK(s == Sample{7, 0x80, kCommitEvent});

  v.iss = {true, 0x84};
  v.ex2 = {true, 0x80};
  v.fetch_pc = 0x88;
  s = attribute(8, std::nullopt, StallClass::LoadArith, v);
  CHECK(s.pc == 0x80);
  CHECK(s.event == ev(StallClass::LoadArith));

  dut::PipelineView f;
  f.fetch_pc = 0x200;
  s = attribute(9, std::nullopt, StallClass::FrontendEmpty, f);
  CHECK(s.pc == 0x200);
}

TEST_CASE("oldest in flight is the deepest valid stage") {
  dut::PipelineView v;
  CHECK_FALSE(v.oldest_in_flight());
  v.iss = {true, 0x10};
  CHECK(v.oldest_in_flight() == Word{0x10});
  v.ex1 = {true, 0x0c};
  v.wb = {true, 0x04};
  CHECK(v.oldest_in_flight() == Word{0x04});
}

TEST_CASE("sample packing") {
  Sample s{0x1234567890ull, 0x0ABCDEF0, ev(StallClass::RawOther)};
  auto w = pack(s);
  CHECK(w[0] == 0x34567890);
  CHECK(w[1] == (0x0ABCDEF0u | Word{ev(StallClass::RawOther)} << 28));
  auto back = unpack_sample(w);
  CHECK(back.pc == s.pc);
  CHECK(back.event == s.event);
  CHECK(back.cycle == 0x34567890);
  CHECK_THROWS_AS(pack(Sample{0, kMaxSamplePc, 0}), std::out_of_range);
  for (std::uint8_t e = 0; e < kNumEvents; ++e) CHECK(event_from_name(event_name(e)) == e);
}

TEST_CASE("stacks at interval 1 and 10") {
  const auto t = trace_of({{kCommitEvent, 60}, {ev(StallClass::LoadArith), 25}, {ev(StallClass::BranchMispredict), 15}});
  auto one = sample_trace(t, 1);
  CHECK(one.stack()[kCommitEvent] == 60);
  CHECK(one.stack()[ev(StallClass::LoadArith)] == 25);
  CHECK(one.stack()[ev(StallClass::BranchMispredict)] == 15);
  CHECK(one.stack().total() == 100);
  CHECK(one.stack() == exact(t));

  auto ten = sample_trace(t, 10);
  CHECK(ten.stack().total() == 100);
  for (std::uint8_t e = 0; e < kNumEvents; ++e) {
    const auto d = static_cast<std::int64_t>(ten.stack()[e]) - static_cast<std::int64_t>(one.stack()[e]);
    CHECK(std::abs(d) <= 10);
  }
  CHECK(Aggregator(1).stack().total() == 0);
}

TEST_CASE("estimate error is bounded by interval times runs") {
  std::mt19937 rng(12);
  for (int n = 0; n < 300; ++n) {
    std::vector<std::uint8_t> t;
    const int len = 1 + rng() % 3000;
    while (static_cast<int>(t.size()) < len) t.insert(t.end(), 1 + rng() % 40, static_cast<std::uint8_t>(rng() % kNumEvents));
    t.resize(len);
    const std::uint64_t interval = 1 + rng() % 200;
    auto est = sample_trace(t, interval).stack();
    auto orc = exact(t);
    std::array<std::uint64_t, kNumEvents> runs{};
    for (std::size_t i = 0; i < t.size(); ++i)
      if (i == 0 || t[i] != t[i - 1]) ++runs[t[i]];
    for (std::uint8_t e = 0; e < kNumEvents; ++e) {
      const auto d = static_cast<std::int64_t>(est[e]) - static_cast<std::int64_t>(orc[e]);
      REQUIRE(static_cast<std::uint64_t>(std::abs(d)) <= interval * runs[e]);
    }
  }
}

TEST_CASE("relative error is normalised by total cycles") {
  StallStack o, e;
  o.cycles[0] = 90;
  o.cycles[1] = 10;
  e.cycles[0] = 100;
  auto r = relative_error(e, o);
  CHECK(r[0] == doctest::Approx(0.1));
  CHECK(r[1] == doctest::Approx(0.1));
  CHECK(r[2] == 0.0);
}

TEST_CASE("csv layout") {
  StallStack s;
  s.cycles[kCommitEvent] = 3;
  auto csv = stall_stack_csv(s);
  CHECK(csv.rfind("class,cycles\ncommit,3\n", 0) == 0);
  std::map<Word, StallStack> t{{0x40, s}};
  CHECK(per_pc_csv(t) == "pc,class,cycles\n0x00000040,commit,3\n");
}

TEST_CASE("oracle stack sums to the cycle count") {
  for (auto name : test::kBenchmarks) {
    CAPTURE(name);
    kernel::KernelConfig cfg;
    cfg.sample_interval = 1;
    runner::Options opt;
    opt.oracle = true;
    auto r = runner::run(cfg, test::bench(name), opt);
    CHECK(r.oracle.total() == r.summary.dut_cycles);
    REQUIRE(r.profile);
    CHECK(r.profile->stack() == r.oracle);
    CHECK(r.profile->per_pc() == r.oracle_per_pc);
  }
}

TEST_CASE("slowdown without sampling or I/O is one") {
  CHECK(slowdown("loaduse", 1'000'000, 8) == 1.0);
  CHECK(slowdown("branchy", 1'000'000, 8) == 1.0);
}

TEST_CASE("single-sample drain cost sets the interval-1 slowdown") {
  const double s1 = slowdown("loaduse", 1, 2);
  CHECK(s1 >= 31.0);
  CHECK(s1 <= 33.0);
  // The host drains while the DUT runs, so ten cycles cost one 32-tick drain.
  const double s10 = slowdown("loaduse", 10, 2);
  CHECK(s10 < s1);
  CHECK(s10 >= 3.1);
  CHECK(s10 <= 3.3);
}

TEST_CASE("slowdown never grows with the interval") {
  for (auto name : {"loaduse", "stream"}) {
    double prev = 1e9;
    for (std::uint64_t i : {1, 2, 5, 10, 100, 1000}) {
      const double s = slowdown(name, i, 8);
      CHECK(s <= prev);
      CHECK(s >= 1.0);
      prev = s;
    }
  }
}

TEST_CASE("slowdown report json") {
  SlowdownReport r{10, 320, 100};
  CHECK(r.slowdown() == doctest::Approx(3.2));
  auto j = r.to_json();
  CHECK(j.find("\"interval\"") != std::string::npos);
  CHECK(j.find("\"slowdown\"") != std::string::npos);
}

}  // TEST_SUITE
