#include <random>

#include "doctest.h"
#include "json.hpp"
#include "sdemu/golden.hpp"
#include "sdemu/runner.hpp"
#include "support.hpp"

using namespace sdemu;
using namespace sdemu::golden;

namespace {

std::optional<Field> naive_diff(const CommitRecord& a, const CommitRecord& b) {
  const Word fa[] = {a.pc, a.instr, a.rd, a.wdata};
  const Word fb[] = {b.pc, b.instr, b.rd, b.wdata};
  static constexpr Field kOrder[] = {Field::Pc, Field::Instr, Field::Rd, Field::Wdata};
  for (int i = 0; i < 4; ++i)
    if (fa[i] != fb[i]) return kOrder[i];
  return std::nullopt;
}

kernel::KernelConfig lockstep_cfg() {
  kernel::KernelConfig c;
  c.lockstep = true;
  return c;
}

}  // namespace

TEST_SUITE("golden") {

TEST_CASE("interpreter examples") {
  ProgramImage img;
  img.words[0] = 0x00A00093;  // addi x1, x0, 10
  Interpreter g(img);
  auto r = g.step();
  REQUIRE(r.record);
  CHECK(*r.record == CommitRecord{0, 0x00A00093, 1, 10});
  CHECK(g.state().pc == 4);
  CHECK(g.state().regs[1] == 10);

  ProgramImage b;
  b.entry = 0x100;
  b.words[0x100] = isa::encode({0, isa::Op::Beq, 0, 0, 0, 16});
  Interpreter gb(b);
  auto rb = gb.step();
  REQUIRE(rb.record);
  CHECK(rb.record->rd == 0);
  CHECK(rb.record->wdata == 0);
  CHECK(gb.state().pc == 0x110);

  auto l = test::program("li x2, 0x3000\nlw x7, 8(x2)\nebreak\n.org 0x3008\n.word 0xCAFEF00D\n");
  Interpreter gl(l);
  auto recs = gl.run(100);
  REQUIRE(recs.size() >= 2);
  CHECK(recs[recs.size() - 2].rd == 7);
  CHECK(recs[recs.size() - 2].wdata == l.words.at(0x3008));
  CHECK(gl.state().halted);
}

TEST_CASE("x0 writes are discarded") {
  auto img = test::program("addi x0, x0, 5\nebreak\n");
  Interpreter g(img);
  auto r = g.step();
  CHECK(r.record->rd == 0);
  CHECK(r.record->wdata == 0);
  CHECK(g.state().regs[0] == 0);
}

TEST_CASE("getchar reads the input script and blocks when it runs out") {
  auto img = test::program("li a7, 2\necall\necall\nebreak\n");
  Interpreter g(img, "A");
  g.step();
  CHECK(g.step().record->wdata == 'A');
  CHECK(g.step().status == StepStatus::Blocked);
}

TEST_CASE("first_difference agrees with a field-by-field comparison") {
  std::mt19937 rng(4);
  auto f = [&] { return static_cast<Word>(rng() % 4); };
  for (int n = 0; n < 20000; ++n) {
    CommitRecord a{f(), f(), static_cast<std::uint8_t>(f()), f()};
    CommitRecord b{f(), f(), static_cast<std::uint8_t>(f()), f()};
    if (n % 3 == 0) b = a;
    REQUIRE(first_difference(a, b) == naive_diff(a, b));
  }
}

TEST_CASE("lockstep is clean iff the streams are equal") {
  auto img = test::bench("branchy");
  Interpreter ref(img);
  const auto gold = ref.run(1'000'000);
  REQUIRE(ref.state().halted);
  std::mt19937 rng(8);
  for (int n = 0; n < 60; ++n) {
    auto dut = gold;
    std::optional<std::uint64_t> expect_at;
    switch (n % 4) {
      case 0: break;
      case 1: {
        auto i = rng() % dut.size();
        dut[i].wdata ^= 1u << (rng() % 32);
        expect_at = i;
        break;
      }
      case 2: {
        auto i = rng() % dut.size();
        dut.resize(i);
        expect_at = i;
        break;
      }
      case 3: {
        auto i = rng() % dut.size();
        dut[i].pc += 4;
        expect_at = i;
        break;
      }
    }
    Lockstep ls(img);
    for (const auto& r : dut)
      if (ls.check(r)) break;
    auto d = ls.finish();
    CHECK(d.has_value() == expect_at.has_value());
    if (d && expect_at) CHECK(d->commit_index == *expect_at);
    if (n % 4 == 2 && d) CHECK(d->field == Field::Missing);
  }
  Lockstep extra(img);
  for (const auto& r : gold) REQUIRE_FALSE(extra.check(r));
  auto d = extra.check(gold.back());
  REQUIRE(d);
  CHECK(d->field == Field::Extra);
  CHECK(d->commit_index == gold.size());
}

TEST_CASE("interpreter is deterministic") {
  for (auto name : test::kBenchmarks) {
    auto img = test::bench(name);
    Interpreter a(img), b(img);
    CHECK(a.run(1'000'000) == b.run(1'000'000));
  }
}

TEST_CASE("unmodified DUT is clean on every benchmark") {
  for (auto name : test::kBenchmarks) {
    CAPTURE(name);
    auto r = runner::run(lockstep_cfg(), test::bench(name));
    CHECK_FALSE(r.divergence);
    CHECK(r.compared > 0);
    CHECK(r.exit_status() == 0);
    Interpreter g(test::bench(name));
    CHECK(r.compared == g.run(1'000'000).size());
  }
}

TEST_CASE("an immediate exit is clean with one record") {
  auto r = runner::run(lockstep_cfg(), test::program("ebreak\n"));
  CHECK_FALSE(r.divergence);
  CHECK(r.compared == 1);
}

TEST_CASE("SUB wired as ADD diverges at the first SUB commit") {
  auto img = test::program(R"(
    li x1, 9
    li x2, 4
    xor x3, x1, x2
    sub x4, x1, x2
    add x5, x1, x2
    ebreak
  )");
  Interpreter g(img);
  auto gold = g.run(100);
  std::uint64_t first_sub = 0;
  while (isa::decode(gold[first_sub].instr).op != isa::Op::Sub) ++first_sub;

  auto cfg = lockstep_cfg();
  cfg.pipeline.mutation = dut::Mutation::AddSubSwap;
  auto r = runner::run(cfg, img);
  REQUIRE(r.divergence);
  CHECK(r.divergence->commit_index == first_sub);
  CHECK(r.divergence->field == Field::Wdata);
  CHECK(r.divergence->golden_record->wdata == 5);
  CHECK(r.divergence->dut_record->wdata == 13);
  CHECK(r.exit_status() == 2);

  auto j = nlohmann::json::parse(r.divergence->to_json());
  CHECK(j["commit_index"] == first_sub);
  CHECK(j["field"] == "wdata");
  CHECK(j["dut"]["wdata"] == "0x0000000d");
}

TEST_CASE("lockstep does not change DUT cycles") {
  for (auto name : test::kBenchmarks) {
    CAPTURE(name);
    auto img = test::bench(name);
    auto on = runner::run(lockstep_cfg(), img);
    auto off = runner::run({}, img);
    CHECK(on.summary.dut_cycles == off.summary.dut_cycles);
    CHECK(on.summary.host_ticks >= off.summary.host_ticks);
  }
}

}  // TEST_SUITE
