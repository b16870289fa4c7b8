#include <random>

#include "doctest.h"
#include "sdemu/assembler.hpp"
#include "sdemu/isa.hpp"
#include "support.hpp"

using namespace sdemu;
using isa::Op;
using isa::Word;

namespace {

// Field extraction written directly from the base encoding tables.
struct Fields {
  Word opcode, rd, funct3, rs1, rs2, funct7;
  std::int32_t imm_i;
};

Fields split(Word w) {
  return {w & 0x7f, (w >> 7) & 0x1f, (w >> 12) & 7, (w >> 15) & 0x1f, (w >> 20) & 0x1f, w >> 25,
          static_cast<std::int32_t>(w) >> 20};
}

Word ref_addi(unsigned rd, unsigned rs1, int imm) {
  return (static_cast<Word>(imm) & 0xfff) << 20 | rs1 << 15 | 0u << 12 | rd << 7 | 0x13;
}

}  // namespace

TEST_SUITE("isa") {

TEST_CASE("decode examples") {
  auto nop = isa::decode(0x00000013);
  CHECK(nop.op == Op::Addi);
  CHECK(nop.rd == 0);
  CHECK(nop.rs1 == 0);
  CHECK(nop.imm == 0);
  CHECK(ref_addi(0, 0, 0) == isa::kNop);

  auto f = split(0x00A00093);
  REQUIRE(f.opcode == 0x13);
  REQUIRE(f.funct3 == 0);
  auto i = isa::decode(0x00A00093);
  CHECK(i.op == Op::Addi);
  CHECK(i.rd == f.rd);
  CHECK(i.rd == 1);
  CHECK(i.rs1 == f.rs1);
  CHECK(i.imm == f.imm_i);
  CHECK(i.imm == 10);

  CHECK(isa::decode(0xFFFFFFFF).op == Op::Illegal);
}

TEST_CASE("encode inverts decode on every legal word") {
  std::mt19937 rng(7);
  int legal = 0;
  for (int n = 0; n < 200000; ++n) {
    Word w = rng();
    // bias towards real opcodes so every format is exercised
    static constexpr Word kOpcodes[] = {0x37, 0x17, 0x6f, 0x67, 0x63, 0x03, 0x23, 0x13, 0x33, 0x73};
    if (n % 2) w = (w & ~0x7fu) | kOpcodes[rng() % 10];
    auto d = isa::decode(w);
    if (d.op == Op::Illegal) continue;
    ++legal;
    REQUIRE(isa::encode(d) == w);
    REQUIRE(isa::decode(isa::encode(d)) == d);
  }
  CHECK(legal > 10000);
}

TEST_CASE("constructed instructions round trip") {
  std::mt19937 rng(11);
  auto reg = [&] { return static_cast<std::uint8_t>(rng() % 32); };
  auto simm = [&](int bits) { return static_cast<std::int32_t>(rng() % (1u << bits)) - (1 << (bits - 1)); };
  for (int n = 0; n < 5000; ++n) {
    isa::Instr in;
    switch (n % 6) {
      case 0: in = {0, Op::Addi, reg(), reg(), 0, simm(12)}; break;
      case 1: in = {0, Op::Sub, reg(), reg(), reg(), 0}; break;
      case 2: in = {0, Op::Sw, 0, reg(), reg(), simm(12)}; break;
      case 3: in = {0, Op::Bge, 0, reg(), reg(), simm(13) & ~1}; break;
      case 4: in = {0, Op::Jal, reg(), 0, 0, simm(21) & ~1}; break;
      case 5: in = {0, Op::Srai, reg(), reg(), 0, static_cast<std::int32_t>(rng() % 32)}; break;
    }
    in.word = isa::encode(in);
    REQUIRE(isa::decode(in.word) == in);
  }
}

TEST_CASE("alu and branch helpers") {
  CHECK(isa::alu(Op::Sub, 3, 5) == static_cast<Word>(-2));
  CHECK(isa::alu(Op::Sra, 0x80000000u, 4) == 0xF8000000u);
  CHECK(isa::branch_taken(Op::Blt, static_cast<Word>(-1), 0));
  CHECK_FALSE(isa::branch_taken(Op::Bltu, static_cast<Word>(-1), 0));
}

}  // TEST_SUITE

TEST_SUITE("asm") {

TEST_CASE("addi encodes like the reference") {
  auto img = test::program("addi x1, x0, 10\n");
  REQUIRE(img.words.size() == 1);
  CHECK(img.words.begin()->second == ref_addi(1, 0, 10));
  CHECK(img.words.begin()->second == 0x00A00093);
}

TEST_CASE("branch to a label 8 bytes ahead") {
  auto img = test::program("beq x1, x0, label\nnop\nlabel: nop\n");
  auto b = isa::decode(img.words.at(0));
  CHECK(b.op == Op::Beq);
  CHECK(b.rs1 == 1);
  CHECK(b.rs2 == 0);
  CHECK(b.imm == 8);
  CHECK(isa::encode(b) == img.words.at(0));
}

TEST_CASE("word directive at an origin") {
  auto img = test::program(".org 0x100\n.word 0xDEADBEEF\n");
  CHECK(img.words.at(0x100) == 0xDEADBEEF);
  CHECK(img.to_text().find("00000100: DEADBEEF") != std::string::npos);
  auto back = ProgramImage::parse(img.to_text());
  CHECK(back.words == img.words);
  CHECK(back.entry == img.entry);
}

TEST_CASE("errors carry line numbers") {
  try {
    test::program("nop\nfrob x1, x2\n");
    FAIL("no error");
  } catch (const assembler::AsmError& e) {
    CHECK(e.line() == 2);
  }
  try {
    test::program("nop\nnop\naddi x1, x0, 5000\n");
    FAIL("no error");
  } catch (const assembler::AsmError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(test::program("beq x1, x0, nowhere\n"), assembler::AsmError);
}

TEST_CASE("assembly is deterministic") {
  for (auto name : test::kBenchmarks) {
    auto a = test::bench(name), b = test::bench(name);
    CHECK(a.to_text() == b.to_text());
  }
}

}  // TEST_SUITE
