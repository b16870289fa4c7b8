#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sdemu::isa {

using Word = std::uint32_t;

// Integer subset executed by the example core. Anything else decodes to Illegal.
enum class Op : std::uint8_t {
  Illegal,
  Lui, Auipc,
  Addi, Slti, Andi, Ori, Xori, Slli, Srli, Srai,
  Add, Sub, Slt, And, Or, Xor, Sll, Srl, Sra,
  Lw, Sw,
  Beq, Bne, Blt, Bge, Bltu, Bgeu,
  Jal, Jalr,
  Ecall, Ebreak,
};

struct Instr {
  Word word = 0;
  Op op = Op::Illegal;
  std::uint8_t rd = 0;
  std::uint8_t rs1 = 0;
  std::uint8_t rs2 = 0;
  std::int32_t imm = 0;

  friend bool operator==(const Instr&, const Instr&) = default;
};

Instr decode(Word word);

// Builds the canonical encoding of `in` (ignores in.word). Fields that the
// format does not carry must be zero for decode(encode(i)) to round-trip.
Word encode(const Instr& in);

// Operand usage, used by hazard logic and by the golden model alike.
bool reads_rs1(Op op);
bool reads_rs2(Op op);
bool writes_rd(Op op);

bool is_branch(Op op);
bool is_alu(Op op);  // integer ops that may run on either ALU
bool is_load(Op op);
bool is_store(Op op);

std::string_view mnemonic(Op op);
std::string disassemble(const Instr& in);

// Shared ALU and branch semantics.
Word alu(Op op, Word a, Word b);
bool branch_taken(Op op, Word a, Word b);

inline constexpr Word kNop = 0x00000013;

// Register ABI names, x0..x31.
std::string_view abi_name(unsigned reg);
inline constexpr unsigned kRegA0 = 10;
inline constexpr unsigned kRegA7 = 17;

}  // namespace sdemu::isa
