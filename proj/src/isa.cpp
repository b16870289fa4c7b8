#include "sdemu/isa.hpp"

#include <array>
#include <cstdio>

namespace sdemu::isa {

namespace {

constexpr Word kOpLui = 0x37, kOpAuipc = 0x17, kOpJal = 0x6f, kOpJalr = 0x67;
constexpr Word kOpBranch = 0x63, kOpLoad = 0x03, kOpStore = 0x23;
constexpr Word kOpImm = 0x13, kOpReg = 0x33, kOpSystem = 0x73;

std::int32_t imm_i(Word w) { return static_cast<std::int32_t>(w) >> 20; }

std::int32_t imm_s(Word w) {
  return ((static_cast<std::int32_t>(w) >> 25) << 5) | static_cast<std::int32_t>((w >> 7) & 0x1f);
}

std::int32_t imm_b(Word w) {
  Word v = ((w >> 31) & 1) << 12 | ((w >> 7) & 1) << 11 | ((w >> 25) & 0x3f) << 5 |
           ((w >> 8) & 0xf) << 1;
  return static_cast<std::int32_t>(v << 19) >> 19;
}

std::int32_t imm_j(Word w) {
  Word v = ((w >> 31) & 1) << 20 | ((w >> 12) & 0xff) << 12 | ((w >> 20) & 1) << 11 |
           ((w >> 21) & 0x3ff) << 1;
  return static_cast<std::int32_t>(v << 11) >> 11;
}

Instr illegal(Word w) { return Instr{.word = w}; }

Instr make(Word w, Op op, unsigned rd, unsigned rs1, unsigned rs2, std::int32_t imm) {
  return Instr{w, op, static_cast<std::uint8_t>(rd), static_cast<std::uint8_t>(rs1),
               static_cast<std::uint8_t>(rs2), imm};
}

Word r_type(Word f7, unsigned rs2, unsigned rs1, Word f3, unsigned rd, Word opc) {
  return f7 << 25 | Word(rs2) << 20 | Word(rs1) << 15 | f3 << 12 | Word(rd) << 7 | opc;
}

Word i_type(std::int32_t imm, unsigned rs1, Word f3, unsigned rd, Word opc) {
  return (static_cast<Word>(imm) & 0xfff) << 20 | Word(rs1) << 15 | f3 << 12 | Word(rd) << 7 | opc;
}

Word s_type(std::int32_t imm, unsigned rs2, unsigned rs1, Word f3, Word opc) {
  Word u = static_cast<Word>(imm);
  return ((u >> 5) & 0x7f) << 25 | Word(rs2) << 20 | Word(rs1) << 15 | f3 << 12 | (u & 0x1f) << 7 | opc;
}

Word b_type(std::int32_t imm, unsigned rs2, unsigned rs1, Word f3) {
  Word u = static_cast<Word>(imm);
  return ((u >> 12) & 1) << 31 | ((u >> 5) & 0x3f) << 25 | Word(rs2) << 20 | Word(rs1) << 15 |
         f3 << 12 | ((u >> 1) & 0xf) << 8 | ((u >> 11) & 1) << 7 | kOpBranch;
}

Word j_type(std::int32_t imm, unsigned rd) {
  Word u = static_cast<Word>(imm);
  return ((u >> 20) & 1) << 31 | ((u >> 1) & 0x3ff) << 21 | ((u >> 11) & 1) << 20 |
         ((u >> 12) & 0xff) << 12 | Word(rd) << 7 | kOpJal;
}

}  // namespace

Instr decode(Word w) {
  const Word opc = w & 0x7f;
  const unsigned rd = (w >> 7) & 0x1f;
  const Word f3 = (w >> 12) & 0x7;
  const unsigned rs1 = (w >> 15) & 0x1f;
  const unsigned rs2 = (w >> 20) & 0x1f;
  const Word f7 = w >> 25;

  switch (opc) {
    case kOpLui:
      return make(w, Op::Lui, rd, 0, 0, static_cast<std::int32_t>(w & 0xfffff000));
    case kOpAuipc:
      return make(w, Op::Auipc, rd, 0, 0, static_cast<std::int32_t>(w & 0xfffff000));
    case kOpJal:
      return make(w, Op::Jal, rd, 0, 0, imm_j(w));
    case kOpJalr:
      if (f3 != 0) return illegal(w);
      return make(w, Op::Jalr, rd, rs1, 0, imm_i(w));
    case kOpBranch: {
      static constexpr std::array<Op, 8> kOps{Op::Beq,     Op::Bne, Op::Illegal, Op::Illegal,
                                              Op::Blt,     Op::Bge, Op::Bltu,    Op::Bgeu};
      if (kOps[f3] == Op::Illegal) return illegal(w);
      return make(w, kOps[f3], 0, rs1, rs2, imm_b(w));
    }
    case kOpLoad:
      if (f3 != 2) return illegal(w);
      return make(w, Op::Lw, rd, rs1, 0, imm_i(w));
    case kOpStore:
      if (f3 != 2) return illegal(w);
      return make(w, Op::Sw, 0, rs1, rs2, imm_s(w));
    case kOpImm:
      switch (f3) {
        case 0: return make(w, Op::Addi, rd, rs1, 0, imm_i(w));
        case 2: return make(w, Op::Slti, rd, rs1, 0, imm_i(w));
        case 4: return make(w, Op::Xori, rd, rs1, 0, imm_i(w));
        case 6: return make(w, Op::Ori, rd, rs1, 0, imm_i(w));
        case 7: return make(w, Op::Andi, rd, rs1, 0, imm_i(w));
        case 1:
          if (f7 != 0) return illegal(w);
          return make(w, Op::Slli, rd, rs1, 0, static_cast<std::int32_t>(rs2));
        case 5:
          if (f7 == 0) return make(w, Op::Srli, rd, rs1, 0, static_cast<std::int32_t>(rs2));
          if (f7 == 0x20) return make(w, Op::Srai, rd, rs1, 0, static_cast<std::int32_t>(rs2));
          return illegal(w);
        default:
          return illegal(w);
      }
    case kOpReg: {
      Op op = Op::Illegal;
      if (f7 == 0) {
        static constexpr std::array<Op, 8> kOps{Op::Add, Op::Sll, Op::Slt, Op::Illegal,
                                                Op::Xor, Op::Srl, Op::Or,  Op::And};
        op = kOps[f3];
      } else if (f7 == 0x20) {
        if (f3 == 0) op = Op::Sub;
        if (f3 == 5) op = Op::Sra;
      }
      if (op == Op::Illegal) return illegal(w);
      return make(w, op, rd, rs1, rs2, 0);
    }
    case kOpSystem:
      if (w == 0x00000073) return make(w, Op::Ecall, 0, 0, 0, 0);
      if (w == 0x00100073) return make(w, Op::Ebreak, 0, 0, 0, 0);
      return illegal(w);
    default:
      return illegal(w);
  }
}

Word encode(const Instr& in) {
  const unsigned rd = in.rd, rs1 = in.rs1, rs2 = in.rs2;
  const std::int32_t imm = in.imm;
  switch (in.op) {
    case Op::Illegal: return in.word;
    case Op::Lui: return (static_cast<Word>(imm) & 0xfffff000) | Word(rd) << 7 | kOpLui;
    case Op::Auipc: return (static_cast<Word>(imm) & 0xfffff000) | Word(rd) << 7 | kOpAuipc;
    case Op::Jal: return j_type(imm, rd);
    case Op::Jalr: return i_type(imm, rs1, 0, rd, kOpJalr);
    case Op::Beq: return b_type(imm, rs2, rs1, 0);
    case Op::Bne: return b_type(imm, rs2, rs1, 1);
    case Op::Blt: return b_type(imm, rs2, rs1, 4);
    case Op::Bge: return b_type(imm, rs2, rs1, 5);
    case Op::Bltu: return b_type(imm, rs2, rs1, 6);
    case Op::Bgeu: return b_type(imm, rs2, rs1, 7);
    case Op::Lw: return i_type(imm, rs1, 2, rd, kOpLoad);
    case Op::Sw: return s_type(imm, rs2, rs1, 2, kOpStore);
    case Op::Addi: return i_type(imm, rs1, 0, rd, kOpImm);
    case Op::Slti: return i_type(imm, rs1, 2, rd, kOpImm);
    case Op::Xori: return i_type(imm, rs1, 4, rd, kOpImm);
    case Op::Ori: return i_type(imm, rs1, 6, rd, kOpImm);
    case Op::Andi: return i_type(imm, rs1, 7, rd, kOpImm);
    case Op::Slli: return r_type(0, static_cast<unsigned>(imm) & 0x1f, rs1, 1, rd, kOpImm);
    case Op::Srli: return r_type(0, static_cast<unsigned>(imm) & 0x1f, rs1, 5, rd, kOpImm);
    case Op::Srai: return r_type(0x20, static_cast<unsigned>(imm) & 0x1f, rs1, 5, rd, kOpImm);
    case Op::Add: return r_type(0, rs2, rs1, 0, rd, kOpReg);
    case Op::Sub: return r_type(0x20, rs2, rs1, 0, rd, kOpReg);
    case Op::Sll: return r_type(0, rs2, rs1, 1, rd, kOpReg);
    case Op::Slt: return r_type(0, rs2, rs1, 2, rd, kOpReg);
    case Op::Xor: return r_type(0, rs2, rs1, 4, rd, kOpReg);
    case Op::Srl: return r_type(0, rs2, rs1, 5, rd, kOpReg);
    case Op::Sra: return r_type(0x20, rs2, rs1, 5, rd, kOpReg);
    case Op::Or: return r_type(0, rs2, rs1, 6, rd, kOpReg);
    case Op::And: return r_type(0, rs2, rs1, 7, rd, kOpReg);
    case Op::Ecall: return 0x00000073;
    case Op::Ebreak: return 0x00100073;
  }
  return in.word;
}

bool reads_rs1(Op op) {
  switch (op) {
    case Op::Illegal: case Op::Lui: case Op::Auipc: case Op::Jal:
    case Op::Ecall: case Op::Ebreak:
      return false;
    default:
      return true;
  }
}

bool reads_rs2(Op op) {
  switch (op) {
    case Op::Add: case Op::Sub: case Op::Slt: case Op::And: case Op::Or: case Op::Xor:
    case Op::Sll: case Op::Srl: case Op::Sra: case Op::Sw:
    case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: case Op::Bltu: case Op::Bgeu:
      return true;
    default:
      return false;
  }
}

bool writes_rd(Op op) {
  switch (op) {
    case Op::Illegal: case Op::Sw: case Op::Ecall: case Op::Ebreak:
    case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: case Op::Bltu: case Op::Bgeu:
      return false;
    default:
      return true;
  }
}

bool is_branch(Op op) {
  return op == Op::Beq || op == Op::Bne || op == Op::Blt || op == Op::Bge || op == Op::Bltu ||
         op == Op::Bgeu;
}

bool is_alu(Op op) {
  switch (op) {
    case Op::Lui: case Op::Auipc:
    case Op::Addi: case Op::Slti: case Op::Andi: case Op::Ori: case Op::Xori:
    case Op::Slli: case Op::Srli: case Op::Srai:
    case Op::Add: case Op::Sub: case Op::Slt: case Op::And: case Op::Or: case Op::Xor:
    case Op::Sll: case Op::Srl: case Op::Sra:
      return true;
    default:
      return false;
  }
}

bool is_load(Op op) { return op == Op::Lw; }
bool is_store(Op op) { return op == Op::Sw; }

std::string_view mnemonic(Op op) {
  switch (op) {
    case Op::Illegal: return "illegal";
    case Op::Lui: return "lui";
    case Op::Auipc: return "auipc";
    case Op::Addi: return "addi";
    case Op::Slti: return "slti";
    case Op::Andi: return "andi";
    case Op::Ori: return "ori";
    case Op::Xori: return "xori";
    case Op::Slli: return "slli";
    case Op::Srli: return "srli";
    case Op::Srai: return "srai";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Slt: return "slt";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Xor: return "xor";
    case Op::Sll: return "sll";
    case Op::Srl: return "srl";
    case Op::Sra: return "sra";
    case Op::Lw: return "lw";
    case Op::Sw: return "sw";
    case Op::Beq: return "beq";
    case Op::Bne: return "bne";
    case Op::Blt: return "blt";
    case Op::Bge: return "bge";
    case Op::Bltu: return "bltu";
    case Op::Bgeu: return "bgeu";
    case Op::Jal: return "jal";
    case Op::Jalr: return "jalr";
    case Op::Ecall: return "ecall";
    case Op::Ebreak: return "ebreak";
  }
  return "illegal";
}

std::string disassemble(const Instr& in) {
  char buf[64];
  const auto m = std::string(mnemonic(in.op));
  const int rd = in.rd, rs1 = in.rs1, rs2 = in.rs2;
  switch (in.op) {
    case Op::Illegal:
      std::snprintf(buf, sizeof buf, "illegal 0x%08x", in.word);
      break;
    case Op::Ecall: case Op::Ebreak:
      return m;
    case Op::Lui: case Op::Auipc:
      std::snprintf(buf, sizeof buf, "%s x%d, 0x%x", m.c_str(), rd, static_cast<Word>(in.imm) >> 12);
      break;
    case Op::Jal:
      std::snprintf(buf, sizeof buf, "%s x%d, %d", m.c_str(), rd, in.imm);
      break;
    case Op::Lw: case Op::Jalr:
      std::snprintf(buf, sizeof buf, "%s x%d, %d(x%d)", m.c_str(), rd, in.imm, rs1);
      break;
    case Op::Sw:
      std::snprintf(buf, sizeof buf, "%s x%d, %d(x%d)", m.c_str(), rs2, in.imm, rs1);
      break;
    default:
      if (is_branch(in.op))
        std::snprintf(buf, sizeof buf, "%s x%d, x%d, %d", m.c_str(), rs1, rs2, in.imm);
      else if (reads_rs2(in.op))
        std::snprintf(buf, sizeof buf, "%s x%d, x%d, x%d", m.c_str(), rd, rs1, rs2);
      else
        std::snprintf(buf, sizeof buf, "%s x%d, x%d, %d", m.c_str(), rd, rs1, in.imm);
  }
  return buf;
}

Word alu(Op op, Word a, Word b) {
  const auto sa = static_cast<std::int32_t>(a);
  const auto sb = static_cast<std::int32_t>(b);
  switch (op) {
    case Op::Add: case Op::Addi: return a + b;
    case Op::Sub: return a - b;
    case Op::Slt: case Op::Slti: return sa < sb ? 1 : 0;
    case Op::And: case Op::Andi: return a & b;
    case Op::Or: case Op::Ori: return a | b;
    case Op::Xor: case Op::Xori: return a ^ b;
    case Op::Sll: case Op::Slli: return a << (b & 31);
    case Op::Srl: case Op::Srli: return a >> (b & 31);
    case Op::Sra: case Op::Srai: return static_cast<Word>(sa >> (b & 31));
    case Op::Lui: return b;
    case Op::Auipc: return a + b;
    default: return 0;
  }
}

bool branch_taken(Op op, Word a, Word b) {
  const auto sa = static_cast<std::int32_t>(a);
  const auto sb = static_cast<std::int32_t>(b);
  switch (op) {
    case Op::Beq: return a == b;
    case Op::Bne: return a != b;
    case Op::Blt: return sa < sb;
    case Op::Bge: return sa >= sb;
    case Op::Bltu: return a < b;
    case Op::Bgeu: return a >= b;
    default: return false;
  }
}

std::string_view abi_name(unsigned reg) {
  static constexpr std::array<std::string_view, 32> kNames{
      "zero", "ra", "sp", "gp", "tp",  "t0",  "t1", "t2", "s0", "s1", "a0",
      "a1",   "a2", "a3", "a4", "a5",  "a6",  "a7", "s2", "s3", "s4", "s5",
      "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};
  return reg < 32 ? kNames[reg] : "?";
}

}  // namespace sdemu::isa
