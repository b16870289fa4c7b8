#include "sdemu/golden.hpp"

#include <cstdio>

#include "json.hpp"

namespace sdemu::golden {

using isa::Op;

Interpreter::Interpreter(const ProgramImage& image, std::string input) : in_(std::move(input)) {
  image.load_into(st_.mem);
  st_.pc = image.entry;
}

StepResult Interpreter::step() {
  StepResult r;
  if (st_.halted) {
    r.status = StepStatus::Halted;
    return r;
  }
  const Word pc = st_.pc;
  const isa::Instr in = isa::decode(st_.mem.read(pc));
  auto& x = st_.regs;
  const Word a = x[in.rs1], b = x[in.rs2];
  const Word imm = static_cast<Word>(in.imm);
  Word next = pc + 4;
  unsigned rd = 0;
  Word val = 0;

  switch (in.op) {
    case Op::Illegal:
      st_.halted = true;
      r.status = StepStatus::Illegal;
      return r;
    case Op::Lui:
      rd = in.rd, val = imm;
      break;
    case Op::Auipc:
      rd = in.rd, val = pc + imm;
      break;
    case Op::Addi: case Op::Slti: case Op::Andi: case Op::Ori: case Op::Xori:
    case Op::Slli: case Op::Srli: case Op::Srai:
      rd = in.rd, val = isa::alu(in.op, a, imm);
      break;
    case Op::Add: case Op::Sub: case Op::Slt: case Op::And: case Op::Or: case Op::Xor:
    case Op::Sll: case Op::Srl: case Op::Sra:
      rd = in.rd, val = isa::alu(in.op, a, b);
      break;
    case Op::Lw:
      rd = in.rd, val = st_.mem.read(a + imm);
      break;
    case Op::Sw:
      st_.mem.write(a + imm, b);
      break;
    case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: case Op::Bltu: case Op::Bgeu:
      if (isa::branch_taken(in.op, a, b)) next = pc + imm;
      break;
    case Op::Jal:
      rd = in.rd, val = pc + 4, next = pc + imm;
      break;
    case Op::Jalr:
      rd = in.rd, val = pc + 4, next = (a + imm) & ~1u;
      break;
    case Op::Ecall:
      switch (static_cast<Syscall>(x[isa::kRegA7])) {
        case Syscall::SendChar:
          out_.push_back(static_cast<char>(x[isa::kRegA0] & 0xff));
          break;
        case Syscall::GetChar:
          if (in_pos_ >= in_.size()) {
            r.status = StepStatus::Blocked;
            return r;
          }
          rd = isa::kRegA0;
          val = static_cast<unsigned char>(in_[in_pos_++]);
          break;
        case Syscall::Exit:
          st_.halted = true;
          st_.exit_code = x[isa::kRegA0];
          break;
        default:
          break;
      }
      break;
    case Op::Ebreak:
      st_.halted = true;
      st_.exit_code = 0;
      break;
  }
  if (rd != 0) x[rd] = val;
  else val = 0;
  st_.pc = next;
  ++retired_;
  r.record = CommitRecord{pc, in.word, static_cast<std::uint8_t>(rd), val};
  return r;
}

std::vector<CommitRecord> Interpreter::run(std::uint64_t max_steps) {
  std::vector<CommitRecord> out;
  while (out.size() < max_steps) {
    auto r = step();
    if (!r.record) break;
    out.push_back(*r.record);
  }
  return out;
}

std::string_view to_string(Field f) {
  switch (f) {
    case Field::Pc: return "pc";
    case Field::Instr: return "instr";
    case Field::Rd: return "rd";
    case Field::Wdata: return "wdata";
    case Field::Missing: return "missing";
    case Field::Extra: return "extra";
  }
  return "?";
}

std::optional<Field> first_difference(const CommitRecord& dut, const CommitRecord& gold) {
  if (dut.pc != gold.pc) return Field::Pc;
  if (dut.instr != gold.instr) return Field::Instr;
  if (dut.rd != gold.rd) return Field::Rd;
  if (dut.wdata != gold.wdata) return Field::Wdata;
  return std::nullopt;
}

namespace {

std::string hex(Word w) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", w);
  return buf;
}

nlohmann::ordered_json record_obj(const CommitRecord& r) {
  return {{"pc", hex(r.pc)}, {"instr", hex(r.instr)}, {"rd", r.rd}, {"wdata", hex(r.wdata)}};
}

}  // namespace

std::string record_json(const CommitRecord& r) { return record_obj(r).dump(); }

std::string Divergence::to_json() const {
  nlohmann::ordered_json j;
  j["commit_index"] = commit_index;
  j["field"] = std::string(to_string(field));
  j["dut"] = dut_record ? record_obj(*dut_record) : nlohmann::ordered_json(nullptr);
  j["golden"] = golden_record ? record_obj(*golden_record) : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

Lockstep::Lockstep(const ProgramImage& image, std::string input) : gold_(image, std::move(input)) {}

std::optional<Divergence> Lockstep::check(const CommitRecord& dut) {
  if (div_) return div_;
  auto g = gold_.step();
  const std::uint64_t idx = compared_++;
  if (!g.record) {
    div_ = Divergence{idx, Field::Extra, dut, std::nullopt};
    return div_;
  }
  if (auto f = first_difference(dut, *g.record)) {
    div_ = Divergence{idx, *f, dut, *g.record};
    return div_;
  }
  return std::nullopt;
}

std::optional<Divergence> Lockstep::finish() {
  if (div_) return div_;
  auto g = gold_.step();
  if (g.record) div_ = Divergence{compared_, Field::Missing, std::nullopt, *g.record};
  return div_;
}

}  // namespace sdemu::golden
