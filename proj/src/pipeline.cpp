#include "sdemu/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <stdexcept>

namespace sdemu::dut {

using isa::Op;

namespace {

constexpr std::array<std::string_view, kNumStallClasses> kStallNames{
    "load-arith",   "load-control", "catchup-dep",   "branch-mispredict", "catchup-mispredict-flush",
    "icache-miss",  "dcache-miss",  "frontend-empty", "syscall-wait",     "raw-other",
};

constexpr std::array<std::string_view, 6> kMutationNames{
    "none", "add-sub-swap", "dropped-bypass", "wrong-branch-polarity", "jal-off-by-4", "stale-load-data",
};

using Uop = Pipeline::Uop;

Uop bubble(StallClass c) {
  Uop u;
  u.cause = c;
  return u;
}

// Register written by a uop, 0 if none. ECALL writes a0 only for getchar.
unsigned dest(const Uop& u) {
  if (!u.valid) return 0;
  if (u.in.op == Op::Ecall) return u.b == static_cast<Word>(Syscall::GetChar) ? isa::kRegA0 : 0;
  return isa::writes_rd(u.in.op) ? u.in.rd : 0;
}

struct Sources {
  unsigned r[2] = {0, 0};
};

Sources sources(const isa::Instr& in) {
  Sources s;
  if (in.op == Op::Ecall) {
    s.r[0] = isa::kRegA0;
    s.r[1] = isa::kRegA7;
    return s;
  }
  if (isa::reads_rs1(in.op)) s.r[0] = in.rs1;
  if (isa::reads_rs2(in.op)) s.r[1] = in.rs2;
  return s;
}

bool reads(const Sources& s, unsigned reg) { return reg != 0 && (s.r[0] == reg || s.r[1] == reg); }

bool catchup_eligible(Op op) { return isa::is_alu(op) || isa::is_branch(op); }

bool uses_imm_operand(Op op) {
  switch (op) {
    case Op::Addi: case Op::Slti: case Op::Andi: case Op::Ori: case Op::Xori:
    case Op::Slli: case Op::Srli: case Op::Srai: case Op::Lui: case Op::Auipc:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string_view to_string(StallClass c) { return kStallNames[static_cast<std::size_t>(c)]; }

std::optional<StallClass> stall_class_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStallNames.size(); ++i)
    if (kStallNames[i] == s) return static_cast<StallClass>(i);
  return std::nullopt;
}

std::string_view to_string(Mutation m) { return kMutationNames[static_cast<std::size_t>(m)]; }

std::optional<Mutation> mutation_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kMutationNames.size(); ++i)
    if (kMutationNames[i] == s) return static_cast<Mutation>(i);
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (predictor == PredictorKind::Bimodal) {
    if (predictor_entries == 0 || !std::has_single_bit(predictor_entries))
      throw std::invalid_argument("predictor_entries must be a power of two");
    if (btb_size == 0 || !std::has_single_bit(btb_size))
      throw std::invalid_argument("btb_size must be a power of two");
  }
  if (icache_line_bytes < 4 || !std::has_single_bit(icache_line_bytes))
    throw std::invalid_argument("icache_line_bytes must be a power of two >= 4");
  if (mem_queue_depth == 0) throw std::invalid_argument("mem_queue_depth must be >= 1");
}

std::optional<Word> PipelineView::oldest_in_flight() const {
  for (const StageView* s : {&wb, &ex2, &ex1, &iss})
    if (s->valid) return s->pc;
  return std::nullopt;
}

Pipeline::Pipeline(PipelineConfig cfg, const ProgramImage& image) : cfg_(cfg) {
  cfg_.validate();
  image.load_into(mem_);
  s_.fetch_pc = image.entry;
  s_.committed_pc = image.entry;
  counters_.assign(cfg_.predictor_entries, 1);
  btb_.assign(cfg_.btb_size, BtbEntry{});
}

PipelineView Pipeline::view() const {
  PipelineView v;
  v.fetch_pc = s_.fetch_pc;
  v.iss = {s_.iss.valid, s_.iss.pc};
  v.ex1 = {s_.ex1.valid, s_.ex1.pc};
  v.ex2 = {s_.ex2.valid, s_.ex2.pc};
  v.wb = {s_.wb.valid, s_.wb.pc};
  return v;
}

bool Pipeline::predict(Word pc, Word& target) const {
  if (cfg_.predictor == PredictorKind::StaticNotTaken) return false;
  const auto& e = btb_[(pc >> 2) & (cfg_.btb_size - 1)];
  if (!e.valid || e.tag != pc) return false;
  if (!e.jump && counters_[(pc >> 2) & (cfg_.predictor_entries - 1)] < 2) return false;
  target = e.target;
  return true;
}

Word Pipeline::operand_ex1(const Latches& s, const Uop& wb_now, unsigned reg, Src& src) const {
  src = Src::Rf;
  if (reg == 0) return 0;
  if (cfg_.mutation != Mutation::DroppedBypass && s.ex2.valid && dest(s.ex2) == reg) {
    src = Src::Ex2;
    return s.ex2.result;
  }
  if (wb_now.valid && dest(wb_now) == reg) {
    src = Src::Wb;
    return wb_now.result;
  }
  return regs_[reg];
}

Word Pipeline::operand_ex2(const Uop& wb_now, unsigned reg, Src& src) const {
  src = Src::Rf;
  if (reg == 0) return 0;
  if (wb_now.valid && dest(wb_now) == reg) {
    src = Src::Wb;
    return wb_now.result;
  }
  return regs_[reg];
}

Pipeline::CycleResult Pipeline::evaluate(const CycleInputs& in) const {
  CycleResult r;
  Latches& n = r.next;
  n = s_;
  CycleOutput& out = r.out;
  out.view = view();
  CoverSelects& cov = out.cover;
  cov[15] = !in.stdin_head.has_value();

  if (s_.halted) {
    out.halted = true;
    return r;
  }

  for (Word id : in.delivered) {
    auto it = std::find_if(n.outstanding.begin(), n.outstanding.end(),
                           [&](const Outstanding& o) { return o.req_id == id; });
    if (it == n.outstanding.end()) continue;
    if (it->rd) n.pending_regs &= ~(1u << it->rd);
    n.outstanding.erase(it);
  }

  // WB: commit point.
  Uop wb = s_.wb;
  bool frozen = false;
  if (!wb.valid) {
    out.stall = wb.cause;
  } else if (wb.in.op == Op::Illegal) {
    out.stall = StallClass::RawOther;
    out.halted = n.halted = true;
    char buf[96];
    std::snprintf(buf, sizeof buf, "illegal instruction 0x%08x at pc 0x%08x", wb.in.word, wb.pc);
    out.panic = buf;
    return r;
  } else {
    bool commit = true;
    if (wb.in.op == Op::Ecall) {
      cov[14] = true;
      switch (static_cast<Syscall>(wb.b)) {
        case Syscall::SendChar:
          out.syscall = SyscallEvent{SyscallKind::SendChar, wb.a & 0xff};
          break;
        case Syscall::GetChar:
          if (in.stdin_head) {
            wb.result = *in.stdin_head & 0xff;
            out.pop_stdin = true;
            out.syscall = SyscallEvent{SyscallKind::GetChar, wb.result};
          } else {
            commit = false;
            frozen = true;
            out.getchar_blocked = true;
            out.stall = StallClass::SyscallWait;
          }
          break;
        case Syscall::Exit:
          out.syscall = SyscallEvent{SyscallKind::Exit, wb.a};
          n.halted = true;
          n.exit_code = wb.a;
          break;
        default:
          break;
      }
    } else if (wb.in.op == Op::Ebreak) {
      n.halted = true;
      n.exit_code = 0;
    }
    if (commit) {
      const unsigned rd = dest(wb);
      out.committed = CommitRecord{wb.pc, wb.in.word, static_cast<std::uint8_t>(rd), rd ? wb.result : 0};
      if (rd) r.reg_write = std::make_pair(static_cast<std::uint8_t>(rd), wb.result);
      if (isa::is_branch(wb.in.op) || wb.in.op == Op::Jal || wb.in.op == Op::Jalr) {
        const bool taken = wb.actual_next != wb.pc + 4;
        r.predictor_update = PredictorUpdate{wb.pc, isa::is_branch(wb.in.op), taken, wb.actual_next};
      }
      n.committed_pc = wb.actual_next;
      ++n.commits;
    }
  }
  out.halted = n.halted;
  if (frozen || n.halted) return r;

  // EX2: catch-up ALU, loads/stores, catch-up branch resolution.
  Uop ex2 = s_.ex2;
  bool ex2_flush = false;
  if (ex2.valid) {
    const Op op = ex2.in.op;
    if (ex2.catchup) {
      Src sa, sb;
      ex2.a = operand_ex2(wb, ex2.in.rs1, sa);
      ex2.b = operand_ex2(wb, ex2.in.rs2, sb);
      if (sa == Src::Wb || sb == Src::Wb) cov[5] = true;
      if (isa::is_branch(op)) {
        bool t = isa::branch_taken(op, ex2.a, ex2.b);
        if (cfg_.mutation == Mutation::WrongBranchPolarity) t = !t;
        ex2.actual_next = t ? ex2.pc + static_cast<Word>(ex2.in.imm) : ex2.pc + 4;
        cov[8] = t;
        if (ex2.actual_next != ex2.pred_next) ex2_flush = true;
      } else {
        ex2.actual_next = ex2.pc + 4;
        Op eop = op;
        if (cfg_.mutation == Mutation::AddSubSwap) eop = op == Op::Add ? Op::Sub : op == Op::Sub ? Op::Add : op;
        const Word a = op == Op::Auipc ? ex2.pc : ex2.a;
        const Word b = uses_imm_operand(op) ? static_cast<Word>(ex2.in.imm) : ex2.b;
        ex2.result = isa::alu(eop, a, b);
      }
      ex2.result_ready = true;
    } else if (op == Op::Lw) {
      Word v = mem_.read(ex2.mem_addr);
      if (cfg_.mutation == Mutation::StaleLoadData) std::swap(v, n.last_load_value);
      ex2.result = v;
      ex2.result_ready = true;
    } else if (op == Op::Sw) {
      r.mem_write = std::make_pair(ex2.mem_addr, ex2.b);
    }
  }
  n.wb = ex2;
  if (ex2_flush) {
    cov[10] = true;
    n.ex2 = n.ex1 = n.iss = bubble(StallClass::CatchupMispredictFlush);
    n.fetch_pc = ex2.actual_next;
    n.icache_wait = 0;
    return r;
  }

  // EX1: main ALU, branch resolution, address generation, memory port.
  Uop ex1 = s_.ex1;
  bool ex1_hold = false;
  bool ex1_redirect = false;
  std::uint32_t issued_pending = 0;
  if (ex1.valid && !ex1.catchup) {
    const Op op = ex1.in.op;
    const Sources src = sources(ex1.in);
    Src s0 = Src::Rf, s1 = Src::Rf;
    if (src.r[0]) ex1.a = operand_ex1(s_, wb, src.r[0], s0);
    if (src.r[1]) ex1.b = operand_ex1(s_, wb, src.r[1], s1);
    cov[1] = s0 == Src::Ex2;
    cov[2] = s0 == Src::Wb;
    cov[3] = s1 == Src::Ex2;
    cov[4] = s1 == Src::Wb;
    cov[12] = uses_imm_operand(op);
    ex1.actual_next = ex1.pc + 4;
    if (isa::is_alu(op)) {
      Op eop = op;
      if (cfg_.mutation == Mutation::AddSubSwap) eop = op == Op::Add ? Op::Sub : op == Op::Sub ? Op::Add : op;
      const Word a = op == Op::Auipc ? ex1.pc : ex1.a;
      const Word b = uses_imm_operand(op) ? static_cast<Word>(ex1.in.imm) : ex1.b;
      ex1.result = isa::alu(eop, a, b);
      ex1.result_ready = true;
    } else if (isa::is_branch(op)) {
      bool t = isa::branch_taken(op, ex1.a, ex1.b);
      if (cfg_.mutation == Mutation::WrongBranchPolarity) t = !t;
      cov[7] = t;
      if (t) ex1.actual_next = ex1.pc + static_cast<Word>(ex1.in.imm);
    } else if (op == Op::Jal) {
      ex1.result = ex1.pc + 4;
      ex1.result_ready = true;
      ex1.actual_next = ex1.pc + static_cast<Word>(ex1.in.imm);
      if (cfg_.mutation == Mutation::JalOffBy4) ex1.actual_next += 4;
    } else if (op == Op::Jalr) {
      ex1.result = ex1.pc + 4;
      ex1.result_ready = true;
      ex1.actual_next = (ex1.a + static_cast<Word>(ex1.in.imm)) & ~1u;
    } else if (isa::is_load(op) || isa::is_store(op)) {
      ex1.mem_addr = ex1.a + static_cast<Word>(ex1.in.imm);
      ex1.dram = !cfg_.perfect_dcache && ex1.mem_addr >= cfg_.dram_base;
      cov[13] = ex1.dram;
      if (ex1.dram) {
        if (n.outstanding.size() >= cfg_.mem_queue_depth) {
          ex1_hold = true;
        } else {
          timing::IoRequest req;
          req.req_id = n.next_req_id++;
          req.kind = isa::is_load(op) ? timing::ReqKind::Read : timing::ReqKind::Write;
          req.address = ex1.mem_addr;
          req.data = ex1.b;
          req.issue_cycle = in.cycle;
          out.mem_req = req;
          const unsigned rd = isa::is_load(op) ? dest(ex1) : 0;
          n.outstanding.push_back(Outstanding{req.req_id, static_cast<std::uint8_t>(rd)});
          if (rd) issued_pending = 1u << rd;
        }
      }
    }
    if (!ex1_hold && ex1.actual_next != ex1.pred_next) ex1_redirect = true;
  }
  n.pending_regs |= issued_pending;

  if (ex1_hold) {
    n.ex2 = bubble(StallClass::DcacheMiss);
    return r;
  }
  n.ex2 = ex1;
  if (ex1_redirect) {
    cov[9] = true;
    n.ex1 = n.iss = bubble(StallClass::BranchMispredict);
    n.fetch_pc = ex1.actual_next;
    n.icache_wait = 0;
    return r;
  }

  // ISS: hazard detection and catch-up dispatch against the uop in EX1.
  Uop iss = s_.iss;
  std::optional<StallClass> hazard;
  if (iss.valid) {
    const Op op = iss.in.op;
    const Sources src = sources(iss.in);
    const unsigned rd = isa::writes_rd(op) ? iss.in.rd : 0;
    const std::uint32_t mask = (src.r[0] ? 1u << src.r[0] : 0) | (src.r[1] ? 1u << src.r[1] : 0) |
                               (rd ? 1u << rd : 0) | (op == Op::Ecall ? 1u << isa::kRegA0 : 0);
    const Uop& p = s_.ex1;
    // ECALL results are unknown until EX1 captures a7; assume a0 is written.
    const unsigned pd = p.valid && p.in.op == Op::Ecall ? isa::kRegA0 : dest(p);
    if (n.pending_regs & mask & ~1u) {
      hazard = StallClass::DcacheMiss;
    } else if (pd && reads(src, pd)) {
      const bool eligible = cfg_.catchup_enabled && catchup_eligible(op);
      if (p.in.op == Op::Lw) {
        if (eligible) iss.catchup = true;
        else hazard = (isa::is_branch(op) || op == Op::Jalr) ? StallClass::LoadControl : StallClass::LoadArith;
      } else if (p.catchup) {
        if (eligible) iss.catchup = true;
        else hazard = StallClass::CatchupDep;
      } else if (p.in.op == Op::Ecall) {
        hazard = StallClass::RawOther;
      }
    }
  }
  if (hazard) {
    cov[0] = true;
    n.ex1 = bubble(*hazard);
    return r;
  }
  cov[6] = iss.catchup;
  n.ex1 = iss;

  // IF.
  Uop f;
  const Word pc = s_.fetch_pc;
  if (cfg_.icache_miss_latency > 0) {
    const Word line = pc / cfg_.icache_line_bytes;
    if (!icache_lines_.contains(line)) {
      unsigned rem = (s_.icache_wait > 0 && s_.icache_wait_line == line) ? s_.icache_wait
                                                                          : cfg_.icache_miss_latency;
      --rem;
      if (rem == 0) r.icache_fill = line;
      n.icache_wait = rem;
      n.icache_wait_line = line;
      n.iss = bubble(StallClass::IcacheMiss);
      return r;
    }
  }
  f.valid = true;
  f.pc = pc;
  f.in = isa::decode(mem_.read(pc));
  Word target = 0;
  f.pred_taken = predict(pc, target);
  f.pred_next = f.pred_taken ? target : pc + 4;
  cov[11] = f.pred_taken;
  n.iss = f;
  n.fetch_pc = f.pred_next;
  return r;
}

void Pipeline::commit(CycleResult&& r) {
  if (r.reg_write) regs_[r.reg_write->first] = r.reg_write->second;
  if (r.mem_write) mem_.write(r.mem_write->first, r.mem_write->second);
  if (r.icache_fill) icache_lines_.insert(*r.icache_fill);
  if (auto& u = r.predictor_update; u && cfg_.predictor == PredictorKind::Bimodal) {
    if (u->conditional) {
      auto& c = counters_[(u->pc >> 2) & (cfg_.predictor_entries - 1)];
      if (u->taken && c < 3) ++c;
      if (!u->taken && c > 0) --c;
    }
    if (u->taken) btb_[(u->pc >> 2) & (cfg_.btb_size - 1)] = BtbEntry{true, u->pc, u->target, !u->conditional};
  }
  s_ = std::move(r.next);
}

CycleOutput Pipeline::step_cycle(const CycleInputs& in) {
  auto r = evaluate(in);
  CycleOutput out = r.out;
  commit(std::move(r));
  return out;
}

void CoverageUnit::observe(const CoverSelects& s) {
  if (primed_) hit_ |= (s ^ prev_);
  prev_ = s;
  primed_ = true;
}

Word CoverageUnit::word(std::size_t k) const {
  Word w = 0;
  for (std::size_t b = 0; b < 32; ++b) {
    const std::size_t id = k * 32 + b;
    if (id < kNumCoverpoints && hit_[id]) w |= 1u << b;
  }
  return w;
}

}  // namespace sdemu::dut
