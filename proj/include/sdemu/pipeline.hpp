#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "sdemu/arch.hpp"
#include "sdemu/isa.hpp"
#include "sdemu/timing.hpp"

namespace sdemu::dut {

// Why a cycle did not commit. Every non-commit cycle carries exactly one.
enum class StallClass : std::uint8_t {
  LoadArith,
  LoadControl,
  CatchupDep,
  BranchMispredict,
  CatchupMispredictFlush,
  IcacheMiss,
  DcacheMiss,
  FrontendEmpty,
  SyscallWait,
  RawOther,
};
inline constexpr std::size_t kNumStallClasses = 10;

std::string_view to_string(StallClass c);
std::optional<StallClass> stall_class_from_string(std::string_view s);

enum class PredictorKind : std::uint8_t { StaticNotTaken, Bimodal };

// Fault injections used to validate lockstep verification.
enum class Mutation : std::uint8_t {
  None,
  AddSubSwap,
  DroppedBypass,
  WrongBranchPolarity,
  JalOffBy4,
  StaleLoadData,
};
std::string_view to_string(Mutation m);
std::optional<Mutation> mutation_from_string(std::string_view s);

struct PipelineConfig {
  bool catchup_enabled = false;
  PredictorKind predictor = PredictorKind::Bimodal;
  unsigned predictor_entries = 64;  // 2-bit counters
  unsigned btb_size = 16;
  unsigned icache_miss_latency = 0;  // 0: perfect I$; otherwise cold-line miss cost
  unsigned icache_line_bytes = 32;
  // D$ hits are pipelined over EX1/EX2; results bypass from EX2.
  static constexpr unsigned kDcacheHitLatency = 2;
  // Loads and stores at or above dram_base go through the timing model.
  Word dram_base = 0x80000000;
  bool perfect_dcache = false;
  unsigned mem_queue_depth = 1;  // outstanding requests on the memory port
  Mutation mutation = Mutation::None;

  void validate() const;  // throws std::invalid_argument
};

// Mux-select coverpoints of the core, in the order of the SV rendering
// shipped in rtl/core_selects.sv.
inline constexpr std::array<std::string_view, 16> kCoverpointNames{
    "iss_hold",          "ex1_rs1_from_ex2",  "ex1_rs1_from_wb",    "ex1_rs2_from_ex2",
    "ex1_rs2_from_wb",   "ex2_operand_from_wb", "dispatch_catchup", "ex1_branch_taken",
    "ex2_branch_taken",  "ex1_redirect",      "ex2_flush",          "fetch_predict_taken",
    "alu_src_imm",       "mem_dram_select",   "wb_syscall_select",  "stdin_fifo_empty",
};
inline constexpr std::size_t kNumCoverpoints = kCoverpointNames.size();
using CoverSelects = std::bitset<kNumCoverpoints>;

struct StageView {
  bool valid = false;
  Word pc = 0;
};

// Start-of-cycle occupancy, used for cycle attribution.
struct PipelineView {
  Word fetch_pc = 0;
  StageView iss, ex1, ex2, wb;

  std::optional<Word> oldest_in_flight() const;
};

enum class SyscallKind : std::uint8_t { SendChar, GetChar, Exit };

struct SyscallEvent {
  SyscallKind kind;
  Word value;
};

struct CycleInputs {
  std::uint64_t cycle = 0;             // index of the cycle being evaluated
  std::span<const Word> delivered;     // memory responses visible this cycle
  std::optional<Word> stdin_head;      // head of host->DUT FIFO 0
};

struct CycleOutput {
  std::optional<CommitRecord> committed;
  std::optional<StallClass> stall;
  std::optional<timing::IoRequest> mem_req;
  std::optional<SyscallEvent> syscall;
  CoverSelects cover;
  PipelineView view;
  bool pop_stdin = false;
  bool getchar_blocked = false;
  bool halted = false;
  std::string panic;  // non-empty when the core stopped on an illegal instruction
};

class Pipeline {
 public:
  struct Uop {
    bool valid = false;
    StallClass cause = StallClass::FrontendEmpty;  // for bubbles
    Word pc = 0;
    isa::Instr in;
    Word pred_next = 0;
    bool pred_taken = false;
    bool catchup = false;
    Word a = 0;  // rs1 value (a0 for ECALL)
    Word b = 0;  // rs2 value (a7 for ECALL)
    Word result = 0;
    bool result_ready = false;
    Word actual_next = 0;
    Word mem_addr = 0;
    bool dram = false;
  };

  struct Outstanding {
    Word req_id;
    std::uint8_t rd;  // 0 for stores
  };

  // Everything that changes every cycle; the rest is updated through deltas.
  struct Latches {
    Word fetch_pc = 0;
    Uop iss, ex1, ex2, wb;
    unsigned icache_wait = 0;
    Word icache_wait_line = 0;
    std::uint32_t pending_regs = 0;
    std::vector<Outstanding> outstanding;
    Word next_req_id = 0;
    Word last_load_value = 0;
    bool halted = false;
    Word exit_code = 0;
    Word committed_pc = 0;  // pc of the next instruction to commit
    std::uint64_t commits = 0;
  };

  struct PredictorUpdate {
    Word pc;
    bool conditional;
    bool taken;
    Word target;
  };

  struct CycleResult {
    Latches next;
    std::optional<std::pair<std::uint8_t, Word>> reg_write;
    std::optional<std::pair<Word, Word>> mem_write;
    std::optional<PredictorUpdate> predictor_update;
    std::optional<Word> icache_fill;
    CycleOutput out;
  };

  Pipeline(PipelineConfig cfg, const ProgramImage& image);

  // Computes one cycle without touching state; commit() applies it. The
  // kernel uses the split to refuse a cycle whose outputs cannot be accepted.
  CycleResult evaluate(const CycleInputs& in) const;
  void commit(CycleResult&& r);

  // evaluate + commit.
  CycleOutput step_cycle(const CycleInputs& in);

  const PipelineConfig& config() const { return cfg_; }
  bool halted() const { return s_.halted; }
  Word exit_code() const { return s_.exit_code; }
  Word reg(unsigned i) const { return regs_[i]; }
  const std::array<Word, 32>& regs() const { return regs_; }
  const Memory& memory() const { return mem_; }
  std::uint64_t commits() const { return s_.commits; }
  Word committed_pc() const { return s_.committed_pc; }
  std::size_t outstanding_requests() const { return s_.outstanding.size(); }
  PipelineView view() const;

 private:
  bool predict(Word pc, Word& target) const;
  enum class Src : std::uint8_t { Rf, Ex2, Wb };
  Word operand_ex1(const Latches& s, const Uop& wb_now, unsigned reg, Src& src) const;
  Word operand_ex2(const Uop& wb_now, unsigned reg, Src& src) const;

  PipelineConfig cfg_;
  Latches s_;
  std::array<Word, 32> regs_{};
  Memory mem_;
  std::vector<std::uint8_t> counters_;
  struct BtbEntry {
    bool valid = false;
    Word tag = 0;
    Word target = 0;
    bool jump = false;
  };
  std::vector<BtbEntry> btb_;
  std::unordered_set<Word> icache_lines_;
};

// Toggle-coverage runtime: a point's hit bit sets the first time its select
// is seen to change value, i.e. once both 0 and 1 have been observed.
class CoverageUnit {
 public:
  CoverageUnit() = default;

  void observe(const CoverSelects& s);
  bool hit(std::size_t id) const { return hit_[id]; }
  std::size_t covered() const { return hit_.count(); }
  static constexpr std::size_t total() { return kNumCoverpoints; }
  static constexpr std::size_t words() { return (kNumCoverpoints + 31) / 32; }
  Word word(std::size_t k) const;

 private:
  bool primed_ = false;
  CoverSelects prev_;
  CoverSelects hit_;
};

}  // namespace sdemu::dut
