#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdemu/arch.hpp"
#include "sdemu/golden.hpp"
#include "sdemu/pipeline.hpp"
#include "sdemu/profiler.hpp"
#include "sdemu/pshell.hpp"
#include "sdemu/timing.hpp"
#include "sdemu/transport.hpp"

namespace sdemu::kernel {

// How the example DUT uses the P-Shell.
namespace binding {
inline constexpr unsigned kCharFifo = 0;    // d2h: sendchar bytes, 1 word
inline constexpr unsigned kCommitFifo = 1;  // d2h: commit records, 4 words
inline constexpr unsigned kSampleFifo = 2;  // d2h: profiler samples, 2 words
inline constexpr unsigned kMemReqFifo = 3;  // d2h: memory requests, 4 words
inline constexpr unsigned kStdinFifo = 0;   // h2d: getchar bytes
inline constexpr unsigned kNumD2h = 4;
inline constexpr unsigned kNumH2d = 1;
inline constexpr std::array<unsigned, kNumD2h> kRecordWords{1, 4, 2, 4};

// Output CSRs (host writes).
inline constexpr unsigned kCsrTimerLatency = 0;
inline constexpr unsigned kCsrTimerArm = 1;    // req_id + 1
inline constexpr unsigned kCsrDataReady = 2;   // req_id + 1
inline constexpr unsigned kNumCsrOut = 3;

// Input CSRs (DUT writes).
inline constexpr unsigned kCsrCycleLo = 0;
inline constexpr unsigned kCsrCycleHi = 1;
inline constexpr unsigned kCsrCommits = 2;
inline constexpr unsigned kCsrHalted = 3;
inline constexpr unsigned kCsrExitCode = 4;
inline constexpr unsigned kCsrCoverBase = 8;
}  // namespace binding

enum class GateReason : std::uint8_t { Backpressure, TimerWait, HostPause, StepExhausted };
inline constexpr std::size_t kNumGateReasons = 4;
std::string_view to_string(GateReason r);

class GateController {
 public:
  void request(GateReason r) { reasons_ |= bit(r); }
  void release(GateReason r) { reasons_ &= ~bit(r); }
  bool has(GateReason r) const { return reasons_ & bit(r); }
  bool gated() const { return reasons_ != 0; }
  bool running() const { return reasons_ == 0; }
  Word reasons() const { return reasons_; }
  // Gated ticks are charged to one reason: pause, then step, then timer, then backpressure.
  std::optional<GateReason> charged() const;

 private:
  static Word bit(GateReason r) { return 1u << static_cast<unsigned>(r); }
  Word reasons_ = 0;
};

struct HostCostModel {
  unsigned ticks_per_sample = 1;
  unsigned ticks_per_io = 1;
  unsigned ticks_idle = 1;        // host ticks per DUT cycle while the host is idle
  unsigned ticks_per_commit = 1;
  unsigned ticks_per_char = 1;
  // Randomised host behaviour; none of it may change DUT-visible behaviour.
  unsigned jitter = 0;              // extra 0..jitter ticks per job
  unsigned data_delay_min = 0;      // host ticks from L programming to data arrival
  unsigned data_delay_max = 0;
  unsigned stall_permille = 0;      // chance per idle tick of a host stall burst
  unsigned stall_max = 0;           // burst length 1..stall_max
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
  // A reproducible adversarial model for non-interference testing.
  static HostCostModel randomized(std::uint64_t seed);
};

enum class HostTransport : std::uint8_t { Direct, Bridged };

struct KernelConfig {
  pshell::PShellConfig shell;
  dut::PipelineConfig pipeline;
  timing::DramModelParams dram;
  HostCostModel host;
  HostTransport transport = HostTransport::Direct;
  bool lockstep = false;
  std::uint64_t sample_interval = 0;  // 0 disables profiling
  std::string stdin_script;
  std::uint64_t watchdog_cycles = 100'000'000;
  std::uint64_t watchdog_ticks = 0;   // 0: derived from watchdog_cycles
};

struct TickReport {
  bool advanced_dut = false;
  Word gate_reasons = 0;
};

struct RunSummary {
  std::uint64_t dut_cycles = 0;
  std::uint64_t host_ticks = 0;
  std::array<std::uint64_t, kNumGateReasons> gated{};
  std::uint64_t idle_ticks = 0;
  bool halted = false;
  Word exit_code = 0;
  std::string panic;

  std::uint64_t gated_total() const;
  std::string to_json() const;
};

struct StopCondition {
  enum class Kind : std::uint8_t { Cycles, Halted, Violation } kind = Kind::Halted;
  std::uint64_t cycles = 0;

  static StopCondition at_cycles(std::uint64_t n) { return {Kind::Cycles, n}; }
  static StopCondition halted() { return {Kind::Halted, 0}; }
  static StopCondition violation() { return {Kind::Violation, 0}; }
};

class WatchdogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Host-side agent (the VPS program): drains DUT->host FIFOs, services
// timing requests and feeds stdin, one job at a time. Each job's MMIO
// happens on its last tick.
class HostAgent {
 public:
  HostAgent(const KernelConfig& cfg, transport::MmioPort& port, const pshell::AddressMap& map,
            const ProgramImage& image);

  void tick(std::uint64_t host_tick);
  bool busy() const { return remaining_ > 0 || suspended_ != Job::None; }
  // Scripted stdin bytes not yet pushed.
  bool stdin_pending() const { return stdin_pos_ < cfg_.stdin_script.size(); }
  bool idle_and_drained();

  const std::string& output() const { return output_; }
  const std::optional<profiler::Aggregator>& profile() const { return agg_; }
  const std::optional<golden::Lockstep>& lockstep() const { return lock_; }
  std::optional<golden::Lockstep>& lockstep() { return lock_; }
  const std::vector<CommitRecord>& commits() const { return commits_; }
  std::uint64_t jobs() const { return jobs_; }

 private:
  enum class Job : std::uint8_t { None, Commit, Sample, Char, Io, DataReady, Stdin, Stall };

  Word occupancy(unsigned fifo);
  unsigned cost(unsigned base);
  bool timing_work(std::uint64_t host_tick);
  void finish(std::uint64_t host_tick);

  const KernelConfig& cfg_;
  transport::MmioPort& port_;
  const pshell::AddressMap& map_;
  timing::DramModel dram_;
  std::mt19937_64 rng_;
  Job job_ = Job::None;
  unsigned remaining_ = 0;
  Job suspended_ = Job::None;
  unsigned suspended_remaining_ = 0;
  std::size_t stdin_pos_ = 0;
  struct Arrival {
    std::uint64_t at;
    Word req_id;
  };
  std::vector<Arrival> arrivals_;
  std::string output_;
  std::optional<profiler::Aggregator> agg_;
  std::optional<golden::Lockstep> lock_;
  std::vector<CommitRecord> commits_;
  std::uint64_t jobs_ = 0;
};

class Kernel {
 public:
  Kernel(KernelConfig cfg, const ProgramImage& image);
  ~Kernel();
  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  TickReport tick();
  // Throws WatchdogError when the cycle or tick budget runs out.
  RunSummary run_until(StopCondition stop);
  // After the DUT halts, lets the host finish draining FIFOs. These ticks are
  // not part of the run summary.
  void drain();

  void command(const pshell::ControlCommand& c);
  void request_gate(GateReason r) { gate_.request(r); }
  void release_gate(GateReason r) { gate_.release(r); }
  const GateController& gate() const { return gate_; }

  // Per-cycle observer, called for every executed DUT cycle.
  using CycleHook = std::function<void(std::uint64_t cycle, const dut::CycleOutput&)>;
  void set_cycle_hook(CycleHook h) { hook_ = std::move(h); }

  Word cover_read_word(unsigned k);

  std::uint64_t dut_cycle() const { return dut_cycle_; }
  std::uint64_t host_tick() const { return host_tick_; }
  const RunSummary& summary() const { return summary_; }
  const KernelConfig& config() const { return cfg_; }
  const dut::Pipeline& pipeline() const { return *pipe_; }
  const dut::CoverageUnit& coverage() const { return cover_; }
  pshell::PShell& shell() { return shell_; }
  const timing::TimerBank& timers() const { return timers_; }
  const HostAgent& host() const { return *host_; }
  HostAgent& host() { return *host_; }
  transport::Mailbox& mailbox() { return mailbox_; }

 private:
  bool fits(const dut::CycleOutput& out) const;
  void push_outputs(const dut::CycleOutput& out);
  void sync_timer_csrs();
  void publish();

  KernelConfig cfg_;
  pshell::PShell shell_;
  std::unique_ptr<dut::Pipeline> pipe_;
  dut::CoverageUnit cover_;
  timing::TimerBank timers_;
  transport::DirectPort direct_;
  std::unique_ptr<transport::MmioPort> bridged_;
  transport::Mailbox mailbox_;
  std::unique_ptr<HostAgent> host_;
  GateController gate_;
  CycleHook hook_;

  std::uint64_t dut_cycle_ = 0;
  std::uint64_t host_tick_ = 0;
  std::uint64_t step_remaining_ = 0;
  bool stepping_ = false;
  unsigned idle_phase_ = 0;
  std::uint64_t stuck_ticks_ = 0;
  Word last_arm_ = 0;
  Word last_ready_ = 0;
  RunSummary summary_;
};

// Effective configuration: the binding's FIFO counts and per-FIFO depths
// (never below the record width) applied on top of `cfg`.
pshell::PShellConfig bound_shell_config(const pshell::PShellConfig& cfg);

}  // namespace sdemu::kernel
