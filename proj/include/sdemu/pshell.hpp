#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdemu/isa.hpp"

namespace sdemu::pshell {

using isa::Word;

// Fixed MMIO layout. Every region owns a 4 KiB window above kBase.
inline constexpr Word kBase = 0x40000000;
inline constexpr Word kOutCsrWindow = 0x0000;
inline constexpr Word kInCsrWindow = 0x1000;
inline constexpr Word kH2dWindow = 0x2000;
inline constexpr Word kD2hWindow = 0x3000;
inline constexpr Word kControlWindow = 0x4000;
inline constexpr Word kWindowSize = 0x1000;
inline constexpr Word kFifoStride = 0x10;
inline constexpr Word kFifoDataPort = 0x0;
inline constexpr Word kFifoCountPort = 0x4;

// Dead-bus value returned for empty FIFO reads and unmapped reads.
inline constexpr Word kEmptyRead = 0xFFFFFFFF;

// Control block registers, offsets from kBase + kControlWindow.
enum class ControlReg : Word {
  Command = 0x00,          // W: 0 run, 1 pause, 2 step(StepCount)
  StepCount = 0x04,        // R/W
  Status = 0x08,           // R: bit0 gated, bit1 halted, bits[11:8] gate reasons
  CycleLo = 0x0C,          // R: DUT cycle counter
  CycleHi = 0x10,          // R
  ViolationCount = 0x14,   // R
  ViolationSelect = 0x18,  // R/W: index into the violation log
  ViolationKind = 0x1C,    // R: kind of the selected entry
  ViolationAddr = 0x20,    // R
  ViolationTick = 0x24,    // R
  HostTick = 0x28,         // R
};
inline constexpr Word kControlEnd = 0x2C;

enum class CommandCode : Word { Run = 0, Pause = 1, Step = 2 };

struct ControlCommand {
  CommandCode code = CommandCode::Run;
  Word step_count = 0;
  friend bool operator==(const ControlCommand&, const ControlCommand&) = default;
};

struct PShellConfig {
  unsigned num_csrs_out = 8;   // host writes, DUT reads
  unsigned num_csrs_in = 16;   // DUT writes, host reads
  unsigned num_fifos_h2d = 1;
  unsigned num_fifos_d2h = 4;
  unsigned fifo_depth = 8;     // entries (32-bit words), power of two
  // Optional per-FIFO depth overrides; 0 or missing means fifo_depth.
  std::vector<unsigned> h2d_depths;
  std::vector<unsigned> d2h_depths;
  unsigned data_width = 32;
  std::size_t max_logged_violations = std::numeric_limits<std::size_t>::max();
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RegionKind : std::uint8_t {
  OutCsr, InCsr, H2dData, H2dCredits, D2hData, D2hOccupancy, Control
};

struct Location {
  RegionKind kind;
  unsigned index;  // CSR/FIFO ordinal, or control register offset
};

struct Region {
  std::string name;
  Word begin;
  Word end;  // exclusive
};

class AddressMap {
 public:
  // Throws ConfigError when the configuration is invalid or regions overlap.
  explicit AddressMap(const PShellConfig& cfg);

  Word out_csr(unsigned i) const { return kBase + kOutCsrWindow + 4 * i; }
  Word in_csr(unsigned i) const { return kBase + kInCsrWindow + 4 * i; }
  Word h2d_data(unsigned i) const { return kBase + kH2dWindow + kFifoStride * i + kFifoDataPort; }
  Word h2d_credits(unsigned i) const { return kBase + kH2dWindow + kFifoStride * i + kFifoCountPort; }
  Word d2h_data(unsigned i) const { return kBase + kD2hWindow + kFifoStride * i + kFifoDataPort; }
  Word d2h_occupancy(unsigned i) const { return kBase + kD2hWindow + kFifoStride * i + kFifoCountPort; }
  Word control(ControlReg r) const { return kBase + kControlWindow + static_cast<Word>(r); }

  std::optional<Location> locate(Word addr) const;
  const std::vector<Region>& regions() const { return regions_; }
  std::string describe() const;

 private:
  PShellConfig cfg_;
  std::vector<Region> regions_;
};

AddressMap address_map(const PShellConfig& cfg);

enum class FifoDir : std::uint8_t { HostToDut, DutToHost };

// Semi-blocking FIFO: ready/valid on the DUT side, credit/occupancy on the host side.
class SbFifo {
 public:
  SbFifo(FifoDir dir, unsigned depth) : dir_(dir), depth_(depth) {}

  FifoDir direction() const { return dir_; }
  unsigned depth() const { return depth_; }
  unsigned size() const { return static_cast<unsigned>(q_.size()); }
  unsigned space() const { return depth_ - size(); }
  bool empty() const { return q_.empty(); }
  bool full() const { return q_.size() >= depth_; }
  unsigned credits() const { return space(); }
  unsigned occupancy() const { return size(); }
  Word front() const { return q_.front(); }

  bool push(Word w);
  std::optional<Word> pop();

  std::uint64_t pushes_accepted() const { return pushes_; }
  std::uint64_t pops() const { return pops_; }

 private:
  FifoDir dir_;
  unsigned depth_;
  std::deque<Word> q_;
  std::uint64_t pushes_ = 0;
  std::uint64_t pops_ = 0;
};

enum class ViolationKind : std::uint8_t { WriteNoCredit, ReadEmpty, UnmappedAddress, ReservedOp };
std::string_view to_string(ViolationKind k);

struct MmioViolation {
  ViolationKind kind;
  Word address;
  std::uint64_t host_tick;
};

enum class WriteAck : std::uint8_t { Ok, Dropped, Unmapped, Reserved };

enum class PushResult : std::uint8_t { Accepted, WouldBlock };

// Host-visible DUT status, published by the kernel into the control block.
struct ShellStatus {
  bool gated = false;
  bool halted = false;
  Word reasons = 0;
  std::uint64_t dut_cycle = 0;
};

class PShell {
 public:
  explicit PShell(PShellConfig cfg = {});

  const PShellConfig& config() const { return cfg_; }
  const AddressMap& map() const { return map_; }

  // Host side. Never blocks; misuse is logged as a violation.
  WriteAck mmio_write(Word addr, Word data);
  Word mmio_read(Word addr);

  // DUT side.
  PushResult dut_fifo_push(unsigned idx, Word w);
  // All-or-nothing push of a multi-word record.
  PushResult dut_fifo_push_record(unsigned idx, std::span<const Word> words);
  std::optional<Word> dut_fifo_pop(unsigned idx);
  std::optional<Word> dut_fifo_peek(unsigned idx) const;
  unsigned dut_fifo_space(unsigned idx) const { return d2h_.at(idx).space(); }
  unsigned dut_fifo_size_h2d(unsigned idx) const { return h2d_.at(idx).size(); }
  Word dut_read_csr(unsigned idx) const { return out_csrs_.at(idx); }
  void dut_write_csr(unsigned idx, Word v) { in_csrs_.at(idx) = v; }

  const SbFifo& h2d(unsigned idx) const { return h2d_.at(idx); }
  const SbFifo& d2h(unsigned idx) const { return d2h_.at(idx); }

  // Control plane, used by the kernel.
  std::optional<ControlCommand> take_command();
  void publish_status(const ShellStatus& s) { status_ = s; }
  void set_host_tick(std::uint64_t t) { host_tick_ = t; }

  const std::vector<MmioViolation>& violations() const { return violations_; }
  std::uint64_t violation_count() const { return violation_count_; }
  void dump_violations(std::ostream& os) const;

 private:
  void violate(ViolationKind k, Word addr);
  Word read_control(Word offset);
  WriteAck write_control(Word offset, Word data);

  PShellConfig cfg_;
  AddressMap map_;
  std::vector<Word> out_csrs_;
  std::vector<Word> in_csrs_;
  std::vector<SbFifo> h2d_;
  std::vector<SbFifo> d2h_;

  std::deque<ControlCommand> commands_;
  Word step_count_ = 0;
  Word violation_select_ = 0;
  ShellStatus status_;
  std::uint64_t host_tick_ = 0;

  std::vector<MmioViolation> violations_;
  std::uint64_t violation_count_ = 0;
};

}  // namespace sdemu::pshell
