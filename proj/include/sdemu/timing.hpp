#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdemu/isa.hpp"

namespace sdemu::timing {

using isa::Word;

enum class ReqKind : std::uint8_t { Read = 0, Write = 1 };

struct IoRequest {
  Word req_id = 0;
  ReqKind kind = ReqKind::Read;
  Word address = 0;
  Word data = 0;
  std::uint64_t issue_cycle = 0;
};

// Closed-page DRAM: constant access latency plus a per-bank busy window.
struct DramModelParams {
  unsigned base_latency = 20;
  unsigned bank_count = 8;
  unsigned bank_busy = 10;
  unsigned line_bytes = 64;

  void validate() const;  // throws std::invalid_argument
  unsigned bank_of(Word address) const;
};

class DramModel {
 public:
  explicit DramModel(DramModelParams p = {});

  // Latency in DUT cycles; updates the bank occupancy state.
  unsigned service(const IoRequest& req);

  const DramModelParams& params() const { return p_; }

 private:
  DramModelParams p_;
  std::vector<std::uint64_t> bank_free_;
};

// Lives in the DUT clock domain; the host only programs its latency and
// signals when the response data is available.
struct HardwareTimer {
  Word req_id = 0;
  Word address = 0;
  std::uint64_t issue_cycle = 0;
  unsigned programmed_latency = 0;
  bool armed = false;
  unsigned elapsed = 0;
  bool data_ready = false;
  bool delivered = false;
};

enum class TimerStatus : std::uint8_t { Held, Delivered, GateNeeded };

// Advance by one running DUT cycle.
void timer_step(HardwareTimer& t);

// Evaluated at the start of a DUT cycle. Delivered marks the timer; calling
// it again on a delivered timer throws std::logic_error.
TimerStatus try_deliver(HardwareTimer& t);

// Status without side effects.
TimerStatus peek(const HardwareTimer& t);

struct TraceEntry {
  Word req_id;
  Word address;
  std::uint64_t issue;
  unsigned latency;
  std::uint64_t deliver;

  std::string to_string() const;
};

// The set of outstanding timers for one DUT memory port.
class TimerBank {
 public:
  explicit TimerBank(unsigned max_outstanding = 1) : max_(max_outstanding) {}

  unsigned max_outstanding() const { return max_; }
  std::size_t outstanding() const { return timers_.size(); }
  bool full() const { return timers_.size() >= max_; }
  // Timers still open after this cycle's deliveries; a slot freed by a
  // delivery can be reused by a request issued in the same cycle.
  std::size_t live() const;
  bool full_after_delivery() const { return live() >= max_; }

  void open(Word req_id, Word address, std::uint64_t issue_cycle);
  void arm(Word req_id, unsigned latency);
  void set_data_ready(Word req_id);

  // True when the next DUT cycle may not run (unprogrammed timer, or an
  // expired timer whose data has not arrived).
  bool gate_needed() const;

  // Request ids delivered in the upcoming cycle. Only valid when !gate_needed().
  std::vector<Word> due() const;

  // Commit one running DUT cycle: deliver due timers, then step the rest.
  void commit_cycle(std::uint64_t cycle);

  const std::vector<HardwareTimer>& timers() const { return timers_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  HardwareTimer* find(Word req_id);

  unsigned max_;
  std::vector<HardwareTimer> timers_;
  std::vector<TraceEntry> trace_;
};

}  // namespace sdemu::timing
