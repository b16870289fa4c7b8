#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "sdemu/pipeline.hpp"

namespace sdemu::profiler {

// Event code 0 is a commit; 1 + StallClass for stalls. Codes fit 4 bits.
inline constexpr std::size_t kNumEvents = 1 + dut::kNumStallClasses;
inline constexpr std::uint8_t kCommitEvent = 0;

inline std::uint8_t event_of(dut::StallClass c) { return static_cast<std::uint8_t>(1 + static_cast<unsigned>(c)); }
std::string_view event_name(std::uint8_t event);
std::optional<std::uint8_t> event_from_name(std::string_view name);

struct Sample {
  std::uint64_t cycle = 0;
  Word pc = 0;
  std::uint8_t event = kCommitEvent;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Commits carry the committing pc, frontend-empty the fetch pc, and every
// other stall the oldest instruction in flight.
Sample attribute(std::uint64_t cycle, const std::optional<CommitRecord>& committed,
                 std::optional<dut::StallClass> stall, const dut::PipelineView& view);
Sample attribute(std::uint64_t cycle, const dut::CycleOutput& out);

inline bool sampled(std::uint64_t cycle, std::uint64_t interval) { return cycle % interval == 0; }

inline constexpr std::size_t kSampleWords = 2;
inline constexpr Word kMaxSamplePc = 1u << 28;
// {cycle_lo, pc | event << 28}. Throws std::out_of_range if pc does not fit.
std::array<Word, kSampleWords> pack(const Sample& s);
Sample unpack_sample(const std::array<Word, kSampleWords>& w);

struct StallStack {
  std::array<std::uint64_t, kNumEvents> cycles{};

  std::uint64_t total() const;
  std::uint64_t operator[](std::uint8_t event) const { return cycles[event]; }
  friend bool operator==(const StallStack&, const StallStack&) = default;
};

class Aggregator {
 public:
  explicit Aggregator(std::uint64_t interval = 1);

  void add(const Sample& s);
  std::uint64_t interval() const { return interval_; }
  std::uint64_t samples() const { return samples_; }
  // Exact at interval 1; otherwise sample counts scaled by the interval.
  const StallStack& stack() const { return stack_; }
  const std::map<Word, StallStack>& per_pc() const { return per_pc_; }

 private:
  std::uint64_t interval_;
  std::uint64_t samples_ = 0;
  StallStack stack_;
  std::map<Word, StallStack> per_pc_;
};

// Per-event |estimate - oracle|, normalised by the oracle's total cycles.
std::array<double, kNumEvents> relative_error(const StallStack& estimate, const StallStack& oracle);

std::string stall_stack_csv(const StallStack& s);
std::string per_pc_csv(const std::map<Word, StallStack>& table);

struct SlowdownReport {
  std::uint64_t interval = 1;
  std::uint64_t host_ticks = 0;
  std::uint64_t dut_cycles = 0;

  double slowdown() const;
  std::string to_json() const;
};

}  // namespace sdemu::profiler
