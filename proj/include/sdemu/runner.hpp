#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdemu/kernel.hpp"

namespace sdemu::runner {

struct Options {
  // Attribute every cycle through the cycle hook, independent of sampling.
  bool oracle = false;
  // Record the DUT-side commit stream (not just what the host drained).
  bool dut_trace = false;
  // Read the coverage words through the shell every N DUT cycles.
  std::uint64_t cover_checkpoint = 0;
};

struct Result {
  kernel::RunSummary summary;
  std::string output;                  // sendchar bytes, as drained by the host
  std::vector<CommitRecord> commits;   // host-drained commit stream (lockstep only)
  std::vector<CommitRecord> dut_trace;
  std::optional<golden::Divergence> divergence;
  std::uint64_t compared = 0;
  std::optional<profiler::Aggregator> profile;
  profiler::StallStack oracle;
  std::map<Word, profiler::StallStack> oracle_per_pc;
  std::vector<Word> cover_words;                      // final, as read via the shell
  std::vector<std::vector<Word>> cover_checkpoints;   // periodic reads
  std::size_t covered = 0;
  std::size_t cover_total = 0;
  std::string watchdog;  // non-empty when a watchdog fired

  bool panicked() const { return !summary.panic.empty(); }
  // 0 ok, 2 divergence, 4 watchdog, 5 panic.
  int exit_status() const;
};

// Runs to halt, drains the host and closes out lockstep. Watchdog errors
// are captured in the result rather than thrown.
Result run(const kernel::KernelConfig& cfg, const ProgramImage& image, const Options& opt = {});

}  // namespace sdemu::runner
