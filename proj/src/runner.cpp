#include "sdemu/runner.hpp"

namespace sdemu::runner {

int Result::exit_status() const {
  if (!watchdog.empty()) return 4;
  if (divergence) return 2;
  if (panicked()) return 5;
  return 0;
}

namespace {

std::vector<Word> read_cover(kernel::Kernel& k) {
  std::vector<Word> w(dut::CoverageUnit::words());
  for (unsigned i = 0; i < w.size(); ++i) w[i] = k.cover_read_word(i);
  return w;
}

}  // namespace

Result run(const kernel::KernelConfig& cfg, const ProgramImage& image, const Options& opt) {
  Result r;
  kernel::Kernel k(cfg, image);
  if (opt.oracle || opt.dut_trace) {
    k.set_cycle_hook([&](std::uint64_t cycle, const dut::CycleOutput& out) {
      if (opt.oracle) {
        const auto s = profiler::attribute(cycle, out);
        ++r.oracle.cycles[s.event];
        ++r.oracle_per_pc[s.pc].cycles[s.event];
      }
      if (opt.dut_trace && out.committed) r.dut_trace.push_back(*out.committed);
    });
  }
  try {
    if (opt.cover_checkpoint) {
      while (!k.pipeline().halted()) {
        k.run_until(kernel::StopCondition::at_cycles(k.dut_cycle() + opt.cover_checkpoint));
        r.cover_checkpoints.push_back(read_cover(k));
        if (k.host().lockstep() && k.host().lockstep()->divergence()) break;
      }
    } else {
      k.run_until(kernel::StopCondition::halted());
    }
    // A run stopped early (divergence) must not keep executing while the
    // host empties its FIFOs.
    if (!k.pipeline().halted()) k.request_gate(kernel::GateReason::HostPause);
    k.drain();
  } catch (const kernel::WatchdogError& e) {
    r.watchdog = e.what();
  }
  r.summary = k.summary();
  r.output = k.host().output();
  r.commits = k.host().commits();
  if (auto& lock = k.host().lockstep()) {
    if (r.watchdog.empty() && !r.panicked() && !lock->divergence()) lock->finish();
    r.divergence = lock->divergence();
    r.compared = lock->compared();
  }
  r.profile = k.host().profile();
  r.cover_words = read_cover(k);
  r.covered = k.coverage().covered();
  r.cover_total = dut::CoverageUnit::total();
  return r;
}

}  // namespace sdemu::runner
