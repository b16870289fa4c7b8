#include "sdemu/kernel.hpp"

#include <algorithm>

#include "json.hpp"

namespace sdemu::kernel {

namespace b = binding;

namespace {
// Consecutive host ticks with neither DUT progress nor host work.
constexpr std::uint64_t kStuckLimit = 1u << 22;
}  // namespace

std::string_view to_string(GateReason r) {
  switch (r) {
    case GateReason::Backpressure: return "backpressure";
    case GateReason::TimerWait: return "timer_wait";
    case GateReason::HostPause: return "host_pause";
    case GateReason::StepExhausted: return "step_exhausted";
  }
  return "?";
}

std::optional<GateReason> GateController::charged() const {
  for (auto r : {GateReason::HostPause, GateReason::StepExhausted, GateReason::TimerWait, GateReason::Backpressure})
    if (has(r)) return r;
  return std::nullopt;
}

void HostCostModel::validate() const {
  if (!ticks_per_sample || !ticks_per_io || !ticks_idle || !ticks_per_commit || !ticks_per_char)
    throw std::invalid_argument("host cost model: tick costs must be >= 1");
  if (data_delay_min > data_delay_max) throw std::invalid_argument("host cost model: data_delay_min > data_delay_max");
  if (stall_permille > 1000) throw std::invalid_argument("host cost model: stall_permille must be <= 1000");
}

HostCostModel HostCostModel::randomized(std::uint64_t seed) {
  std::mt19937_64 g(seed * 0x9E3779B97F4A7C15ull + 7);
  auto pick = [&](unsigned lo, unsigned hi) { return std::uniform_int_distribution<unsigned>(lo, hi)(g); };
  HostCostModel m;
  m.ticks_per_sample = pick(1, 6);
  m.ticks_per_io = pick(1, 8);
  m.ticks_per_commit = pick(1, 6);
  m.ticks_per_char = pick(1, 4);
  m.jitter = pick(0, 3);
  m.data_delay_min = pick(0, 10);
  m.data_delay_max = m.data_delay_min + pick(0, 40);
  m.stall_permille = pick(0, 20);
  m.stall_max = pick(1, 30);
  m.seed = seed;
  return m;
}

std::uint64_t RunSummary::gated_total() const {
  std::uint64_t t = 0;
  for (auto g : gated) t += g;
  return t;
}

std::string RunSummary::to_json() const {
  nlohmann::ordered_json j;
  j["dut_cycles"] = dut_cycles;
  j["host_ticks"] = host_ticks;
  nlohmann::ordered_json g;
  for (std::size_t i = 0; i < kNumGateReasons; ++i) g[std::string(to_string(static_cast<GateReason>(i)))] = gated[i];
  j["gated"] = g;
  if (idle_ticks) j["idle_ticks"] = idle_ticks;
  return j.dump(2);
}

pshell::PShellConfig bound_shell_config(const pshell::PShellConfig& cfg) {
  pshell::PShellConfig c = cfg;
  c.num_fifos_d2h = std::max(c.num_fifos_d2h, b::kNumD2h);
  c.num_fifos_h2d = std::max(c.num_fifos_h2d, b::kNumH2d);
  c.num_csrs_out = std::max(c.num_csrs_out, b::kNumCsrOut);
  c.num_csrs_in = std::max(c.num_csrs_in, b::kCsrCoverBase + static_cast<unsigned>(dut::CoverageUnit::words()));
  c.d2h_depths.resize(c.num_fifos_d2h, 0);
  for (unsigned i = 0; i < b::kNumD2h; ++i) {
    const unsigned d = c.d2h_depths[i] ? c.d2h_depths[i] : c.fifo_depth;
    c.d2h_depths[i] = std::max(d, b::kRecordWords[i]);
  }
  return c;
}

HostAgent::HostAgent(const KernelConfig& cfg, transport::MmioPort& port, const pshell::AddressMap& map,
                     const ProgramImage& image)
    : cfg_(cfg), port_(port), map_(map), dram_(cfg.dram), rng_(cfg.host.seed) {
  if (cfg.sample_interval) agg_.emplace(cfg.sample_interval);
  if (cfg.lockstep) lock_.emplace(image, cfg.stdin_script);
}

Word HostAgent::occupancy(unsigned fifo) { return port_.read(map_.d2h_occupancy(fifo)); }

unsigned HostAgent::cost(unsigned base) {
  if (cfg_.host.jitter == 0) return base;
  return base + std::uniform_int_distribution<unsigned>(0, cfg_.host.jitter)(rng_);
}

bool HostAgent::timing_work(std::uint64_t host_tick) {
  return occupancy(b::kMemReqFifo) >= b::kRecordWords[b::kMemReqFifo] ||
         std::any_of(arrivals_.begin(), arrivals_.end(), [&](const Arrival& a) { return a.at <= host_tick; });
}

void HostAgent::tick(std::uint64_t host_tick) {
  // Timing service preempts a bulk drain in progress; the drain resumes after.
  const bool drain_job = job_ == Job::Commit || job_ == Job::Sample || job_ == Job::Char;
  if (remaining_ > 0 && drain_job && suspended_ == Job::None && timing_work(host_tick)) {
    suspended_ = job_;
    suspended_remaining_ = remaining_;
    remaining_ = 0;
  } else if (remaining_ == 0 && suspended_ != Job::None && !timing_work(host_tick)) {
    job_ = suspended_;
    remaining_ = suspended_remaining_;
    suspended_ = Job::None;
  }
  if (remaining_ == 0) {
    const auto& h = cfg_.host;
    job_ = Job::None;
    if (suspended_ != Job::None) {
      if (occupancy(b::kMemReqFifo) >= b::kRecordWords[b::kMemReqFifo]) {
        job_ = Job::Io;
        remaining_ = cost(h.ticks_per_io);
      } else {
        job_ = Job::DataReady;
        remaining_ = 1;
      }
    } else if (h.stall_permille && std::uniform_int_distribution<unsigned>(0, 999)(rng_) < h.stall_permille) {
      job_ = Job::Stall;
      remaining_ = std::uniform_int_distribution<unsigned>(1, std::max(1u, h.stall_max))(rng_);
    } else if (lock_ && occupancy(b::kCommitFifo) >= b::kRecordWords[b::kCommitFifo]) {
      job_ = Job::Commit;
      remaining_ = cost(h.ticks_per_commit);
    } else if (agg_ && occupancy(b::kSampleFifo) >= b::kRecordWords[b::kSampleFifo]) {
      job_ = Job::Sample;
      remaining_ = cost(h.ticks_per_sample);
    } else if (occupancy(b::kCharFifo) >= 1) {
      job_ = Job::Char;
      remaining_ = cost(h.ticks_per_char);
    } else if (occupancy(b::kMemReqFifo) >= b::kRecordWords[b::kMemReqFifo]) {
      job_ = Job::Io;
      remaining_ = cost(h.ticks_per_io);
    } else if (std::any_of(arrivals_.begin(), arrivals_.end(), [&](const Arrival& a) { return a.at <= host_tick; })) {
      job_ = Job::DataReady;
      remaining_ = 1;
    } else if (stdin_pending() && port_.read(map_.h2d_credits(b::kStdinFifo)) > 0) {
      job_ = Job::Stdin;
      remaining_ = 1;
    }
    if (job_ == Job::None) return;
    ++jobs_;
  }
  if (--remaining_ == 0) finish(host_tick);
}

void HostAgent::finish(std::uint64_t host_tick) {
  auto pop = [&](unsigned fifo) { return port_.read(map_.d2h_data(fifo)); };
  switch (job_) {
    case Job::Commit: {
      std::array<Word, kCommitRecordWords> w;
      for (auto& x : w) x = pop(b::kCommitFifo);
      const CommitRecord r = unpack_commit(w);
      commits_.push_back(r);
      lock_->check(r);
      break;
    }
    case Job::Sample: {
      std::array<Word, profiler::kSampleWords> w;
      for (auto& x : w) x = pop(b::kSampleFifo);
      agg_->add(profiler::unpack_sample(w));
      break;
    }
    case Job::Char:
      output_.push_back(static_cast<char>(pop(b::kCharFifo) & 0xff));
      break;
    case Job::Io: {
      timing::IoRequest req;
      req.req_id = pop(b::kMemReqFifo);
      req.address = pop(b::kMemReqFifo);
      req.kind = static_cast<timing::ReqKind>(pop(b::kMemReqFifo) & 1);
      req.issue_cycle = pop(b::kMemReqFifo);
      const unsigned latency = dram_.service(req);
      port_.write(map_.out_csr(b::kCsrTimerLatency), latency);
      port_.write(map_.out_csr(b::kCsrTimerArm), req.req_id + 1);
      const auto& h = cfg_.host;
      const unsigned delay = std::uniform_int_distribution<unsigned>(h.data_delay_min, h.data_delay_max)(rng_);
      arrivals_.push_back(Arrival{host_tick + delay, req.req_id});
      break;
    }
    case Job::DataReady: {
      auto it = std::find_if(arrivals_.begin(), arrivals_.end(), [&](const Arrival& a) { return a.at <= host_tick; });
      port_.write(map_.out_csr(b::kCsrDataReady), it->req_id + 1);
      arrivals_.erase(it);
      break;
    }
    case Job::Stdin:
      port_.write(map_.h2d_data(b::kStdinFifo), static_cast<unsigned char>(cfg_.stdin_script[stdin_pos_++]));
      break;
    case Job::Stall:
    case Job::None:
      break;
  }
  job_ = Job::None;
}

bool HostAgent::idle_and_drained() {
  if (busy() || !arrivals_.empty()) return false;
  for (unsigned f = 0; f < b::kNumD2h; ++f)
    if (occupancy(f) != 0) return false;
  return true;
}

Kernel::Kernel(KernelConfig cfg, const ProgramImage& image)
    : cfg_(std::move(cfg)),
      shell_(bound_shell_config(cfg_.shell)),
      timers_(cfg_.pipeline.mem_queue_depth),
      direct_(shell_) {
  cfg_.host.validate();
  if (cfg_.watchdog_ticks == 0) cfg_.watchdog_ticks = std::max<std::uint64_t>(cfg_.watchdog_cycles, 1) * 4096;
  pipe_ = std::make_unique<dut::Pipeline>(cfg_.pipeline, image);
  transport::MmioPort* port = &direct_;
  if (cfg_.transport == HostTransport::Bridged) {
    bridged_ = std::make_unique<transport::BridgedPort>(direct_, cfg_.host.seed);
    port = bridged_.get();
  }
  host_ = std::make_unique<HostAgent>(cfg_, *port, shell_.map(), image);
  publish();
}

Kernel::~Kernel() { mailbox_.close(); }

void Kernel::command(const pshell::ControlCommand& c) {
  switch (c.code) {
    case pshell::CommandCode::Run:
      stepping_ = false;
      gate_.release(GateReason::HostPause);
      gate_.release(GateReason::StepExhausted);
      break;
    case pshell::CommandCode::Pause:
      gate_.request(GateReason::HostPause);
      break;
    case pshell::CommandCode::Step:
      gate_.release(GateReason::HostPause);
      stepping_ = true;
      step_remaining_ = c.step_count;
      if (step_remaining_) gate_.release(GateReason::StepExhausted);
      else gate_.request(GateReason::StepExhausted);
      break;
  }
}

void Kernel::sync_timer_csrs() {
  const Word arm = shell_.dut_read_csr(b::kCsrTimerArm);
  if (arm != last_arm_) {
    last_arm_ = arm;
    if (arm) timers_.arm(arm - 1, shell_.dut_read_csr(b::kCsrTimerLatency));
  }
  const Word ready = shell_.dut_read_csr(b::kCsrDataReady);
  if (ready != last_ready_) {
    last_ready_ = ready;
    if (ready) timers_.set_data_ready(ready - 1);
  }
}

bool Kernel::fits(const dut::CycleOutput& out) const {
  auto space = [&](unsigned f) { return shell_.dut_fifo_space(f); };
  if (out.committed && host_->lockstep() && space(b::kCommitFifo) < b::kRecordWords[b::kCommitFifo]) return false;
  if (cfg_.sample_interval && profiler::sampled(dut_cycle_, cfg_.sample_interval) &&
      space(b::kSampleFifo) < b::kRecordWords[b::kSampleFifo])
    return false;
  if (out.syscall && out.syscall->kind == dut::SyscallKind::SendChar && space(b::kCharFifo) < 1) return false;
  if (out.mem_req && (space(b::kMemReqFifo) < b::kRecordWords[b::kMemReqFifo] || timers_.full_after_delivery())) return false;
  return true;
}

void Kernel::push_outputs(const dut::CycleOutput& out) {
  if (out.committed && host_->lockstep()) {
    auto w = pack(*out.committed);
    shell_.dut_fifo_push_record(b::kCommitFifo, w);
  }
  if (cfg_.sample_interval && profiler::sampled(dut_cycle_, cfg_.sample_interval)) {
    auto w = profiler::pack(profiler::attribute(dut_cycle_, out));
    shell_.dut_fifo_push_record(b::kSampleFifo, w);
  }
  if (out.syscall && out.syscall->kind == dut::SyscallKind::SendChar)
    shell_.dut_fifo_push(b::kCharFifo, out.syscall->value);
  if (out.pop_stdin) shell_.dut_fifo_pop(b::kStdinFifo);
  if (out.mem_req) {
    const auto& r = *out.mem_req;
    const std::array<Word, 4> w{r.req_id, r.address, static_cast<Word>(r.kind), static_cast<Word>(r.issue_cycle)};
    shell_.dut_fifo_push_record(b::kMemReqFifo, w);
    timers_.open(r.req_id, r.address, r.issue_cycle);
  }
}

void Kernel::publish() {
  shell_.dut_write_csr(b::kCsrCycleLo, static_cast<Word>(dut_cycle_));
  shell_.dut_write_csr(b::kCsrCycleHi, static_cast<Word>(dut_cycle_ >> 32));
  shell_.dut_write_csr(b::kCsrCommits, static_cast<Word>(pipe_->commits()));
  shell_.dut_write_csr(b::kCsrHalted, pipe_->halted() ? 1 : 0);
  shell_.dut_write_csr(b::kCsrExitCode, pipe_->exit_code());
  for (unsigned k = 0; k < dut::CoverageUnit::words(); ++k) shell_.dut_write_csr(b::kCsrCoverBase + k, cover_.word(k));
  shell_.publish_status(pshell::ShellStatus{gate_.gated(), pipe_->halted(), gate_.reasons(), dut_cycle_});
}

Word Kernel::cover_read_word(unsigned k) {
  if (k >= dut::CoverageUnit::words()) return 0;
  return shell_.mmio_read(shell_.map().in_csr(b::kCsrCoverBase + k));
}

TickReport Kernel::tick() {
  TickReport rep;
  ++host_tick_;
  shell_.set_host_tick(host_tick_);
  mailbox_.drain(direct_);
  const bool host_was_busy = host_->busy();
  host_->tick(host_tick_);
  while (auto c = shell_.take_command()) command(*c);
  sync_timer_csrs();

  if (pipe_->halted()) {
    publish();
    return rep;
  }

  if (timers_.gate_needed()) gate_.request(GateReason::TimerWait);
  else gate_.release(GateReason::TimerWait);
  gate_.release(GateReason::Backpressure);

  bool run = !gate_.gated();
  std::optional<dut::Pipeline::CycleResult> cyc;
  if (run) {
    const auto due = timers_.due();
    dut::CycleInputs in;
    in.cycle = dut_cycle_;
    in.delivered = due;
    in.stdin_head = shell_.dut_fifo_peek(b::kStdinFifo);
    cyc.emplace(pipe_->evaluate(in));
    // An empty stdin FIFO is only architecturally visible once the host has
    // nothing left to send; until then the wait is host lag.
    if (!fits(cyc->out) || (cyc->out.getchar_blocked && host_->stdin_pending())) {
      gate_.request(GateReason::Backpressure);
      run = false;
    }
  }
  if (run && cfg_.host.ticks_idle > 1 && !host_was_busy && !host_->busy()) {
    if (++idle_phase_ < cfg_.host.ticks_idle) {
      ++summary_.idle_ticks;
      run = false;
      cyc.reset();
    } else {
      idle_phase_ = 0;
    }
  }

  if (run) {
    dut::CycleOutput out = cyc->out;
    pipe_->commit(std::move(*cyc));
    push_outputs(out);
    timers_.commit_cycle(dut_cycle_);
    cover_.observe(out.cover);
    if (hook_) hook_(dut_cycle_, out);
    if (!out.panic.empty()) summary_.panic = out.panic;
    ++dut_cycle_;
    rep.advanced_dut = true;
    if (stepping_ && step_remaining_ && --step_remaining_ == 0) gate_.request(GateReason::StepExhausted);
  } else if (cyc || gate_.gated()) {
    if (auto r = gate_.charged()) ++summary_.gated[static_cast<std::size_t>(*r)];
  }
  rep.gate_reasons = gate_.reasons();
  summary_.dut_cycles = dut_cycle_;
  summary_.host_ticks = host_tick_;
  summary_.halted = pipe_->halted();
  summary_.exit_code = pipe_->exit_code();
  publish();
  return rep;
}

RunSummary Kernel::run_until(StopCondition stop) {
  for (;;) {
    switch (stop.kind) {
      case StopCondition::Kind::Cycles:
        if (dut_cycle_ >= stop.cycles) return summary_;
        break;
      case StopCondition::Kind::Halted:
        break;
      case StopCondition::Kind::Violation:
        if (shell_.violation_count() > 0) return summary_;
        break;
    }
    if (pipe_->halted()) return summary_;
    if (host_->lockstep() && host_->lockstep()->divergence()) return summary_;
    if (dut_cycle_ >= cfg_.watchdog_cycles)
      throw WatchdogError("watchdog: " + std::to_string(dut_cycle_) + " DUT cycles without halting");
    if (host_tick_ >= cfg_.watchdog_ticks)
      throw WatchdogError("watchdog: " + std::to_string(host_tick_) + " host ticks without halting");
    const auto rep = tick();
    stuck_ticks_ = (rep.advanced_dut || host_->busy()) ? 0 : stuck_ticks_ + 1;
    if (stuck_ticks_ > kStuckLimit)
      throw WatchdogError("watchdog: no progress for " + std::to_string(stuck_ticks_) + " host ticks");
  }
}

void Kernel::drain() {
  const RunSummary keep = summary_;
  const std::uint64_t limit = host_tick_ + cfg_.watchdog_ticks;
  while (!host_->idle_and_drained()) {
    if (host_tick_ >= limit) throw WatchdogError("watchdog: host drain did not finish");
    tick();
  }
  summary_ = keep;
}

}  // namespace sdemu::kernel
