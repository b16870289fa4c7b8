#include "sdemu/timing.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <stdexcept>

namespace sdemu::timing {

void DramModelParams::validate() const {
  if (base_latency < 1) throw std::invalid_argument("dram base_latency must be >= 1");
  if (bank_count == 0 || !std::has_single_bit(bank_count))
    throw std::invalid_argument("dram bank_count must be a power of two");
  if (line_bytes == 0 || !std::has_single_bit(line_bytes))
    throw std::invalid_argument("dram line_bytes must be a power of two");
}

unsigned DramModelParams::bank_of(Word address) const {
  return (address >> std::countr_zero(line_bytes)) & (bank_count - 1);
}

DramModel::DramModel(DramModelParams p) : p_(p) {
  p_.validate();
  bank_free_.assign(p_.bank_count, 0);
}

unsigned DramModel::service(const IoRequest& req) {
  auto& free_at = bank_free_[p_.bank_of(req.address)];
  const std::uint64_t wait = free_at > req.issue_cycle ? free_at - req.issue_cycle : 0;
  free_at = req.issue_cycle + wait + p_.bank_busy;
  return static_cast<unsigned>(p_.base_latency + wait);
}

void timer_step(HardwareTimer& t) {
  if (!t.delivered) ++t.elapsed;
}

TimerStatus peek(const HardwareTimer& t) {
  if (!t.armed) return TimerStatus::GateNeeded;
  if (t.elapsed < t.programmed_latency) return TimerStatus::Held;
  if (t.elapsed == t.programmed_latency && t.data_ready) return TimerStatus::Delivered;
  return TimerStatus::GateNeeded;
}

TimerStatus try_deliver(HardwareTimer& t) {
  if (t.delivered) throw std::logic_error("timer delivered twice");
  auto s = peek(t);
  if (s == TimerStatus::Delivered) t.delivered = true;
  return s;
}

std::string TraceEntry::to_string() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "req=%u addr=0x%08x issue=%llu L=%u deliver=%llu", req_id, address,
                static_cast<unsigned long long>(issue), latency,
                static_cast<unsigned long long>(deliver));
  return buf;
}

HardwareTimer* TimerBank::find(Word req_id) {
  auto it = std::find_if(timers_.begin(), timers_.end(),
                         [&](const HardwareTimer& t) { return t.req_id == req_id; });
  return it == timers_.end() ? nullptr : &*it;
}

void TimerBank::open(Word req_id, Word address, std::uint64_t issue_cycle) {
  if (full_after_delivery()) throw std::logic_error("timer bank overflow");
  HardwareTimer t;
  t.req_id = req_id;
  t.address = address;
  t.issue_cycle = issue_cycle;
  timers_.push_back(t);
}

void TimerBank::arm(Word req_id, unsigned latency) {
  auto* t = find(req_id);
  if (!t || t->armed) return;
  t->programmed_latency = std::max(1u, latency);
  t->armed = true;
}

void TimerBank::set_data_ready(Word req_id) {
  if (auto* t = find(req_id)) t->data_ready = true;
}

bool TimerBank::gate_needed() const {
  return std::any_of(timers_.begin(), timers_.end(),
                     [](const HardwareTimer& t) { return peek(t) == TimerStatus::GateNeeded; });
}

std::size_t TimerBank::live() const {
  return static_cast<std::size_t>(std::count_if(timers_.begin(), timers_.end(),
                                                [](const HardwareTimer& t) { return peek(t) != TimerStatus::Delivered; }));
}

std::vector<Word> TimerBank::due() const {
  std::vector<Word> out;
  for (const auto& t : timers_)
    if (peek(t) == TimerStatus::Delivered) out.push_back(t.req_id);
  return out;
}

void TimerBank::commit_cycle(std::uint64_t cycle) {
  for (auto& t : timers_) {
    if (peek(t) == TimerStatus::Delivered) {
      try_deliver(t);
      trace_.push_back(TraceEntry{t.req_id, t.address, t.issue_cycle, t.programmed_latency, cycle});
    } else {
      timer_step(t);
    }
  }
  std::erase_if(timers_, [](const HardwareTimer& t) { return t.delivered; });
}

}  // namespace sdemu::timing
