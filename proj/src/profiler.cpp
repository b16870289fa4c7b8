#include "sdemu/profiler.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sdemu::profiler {

std::string_view event_name(std::uint8_t event) {
  if (event == kCommitEvent) return "commit";
  return dut::to_string(static_cast<dut::StallClass>(event - 1));
}

std::optional<std::uint8_t> event_from_name(std::string_view name) {
  if (name == "commit") return kCommitEvent;
  if (auto c = dut::stall_class_from_string(name)) return event_of(*c);
  return std::nullopt;
}

Sample attribute(std::uint64_t cycle, const std::optional<CommitRecord>& committed,
                 std::optional<dut::StallClass> stall, const dut::PipelineView& view) {
  Sample s;
  s.cycle = cycle;
  if (committed) {
    s.pc = committed->pc;
    s.event = kCommitEvent;
    return s;
  }
  const auto cls = stall.value_or(dut::StallClass::RawOther);
  s.event = event_of(cls);
  if (cls == dut::StallClass::FrontendEmpty) s.pc = view.fetch_pc;
  else s.pc = view.oldest_in_flight().value_or(view.fetch_pc);
  return s;
}

Sample attribute(std::uint64_t cycle, const dut::CycleOutput& out) {
  return attribute(cycle, out.committed, out.stall, out.view);
}

std::array<Word, kSampleWords> pack(const Sample& s) {
  if (s.pc >= kMaxSamplePc) throw std::out_of_range("sample pc does not fit in 28 bits");
  return {static_cast<Word>(s.cycle), s.pc | Word{s.event} << 28};
}

Sample unpack_sample(const std::array<Word, kSampleWords>& w) {
  return Sample{w[0], w[1] & (kMaxSamplePc - 1), static_cast<std::uint8_t>(w[1] >> 28)};
}

std::uint64_t StallStack::total() const { return std::accumulate(cycles.begin(), cycles.end(), std::uint64_t{0}); }

Aggregator::Aggregator(std::uint64_t interval) : interval_(interval) {
  if (interval == 0) throw std::invalid_argument("sampling interval must be >= 1");
}

void Aggregator::add(const Sample& s) {
  ++samples_;
  stack_.cycles.at(s.event) += interval_;
  per_pc_[s.pc].cycles[s.event] += interval_;
}

std::array<double, kNumEvents> relative_error(const StallStack& estimate, const StallStack& oracle) {
  std::array<double, kNumEvents> e{};
  const double total = static_cast<double>(oracle.total());
  if (total == 0) return e;
  for (std::size_t i = 0; i < kNumEvents; ++i)
    e[i] = std::fabs(static_cast<double>(estimate.cycles[i]) - static_cast<double>(oracle.cycles[i])) / total;
  return e;
}

std::string stall_stack_csv(const StallStack& s) {
  std::ostringstream os;
  os << "class,cycles\n";
  for (std::size_t i = 0; i < kNumEvents; ++i)
    os << event_name(static_cast<std::uint8_t>(i)) << ',' << s.cycles[i] << '\n';
  return os.str();
}

std::string per_pc_csv(const std::map<Word, StallStack>& table) {
  std::ostringstream os;
  os << "pc,class,cycles\n";
  char pc[16];
  for (const auto& [addr, st] : table) {
    std::snprintf(pc, sizeof pc, "0x%08x", addr);
    for (std::size_t i = 0; i < kNumEvents; ++i)
      if (st.cycles[i]) os << pc << ',' << event_name(static_cast<std::uint8_t>(i)) << ',' << st.cycles[i] << '\n';
  }
  return os.str();
}

double SlowdownReport::slowdown() const {
  return dut_cycles ? static_cast<double>(host_ticks) / static_cast<double>(dut_cycles) : 1.0;
}

std::string SlowdownReport::to_json() const {
  nlohmann::ordered_json j;
  j["interval"] = interval;
  j["host_ticks"] = host_ticks;
  j["dut_cycles"] = dut_cycles;
  j["slowdown"] = slowdown();
  return j.dump(2);
}

}  // namespace sdemu::profiler
