#include "sdemu/pshell.hpp"

#include <bit>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace sdemu::pshell {

namespace {

unsigned depth_for(const std::vector<unsigned>& overrides, unsigned i, unsigned dflt) {
  if (i < overrides.size() && overrides[i] != 0) return overrides[i];
  return dflt;
}

void check_depth(unsigned d, const std::string& what) {
  if (d < 2 || !std::has_single_bit(d))
    throw ConfigError(what + " depth " + std::to_string(d) + " must be a power of two >= 2");
}

}  // namespace

AddressMap::AddressMap(const PShellConfig& cfg) : cfg_(cfg) {
  if (cfg.data_width != 32) throw ConfigError("data_width must be 32");
  check_depth(cfg.fifo_depth, "fifo");
  for (unsigned i = 0; i < cfg.num_fifos_h2d; ++i)
    check_depth(depth_for(cfg.h2d_depths, i, cfg.fifo_depth), "h2d fifo " + std::to_string(i));
  for (unsigned i = 0; i < cfg.num_fifos_d2h; ++i)
    check_depth(depth_for(cfg.d2h_depths, i, cfg.fifo_depth), "d2h fifo " + std::to_string(i));

  auto add = [&](std::string name, Word window, std::uint64_t bytes) {
    if (bytes == 0) return;
    regions_.push_back(Region{std::move(name), kBase + window,
                              static_cast<Word>(kBase + window + bytes)});
  };
  add("csr_out", kOutCsrWindow, 4ull * cfg.num_csrs_out);
  add("csr_in", kInCsrWindow, 4ull * cfg.num_csrs_in);
  add("fifo_h2d", kH2dWindow, std::uint64_t{kFifoStride} * cfg.num_fifos_h2d);
  add("fifo_d2h", kD2hWindow, std::uint64_t{kFifoStride} * cfg.num_fifos_d2h);
  add("control", kControlWindow, kControlEnd);

  // Each region must stay inside its own window; anything larger runs into
  // the next window whether or not that one is populated.
  static constexpr Word kWindows[] = {kOutCsrWindow, kInCsrWindow, kH2dWindow, kD2hWindow,
                                      kControlWindow};
  for (const auto& r : regions_) {
    for (Word w : kWindows) {
      const Word wb = kBase + w;
      if (wb == r.begin) continue;
      if (r.begin < wb + kWindowSize && wb < r.end) {
        std::ostringstream msg;
        msg << "region " << r.name << " [0x" << std::hex << r.begin << ", 0x" << r.end
            << ") overlaps window at 0x" << wb;
        throw ConfigError(msg.str());
      }
    }
  }
}

std::optional<Location> AddressMap::locate(Word addr) const {
  if (addr & 3) return std::nullopt;
  if (addr < kBase) return std::nullopt;
  const Word off = addr - kBase;
  const Word window = off & ~(kWindowSize - 1);
  const Word in = off & (kWindowSize - 1);
  switch (window) {
    case kOutCsrWindow:
      if (in / 4 < cfg_.num_csrs_out) return Location{RegionKind::OutCsr, in / 4};
      return std::nullopt;
    case kInCsrWindow:
      if (in / 4 < cfg_.num_csrs_in) return Location{RegionKind::InCsr, in / 4};
      return std::nullopt;
    case kH2dWindow:
    case kD2hWindow: {
      const unsigned idx = in / kFifoStride;
      const Word port = in % kFifoStride;
      const bool h2d = window == kH2dWindow;
      if (idx >= (h2d ? cfg_.num_fifos_h2d : cfg_.num_fifos_d2h)) return std::nullopt;
      if (port == kFifoDataPort)
        return Location{h2d ? RegionKind::H2dData : RegionKind::D2hData, idx};
      if (port == kFifoCountPort)
        return Location{h2d ? RegionKind::H2dCredits : RegionKind::D2hOccupancy, idx};
      return std::nullopt;
    }
    case kControlWindow:
      if (in < kControlEnd) return Location{RegionKind::Control, in};
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

std::string AddressMap::describe() const {
  std::ostringstream os;
  char buf[96];
  for (const auto& r : regions_) {
    std::snprintf(buf, sizeof buf, "%-9s 0x%08x-0x%08x\n", r.name.c_str(), r.begin, r.end - 1);
    os << buf;
  }
  return os.str();
}

AddressMap address_map(const PShellConfig& cfg) { return AddressMap(cfg); }

bool SbFifo::push(Word w) {
  if (full()) return false;
  q_.push_back(w);
  ++pushes_;
  return true;
}

std::optional<Word> SbFifo::pop() {
  if (q_.empty()) return std::nullopt;
  Word w = q_.front();
  q_.pop_front();
  ++pops_;
  return w;
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::WriteNoCredit: return "write-no-credit";
    case ViolationKind::ReadEmpty: return "read-empty";
    case ViolationKind::UnmappedAddress: return "unmapped-address";
    case ViolationKind::ReservedOp: return "reserved-op";
  }
  return "?";
}

PShell::PShell(PShellConfig cfg)
    : cfg_(std::move(cfg)),
      map_(cfg_),
      out_csrs_(cfg_.num_csrs_out, 0),
      in_csrs_(cfg_.num_csrs_in, 0) {
  for (unsigned i = 0; i < cfg_.num_fifos_h2d; ++i)
    h2d_.emplace_back(FifoDir::HostToDut, depth_for(cfg_.h2d_depths, i, cfg_.fifo_depth));
  for (unsigned i = 0; i < cfg_.num_fifos_d2h; ++i)
    d2h_.emplace_back(FifoDir::DutToHost, depth_for(cfg_.d2h_depths, i, cfg_.fifo_depth));
}

void PShell::violate(ViolationKind k, Word addr) {
  ++violation_count_;
  if (violations_.size() < cfg_.max_logged_violations)
    violations_.push_back(MmioViolation{k, addr, host_tick_});
}

WriteAck PShell::mmio_write(Word addr, Word data) {
  auto loc = map_.locate(addr);
  if (!loc) {
    violate(ViolationKind::UnmappedAddress, addr);
    return WriteAck::Unmapped;
  }
  switch (loc->kind) {
    case RegionKind::OutCsr:
      out_csrs_[loc->index] = data;
      return WriteAck::Ok;
    case RegionKind::H2dData:
      if (!h2d_[loc->index].push(data)) {
        violate(ViolationKind::WriteNoCredit, addr);
        return WriteAck::Dropped;
      }
      return WriteAck::Ok;
    case RegionKind::Control:
      return write_control(loc->index, data);
    case RegionKind::InCsr:
    case RegionKind::H2dCredits:
    case RegionKind::D2hData:
    case RegionKind::D2hOccupancy:
      break;
  }
  violate(ViolationKind::ReservedOp, addr);
  return WriteAck::Reserved;
}

Word PShell::mmio_read(Word addr) {
  auto loc = map_.locate(addr);
  if (!loc) {
    violate(ViolationKind::UnmappedAddress, addr);
    return kEmptyRead;
  }
  switch (loc->kind) {
    case RegionKind::OutCsr: return out_csrs_[loc->index];
    case RegionKind::InCsr: return in_csrs_[loc->index];
    case RegionKind::H2dCredits: return h2d_[loc->index].credits();
    case RegionKind::D2hOccupancy: return d2h_[loc->index].occupancy();
    case RegionKind::D2hData:
      if (auto w = d2h_[loc->index].pop()) return *w;
      violate(ViolationKind::ReadEmpty, addr);
      return kEmptyRead;
    case RegionKind::Control: return read_control(loc->index);
    case RegionKind::H2dData: break;
  }
  violate(ViolationKind::ReservedOp, addr);
  return kEmptyRead;
}

Word PShell::read_control(Word offset) {
  const Word addr = kBase + kControlWindow + offset;
  auto selected = [&]() -> const MmioViolation* {
    return violation_select_ < violations_.size() ? &violations_[violation_select_] : nullptr;
  };
  switch (static_cast<ControlReg>(offset)) {
    case ControlReg::StepCount: return step_count_;
    case ControlReg::Status:
      return (status_.gated ? 1u : 0u) | (status_.halted ? 2u : 0u) | (status_.reasons & 0xf) << 8;
    case ControlReg::CycleLo: return static_cast<Word>(status_.dut_cycle);
    case ControlReg::CycleHi: return static_cast<Word>(status_.dut_cycle >> 32);
    case ControlReg::ViolationCount: return static_cast<Word>(violation_count_);
    case ControlReg::ViolationSelect: return violation_select_;
    case ControlReg::ViolationKind: {
      auto* v = selected();
      return v ? static_cast<Word>(v->kind) : kEmptyRead;
    }
    case ControlReg::ViolationAddr: {
      auto* v = selected();
      return v ? v->address : kEmptyRead;
    }
    case ControlReg::ViolationTick: {
      auto* v = selected();
      return v ? static_cast<Word>(v->host_tick) : kEmptyRead;
    }
    case ControlReg::HostTick: return static_cast<Word>(host_tick_);
    case ControlReg::Command: break;
  }
  violate(ViolationKind::ReservedOp, addr);
  return kEmptyRead;
}

WriteAck PShell::write_control(Word offset, Word data) {
  const Word addr = kBase + kControlWindow + offset;
  switch (static_cast<ControlReg>(offset)) {
    case ControlReg::Command:
      if (data > static_cast<Word>(CommandCode::Step) ||
          (data == static_cast<Word>(CommandCode::Step) && step_count_ == 0))
        break;
      commands_.push_back(ControlCommand{static_cast<CommandCode>(data), step_count_});
      return WriteAck::Ok;
    case ControlReg::StepCount:
      step_count_ = data;
      return WriteAck::Ok;
    case ControlReg::ViolationSelect:
      violation_select_ = data;
      return WriteAck::Ok;
    default:
      break;
  }
  violate(ViolationKind::ReservedOp, addr);
  return WriteAck::Reserved;
}

PushResult PShell::dut_fifo_push(unsigned idx, Word w) {
  return d2h_.at(idx).push(w) ? PushResult::Accepted : PushResult::WouldBlock;
}

PushResult PShell::dut_fifo_push_record(unsigned idx, std::span<const Word> words) {
  auto& f = d2h_.at(idx);
  if (f.space() < words.size()) return PushResult::WouldBlock;
  for (Word w : words) f.push(w);
  return PushResult::Accepted;
}

std::optional<Word> PShell::dut_fifo_pop(unsigned idx) { return h2d_.at(idx).pop(); }

std::optional<Word> PShell::dut_fifo_peek(unsigned idx) const {
  const auto& f = h2d_.at(idx);
  if (f.empty()) return std::nullopt;
  return f.front();
}

std::optional<ControlCommand> PShell::take_command() {
  if (commands_.empty()) return std::nullopt;
  auto c = commands_.front();
  commands_.pop_front();
  return c;
}

void PShell::dump_violations(std::ostream& os) const {
  char buf[96];
  for (const auto& v : violations_) {
    std::snprintf(buf, sizeof buf, "tick=%llu kind=%s addr=0x%08x\n",
                  static_cast<unsigned long long>(v.host_tick), std::string(to_string(v.kind)).c_str(),
                  v.address);
    os << buf;
  }
}

}  // namespace sdemu::pshell
