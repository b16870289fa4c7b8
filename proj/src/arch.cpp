#include "sdemu/arch.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sdemu {

std::array<Word, kCommitRecordWords> pack(const CommitRecord& r) {
  Word flags = r.rd;
  if (r.rd != 0) flags |= kCommitFlagWrite;
  return {r.pc, r.instr, flags, r.wdata};
}

CommitRecord unpack_commit(const std::array<Word, kCommitRecordWords>& w) {
  return CommitRecord{w[0], w[1], static_cast<std::uint8_t>(w[2] & 0x1f), w[3]};
}

std::ostream& operator<<(std::ostream& os, const CommitRecord& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "{pc=0x%08x instr=0x%08x rd=%u wdata=0x%08x}", r.pc, r.instr,
                unsigned{r.rd}, r.wdata);
  return os << buf;
}

Memory::Memory(const Memory& other) { *this = other; }

Memory& Memory::operator=(const Memory& other) {
  if (this == &other) return *this;
  pages_.clear();
  for (const auto& [k, p] : other.pages_) pages_.emplace(k, std::make_unique<Page>(*p));
  return *this;
}

Word Memory::read(Word byte_addr) const {
  const Word w = byte_addr >> 2;
  auto it = pages_.find(w >> kPageWordsLog2);
  if (it == pages_.end()) return 0;
  return (*it->second)[w & ((1u << kPageWordsLog2) - 1)];
}

void Memory::write(Word byte_addr, Word value) {
  const Word w = byte_addr >> 2;
  auto& page = pages_[w >> kPageWordsLog2];
  if (!page) page = std::make_unique<Page>(Page{});
  (*page)[w & ((1u << kPageWordsLog2) - 1)] = value;
}

void ProgramImage::load_into(Memory& mem) const {
  for (const auto& [addr, word] : words) mem.write(addr, word);
}

std::string ProgramImage::to_text() const {
  std::string out;
  char buf[32];
  std::snprintf(buf, sizeof buf, "entry: %08X\n", entry);
  out += buf;
  for (const auto& [addr, word] : words) {
    std::snprintf(buf, sizeof buf, "%08X: %08X\n", addr, word);
    out += buf;
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Word parse_hex(const std::string& s, int line) {
  std::string t = trim(s);
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) t = t.substr(2);
  if (t.empty() || t.size() > 8) throw ImageError(line, "bad hex value '" + s + "'");
  Word v = 0;
  for (char c : t) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw ImageError(line, "bad hex value '" + s + "'");
    v = v << 4 | static_cast<Word>(d);
  }
  return v;
}

}  // namespace

ProgramImage ProgramImage::parse(const std::string& text) {
  ProgramImage img;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::string s = trim(raw);
    if (s.empty()) continue;
    auto colon = s.find(':');
    if (colon == std::string::npos) throw ImageError(line, "expected '<addr>: <word>'");
    std::string key = trim(s.substr(0, colon));
    std::string val = s.substr(colon + 1);
    if (key == "entry") {
      img.entry = parse_hex(val, line);
      continue;
    }
    Word addr = parse_hex(key, line);
    if (addr & 3) throw ImageError(line, "unaligned address");
    img.words[addr] = parse_hex(val, line);
  }
  return img;
}

ProgramImage ProgramImage::read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ImageError(0, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace sdemu
