#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "sdemu/isa.hpp"

namespace sdemu {

using isa::Word;

// Architectural commit event; the unit of lockstep verification.
// rd/wdata are zero when the instruction writes no register.
struct CommitRecord {
  Word pc = 0;
  Word instr = 0;
  std::uint8_t rd = 0;
  Word wdata = 0;

  friend bool operator==(const CommitRecord&, const CommitRecord&) = default;
};

inline constexpr std::size_t kCommitRecordWords = 4;
inline constexpr Word kCommitFlagWrite = 1u << 8;

std::array<Word, kCommitRecordWords> pack(const CommitRecord& r);
CommitRecord unpack_commit(const std::array<Word, kCommitRecordWords>& w);
std::ostream& operator<<(std::ostream& os, const CommitRecord& r);

// Sparse, byte-addressed, word-granular memory. Unwritten words read as zero.
class Memory {
 public:
  Word read(Word byte_addr) const;
  void write(Word byte_addr, Word value);
  std::size_t pages() const { return pages_.size(); }

 private:
  static constexpr unsigned kPageWordsLog2 = 10;
  using Page = std::array<Word, 1u << kPageWordsLog2>;
  std::unordered_map<Word, std::unique_ptr<Page>> pages_;

 public:
  Memory() = default;
  Memory(const Memory& other);
  Memory& operator=(const Memory& other);
  Memory(Memory&&) noexcept = default;
  Memory& operator=(Memory&&) noexcept = default;
};

struct ArchState {
  Word pc = 0;
  std::array<Word, 32> regs{};
  Memory mem;
  bool halted = false;
  Word exit_code = 0;
};

class ImageError : public std::runtime_error {
 public:
  ImageError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Program image: `entry: <hex>` plus `<hex-addr>: <hex-word>` lines.
struct ProgramImage {
  Word entry = 0;
  std::map<Word, Word> words;

  void load_into(Memory& mem) const;
  std::string to_text() const;
  static ProgramImage parse(const std::string& text);
  static ProgramImage read_file(const std::string& path);
};

// Syscall ABI: ECALL with a7 selecting the service.
enum class Syscall : Word { SendChar = 1, GetChar = 2, Exit = 3 };

}  // namespace sdemu
