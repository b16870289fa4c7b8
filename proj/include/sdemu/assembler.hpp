#pragma once

#include <stdexcept>
#include <string>

#include "sdemu/arch.hpp"

namespace sdemu::assembler {

class AsmError : public std::runtime_error {
 public:
  AsmError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Two-pass assembler for the DUT subset.
//   labels:   name:
//   comments: # or ;
//   .org <addr>, .word <v>[, <v>...], .entry <label|addr>
//   pseudo:   nop, li, la, mv, not, neg, j, jr, ret, call, beqz, bnez, bltz, bgez
// Registers accept xN and ABI names. The entry point is .entry, else the
// label _start, else the first emitted address.
ProgramImage assemble(const std::string& source);

// Assembles a .s file or parses an image file, by extension.
ProgramImage load_program(const std::string& path);

}  // namespace sdemu::assembler
