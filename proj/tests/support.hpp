#pragma once

#include <string>

#include "sdemu/assembler.hpp"

namespace sdemu::test {

inline const char* const kBenchmarks[] = {"loaduse", "chase", "branchy", "stream", "hello"};

inline std::string source_path(const std::string& rel) { return std::string(SDEMU_SOURCE_DIR) + "/" + rel; }

inline ProgramImage bench(const std::string& name) {
  return assembler::load_program(source_path("bench/" + name + ".s"));
}

inline ProgramImage program(const std::string& src) { return assembler::assemble(src); }

}  // namespace sdemu::test
