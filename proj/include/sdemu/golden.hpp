#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdemu/arch.hpp"

namespace sdemu::golden {

enum class StepStatus : std::uint8_t { Committed, Halted, Blocked, Illegal };

struct StepResult {
  StepStatus status = StepStatus::Committed;
  std::optional<CommitRecord> record;
};

// Instruction-set interpreter. getchar consumes the same input script the
// host feeds the DUT; running out of input reports Blocked.
class Interpreter {
 public:
  explicit Interpreter(const ProgramImage& image, std::string input = {});

  StepResult step();
  // Steps until halt, block or illegal, or max_steps records.
  std::vector<CommitRecord> run(std::uint64_t max_steps);

  const ArchState& state() const { return st_; }
  const std::string& output() const { return out_; }
  std::uint64_t retired() const { return retired_; }

 private:
  ArchState st_;
  std::string in_;
  std::size_t in_pos_ = 0;
  std::string out_;
  std::uint64_t retired_ = 0;
};

enum class Field : std::uint8_t { Pc, Instr, Rd, Wdata, Missing, Extra };
std::string_view to_string(Field f);

// First mismatching field in pc, instr, rd, wdata order, if any.
std::optional<Field> first_difference(const CommitRecord& dut, const CommitRecord& gold);

struct Divergence {
  std::uint64_t commit_index = 0;
  Field field = Field::Pc;
  std::optional<CommitRecord> dut_record;
  std::optional<CommitRecord> golden_record;

  std::string to_json() const;
};

class Lockstep {
 public:
  explicit Lockstep(const ProgramImage& image, std::string input = {});

  // Compares the next DUT record. After the first divergence further calls
  // return the stored one.
  std::optional<Divergence> check(const CommitRecord& dut);
  // Call when the DUT stream has ended; reports truncation if the golden
  // model still has records to retire.
  std::optional<Divergence> finish();

  std::uint64_t compared() const { return compared_; }
  const std::optional<Divergence>& divergence() const { return div_; }

 private:
  Interpreter gold_;
  std::uint64_t compared_ = 0;
  std::optional<Divergence> div_;
};

std::string record_json(const CommitRecord& r);

}  // namespace sdemu::golden
