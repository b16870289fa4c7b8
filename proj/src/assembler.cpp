#include "sdemu/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "sdemu/isa.hpp"

namespace sdemu::assembler {

using isa::Instr;
using isa::Op;

namespace {

struct Line {
  int number;
  std::string mnemonic;
  std::vector<std::string> args;
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Strips comments but leaves '#' or ';' inside character literals alone.
std::string strip_comment(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\'' && i + 2 < s.size()) {
      i += s[i + 1] == '\\' ? 3 : 2;
      continue;
    }
    if (s[i] == '#' || s[i] == ';') return s.substr(0, i);
  }
  return s;
}

std::vector<std::string> split_args(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  bool quote = false;
  for (char c : s) {
    if (c == '\'') quote = !quote;
    if (c == ',' && !quote) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

bool is_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '.'; });
}

std::optional<std::int64_t> parse_number(const std::string& t) {
  if (t.empty()) return std::nullopt;
  if (t.size() >= 3 && t.front() == '\'' && t.back() == '\'') {
    const std::string body = t.substr(1, t.size() - 2);
    if (body.size() == 1) return static_cast<unsigned char>(body[0]);
    if (body.size() == 2 && body[0] == '\\') {
      switch (body[1]) {
        case 'n': return '\n';
        case 't': return '\t';
        case 'r': return '\r';
        case '0': return 0;
        case '\\': return '\\';
        case '\'': return '\'';
      }
    }
    return std::nullopt;
  }
  std::size_t i = 0;
  bool neg = false;
  if (t[0] == '-' || t[0] == '+') {
    neg = t[0] == '-';
    i = 1;
  }
  int base = 10;
  if (t.size() > i + 2 && t[i] == '0' && (t[i + 1] == 'x' || t[i + 1] == 'X')) {
    base = 16;
    i += 2;
  } else if (t.size() > i + 2 && t[i] == '0' && (t[i + 1] == 'b' || t[i + 1] == 'B')) {
    base = 2;
    i += 2;
  }
  if (i >= t.size()) return std::nullopt;
  std::int64_t v = 0;
  for (; i < t.size(); ++i) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t[i])));
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else return std::nullopt;
    if (d >= base) return std::nullopt;
    v = v * base + d;
    if (v > 0x1'0000'0000ll) return std::nullopt;
  }
  return neg ? -v : v;
}

std::optional<unsigned> parse_reg(const std::string& t0) {
  const std::string t = lower(t0);
  if (t.size() >= 2 && t[0] == 'x') {
    auto n = parse_number(t.substr(1));
    if (n && *n >= 0 && *n < 32 && std::isdigit(static_cast<unsigned char>(t[1]))) return static_cast<unsigned>(*n);
    return std::nullopt;
  }
  if (t == "fp") return 8;
  for (unsigned r = 0; r < 32; ++r)
    if (isa::abi_name(r) == t) return r;
  return std::nullopt;
}

class Assembler {
 public:
  explicit Assembler(const std::string& src) { parse_lines(src); }

  ProgramImage run() {
    layout();
    emit();
    ProgramImage img;
    img.words = words_;
    if (entry_expr_) img.entry = static_cast<Word>(value(*entry_expr_, entry_line_));
    else if (auto it = labels_.find("_start"); it != labels_.end()) img.entry = it->second;
    else if (!words_.empty()) img.entry = first_addr_.value_or(words_.begin()->first);
    return img;
  }

 private:
  void parse_lines(const std::string& src) {
    std::istringstream is(src);
    std::string raw;
    int n = 0;
    while (std::getline(is, raw)) {
      ++n;
      std::string s = trim(strip_comment(raw));
      // Leading labels.
      for (;;) {
        auto colon = s.find(':');
        if (colon == std::string::npos) break;
        const std::string name = trim(s.substr(0, colon));
        if (!is_ident(name) || name[0] == '.') break;
        lines_.push_back(Line{n, ":" + name, {}});
        s = trim(s.substr(colon + 1));
      }
      if (s.empty()) continue;
      auto sp = s.find_first_of(" \t");
      Line l{n, lower(s.substr(0, sp)), {}};
      if (sp != std::string::npos) l.args = split_args(trim(s.substr(sp)));
      lines_.push_back(std::move(l));
    }
  }

  [[noreturn]] static void fail(int line, const std::string& msg) { throw AsmError(line, msg); }

  void need(const Line& l, std::size_t n) const {
    if (l.args.size() != n)
      fail(l.number, l.mnemonic + " expects " + std::to_string(n) + " operand(s), got " + std::to_string(l.args.size()));
  }

  // Size in words; pseudo expansions are fixed-size so pass 1 needs no values.
  unsigned size_of(const Line& l) const {
    if (l.mnemonic == "li") {
      need(l, 2);
      auto v = parse_number(l.args[1]);
      if (!v) fail(l.number, "li needs a numeric immediate (use la for labels)");
      return (*v >= -2048 && *v <= 2047) ? 1 : 2;
    }
    if (l.mnemonic == "la") return 2;
    return 1;
  }

  void layout() {
    Word pc = 0;
    for (const auto& l : lines_) {
      if (l.mnemonic[0] == ':') {
        const std::string name = l.mnemonic.substr(1);
        if (labels_.count(name)) fail(l.number, "duplicate label '" + name + "'");
        labels_[name] = pc;
        continue;
      }
      if (l.mnemonic == ".org") {
        need(l, 1);
        auto v = parse_number(l.args[0]);
        if (!v || *v < 0 || (*v & 3)) fail(l.number, ".org needs a word-aligned address");
        pc = static_cast<Word>(*v);
        continue;
      }
      if (l.mnemonic == ".entry") {
        need(l, 1);
        entry_expr_ = l.args[0];
        entry_line_ = l.number;
        continue;
      }
      if (l.mnemonic == ".word") {
        if (l.args.empty()) fail(l.number, ".word needs a value");
        pc += 4 * static_cast<Word>(l.args.size());
        continue;
      }
      if (l.mnemonic[0] == '.') fail(l.number, "unknown directive '" + l.mnemonic + "'");
      pc += 4 * size_of(l);
    }
  }

  std::int64_t value(const std::string& t, int line) const {
    if (auto n = parse_number(t)) return *n;
    if (auto it = labels_.find(t); it != labels_.end()) return it->second;
    fail(line, "undefined symbol '" + t + "'");
  }

  unsigned reg(const std::string& t, int line) const {
    auto r = parse_reg(t);
    if (!r) fail(line, "bad register '" + t + "'");
    return *r;
  }

  static void range(std::int64_t v, std::int64_t lo, std::int64_t hi, int line, const std::string& what) {
    if (v < lo || v > hi)
      fail(line, what + " " + std::to_string(v) + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  // "imm(rs)" operand.
  std::pair<std::int64_t, unsigned> mem_operand(const std::string& t, int line) const {
    auto open = t.find('(');
    auto close = t.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
      fail(line, "expected offset(register), got '" + t + "'");
    const std::string off = trim(t.substr(0, open));
    return {off.empty() ? 0 : value(off, line), reg(trim(t.substr(open + 1, close - open - 1)), line)};
  }

  void put(Word& pc, const Instr& in) {
    if (!first_addr_) first_addr_ = pc;
    words_[pc] = isa::encode(in);
    pc += 4;
  }

  static Instr mk(Op op, unsigned rd, unsigned rs1, unsigned rs2, std::int64_t imm) {
    Instr i;
    i.op = op;
    i.rd = static_cast<std::uint8_t>(rd);
    i.rs1 = static_cast<std::uint8_t>(rs1);
    i.rs2 = static_cast<std::uint8_t>(rs2);
    i.imm = static_cast<std::int32_t>(imm);
    return i;
  }

  void emit_branch(Word& pc, Op op, unsigned rs1, unsigned rs2, const std::string& target, int line) {
    const std::int64_t off = value(target, line) - static_cast<std::int64_t>(pc);
    if (off & 1) fail(line, "branch target not 2-byte aligned");
    range(off, -4096, 4094, line, "branch offset");
    put(pc, mk(op, 0, rs1, rs2, off));
  }

  void emit_jal(Word& pc, unsigned rd, const std::string& target, int line) {
    const std::int64_t off = value(target, line) - static_cast<std::int64_t>(pc);
    if (off & 1) fail(line, "jump target not 2-byte aligned");
    range(off, -(1 << 20), (1 << 20) - 2, line, "jump offset");
    put(pc, mk(Op::Jal, rd, 0, 0, off));
  }

  void emit_li32(Word& pc, unsigned rd, std::int64_t v, int line) {
    range(v, -(1ll << 31), (1ll << 32) - 1, line, "immediate");
    const Word w = static_cast<Word>(v);
    const Word hi = (w + 0x800) & 0xfffff000u;
    const std::int32_t lo = static_cast<std::int32_t>(w - hi);
    put(pc, mk(Op::Lui, rd, 0, 0, static_cast<std::int32_t>(hi)));
    put(pc, mk(Op::Addi, rd, rd, 0, lo));
  }

  static std::optional<Op> op_named(const std::string& m) {
    static const std::map<std::string, Op> table = [] {
      std::map<std::string, Op> t;
      for (int i = 1; i <= static_cast<int>(Op::Ebreak); ++i) t[std::string(isa::mnemonic(static_cast<Op>(i)))] = static_cast<Op>(i);
      return t;
    }();
    if (auto it = table.find(m); it != table.end()) return it->second;
    return std::nullopt;
  }

  void emit() {
    Word pc = 0;
    for (const auto& l : lines_) {
      const int n = l.number;
      const auto& a = l.args;
      const std::string& m = l.mnemonic;
      if (m[0] == ':' || m == ".entry") continue;
      if (m == ".org") {
        pc = static_cast<Word>(*parse_number(a[0]));
        continue;
      }
      if (m == ".word") {
        for (const auto& v : a) {
          const auto x = value(v, n);
          range(x, -(1ll << 31), (1ll << 32) - 1, n, ".word value");
          if (!first_addr_) first_addr_ = pc;
          words_[pc] = static_cast<Word>(x);
          pc += 4;
        }
        continue;
      }
      // Pseudo-instructions.
      if (m == "nop") { need(l, 0); put(pc, mk(Op::Addi, 0, 0, 0, 0)); continue; }
      if (m == "li") {
        const unsigned rd = reg(a[0], n);
        const auto v = *parse_number(a[1]);
        if (v >= -2048 && v <= 2047) put(pc, mk(Op::Addi, rd, 0, 0, v));
        else emit_li32(pc, rd, v, n);
        continue;
      }
      if (m == "la") { need(l, 2); emit_li32(pc, reg(a[0], n), value(a[1], n), n); continue; }
      if (m == "mv") { need(l, 2); put(pc, mk(Op::Addi, reg(a[0], n), reg(a[1], n), 0, 0)); continue; }
      if (m == "not") { need(l, 2); put(pc, mk(Op::Xori, reg(a[0], n), reg(a[1], n), 0, -1)); continue; }
      if (m == "neg") { need(l, 2); put(pc, mk(Op::Sub, reg(a[0], n), 0, reg(a[1], n), 0)); continue; }
      if (m == "j") { need(l, 1); emit_jal(pc, 0, a[0], n); continue; }
      if (m == "call") { need(l, 1); emit_jal(pc, 1, a[0], n); continue; }
      if (m == "jr") { need(l, 1); put(pc, mk(Op::Jalr, 0, reg(a[0], n), 0, 0)); continue; }
      if (m == "ret") { need(l, 0); put(pc, mk(Op::Jalr, 0, 1, 0, 0)); continue; }
      if (m == "beqz") { need(l, 2); emit_branch(pc, Op::Beq, reg(a[0], n), 0, a[1], n); continue; }
      if (m == "bnez") { need(l, 2); emit_branch(pc, Op::Bne, reg(a[0], n), 0, a[1], n); continue; }
      if (m == "bltz") { need(l, 2); emit_branch(pc, Op::Blt, reg(a[0], n), 0, a[1], n); continue; }
      if (m == "bgez") { need(l, 2); emit_branch(pc, Op::Bge, reg(a[0], n), 0, a[1], n); continue; }

      auto op = op_named(m);
      if (!op) fail(n, "unknown mnemonic '" + m + "'");
      switch (*op) {
        case Op::Lui: case Op::Auipc: {
          need(l, 2);
          const auto v = value(a[1], n);
          range(v, 0, 0xfffff, n, "upper immediate");
          put(pc, mk(*op, reg(a[0], n), 0, 0, static_cast<std::int64_t>(static_cast<std::int32_t>(static_cast<Word>(v) << 12))));
          break;
        }
        case Op::Addi: case Op::Slti: case Op::Andi: case Op::Ori: case Op::Xori: {
          need(l, 3);
          const auto v = value(a[2], n);
          range(v, -2048, 2047, n, "immediate");
          put(pc, mk(*op, reg(a[0], n), reg(a[1], n), 0, v));
          break;
        }
        case Op::Slli: case Op::Srli: case Op::Srai: {
          need(l, 3);
          const auto v = value(a[2], n);
          range(v, 0, 31, n, "shift amount");
          put(pc, mk(*op, reg(a[0], n), reg(a[1], n), 0, v));
          break;
        }
        case Op::Add: case Op::Sub: case Op::Slt: case Op::And: case Op::Or: case Op::Xor:
        case Op::Sll: case Op::Srl: case Op::Sra:
          need(l, 3);
          put(pc, mk(*op, reg(a[0], n), reg(a[1], n), reg(a[2], n), 0));
          break;
        case Op::Lw: {
          need(l, 2);
          auto [off, base] = mem_operand(a[1], n);
          range(off, -2048, 2047, n, "load offset");
          put(pc, mk(Op::Lw, reg(a[0], n), base, 0, off));
          break;
        }
        case Op::Sw: {
          need(l, 2);
          auto [off, base] = mem_operand(a[1], n);
          range(off, -2048, 2047, n, "store offset");
          put(pc, mk(Op::Sw, 0, base, reg(a[0], n), off));
          break;
        }
        case Op::Beq: case Op::Bne: case Op::Blt: case Op::Bge: case Op::Bltu: case Op::Bgeu:
          need(l, 3);
          emit_branch(pc, *op, reg(a[0], n), reg(a[1], n), a[2], n);
          break;
        case Op::Jal:
          if (a.size() == 1) emit_jal(pc, 1, a[0], n);
          else { need(l, 2); emit_jal(pc, reg(a[0], n), a[1], n); }
          break;
        case Op::Jalr: {
          if (a.size() == 1) { put(pc, mk(Op::Jalr, 1, reg(a[0], n), 0, 0)); break; }
          std::int64_t off;
          unsigned base;
          if (a.size() == 2) std::tie(off, base) = mem_operand(a[1], n);
          else { need(l, 3); base = reg(a[1], n); off = value(a[2], n); }
          range(off, -2048, 2047, n, "jalr offset");
          put(pc, mk(Op::Jalr, reg(a[0], n), base, 0, off));
          break;
        }
        case Op::Ecall: case Op::Ebreak:
          need(l, 0);
          put(pc, mk(*op, 0, 0, 0, 0));
          break;
        case Op::Illegal:
          fail(n, "unknown mnemonic '" + m + "'");
      }
    }
  }

  std::vector<Line> lines_;
  std::map<std::string, Word> labels_;
  std::map<Word, Word> words_;
  std::optional<Word> first_addr_;
  std::optional<std::string> entry_expr_;
  int entry_line_ = 0;
};

}  // namespace

ProgramImage assemble(const std::string& source) { return Assembler(source).run(); }

ProgramImage load_program(const std::string& path) {
  if (path.size() > 2 && path.ends_with(".s")) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return assemble(ss.str());
  }
  return ProgramImage::read_file(path);
}

}  // namespace sdemu::assembler
