#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdemu::covergen {

// Byte offsets are [begin, end); line/col are 1-based, end_col exclusive.
struct Span {
  std::string file;
  int line = 0, col = 0;
  int end_line = 0, end_col = 0;
  std::size_t begin = 0, end = 0;

  bool contains(const Span& o) const { return begin <= o.begin && o.end <= end; }
  std::string to_string() const;  // file:line:col
};

enum class ExprKind { Ident, Number, Unary, Binary, Ternary, Select, Concat, Replicate, Call };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

// Ident: text is the (possibly dotted) name.  Number: literal text.
// Unary/Binary: text is the operator.  Select: args = {base, index[, hi/lo or width]},
// text is "[]", "[:]", "[+:]" or "[-:]".  Replicate: args = {count, items...}.
// Call: text is the function name.  Ternary: args = {cond, then, else}.
struct Expr {
  ExprKind kind = ExprKind::Ident;
  std::string text;
  std::vector<ExprPtr> args;
  Span span;
};

struct Range {
  ExprPtr msb, lsb;
};

struct Declarator {
  std::string name;
  std::vector<Range> unpacked;
  ExprPtr init;
  Span span;
};

enum class StmtKind { Block, If, Case, Assign, Null };

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct CaseArm {
  bool is_default = false;
  std::vector<ExprPtr> labels;
  StmtPtr body;
  Span span;
};

struct Stmt {
  StmtKind kind = StmtKind::Null;
  Span span;
  std::string label;      // Block: name; Case: "case"/"casez"/"casex"; Assign: "=" or "<="
  std::string qualifier;  // Case: "", "unique", "unique0", "priority"
  ExprPtr cond;           // If condition, Case select, Assign lhs
  ExprPtr rhs;
  StmtPtr then_s, else_s;
  std::vector<StmtPtr> body;
  std::vector<CaseArm> arms;
  Span head;  // If: `if (...)`, Case: `case (...)`
};

struct Event {
  std::string edge;  // "", "posedge", "negedge"
  ExprPtr signal;
};

struct Connection {
  std::string port;  // empty for positional
  bool implicit = false;  // .name with no parentheses
  ExprPtr expr;           // null for .name() or implicit
};

enum class ItemKind { Decl, Assign, Always, Instance };

struct Item {
  ItemKind kind = ItemKind::Decl;
  Span span;
  // Decl: keyword is "input", "output wire", "parameter", "logic", ...
  std::string keyword;
  bool is_signed = false;
  std::vector<Range> packed;
  std::vector<Declarator> decls;
  // Assign
  std::vector<std::pair<ExprPtr, ExprPtr>> assigns;
  // Always: keyword holds always/always_comb/always_ff/always_latch/initial
  bool star = false;
  std::vector<Event> events;
  StmtPtr body;
  // Instance
  std::string module_name, instance_name;
  std::vector<Connection> params, ports;

  bool is_param() const { return keyword.rfind("parameter", 0) == 0 || keyword.rfind("localparam", 0) == 0; }
};

struct Module {
  std::string name;
  Span span;
  std::vector<Item> header_params;
  bool has_port_list = false;
  std::vector<std::string> port_names;  // non-ANSI header
  std::vector<Item> ansi_ports;
  std::vector<Item> items;
};

struct SvFile {
  std::string file;
  std::vector<Module> modules;
};

struct SyntaxError {
  Span span;
  std::string message;
  bool unsupported = false;  // out-of-subset construct rather than malformed input
  std::string to_string() const;
};

struct ParseResult {
  SvFile ast;
  std::vector<SyntaxError> errors;
  bool ok() const { return errors.empty(); }
};

ParseResult parse(std::string_view source, const std::string& file = "<input>");

// Canonical source text. parse(print(x)) prints back to the same text.
std::string print(const SvFile& f);
std::string print_expr(const Expr& e);

enum class CoverKind { IfCond, TernaryCond, CaseSelect };
const char* to_string(CoverKind k);

struct CoverpointDesc {
  int id = 0;
  std::string hier_name;  // module.scope.digest
  CoverKind kind = CoverKind::IfCond;
  Span span;
  bool is_static = false;
};

struct ExtractOptions {
  // One point per non-default case arm instead of one per case select.
  bool case_per_arm = false;
};

// Every if/ternary/case condition in pre-order, static ones flagged.
// Ids are the ordinal in the returned list.
std::vector<CoverpointDesc> extract(const SvFile& f, const ExtractOptions& opt = {});

// True iff the expression mentions only literals and parameter names.
bool is_static(const Expr& e, const std::vector<std::string>& params);

// Filters static points unless include_static, then renumbers ids from 0.
std::vector<CoverpointDesc> select(std::vector<CoverpointDesc> all, bool include_static);

std::string to_json(const std::vector<CoverpointDesc>& points);
std::string to_text(const std::vector<CoverpointDesc>& points);

}  // namespace sdemu::covergen
