#include "sdemu/covergen.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>

#include "json.hpp"

namespace sdemu::covergen {

std::string Span::to_string() const {
  return file + ":" + std::to_string(line) + ":" + std::to_string(col);
}

std::string SyntaxError::to_string() const {
  return span.to_string() + ": " + (unsupported ? "unsupported construct: " : "syntax error: ") + message;
}

const char* to_string(CoverKind k) {
  switch (k) {
    case CoverKind::IfCond: return "if-cond";
    case CoverKind::TernaryCond: return "ternary-cond";
    case CoverKind::CaseSelect: return "case-select";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------- lexer

enum class Tok { Ident, Number, Op, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Span span;
};

struct LexError {
  Span span;
  std::string message;
};

const char* const kOps[] = {
    "<<<", ">>>", "===", "!==", "==?", "!=?",
    "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "~&", "~|", "~^", "^~", "**", "+:", "-:",
    "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "?", ":", ";", ",", ".",
    "(", ")", "[", "]", "{", "}", "@", "#", "=", "'",
};

class Lexer {
 public:
  Lexer(std::string_view src, const std::string& file) : s_(src), file_(file) {}

  std::vector<Token> run(std::vector<LexError>& errors) {
    std::vector<Token> out;
    for (;;) {
      skip_space(errors);
      Token t;
      const std::size_t b = i_;
      const int line = line_, col = col_;
      if (i_ >= s_.size()) {
        t.kind = Tok::End;
        t.span = span(b, line, col);
        out.push_back(std::move(t));
        return out;
      }
      const char c = s_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' || s_[i_] == '$')) adv();
        t.kind = Tok::Ident;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '\'' && based_follows(i_ + 1))) {
        lex_number();
        t.kind = Tok::Number;
      } else {
        const std::string_view rest = s_.substr(i_);
        const char* match = nullptr;
        for (const char* op : kOps) {
          if (rest.substr(0, std::char_traits<char>::length(op)) == op) {
            match = op;
            break;
          }
        }
        if (!match) {
          adv();
          errors.push_back({span(b, line, col), std::string("unexpected character '") + c + "'"});
          continue;
        }
        for (std::size_t k = 0; match[k]; ++k) adv();
        t.kind = Tok::Op;
      }
      t.text = std::string(s_.substr(b, i_ - b));
      t.span = span(b, line, col);
      out.push_back(std::move(t));
    }
  }

 private:
  void adv() {
    if (s_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  Span span(std::size_t b, int line, int col) const {
    Span sp;
    sp.file = file_;
    sp.line = line, sp.col = col;
    sp.end_line = line_, sp.end_col = col_;
    sp.begin = b, sp.end = i_;
    return sp;
  }

  void skip_space(std::vector<LexError>& errors) {
    for (;;) {
      if (i_ >= s_.size()) return;
      const char c = s_[i_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        adv();
      } else if (c == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '/') {
        while (i_ < s_.size() && s_[i_] != '\n') adv();
      } else if (c == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '*') {
        const std::size_t b = i_;
        const int line = line_, col = col_;
        adv(), adv();
        while (i_ < s_.size() && !(s_[i_] == '*' && i_ + 1 < s_.size() && s_[i_ + 1] == '/')) adv();
        if (i_ >= s_.size()) {
          errors.push_back({span(b, line, col), "unterminated block comment"});
          return;
        }
        adv(), adv();
      } else if (c == '`') {
        // Compiler directives are outside the subset; drop the line.
        const std::size_t b = i_;
        const int line = line_, col = col_;
        while (i_ < s_.size() && s_[i_] != '\n') adv();
        errors.push_back({span(b, line, col), "compiler directive"});
      } else {
        return;
      }
    }
  }

  bool based_follows(std::size_t j) const {
    if (j < s_.size() && (s_[j] == 's' || s_[j] == 'S')) ++j;
    if (j >= s_.size()) return false;
    const char b = static_cast<char>(std::tolower(static_cast<unsigned char>(s_[j])));
    return b == 'b' || b == 'o' || b == 'd' || b == 'h' || s_[j] == '0' || s_[j] == '1' || b == 'x' || b == 'z';
  }

  void lex_number() {
    auto digit = [](char ch) {
      return std::isxdigit(static_cast<unsigned char>(ch)) || ch == '_' || ch == 'x' || ch == 'X' || ch == 'z' ||
             ch == 'Z' || ch == '?';
    };
    while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) adv();
    if (i_ < s_.size() && s_[i_] == '\'' && based_follows(i_ + 1)) {
      adv();
      if (s_[i_] == 's' || s_[i_] == 'S') adv();
      const char b = static_cast<char>(std::tolower(static_cast<unsigned char>(s_[i_])));
      if (b == 'b' || b == 'o' || b == 'd' || b == 'h') {
        adv();
        while (i_ < s_.size() && digit(s_[i_])) adv();
      } else {
        adv();  // '0, '1, 'x, 'z
      }
    }
  }

  std::string_view s_;
  std::string file_;
  std::size_t i_ = 0;
  int line_ = 1, col_ = 1;
};

// ---------------------------------------------------------------- parser

struct Fail {
  Span span;
  std::string message;
  bool unsupported = false;
};

const std::set<std::string> kTypeWords = {"wire", "reg", "logic", "integer", "bit", "int", "tri", "byte", "shortint", "longint"};
const std::set<std::string> kDirections = {"input", "output", "inout"};
const std::set<std::string> kReserved = {
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "logic", "integer", "bit", "int", "tri",
    "parameter", "localparam", "assign", "always", "always_comb", "always_ff", "always_latch", "initial",
    "begin", "end", "if", "else", "case", "casez", "casex", "endcase", "default", "posedge", "negedge", "or",
    "signed", "unsigned", "generate", "endgenerate", "function", "endfunction", "task", "endtask", "interface",
    "endinterface", "class", "endclass", "for", "while", "repeat", "forever", "genvar", "unique", "unique0",
    "priority", "package", "endpackage", "program", "endprogram", "fork", "join", "byte", "shortint", "longint"};

// Out-of-subset blocks skipped as a unit: keyword -> closing keyword.
const std::map<std::string, std::string> kUnsupportedBlocks = {
    {"generate", "endgenerate"}, {"function", "endfunction"}, {"task", "endtask"},
    {"interface", "endinterface"}, {"class", "endclass"}, {"package", "endpackage"},
    {"program", "endprogram"}, {"covergroup", "endgroup"}, {"property", "endproperty"},
    {"sequence", "endsequence"}, {"clocking", "endclocking"}, {"specify", "endspecify"},
    {"config", "endconfig"}, {"primitive", "endprimitive"}, {"checker", "endchecker"},
};

const std::set<std::string> kItemStarts = {
    "input", "output", "inout", "wire", "reg", "logic", "integer", "bit", "int", "tri", "parameter", "localparam",
    "assign", "always", "always_comb", "always_ff", "always_latch", "initial", "endmodule", "generate",
    "function", "task", "genvar", "module"};

int binary_prec(const std::string& op) {
  static const std::map<std::string, int> t = {
      {"||", 1}, {"&&", 2}, {"|", 3}, {"^", 4}, {"^~", 4}, {"~^", 4}, {"&", 5},
      {"==", 6}, {"!=", 6}, {"===", 6}, {"!==", 6}, {"==?", 6}, {"!=?", 6},
      {"<", 7}, {"<=", 7}, {">", 7}, {">=", 7},
      {"<<", 8}, {">>", 8}, {"<<<", 8}, {">>>", 8},
      {"+", 9}, {"-", 9}, {"*", 10}, {"/", 10}, {"%", 10}, {"**", 11},
  };
  auto it = t.find(op);
  return it == t.end() ? 0 : it->second;
}

constexpr int kUnaryPrec = 12;
constexpr int kPrimaryPrec = 13;

bool is_unary_op(const std::string& op) {
  return op == "+" || op == "-" || op == "!" || op == "~" || op == "&" || op == "|" || op == "^" ||
         op == "~&" || op == "~|" || op == "~^" || op == "^~";
}

Span join(const Span& a, const Span& b) {
  Span s = a;
  s.end_line = b.end_line;
  s.end_col = b.end_col;
  s.end = b.end;
  return s;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<SyntaxError>& errors) : t_(std::move(toks)), errors_(errors) {}

  void parse_file(SvFile& f) {
    while (!at_end()) {
      const Token& tk = peek();
      if (tk.kind == Tok::Ident && tk.text == "module") {
        try {
          f.modules.push_back(parse_module());
        } catch (const Fail& e) {
          record(e);
          recover_to({"module"}, true);
        }
      } else if (tk.kind == Tok::Ident && kUnsupportedBlocks.count(tk.text)) {
        skip_unsupported_block();
      } else {
        record({tk.span, "expected 'module', got '" + tk.text + "'"});
        recover_to({"module"}, false);
      }
    }
  }

 private:
  // -- token helpers
  const Token& peek(std::size_t k = 0) const { return t_[std::min(p_ + k, t_.size() - 1)]; }
  bool at_end() const { return peek().kind == Tok::End; }
  bool at(const char* text) const { return peek().kind != Tok::End && peek().kind != Tok::Number && peek().text == text; }
  bool at_ident() const { return peek().kind == Tok::Ident && !kReserved.count(peek().text); }
  const Token& next() {
    const Token& tk = t_[p_];
    if (p_ + 1 < t_.size()) ++p_;
    last_ = tk.span;
    return tk;
  }
  bool accept(const char* text) {
    if (!at(text)) return false;
    next();
    return true;
  }
  const Token& expect(const char* text) {
    if (!at(text)) fail(std::string("expected '") + text + "'");
    return next();
  }
  std::string expect_ident(const char* what) {
    if (!at_ident()) fail(std::string("expected ") + what);
    return next().text;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& tk = peek();
    throw Fail{tk.span, msg + (tk.kind == Tok::End ? " at end of input" : ", got '" + tk.text + "'")};
  }
  void record(const Fail& f) { errors_.push_back({f.span, f.message, f.unsupported}); }

  void recover_to(const std::set<std::string>& stops, bool skip_first) {
    if (skip_first && !at_end()) next();
    while (!at_end()) {
      if (peek().kind == Tok::Ident && stops.count(peek().text)) return;
      next();
    }
  }

  // Consumes `kw ... endkw` and records an unsupported-construct error spanning it.
  void skip_unsupported_block() {
    const Token kw = next();
    const std::string& close = kUnsupportedBlocks.at(kw.text);
    Span sp = kw.span;
    int depth = 1;
    while (!at_end()) {
      const Token& tk = next();
      if (tk.kind != Tok::Ident) continue;
      if (tk.text == kw.text) ++depth;
      if (tk.text == close && --depth == 0) break;
    }
    sp = join(sp, last_);
    errors_.push_back({sp, "'" + kw.text + "' is outside the supported subset", true});
  }

  // -- expressions
  ExprPtr make(ExprKind k, std::string text, Span sp) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->text = std::move(text);
    e->span = std::move(sp);
    return e;
  }

  ExprPtr parse_expr() {
    ExprPtr c = parse_binary(1);
    if (!at("?")) return c;
    next();
    ExprPtr a = parse_expr();
    expect(":");
    ExprPtr b = parse_expr();
    auto e = make(ExprKind::Ternary, "?:", join(c->span, b->span));
    e->args.push_back(std::move(c));
    e->args.push_back(std::move(a));
    e->args.push_back(std::move(b));
    return e;
  }

  ExprPtr parse_binary(int min_prec) {
    ExprPtr lhs = parse_unary();
    for (;;) {
      const Token& tk = peek();
      if (tk.kind != Tok::Op) break;
      const int prec = binary_prec(tk.text);
      if (prec == 0 || prec < min_prec) break;
      const std::string op = next().text;
      // ** is right-associative.
      ExprPtr rhs = parse_binary(op == "**" ? prec : prec + 1);
      auto e = make(ExprKind::Binary, op, join(lhs->span, rhs->span));
      e->args.push_back(std::move(lhs));
      e->args.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    const Token& tk = peek();
    if (tk.kind == Tok::Op && is_unary_op(tk.text)) {
      const Token op = next();
      ExprPtr x = parse_unary();
      auto e = make(ExprKind::Unary, op.text, join(op.span, x->span));
      e->args.push_back(std::move(x));
      return e;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& tk = peek();
    ExprPtr e;
    if (tk.kind == Tok::Number) {
      const Token n = next();
      e = make(ExprKind::Number, n.text, n.span);
    } else if (tk.kind == Tok::Ident && !tk.text.empty() && tk.text[0] == '$') {
      const Token f = next();
      e = make(ExprKind::Call, f.text, f.span);
      if (accept("(")) {
        if (!at(")")) {
          do {
            e->args.push_back(parse_expr());
          } while (accept(","));
        }
        expect(")");
        e->span = join(f.span, last_);
      }
    } else if (at_ident()) {
      const Token id = next();
      std::string name = id.text;
      while (at(".") && peek(1).kind == Tok::Ident && !kReserved.count(peek(1).text)) {
        next();
        name += "." + next().text;
      }
      e = make(ExprKind::Ident, name, join(id.span, last_));
      if (at("(")) {
        throw Fail{peek().span, "user function call '" + name + "'", true};
      }
    } else if (at("(")) {
      const Span open = next().span;
      e = parse_expr();
      expect(")");
      e->span = join(open, last_);
    } else if (at("{")) {
      const Span open = next().span;
      ExprPtr first = parse_expr();
      if (accept("{")) {
        e = make(ExprKind::Replicate, "{{}}", open);
        e->args.push_back(std::move(first));
        do {
          e->args.push_back(parse_expr());
        } while (accept(","));
        expect("}");
      } else {
        e = make(ExprKind::Concat, "{}", open);
        e->args.push_back(std::move(first));
        while (accept(",")) e->args.push_back(parse_expr());
      }
      expect("}");
      e->span = join(open, last_);
    } else if (tk.kind == Tok::Ident && kUnsupportedBlocks.count(tk.text)) {
      throw Fail{tk.span, "'" + tk.text + "' is outside the supported subset", true};
    } else {
      fail("expected an expression");
    }
    while (at("[")) e = parse_select(std::move(e));
    return e;
  }

  ExprPtr parse_select(ExprPtr base) {
    expect("[");
    ExprPtr a = parse_expr();
    std::string kind = "[]";
    ExprPtr b;
    if (accept(":")) {
      kind = "[:]";
    } else if (accept("+:")) {
      kind = "[+:]";
    } else if (accept("-:")) {
      kind = "[-:]";
    }
    if (kind != "[]") b = parse_expr();
    expect("]");
    auto e = make(ExprKind::Select, kind, join(base->span, last_));
    e->args.push_back(std::move(base));
    e->args.push_back(std::move(a));
    if (b) e->args.push_back(std::move(b));
    return e;
  }

  ExprPtr parse_lvalue() {
    if (at("{")) return parse_primary();
    if (!at_ident()) fail("expected an assignment target");
    return parse_primary();
  }

  // -- statements
  StmtPtr make_stmt(StmtKind k, const Span& start) {
    auto s = std::make_unique<Stmt>();
    s->kind = k;
    s->span = start;
    return s;
  }

  StmtPtr parse_stmt() {
    const Token& tk = peek();
    const Span start = tk.span;
    if (accept(";")) {
      auto s = make_stmt(StmtKind::Null, start);
      return s;
    }
    if (tk.kind == Tok::Ident) {
      if (tk.text == "begin") {
        next();
        auto s = make_stmt(StmtKind::Block, start);
        if (accept(":")) s->label = expect_ident("block name");
        while (!at("end")) {
          if (at_end() || at("endmodule")) fail("expected 'end'");
          s->body.push_back(parse_stmt());
        }
        next();
        if (accept(":")) expect_ident("block name");
        s->span = join(start, last_);
        return s;
      }
      if (tk.text == "if") {
        next();
        auto s = make_stmt(StmtKind::If, start);
        expect("(");
        s->cond = parse_expr();
        expect(")");
        s->head = join(start, last_);
        s->then_s = parse_stmt();
        if (accept("else")) s->else_s = parse_stmt();
        s->span = join(start, last_);
        return s;
      }
      if (tk.text == "unique" || tk.text == "unique0" || tk.text == "priority" || tk.text == "case" ||
          tk.text == "casez" || tk.text == "casex") {
        auto s = make_stmt(StmtKind::Case, start);
        if (tk.text == "unique" || tk.text == "unique0" || tk.text == "priority") {
          s->qualifier = next().text;
          if (at("if")) throw Fail{peek().span, "qualified if", true};
        }
        if (!(at("case") || at("casez") || at("casex"))) fail("expected 'case'");
        s->label = next().text;
        expect("(");
        s->cond = parse_expr();
        expect(")");
        s->head = join(start, last_);
        while (!at("endcase")) {
          if (at_end() || at("endmodule")) fail("expected 'endcase'");
          CaseArm arm;
          arm.span = peek().span;
          if (accept("default")) {
            arm.is_default = true;
            accept(":");
          } else {
            do {
              arm.labels.push_back(parse_expr());
            } while (accept(","));
            expect(":");
          }
          arm.body = parse_stmt();
          arm.span = join(arm.span, last_);
          s->arms.push_back(std::move(arm));
        }
        next();
        s->span = join(start, last_);
        return s;
      }
      static const std::set<std::string> loops = {"for", "while", "repeat", "forever", "do", "fork", "wait",
                                                   "disable", "return", "break", "continue", "foreach"};
      if (loops.count(tk.text)) throw Fail{tk.span, "'" + tk.text + "' statement", true};
    }
    auto s = make_stmt(StmtKind::Assign, start);
    s->cond = parse_lvalue();
    if (at("=") || at("<=")) {
      s->label = next().text;
    } else {
      fail("expected '=' or '<='");
    }
    s->rhs = parse_expr();
    expect(";");
    s->span = join(start, last_);
    return s;
  }

  // -- module items
  void parse_range_list(std::vector<Range>& out) {
    while (at("[")) {
      next();
      Range r;
      r.msb = parse_expr();
      if (accept(":")) r.lsb = parse_expr();
      expect("]");
      out.push_back(std::move(r));
    }
  }

  // Leading keywords of a declaration: [direction] [parameter|localparam] [type] [signed] [ranges].
  void parse_decl_head(Item& it) {
    std::string kw;
    auto add = [&](const std::string& w) { kw += kw.empty() ? w : " " + w; };
    if (at("parameter") || at("localparam")) add(next().text);
    if (peek().kind == Tok::Ident && kDirections.count(peek().text)) add(next().text);
    if (peek().kind == Tok::Ident && kTypeWords.count(peek().text)) add(next().text);
    if (accept("signed")) it.is_signed = true;
    accept("unsigned");
    parse_range_list(it.packed);
    it.keyword = kw;
  }

  Declarator parse_declarator(bool allow_init) {
    Declarator d;
    d.span = peek().span;
    d.name = expect_ident("a name");
    parse_range_list(d.unpacked);
    if (allow_init && accept("=")) d.init = parse_expr();
    d.span = join(d.span, last_);
    return d;
  }

  Item parse_decl() {
    Item it;
    it.kind = ItemKind::Decl;
    it.span = peek().span;
    parse_decl_head(it);
    do {
      it.decls.push_back(parse_declarator(true));
    } while (accept(","));
    expect(";");
    it.span = join(it.span, last_);
    return it;
  }

  std::vector<Connection> parse_connections() {
    std::vector<Connection> out;
    expect("(");
    if (accept(")")) return out;
    do {
      Connection c;
      if (accept(".")) {
        if (accept("*")) throw Fail{last_, "wildcard port connection", true};
        c.port = expect_ident("a port name");
        if (accept("(")) {
          if (!at(")")) c.expr = parse_expr();
          expect(")");
        } else {
          c.implicit = true;
        }
      } else {
        c.expr = parse_expr();
      }
      out.push_back(std::move(c));
    } while (accept(","));
    expect(")");
    return out;
  }

  Item parse_item() {
    const Token& tk = peek();
    const Span start = tk.span;
    if (tk.kind == Tok::Ident) {
      const std::string& w = tk.text;
      if (kDirections.count(w) || kTypeWords.count(w) || w == "parameter" || w == "localparam") return parse_decl();
      if (w == "assign") {
        next();
        Item it;
        it.kind = ItemKind::Assign;
        do {
          ExprPtr lhs = parse_lvalue();
          expect("=");
          it.assigns.emplace_back(std::move(lhs), parse_expr());
        } while (accept(","));
        expect(";");
        it.span = join(start, last_);
        return it;
      }
      if (w == "always" || w == "always_comb" || w == "always_ff" || w == "always_latch" || w == "initial") {
        Item it;
        it.kind = ItemKind::Always;
        it.keyword = next().text;
        if (accept("@")) {
          if (accept("*")) {
            it.star = true;
          } else {
            expect("(");
            if (accept("*")) {
              it.star = true;
            } else {
              do {
                Event ev;
                if (at("posedge") || at("negedge")) ev.edge = next().text;
                ev.signal = parse_expr();
                it.events.push_back(std::move(ev));
              } while (accept("or") || accept(","));
            }
            expect(")");
          }
        } else if (it.keyword == "always" || it.keyword == "always_ff") {
          fail("expected '@' sensitivity");
        }
        it.body = parse_stmt();
        it.span = join(start, last_);
        return it;
      }
      if (w == "genvar") throw Fail{tk.span, "'genvar' declaration", true};
      if (at_ident() && (peek(1).kind == Tok::Ident || (peek(1).kind == Tok::Op && peek(1).text == "#"))) {
        Item it;
        it.kind = ItemKind::Instance;
        it.module_name = next().text;
        if (accept("#")) it.params = parse_connections();
        it.instance_name = expect_ident("an instance name");
        if (at("[")) throw Fail{peek().span, "instance array", true};
        it.ports = parse_connections();
        expect(";");
        it.span = join(start, last_);
        return it;
      }
    }
    fail("expected a module item");
  }

  Module parse_module() {
    Module m;
    const Span start = next().span;
    m.name = expect_ident("a module name");
    if (accept("#")) {
      expect("(");
      if (!at(")")) {
        do {
          Item it;
          it.kind = ItemKind::Decl;
          it.span = peek().span;
          const bool explicit_kw = at("parameter") || at("localparam");
          if (explicit_kw || (peek().kind == Tok::Ident && kTypeWords.count(peek().text))) {
            parse_decl_head(it);
          } else if (!m.header_params.empty()) {
            // continuation of the previous group
            m.header_params.back().decls.push_back(parse_declarator(true));
            continue;
          }
          if (it.keyword.rfind("parameter", 0) != 0 && it.keyword.rfind("localparam", 0) != 0)
            it.keyword = it.keyword.empty() ? "parameter" : "parameter " + it.keyword;
          it.decls.push_back(parse_declarator(true));
          it.span = join(it.span, last_);
          m.header_params.push_back(std::move(it));
        } while (accept(","));
      }
      expect(")");
    }
    if (accept("(")) {
      m.has_port_list = true;
      if (!at(")")) {
        const bool ansi = peek().kind == Tok::Ident && (kDirections.count(peek().text) || kTypeWords.count(peek().text));
        do {
          if (!ansi) {
            m.port_names.push_back(expect_ident("a port name"));
            continue;
          }
          if (peek().kind == Tok::Ident && (kDirections.count(peek().text) || kTypeWords.count(peek().text))) {
            Item it;
            it.kind = ItemKind::Decl;
            it.span = peek().span;
            parse_decl_head(it);
            it.decls.push_back(parse_declarator(false));
            it.span = join(it.span, last_);
            m.ansi_ports.push_back(std::move(it));
          } else {
            m.ansi_ports.back().decls.push_back(parse_declarator(false));
          }
        } while (accept(","));
      }
      expect(")");
    }
    expect(";");
    while (!at("endmodule")) {
      if (at_end()) throw Fail{peek().span, "missing 'endmodule' for module '" + m.name + "'"};
      if (accept(";")) continue;
      const Token& tk = peek();
      if (tk.kind == Tok::Ident && tk.text == "module") throw Fail{tk.span, "nested module"};
      if (tk.kind == Tok::Ident && kUnsupportedBlocks.count(tk.text)) {
        skip_unsupported_block();
        continue;
      }
      try {
        m.items.push_back(parse_item());
      } catch (const Fail& e) {
        record(e);
        recover_to(kItemStarts, true);
      }
    }
    next();
    if (accept(":")) expect_ident("a module name");
    m.span = join(start, last_);
    return m;
  }

  std::vector<Token> t_;
  std::size_t p_ = 0;
  Span last_;
  std::vector<SyntaxError>& errors_;
};

// ---------------------------------------------------------------- printer

int expr_prec(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Ternary: return 0;
    case ExprKind::Binary: return binary_prec(e.text);
    case ExprKind::Unary: return kUnaryPrec;
    default: return kPrimaryPrec;
  }
}

void print_expr_to(std::string& o, const Expr& e, int min_prec) {
  const bool paren = expr_prec(e) < min_prec;
  if (paren) o += '(';
  switch (e.kind) {
    case ExprKind::Ident:
    case ExprKind::Number:
      o += e.text;
      break;
    case ExprKind::Unary:
      o += e.text;
      print_expr_to(o, *e.args[0], kPrimaryPrec);
      break;
    case ExprKind::Binary: {
      const int p = binary_prec(e.text);
      const bool right_assoc = e.text == "**";
      print_expr_to(o, *e.args[0], right_assoc ? p + 1 : p);
      o += " " + e.text + " ";
      print_expr_to(o, *e.args[1], right_assoc ? p : p + 1);
      break;
    }
    case ExprKind::Ternary:
      print_expr_to(o, *e.args[0], 1);
      o += " ? ";
      print_expr_to(o, *e.args[1], 0);
      o += " : ";
      print_expr_to(o, *e.args[2], 0);
      break;
    case ExprKind::Select: {
      print_expr_to(o, *e.args[0], kPrimaryPrec);
      o += '[';
      print_expr_to(o, *e.args[1], 0);
      if (e.args.size() > 2) {
        o += e.text == "[:]" ? ":" : e.text == "[+:]" ? "+:" : "-:";
        print_expr_to(o, *e.args[2], 0);
      }
      o += ']';
      break;
    }
    case ExprKind::Concat:
      o += '{';
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) o += ", ";
        print_expr_to(o, *e.args[i], 0);
      }
      o += '}';
      break;
    case ExprKind::Replicate:
      o += '{';
      print_expr_to(o, *e.args[0], kPrimaryPrec);
      o += '{';
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) o += ", ";
        print_expr_to(o, *e.args[i], 0);
      }
      o += "}}";
      break;
    case ExprKind::Call:
      o += e.text;
      if (!e.args.empty()) {
        o += '(';
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          if (i) o += ", ";
          print_expr_to(o, *e.args[i], 0);
        }
        o += ')';
      }
      break;
  }
  if (paren) o += ')';
}

class Printer {
 public:
  std::string out;

  void file(const SvFile& f) {
    for (std::size_t i = 0; i < f.modules.size(); ++i) {
      if (i) out += '\n';
      module(f.modules[i]);
    }
  }

 private:
  void indent(int n) { out.append(static_cast<std::size_t>(2 * n), ' '); }
  void expr(const Expr& e) { print_expr_to(out, e, 0); }

  void ranges(const std::vector<Range>& rs) {
    for (const auto& r : rs) {
      out += '[';
      expr(*r.msb);
      if (r.lsb) {
        out += ':';
        expr(*r.lsb);
      }
      out += ']';
    }
  }

  void decl(const Item& it, bool with_init) {
    out += it.keyword;
    if (it.is_signed) out += it.keyword.empty() ? "signed" : " signed";
    if (!it.packed.empty()) {
      if (!it.keyword.empty() || it.is_signed) out += ' ';
      ranges(it.packed);
    }
    for (std::size_t i = 0; i < it.decls.size(); ++i) {
      out += i ? ", " : " ";
      const auto& d = it.decls[i];
      out += d.name;
      if (!d.unpacked.empty()) {
        out += ' ';
        ranges(d.unpacked);
      }
      if (with_init && d.init) {
        out += " = ";
        expr(*d.init);
      }
    }
  }

  void connections(const std::vector<Connection>& cs) {
    out += '(';
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (i) out += ", ";
      const auto& c = cs[i];
      if (!c.port.empty()) {
        out += "." + c.port;
        if (c.implicit) continue;
        out += '(';
        if (c.expr) expr(*c.expr);
        out += ')';
      } else {
        expr(*c.expr);
      }
    }
    out += ')';
  }

  void module(const Module& m) {
    out += "module " + m.name;
    if (!m.header_params.empty()) {
      out += " #(";
      for (std::size_t i = 0; i < m.header_params.size(); ++i) {
        if (i) out += ", ";
        decl(m.header_params[i], true);
      }
      out += ')';
    }
    if (m.has_port_list) {
      out += " (";
      if (!m.port_names.empty()) {
        for (std::size_t i = 0; i < m.port_names.size(); ++i) out += (i ? ", " : "") + m.port_names[i];
      } else {
        for (std::size_t i = 0; i < m.ansi_ports.size(); ++i) {
          if (i) out += ", ";
          decl(m.ansi_ports[i], false);
        }
      }
      out += ')';
    }
    out += ";\n";
    for (const auto& it : m.items) item(it);
    out += "endmodule\n";
  }

  void item(const Item& it) {
    indent(1);
    switch (it.kind) {
      case ItemKind::Decl:
        decl(it, true);
        out += ";\n";
        break;
      case ItemKind::Assign:
        out += "assign ";
        for (std::size_t i = 0; i < it.assigns.size(); ++i) {
          if (i) out += ", ";
          expr(*it.assigns[i].first);
          out += " = ";
          expr(*it.assigns[i].second);
        }
        out += ";\n";
        break;
      case ItemKind::Always:
        out += it.keyword;
        if (it.star) {
          out += " @(*)";
        } else if (!it.events.empty()) {
          out += " @(";
          for (std::size_t i = 0; i < it.events.size(); ++i) {
            if (i) out += " or ";
            if (!it.events[i].edge.empty()) out += it.events[i].edge + " ";
            expr(*it.events[i].signal);
          }
          out += ')';
        }
        out += '\n';
        stmt(*it.body, 2);
        break;
      case ItemKind::Instance:
        out += it.module_name;
        if (!it.params.empty()) {
          out += " #";
          connections(it.params);
        }
        out += " " + it.instance_name + " ";
        connections(it.ports);
        out += ";\n";
        break;
    }
  }

  void stmt(const Stmt& s, int depth) {
    indent(depth);
    switch (s.kind) {
      case StmtKind::Null:
        out += ";\n";
        break;
      case StmtKind::Block:
        out += "begin";
        if (!s.label.empty()) out += " : " + s.label;
        out += '\n';
        for (const auto& b : s.body) stmt(*b, depth + 1);
        indent(depth);
        out += "end\n";
        break;
      case StmtKind::If:
        out += "if (";
        expr(*s.cond);
        out += ")\n";
        stmt(*s.then_s, depth + 1);
        if (s.else_s) {
          indent(depth);
          out += "else\n";
          stmt(*s.else_s, depth + 1);
        }
        break;
      case StmtKind::Case:
        if (!s.qualifier.empty()) out += s.qualifier + " ";
        out += s.label + " (";
        expr(*s.cond);
        out += ")\n";
        for (const auto& arm : s.arms) {
          indent(depth + 1);
          if (arm.is_default) {
            out += "default";
          } else {
            for (std::size_t i = 0; i < arm.labels.size(); ++i) {
              if (i) out += ", ";
              expr(*arm.labels[i]);
            }
          }
          out += ":\n";
          stmt(*arm.body, depth + 2);
        }
        indent(depth);
        out += "endcase\n";
        break;
      case StmtKind::Assign:
        expr(*s.cond);
        out += " " + s.label + " ";
        expr(*s.rhs);
        out += ";\n";
        break;
    }
  }
};

// ---------------------------------------------------------------- extraction

std::uint32_t fnv1a(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

class Extractor {
 public:
  Extractor(const Module& m, const ExtractOptions& opt, std::vector<CoverpointDesc>& out)
      : m_(m), opt_(opt), out_(out) {
    for (const auto& it : m.header_params)
      for (const auto& d : it.decls) params_.push_back(d.name);
    for (const auto& it : m.items)
      if (it.kind == ItemKind::Decl && it.is_param())
        for (const auto& d : it.decls) params_.push_back(d.name);
  }

  void run() {
    for (const auto& it : m_.header_params) decl(it);
    for (const auto& it : m_.ansi_ports) decl(it);
    for (const auto& it : m_.items) item(it);
  }

 private:
  void add(CoverKind kind, const Expr& cond, const Span& span, const std::string& extra = {}) {
    std::string printed = print_expr(cond) + extra;
    char digest[16];
    std::snprintf(digest, sizeof digest, "%08x", fnv1a(std::string(to_string(kind)) + ":" + printed));
    std::string name = m_.name;
    for (const auto& p : path_) name += "." + p;
    name += ".";
    name += digest;
    const int n = seen_[name]++;
    if (n) name += "~" + std::to_string(n);
    CoverpointDesc d;
    d.id = static_cast<int>(out_.size());
    d.hier_name = std::move(name);
    d.kind = kind;
    d.span = span;
    d.is_static = is_static(cond, params_);
    out_.push_back(std::move(d));
  }

  void expr(const Expr& e) {
    if (e.kind == ExprKind::Ternary) add(CoverKind::TernaryCond, *e.args[0], e.span);
    for (const auto& a : e.args) expr(*a);
  }

  void ranges(const std::vector<Range>& rs) {
    for (const auto& r : rs) {
      expr(*r.msb);
      if (r.lsb) expr(*r.lsb);
    }
  }

  void decl(const Item& it) {
    ranges(it.packed);
    for (const auto& d : it.decls) {
      path_.push_back(d.name);
      ranges(d.unpacked);
      if (d.init) expr(*d.init);
      path_.pop_back();
    }
  }

  void item(const Item& it) {
    switch (it.kind) {
      case ItemKind::Decl:
        decl(it);
        break;
      case ItemKind::Assign:
        path_.push_back("assign" + std::to_string(assign_n_++));
        for (const auto& [l, r] : it.assigns) {
          expr(*l);
          expr(*r);
        }
        path_.pop_back();
        break;
      case ItemKind::Always:
        path_.push_back(it.keyword + std::to_string(always_n_++));
        for (const auto& ev : it.events) expr(*ev.signal);
        stmt(*it.body);
        path_.pop_back();
        break;
      case ItemKind::Instance:
        path_.push_back(it.instance_name);
        for (const auto& c : it.params)
          if (c.expr) expr(*c.expr);
        for (const auto& c : it.ports)
          if (c.expr) expr(*c.expr);
        path_.pop_back();
        break;
    }
  }

  void stmt(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Null:
        break;
      case StmtKind::Block:
        if (!s.label.empty()) path_.push_back(s.label);
        for (const auto& b : s.body) stmt(*b);
        if (!s.label.empty()) path_.pop_back();
        break;
      case StmtKind::If:
        add(CoverKind::IfCond, *s.cond, s.head);
        expr(*s.cond);
        stmt(*s.then_s);
        if (s.else_s) stmt(*s.else_s);
        break;
      case StmtKind::Case:
        if (!opt_.case_per_arm) add(CoverKind::CaseSelect, *s.cond, s.head);
        expr(*s.cond);
        for (const auto& arm : s.arms) {
          if (opt_.case_per_arm && !arm.is_default) {
            std::string labels;
            for (const auto& l : arm.labels) labels += "|" + print_expr(*l);
            add(CoverKind::CaseSelect, *s.cond, arm.span, " ==" + labels);
          }
          for (const auto& l : arm.labels) expr(*l);
          stmt(*arm.body);
        }
        break;
      case StmtKind::Assign:
        expr(*s.cond);
        expr(*s.rhs);
        break;
    }
  }

  const Module& m_;
  const ExtractOptions& opt_;
  std::vector<CoverpointDesc>& out_;
  std::vector<std::string> params_;
  std::vector<std::string> path_;
  std::map<std::string, int> seen_;
  int assign_n_ = 0, always_n_ = 0;
};

}  // namespace

ParseResult parse(std::string_view source, const std::string& file) {
  ParseResult r;
  r.ast.file = file;
  std::vector<LexError> lex_errors;
  auto toks = Lexer(source, file).run(lex_errors);
  for (auto& e : lex_errors) r.errors.push_back({e.span, e.message, false});
  Parser(std::move(toks), r.errors).parse_file(r.ast);
  std::stable_sort(r.errors.begin(), r.errors.end(),
                   [](const SyntaxError& a, const SyntaxError& b) { return a.span.begin < b.span.begin; });
  return r;
}

std::string print(const SvFile& f) {
  Printer p;
  p.file(f);
  return p.out;
}

std::string print_expr(const Expr& e) {
  std::string o;
  print_expr_to(o, e, 0);
  return o;
}

bool is_static(const Expr& e, const std::vector<std::string>& params) {
  switch (e.kind) {
    case ExprKind::Number:
      return true;
    case ExprKind::Ident:
      return std::find(params.begin(), params.end(), e.text) != params.end();
    default:
      for (const auto& a : e.args)
        if (!is_static(*a, params)) return false;
      return true;
  }
}

std::vector<CoverpointDesc> extract(const SvFile& f, const ExtractOptions& opt) {
  std::vector<CoverpointDesc> out;
  for (const auto& m : f.modules) Extractor(m, opt, out).run();
  return out;
}

std::vector<CoverpointDesc> select(std::vector<CoverpointDesc> all, bool include_static) {
  std::vector<CoverpointDesc> out;
  for (auto& d : all) {
    if (d.is_static && !include_static) continue;
    d.id = static_cast<int>(out.size());
    out.push_back(std::move(d));
  }
  return out;
}

std::string to_json(const std::vector<CoverpointDesc>& points) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& d : points) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["hier_name"] = d.hier_name;
    j["kind"] = to_string(d.kind);
    j["span"] = {{"file", d.span.file},   {"line", d.span.line},         {"col", d.span.col},
                 {"end_line", d.span.end_line}, {"end_col", d.span.end_col}};
    j["static"] = d.is_static;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::string to_text(const std::vector<CoverpointDesc>& points) {
  std::string o;
  for (const auto& d : points) {
    o += std::to_string(d.id) + " " + to_string(d.kind) + " " + d.hier_name + " " + d.span.to_string();
    if (d.is_static) o += " static";
    o += '\n';
  }
  return o;
}

}  // namespace sdemu::covergen
