// sdemu command-line driver.
//
// Exit codes: 0 ok, 1 config error, 2 lockstep divergence, 3 parse error,
// 4 watchdog, 5 DUT panic.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <sys/socket.h>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdemu/assembler.hpp"
#include "sdemu/config.hpp"
#include "sdemu/covergen.hpp"
#include "sdemu/runner.hpp"

using namespace sdemu;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitParse = 3;

struct RunArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string program;
  std::string out;
  std::string console;
  // Shorthand flags; applied after the file and --set.
  std::optional<std::uint64_t> interval;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> fifo_depth;
  std::optional<std::string> mutation;
  std::optional<std::string> transport;
  std::optional<std::string> stdin_text;
  bool catchup = false;
  bool randomize_host = false;
};

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("program", a.program, "program (.s source or image); overrides the 'program' key");
  sub->add_option("-c,--config", a.config_file, "key = value config file");
  sub->add_option("--set", a.sets, "override a config key (key=value), repeatable");
  sub->add_option("-o,--out", a.out, "write the report here instead of stdout");
  sub->add_option("--console", a.console, "write DUT console output here (default: stderr)");
  sub->add_option("--interval", a.interval, "profiler sampling interval in DUT cycles");
  sub->add_option("--seed", a.seed, "host randomisation seed");
  sub->add_option("--fifo-depth", a.fifo_depth, "P-Shell FIFO depth in words");
  sub->add_option("--mutation", a.mutation, "DUT fault injection");
  sub->add_option("--transport", a.transport, "direct | bridged");
  sub->add_option("--stdin", a.stdin_text, "getchar input script (escapes allowed)");
  sub->add_flag("--catchup", a.catchup, "enable the EX2 catch-up ALU");
  sub->add_flag("--random-host", a.randomize_host, "adversarial host cost model derived from --seed");
}

config::RunConfig build_config(const RunArgs& a) {
  config::RunConfig cfg;
  if (!a.config_file.empty()) config::apply_file(cfg, a.config_file);
  for (const auto& s : a.sets) config::apply_override(cfg, s);
  if (a.randomize_host) {
    cfg.kernel.host = kernel::HostCostModel::randomized(a.seed.value_or(cfg.kernel.host.seed));
  }
  if (a.interval) config::apply(cfg, "interval", std::to_string(*a.interval));
  if (a.seed) config::apply(cfg, "seed", std::to_string(*a.seed));
  if (a.fifo_depth) config::apply(cfg, "fifo_depth", std::to_string(*a.fifo_depth));
  if (a.mutation) config::apply(cfg, "mutation", *a.mutation);
  if (a.transport) config::apply(cfg, "transport", *a.transport);
  if (a.stdin_text) config::apply(cfg, "stdin", *a.stdin_text);
  if (a.catchup) config::apply(cfg, "catchup", "1");
  if (!a.program.empty()) cfg.program = a.program;
  if (cfg.program.empty()) throw config::ConfigError("no program given");
  // Surface bad parameter combinations as config errors before running.
  try {
    cfg.kernel.pipeline.validate();
    cfg.kernel.dram.validate();
    cfg.kernel.host.validate();
    (void)pshell::AddressMap(kernel::bound_shell_config(cfg.kernel.shell));
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(e.what());
  }
  return cfg;
}

ProgramImage load(const config::RunConfig& cfg) {
  try {
    return assembler::load_program(cfg.program);
  } catch (const ImageError& e) {
    throw config::ConfigError(std::string("program: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw config::ConfigError("cannot write " + path);
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

void emit_console(const RunArgs& a, const std::string& out) {
  if (a.console.empty()) {
    std::cerr << out;
  } else {
    write_text(a.console, out);
  }
}

int finish(const runner::Result& r) {
  if (!r.watchdog.empty()) std::cerr << r.watchdog << '\n';
  if (r.panicked()) std::cerr << "DUT panic: " << r.summary.panic << '\n';
  return r.exit_status();
}

std::string hex(Word w) {
  char b[16];
  std::snprintf(b, sizeof b, "0x%08x", w);
  return b;
}

int cmd_asm(const std::string& in, const std::string& out) {
  std::ifstream f(in);
  if (!f) throw config::ConfigError("cannot open " + in);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    write_text(out, assembler::assemble(ss.str()).to_text());
  } catch (const assembler::AsmError& e) {
    std::cerr << in << ": " << e.what() << '\n';
    return kExitParse;
  }
  return kExitOk;
}

int cmd_run(const RunArgs& a) {
  const auto cfg = build_config(a);
  const auto r = runner::run(cfg.kernel, load(cfg));
  emit_console(a, r.output);
  write_text(a.out, r.summary.to_json());
  return finish(r);
}

int cmd_profile(const RunArgs& a, const std::string& dir) {
  auto cfg = build_config(a);
  if (cfg.kernel.sample_interval == 0) cfg.kernel.sample_interval = 1;
  const auto r = runner::run(cfg.kernel, load(cfg));
  emit_console(a, r.output);
  const auto& agg = *r.profile;
  profiler::SlowdownReport slow{cfg.kernel.sample_interval, r.summary.host_ticks, r.summary.dut_cycles};
  fs::create_directories(dir);
  write_text((fs::path(dir) / "stall_stack.csv").string(), profiler::stall_stack_csv(agg.stack()));
  write_text((fs::path(dir) / "per_pc.csv").string(), profiler::per_pc_csv(agg.per_pc()));
  write_text((fs::path(dir) / "slowdown.json").string(), slow.to_json());
  write_text((fs::path(dir) / "summary.json").string(), r.summary.to_json());
  write_text(a.out, r.summary.to_json());
  return finish(r);
}

int cmd_verify(const RunArgs& a) {
  auto cfg = build_config(a);
  cfg.kernel.lockstep = true;
  const auto r = runner::run(cfg.kernel, load(cfg));
  emit_console(a, r.output);
  nlohmann::ordered_json j;
  j["verdict"] = r.divergence ? "divergence" : r.watchdog.empty() ? "clean" : "incomplete";
  j["compared"] = r.compared;
  if (r.divergence) j["divergence"] = nlohmann::ordered_json::parse(r.divergence->to_json());
  write_text(a.out, j.dump(2));
  return finish(r);
}

int cmd_coverage(const RunArgs& a) {
  const auto cfg = build_config(a);
  const auto r = runner::run(cfg.kernel, load(cfg));
  emit_console(a, r.output);
  nlohmann::ordered_json j;
  j["covered"] = r.covered;
  j["total"] = r.cover_total;
  auto words = nlohmann::ordered_json::array();
  for (Word w : r.cover_words) words.push_back(hex(w));
  j["bitmap"] = words;
  auto pts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dut::kNumCoverpoints; ++i) {
    const bool hit = (r.cover_words[i / 32] >> (i % 32)) & 1u;
    pts.push_back({{"id", i}, {"name", dut::kCoverpointNames[i]}, {"covered", hit}});
  }
  j["points"] = pts;
  write_text(a.out, j.dump(2));
  return finish(r);
}

int cmd_covergen(const std::vector<std::string>& files, const std::string& format, bool include_static,
                 bool per_arm, const std::string& out) {
  std::vector<covergen::CoverpointDesc> all;
  bool errors = false;
  for (const auto& path : files) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config::ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const auto pr = covergen::parse(ss.str(), path);
    for (const auto& e : pr.errors) std::cerr << e.to_string() << '\n';
    errors |= !pr.ok();
    auto pts = covergen::extract(pr.ast, {per_arm});
    all.insert(all.end(), std::make_move_iterator(pts.begin()), std::make_move_iterator(pts.end()));
  }
  const auto shown = covergen::select(std::move(all), include_static);
  write_text(out, format == "text" ? covergen::to_text(shown) : covergen::to_json(shown));
  return errors ? kExitParse : kExitOk;
}

std::pair<std::string, std::uint16_t> split_host(const std::string& s) {
  const auto c = s.rfind(':');
  if (c == std::string::npos) return {"127.0.0.1", static_cast<std::uint16_t>(std::stoul(s))};
  return {s.substr(0, c), static_cast<std::uint16_t>(std::stoul(s.substr(c + 1)))};
}

// Runs the program while exposing the P-Shell over the wire protocol on a
// TCP port. Remote requests are applied between host ticks.
int cmd_serve(const RunArgs& a, std::uint16_t port, bool linger) {
  const auto cfg = build_config(a);
  const auto image = load(cfg);
  kernel::Kernel k(cfg.kernel, image);
  const int lfd = transport::tcp_listen(port);
  std::cerr << "listening on 127.0.0.1:" << transport::local_port(lfd) << std::endl;
  std::atomic<bool> client_done{false};
  std::thread pump([&] {
    try {
      transport::FdStream conn(transport::tcp_accept(lfd));
      transport::MailboxPort mp(k.mailbox());
      const auto st = transport::bridge_pump(conn, conn, mp);
      std::cerr << "client closed: " << st.requests << " requests, " << st.framing_errors << " framing errors\n";
    } catch (const std::exception& e) {
      std::cerr << "serve: " << e.what() << '\n';
    }
    client_done = true;
  });
  int rc = kExitOk;
  try {
    while (!k.pipeline().halted()) {
      k.tick();
      if (k.host_tick() >= k.config().watchdog_ticks) throw kernel::WatchdogError("watchdog: host tick budget exhausted");
    }
    k.drain();
  } catch (const kernel::WatchdogError& e) {
    std::cerr << e.what() << '\n';
    rc = 4;
  }
  emit_console(a, k.host().output());
  write_text(a.out, k.summary().to_json());
  transport::DirectPort direct(k.shell());
  while (linger && !client_done) {
    k.mailbox().drain(direct);
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  k.mailbox().close();
  ::shutdown(lfd, 2);
  ::close(lfd);
  pump.detach();
  if (rc == kExitOk && !k.summary().panic.empty()) rc = 5;
  return rc;
}

// mmio --connect host:port r ADDR | w ADDR DATA ...
int cmd_mmio(const std::string& target, const std::vector<std::string>& ops) {
  const auto [host, port] = split_host(target);
  transport::FdStream s(transport::tcp_connect(host, port));
  auto num = [](const std::string& t) { return static_cast<Word>(std::stoul(t, nullptr, 0)); };
  for (std::size_t i = 0; i < ops.size();) {
    const std::string& op = ops[i];
    if ((op == "r" || op == "read") && i + 1 < ops.size()) {
      const Word addr = num(ops[i + 1]);
      std::cout << hex(addr) << " = " << hex(*transport::transact(s, transport::read32(addr))) << '\n';
      i += 2;
    } else if ((op == "w" || op == "write") && i + 2 < ops.size()) {
      transport::transact(s, transport::write32(num(ops[i + 1]), num(ops[i + 2])));
      i += 3;
    } else {
      throw config::ConfigError("mmio: expected 'r ADDR' or 'w ADDR DATA' at '" + op + "'");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdemu: clock-gated co-emulation of a pipelined RISC-V DUT"};
  app.require_subcommand(1);

  std::string asm_in, asm_out;
  auto* s_asm = app.add_subcommand("asm", "assemble a .s file into an image");
  s_asm->add_option("input", asm_in, "assembly source")->required();
  s_asm->add_option("-o,--out", asm_out, "image output (default stdout)");

  RunArgs run_a, prof_a, ver_a, cov_a, serve_a;
  auto* s_run = app.add_subcommand("run", "run to halt and print the run summary");
  add_run_options(s_run, run_a);
  auto* s_prof = app.add_subcommand("profile", "sampled stall stack, per-PC table and slowdown");
  add_run_options(s_prof, prof_a);
  std::string prof_dir = "profile";
  s_prof->add_option("--dir", prof_dir, "report directory");
  auto* s_ver = app.add_subcommand("verify", "lockstep-check commits against the golden model");
  add_run_options(s_ver, ver_a);
  auto* s_cov = app.add_subcommand("coverage", "mux-toggle coverage bitmap");
  add_run_options(s_cov, cov_a);

  std::vector<std::string> cg_files;
  std::string cg_format = "json", cg_out;
  bool cg_static = false, cg_arm = false;
  auto* s_cg = app.add_subcommand("covergen", "extract coverpoints from SystemVerilog sources");
  s_cg->add_option("files", cg_files, "SystemVerilog files")->required();
  s_cg->add_option("--format", cg_format, "json | text")->check(CLI::IsMember({"json", "text"}));
  s_cg->add_flag("--include-static", cg_static, "also list static conditions");
  s_cg->add_flag("--per-arm", cg_arm, "one point per case arm instead of per case select");
  s_cg->add_option("-o,--out", cg_out, "output file (default stdout)");

  std::uint16_t listen_port = 0;
  bool linger = false;
  auto* s_serve = app.add_subcommand("serve", "run a program with its P-Shell reachable over TCP");
  add_run_options(s_serve, serve_a);
  s_serve->add_option("--listen", listen_port, "TCP port on 127.0.0.1 (0 picks one)");
  s_serve->add_flag("--linger", linger, "keep serving after the DUT halts until the client disconnects");

  std::string connect;
  std::vector<std::string> mmio_ops;
  auto* s_mmio = app.add_subcommand("mmio", "issue MMIO reads/writes to a serving P-Shell");
  s_mmio->add_option("--connect", connect, "host:port")->required();
  s_mmio->add_option("ops", mmio_ops, "r ADDR | w ADDR DATA, repeatable")->required();

  auto* s_keys = app.add_subcommand("keys", "list config keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*s_asm) return cmd_asm(asm_in, asm_out);
    if (*s_run) return cmd_run(run_a);
    if (*s_prof) return cmd_profile(prof_a, prof_dir);
    if (*s_ver) return cmd_verify(ver_a);
    if (*s_cov) return cmd_coverage(cov_a);
    if (*s_cg) return cmd_covergen(cg_files, cg_format, cg_static, cg_arm, cg_out);
    if (*s_serve) return cmd_serve(serve_a, listen_port, linger);
    if (*s_mmio) return cmd_mmio(connect, mmio_ops);
    if (*s_keys) {
      for (const auto& [k, h] : config::keys()) std::printf("%-22s %s\n", k.c_str(), h.c_str());
      return kExitOk;
    }
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const assembler::AsmError& e) {
    std::cerr << "assembly error: " << e.what() << '\n';
    return kExitParse;
  } catch (const transport::TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
