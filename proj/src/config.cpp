#include "sdemu/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sdemu::config {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  int base = 10;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    first += 2;
    base = 16;
  }
  auto [p, ec] = std::from_chars(first, last, out, base);
  if (ec != std::errc() || p != last || first == last) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

unsigned to_uint(const std::string& key, const std::string& v) {
  const auto x = to_u64(key, v);
  if (x > 0xffffffffull) throw ConfigError(key + ": value too large");
  return static_cast<unsigned>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string read_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Key {
  std::string help;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

#define U(field) [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_uint(k, v); }
#define U64(field) [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_u64(k, v); }
#define B(field) [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_bool(k, v); }

const std::map<std::string, Key>& table() {
  static const std::map<std::string, Key> t = {
      {"program", {"program path (.s source or image)", [](RunConfig& c, const std::string&, const std::string& v) { c.program = v; }}},
      {"catchup", {"enable the EX2 catch-up ALU", B(kernel.pipeline.catchup_enabled)}},
      {"predictor", {"static | bimodal", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "static") c.kernel.pipeline.predictor = dut::PredictorKind::StaticNotTaken;
         else if (v == "bimodal") c.kernel.pipeline.predictor = dut::PredictorKind::Bimodal;
         else throw ConfigError(k + ": expected static or bimodal");
       }}},
      {"predictor_entries", {"2-bit counter table size (power of two)", U(kernel.pipeline.predictor_entries)}},
      {"btb_size", {"branch target buffer entries (power of two)", U(kernel.pipeline.btb_size)}},
      {"icache_miss_latency", {"I$ cold-miss cycles, 0 for a perfect I$", U(kernel.pipeline.icache_miss_latency)}},
      {"icache_line_bytes", {"I$ line size", U(kernel.pipeline.icache_line_bytes)}},
      {"dram_base", {"loads/stores at or above this address use the DRAM model", U(kernel.pipeline.dram_base)}},
      {"perfect_dcache", {"treat every data access as a D$ hit", B(kernel.pipeline.perfect_dcache)}},
      {"mem_queue_depth", {"outstanding DRAM requests per port", U(kernel.pipeline.mem_queue_depth)}},
      {"mutation", {"fault injection: none, add-sub-swap, dropped-bypass, wrong-branch-polarity, jal-off-by-4, stale-load-data",
                    [](RunConfig& c, const std::string& k, const std::string& v) {
                      auto m = dut::mutation_from_string(v);
                      if (!m) throw ConfigError(k + ": unknown mutation '" + v + "'");
                      c.kernel.pipeline.mutation = *m;
                    }}},
      {"dram_base_latency", {"DRAM base latency in DUT cycles", U(kernel.dram.base_latency)}},
      {"dram_banks", {"DRAM bank count (power of two)", U(kernel.dram.bank_count)}},
      {"dram_bank_busy", {"DRAM bank busy window in DUT cycles", U(kernel.dram.bank_busy)}},
      {"dram_line_bytes", {"DRAM line size used for bank selection", U(kernel.dram.line_bytes)}},
      {"fifo_depth", {"P-Shell FIFO depth in words (power of two)", U(kernel.shell.fifo_depth)}},
      {"csrs_out", {"host-writes CSR count", U(kernel.shell.num_csrs_out)}},
      {"csrs_in", {"DUT-writes CSR count", U(kernel.shell.num_csrs_in)}},
      {"interval", {"profiler sampling interval, 0 disables profiling", U64(kernel.sample_interval)}},
      {"lockstep", {"verify commits against the golden model", B(kernel.lockstep)}},
      {"coverage", {"report mux-toggle coverage", B(coverage)}},
      {"stdin", {"getchar input script (escapes allowed)",
                 [](RunConfig& c, const std::string&, const std::string& v) { c.kernel.stdin_script = unescape(v); }}},
      {"stdin_file", {"getchar input script file",
                      [](RunConfig& c, const std::string&, const std::string& v) { c.kernel.stdin_script = read_all(v); }}},
      {"ticks_per_sample", {"host ticks to drain one profiler sample", U(kernel.host.ticks_per_sample)}},
      {"ticks_per_io", {"host ticks to service one timing request", U(kernel.host.ticks_per_io)}},
      {"ticks_idle", {"host ticks per DUT cycle while the host is idle", U(kernel.host.ticks_idle)}},
      {"ticks_per_commit", {"host ticks to drain one commit record", U(kernel.host.ticks_per_commit)}},
      {"ticks_per_char", {"host ticks to drain one output byte", U(kernel.host.ticks_per_char)}},
      {"host_jitter", {"extra random host ticks per job (0..n)", U(kernel.host.jitter)}},
      {"data_delay_min", {"min host ticks from latency programming to data arrival", U(kernel.host.data_delay_min)}},
      {"data_delay_max", {"max host ticks from latency programming to data arrival", U(kernel.host.data_delay_max)}},
      {"host_stall_permille", {"chance per host job slot of a stall burst", U(kernel.host.stall_permille)}},
      {"host_stall_max", {"longest host stall burst in ticks", U(kernel.host.stall_max)}},
      {"seed", {"host randomisation seed", U64(kernel.host.seed)}},
      {"transport", {"direct | bridged host transport", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "direct") c.kernel.transport = kernel::HostTransport::Direct;
         else if (v == "bridged") c.kernel.transport = kernel::HostTransport::Bridged;
         else throw ConfigError(k + ": expected direct or bridged");
       }}},
      {"watchdog_cycles", {"DUT cycle budget", U64(kernel.watchdog_cycles)}},
      {"watchdog_ticks", {"host tick budget, 0 derives it from watchdog_cycles", U64(kernel.watchdog_ticks)}},
  };
  return t;
}

#undef U
#undef U64
#undef B

}  // namespace

void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto it = table().find(key);
  if (it == table().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

void apply_text(RunConfig& cfg, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    try {
      apply(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
}

void apply_file(RunConfig& cfg, const std::string& path) { apply_text(cfg, read_all(path)); }

void apply_override(RunConfig& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
  apply(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

const std::vector<std::pair<std::string, std::string>>& keys() {
  static const auto v = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, e] : table()) out.emplace_back(k, e.help);
    return out;
  }();
  return v;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 >= s.size()) {
      out.push_back(s[i]);
      continue;
    }
    const char c = s[++i];
    switch (c) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '0': out.push_back('\0'); break;
      case '\\': out.push_back('\\'); break;
      case 'x':
        if (i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) && std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
          out.push_back(static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16)));
          i += 2;
          break;
        }
        throw ConfigError("bad \\x escape");
      default:
        out.push_back('\\');
        out.push_back(c);
    }
  }
  return out;
}

}  // namespace sdemu::config
