#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sdemu/kernel.hpp"

namespace sdemu::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string program;  // .s source or image file
  kernel::KernelConfig kernel;
  bool coverage = true;
};

// Sets one key. Throws ConfigError for unknown keys or bad values.
void apply(RunConfig& cfg, const std::string& key, const std::string& value);

// "key = value" lines; '#' starts a comment.
void apply_text(RunConfig& cfg, const std::string& text);
void apply_file(RunConfig& cfg, const std::string& path);
// "key=value" override, as given on the command line.
void apply_override(RunConfig& cfg, const std::string& kv);

// Every recognised key with a one-line description, for help output.
const std::vector<std::pair<std::string, std::string>>& keys();

// Decodes \n, \t, \\ and \xHH escapes.
std::string unescape(const std::string& s);

}  // namespace sdemu::config
