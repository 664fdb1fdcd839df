#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "serpaudit/reach.hpp"

namespace serpaudit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;       // unexpected internal error
inline constexpr int kExitConfig = 2;        // bad config / flags / tables
inline constexpr int kExitInput = 3;         // unreadable or undecodable input
inline constexpr int kExitPrecondition = 4;  // analysis preconditions unmet

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Thresholds {
  double popularity = 0.70;
  int min_shared = 3;
  double distinctness = 3.5;
  double overrep_factor = 5.0;
  double language_share = 0.5;
  bool clique_mode = false;
};

struct RunConfig {
  std::string language_table;
  std::string category_table;
  std::string gazetteer;
  std::string reach_panel;
  std::string locale_patterns;
  std::string donor_blocklist;  // one donor_id per line
  Thresholds thresholds;
  bool duplicate_id_heuristic = true;
  DateWindow reach_window;
  std::uint64_t seed = 1;
};

RunConfig run_config_from_json(const std::string& text);  // throws ConfigError
std::string run_config_to_json(const RunConfig& config);

// Entry point behind the `serpaudit` binary. Relative table paths in the
// config resolve against the config file's directory.
int run_cli(int argc, const char* const* argv);

}  // namespace serpaudit::cli
