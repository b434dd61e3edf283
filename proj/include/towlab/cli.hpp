#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace towlab::cli {

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = "out";
  std::string format = "json";  // stdout rendering: json | csv
  int threads = 1;
  std::optional<std::uint64_t> seed_override;
};

// Executes one subcommand from its JSON config. Returns 0 when every
// requested check passes, 1 on check failures. Schema violations throw
// ConfigInvalid, which the binary maps to exit code 2.
int run(const RunConfig& rc);

}  // namespace towlab::cli
