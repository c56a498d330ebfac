#ifndef FEWTREAT_CLI_APP_HPP
#define FEWTREAT_CLI_APP_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fewtreat {

// Parsed command-line / config-file options. Flags win over file values;
// all randomness flows from `seed` (a random one is drawn and announced when
// absent).
struct RunConfig {
  std::string command;  // analyze | simulate | reproduce
  std::string input_path;
  std::vector<std::string> methods;
  double null_value = 0.0;
  double alpha = 0.05;
  std::size_t budget = 10000;
  std::optional<std::uint64_t> seed;
  std::size_t n_partitions = 100;
  std::optional<std::size_t> reps;
  std::size_t threads = 0;
  std::string output_path;     // empty: stdout
  std::string format = "json";  // csv | json
  std::string target;          // reproduce: table1 | figure1
};

// Exit codes: 0 success, 1 reproduction tolerances violated, 2 data or
// configuration error, 3 method error.
int cmd_analyze(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_reproduce(const RunConfig& config);

int run_command(const RunConfig& config);

}  // namespace fewtreat

#endif  // FEWTREAT_CLI_APP_HPP
