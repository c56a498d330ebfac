// fewtreat: inference procedures for causal designs with few treated units.
//
//   fewtreat analyze   --input panel.csv --method ct-exact --null 0 --seed 7
//   fewtreat simulate  --input scenario.conf --reps 1000
//   fewtreat reproduce table1 --reps 100000
//
// Exit codes: 0 ok, 1 reproduction tolerances violated, 2 data/config error,
// 3 method error.

#include <string>

#include "CLI11.hpp"

#include "fewtreat/cli_app.hpp"
#include "fewtreat/mclab.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Inference with few treated units: analysis, simulation, reproduction"};
  app.require_subcommand(1);

  fewtreat::RunConfig config;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--alpha", config.alpha, "significance level / interval miscoverage");
    cmd->add_option("--budget", config.budget,
                    "reference-set budget for randomization tests (draws incl. identity)");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { config.seed = v; }, "master seed (random if omitted)");
    cmd->add_option("--partitions", config.n_partitions, "partitions for aggregate methods");
    cmd->add_option_function<std::size_t>(
        "--reps", [&](std::size_t v) { config.reps = v; }, "Monte Carlo replications");
    cmd->add_option("--threads", config.threads, "worker threads (0 = hardware)");
    cmd->add_option("--output", config.output_path, "output file (stdout if omitted)");
    cmd->add_option("--format", config.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  auto* analyze = app.add_subcommand("analyze", "run inference methods on a panel CSV");
  analyze->add_option("--input", config.input_path, "panel CSV (long format)")->required();
  analyze->add_option("--method", config.methods, "method identifier (repeatable)")
      ->required()
      ->take_all();
  analyze->add_option("--null", config.null_value, "null value c under test");
  add_common(analyze);

  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo rejection study");
  simulate->add_option("--input", config.input_path, "scenario file (key=value)");
  simulate->add_option("--method", config.methods, "method identifier (repeatable)")->take_all();
  add_common(simulate);

  auto* reproduce = app.add_subcommand("reproduce", "run a built-in study (table1, figure1)");
  reproduce->add_option("target", config.target, "table1 or figure1")->required();
  add_common(reproduce);

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) config.command = "analyze";
  if (simulate->parsed()) config.command = "simulate";
  if (reproduce->parsed()) config.command = "reproduce";
  return fewtreat::run_command(config);
}
