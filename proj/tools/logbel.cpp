#include <iostream>

#include "CLI11.hpp"
#include "logbel/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exact inference on causal trees and polytrees with logarithmic-time updates"};
  app.require_subcommand(1);

  std::string network, ops, strategy = "contract";
  auto* run = app.add_subcommand("run", "Replay an operation stream and print query results");
  run->add_option("--network", network, "Causal-tree or polytree JSON file")->required();
  run->add_option("--ops", ops, "Operation stream")->required();
  run->add_option("--strategy", strategy, "full, lazy, contract or polytree")->capture_default_str();

  logbel::VerifyOptions verify_opts;
  std::optional<std::size_t> corrupt;
  auto* verify = app.add_subcommand("verify", "Check contraction (and the polytree engine) against an oracle");
  verify->add_option("--network", verify_opts.network, "Causal-tree or polytree JSON file")->required();
  verify->add_option("--ops", verify_opts.ops, "Operation stream")->required();
  verify->add_option("--oracle", verify_opts.oracle, "brute or full")->capture_default_str();
  verify->add_option("--tol", verify_opts.tolerance, "Largest accepted absolute deviation")->capture_default_str();
  verify->add_option("--corrupt-slot", corrupt)->group("");

  logbel::BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "Count operations of full propagation and contraction");
  bench->add_option("--shape", bench_opts.shape, "chain, balanced or random")->capture_default_str();
  bench->add_option("--n", bench_opts.n, "Node counts")->required()->delimiter(',');
  bench->add_option("--k", bench_opts.k, "Domain size")->capture_default_str();
  bench->add_option("--cycles", bench_opts.cycles, "Update+query cycles per size")->capture_default_str();
  bench->add_option("--seed", bench_opts.seed, "Random seed")->capture_default_str();
  bench->add_option("--csv", bench_opts.csv, "Output CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*run) return logbel::cmd_run(network, ops, strategy, std::cout, std::cerr);
  if (*verify) {
    if (corrupt) verify_opts.corrupt_slot = *corrupt;
    return logbel::cmd_verify(verify_opts, std::cout, std::cerr);
  }
  return logbel::cmd_bench(bench_opts, std::cout, std::cerr);
}
