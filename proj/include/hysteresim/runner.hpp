#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hysteresim/config.hpp"

namespace hysteresim {

struct RunOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;     // overrides config seed
  std::optional<std::int64_t> horizon;   // overrides config horizon
  bool gnuplot = false;
};

// Exit codes: 0 success/pass, 1 verification failure, 2 config error.
int run_simulate(RunConfig cfg, const RunOptions& opt);
int run_equilibria(RunConfig cfg, const RunOptions& opt);
int run_verify_lyapunov(RunConfig cfg, const RunOptions& opt);
int run_verify_bounds(RunConfig cfg, const RunOptions& opt);
int run_pi_invert(RunConfig cfg, const RunOptions& opt);
int run_oracle_minvar(RunConfig cfg, const RunOptions& opt);
int run_sweep(RunConfig cfg, const RunOptions& opt);

// Loads the config, applies overrides and dispatches. Config problems exit
// with 2, verification failures with 1.
int dispatch(const std::string& subcommand, const RunOptions& opt);

}  // namespace hysteresim
