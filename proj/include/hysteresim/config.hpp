#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hysteresim/analysis.hpp"
#include "hysteresim/model.hpp"
#include "hysteresim/noise.hpp"

namespace hysteresim {

// One run configuration: a single JSON document, schema-validated with
// unknown keys rejected. Defaults fill every omitted field.
struct RunConfig {
  ModelParams params;
  double x0 = 0.0;
  double y0 = 0.0;
  std::optional<double> p0;
  std::optional<double> r0;
  std::int64_t horizon = 1000;
  NoiseSpec noise;
  std::optional<double> lambda;  // Lyapunov mixing weight override

  double tol_distance = 1e-8;
  double tol_residual = 1e-10;

  // verify-bounds batch; seed_count expands against the (possibly
  // overridden) run seed at execution time
  std::vector<double> bounds_rhos;
  std::vector<std::uint64_t> bounds_seeds;
  std::uint64_t bounds_seed_count = 0;
  std::int64_t bounds_horizon = 50000;
  double bounds_window_fraction = 0.2;

  // pi-invert
  PiOperator pi_operator;
  bool pi_operator_given = false;
  std::vector<double> pi_input_x;  // forward input; v is computed
  std::vector<double> pi_input_v;  // alternatively, invert a given output

  // oracle-minvar
  std::vector<double> minvar_v;
  double minvar_sigma = 0.0;
  double minvar_r0 = 0.0;
  int minvar_grid = 21;
  std::size_t minvar_budget = std::size_t{1} << 22;

  SweepSpec sweep;
  bool sweep_given = false;

  std::string output_prefix = "run";
  std::string config_hash;  // FNV-1a of the raw config text, hex

  SystemState initial_state() const;
};

// Parses and fully validates a config. Throws ParseError if the file is
// missing or not JSON, ValidationError naming the offending key otherwise.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& source_name);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace hysteresim
