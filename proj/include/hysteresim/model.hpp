#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hysteresim/hysteresis.hpp"
#include "hysteresim/noise.hpp"

namespace hysteresim {

enum class Variant {
  representative,  // single play on inflation expectations, plain Taylor rule
  sticky_bank,     // representative expectations plus a play in the Taylor rule
  multi_agent,     // Prandtl-Ishlinskii aggregate expectations, plain Taylor rule
};

const char* variant_name(Variant v);

// Structural constants plus the hysteresis thresholds of one system.
struct ModelParams {
  double a1 = 0.0;
  double a2 = 1.0;
  double b1 = 0.5;
  double b2 = 1.0;
  double c1 = 2.0;
  double c2 = 0.5;
  double rho = 1.0;    // expectation threshold (representative / sticky bank)
  double sigma = 0.0;  // central-bank threshold (sticky bank; 0 disables)
  PiOperator agents;   // multi-agent expectation operator
  Variant variant = Variant::representative;

  int agent_count() const;
  // Throws ValidationError naming the offending field. Enforces
  // 0 <= a1 < 1, 0 < b1 < 1, a2, b2, c1, c2 > 0, rho >= 0, sigma >= 0 and,
  // for the multi-agent variant, the aggregate-expectation weight rules.
  void validate() const;
};

// One time slice of a trajectory. The stored quantity for each play is its
// stop value (inflation-expectation gap); play values are derived. The
// sticky policy rule additionally needs its play value bank_p = r_t - xi_t,
// which cannot be recovered from the other fields once the noise is gone.
struct SystemState {
  std::int64_t t = 0;
  double x = 0.0;  // inflation rate
  double y = 0.0;  // output gap
  double p = 0.0;  // aggregate inflation expectation
  double r = 0.0;  // interest rate
  double bank_p = 0.0;  // policy-rule play value (equals c1 x + c2 y unless sticky)
  std::vector<double> s_vec;  // per-agent stop values; size 1 unless multi-agent

  double stop() const { return x - p; }  // aggregate perception gap
};

struct StepInfo {
  int consistent_branches = 1;  // distinct per-step solutions found (>1 flags ambiguity)
};

// Builds and validates a t = 0 state.
//  - representative/sticky: p0 defaults to x0 (zero initial gap); requires
//    |x0 - p0| <= rho. r0 defaults to c1 x0 + c2 y0 + xi0 (plain rule) or to
//    the gap-free c1 x0 + c2 y0 (sticky); sticky requires
//    |r0 - c1 x0 - c2 y0| <= sigma.
//  - multi-agent: per-agent stops start at beta_i and p0 is the aggregate
//    expectation; passing p0 is rejected unless consistent.
SystemState make_initial_state(const ModelParams& params, double x0, double y0,
                               std::optional<double> p0, std::optional<double> r0,
                               const NoiseSlice& noise0);

// One implicit step, solved exactly by enumerating the saturation branches
// of the expectation operator (and, for the sticky bank, of the policy
// play); each branch is a linear solve followed by a consistency check
// against the branch's own region. If several distinct solutions are
// consistent, the one minimizing |x_t - x_{t-1}| is returned and `info`
// reports the count.
//
// The sticky rule is the play recursion on the Taylor stance,
//   r_t = c1 x_t + c2 y_t + Phi_sigma(bank_p_{t-1} - c1 x_t - c2 y_t) + xi_t,
// whose stuck branch freezes the rate itself, r_t = bank_p_{t-1} + xi_t.
SystemState step_representative(const SystemState& prev, const ModelParams& params,
                                const NoiseSlice& noise, StepInfo* info = nullptr);
SystemState step_sticky_bank(const SystemState& prev, const ModelParams& params,
                             const NoiseSlice& noise, StepInfo* info = nullptr);
SystemState step_multi_agent(const SystemState& prev, const ModelParams& params,
                             const NoiseSlice& noise, StepInfo* info = nullptr);

// Dispatch on params.variant.
SystemState step(const SystemState& prev, const ModelParams& params, const NoiseSlice& noise,
                 StepInfo* info = nullptr);

// Largest absolute residual of the defining equations when `next` is
// substituted back as the step from `prev` under `noise`.
double step_residual(const SystemState& prev, const SystemState& next, const ModelParams& params,
                     const NoiseSlice& noise);

// Determinant of the local linearization at an interior equilibrium of the
// sticky-bank system with rho = 0:  (1-a1)(1-b1) / (1-b1-a2 b2).
// Values above 1 mean those equilibria are unstable. Throws Degenerate when
// the denominator vanishes.
double linearization_determinant(const ModelParams& params);

struct Trajectory {
  ModelParams params;
  std::uint64_t seed = 0;
  std::vector<SystemState> states;   // index = t, 0..horizon
  std::vector<NoiseSlice> noise;     // noise[t] entered the step producing states[t]
  std::vector<int> branch_flags;     // consistent-branch counts; undefined (0) at t = 0

  std::int64_t horizon() const { return static_cast<std::int64_t>(states.size()) - 1; }
};

// Runs `horizon` steps from `init`. Noise is sampled per step from the spec;
// deterministic given (init, params, spec). Step failures are rethrown with
// the failing period attached.
Trajectory simulate(const SystemState& init, const ModelParams& params, const NoiseSpec& noise,
                    std::int64_t horizon);

}  // namespace hysteresim
