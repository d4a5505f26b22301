#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hysteresim/equilibria.hpp"
#include "hysteresim/lyapunov.hpp"
#include "hysteresim/model.hpp"
#include "hysteresim/noise.hpp"

namespace hysteresim {

// Finite-run surrogate for limsup: max over the final `window` entries.
// NaN entries (undefined diagnostics) are skipped.
double tail_limsup(std::span<const double> series, std::size_t window);

// Tail deviation estimates of one trajectory from the frozen-gap equilibrium
// family, |x_t - x*(s_t)| and friends, plus the energy tail.
struct TailStats {
  std::size_t window = 0;
  double x_dev = 0.0;
  double y_dev = 0.0;
  double p_dev = 0.0;
  double r_dev = 0.0;
  double w_tail = 0.0;
};

TailStats tail_stats(const Trajectory& traj, const LyapTrack& track, std::size_t window);

struct ConvergenceReport {
  std::string status;  // "pass", "fail", "out-of-hypothesis"
  double distance = 0.0;       // final Chebyshev distance to the equilibrium set
  double residual = 0.0;       // fixed-point residual of the final state
  double limit_u = 0.0;        // frozen gap of the reported limit
  std::vector<double> limit_stops;  // per-agent limit stops (multi-agent)
  bool pass() const { return status == "pass"; }
};

// Passes iff the final state sits within tol_distance of the attractor and
// is a fixed point of the noiseless step within tol_residual. Systems with
// c1 <= 1 fall outside the stability hypothesis and are reported as such.
ConvergenceReport verify_convergence(const Trajectory& traj, double tol_distance,
                                     double tol_residual);

struct BoundsRun {
  double rho = 0.0;
  std::uint64_t seed = 0;
  TailStats tails;
};

struct BoundsReport {
  std::string status;  // "pass", "fail", "out-of-hypothesis", "degenerate"
  double sigma = 0.0;
  double m = 0.0;
  double hat_sigma = 0.0;  // L' sigma + L'' m
  double Lp = 0.0;
  double Lpp = 0.0;
  double L1 = 0.0;  // composed certificate: x-tail <= L1 sigma + L2 m
  double L2 = 0.0;
  double lambda = 0.0;
  std::optional<double> mu_hat;
  std::optional<double> L_hat;
  double w_bound = 0.0;
  double x_bound = 0.0;  // also bounds the expectation deviation
  double y_bound = 0.0;
  double r_bound = 0.0;
  double rho_spread = 0.0;  // relative spread of per-rho mean x tails
  std::vector<BoundsRun> runs;
  bool pass() const { return status == "pass"; }
};

// Empirical certificate for the noise-robustness estimates: fits the decay
// constants over the whole batch with one shared mixing weight, converts the
// declared disturbance bounds into the h sup bound, and checks every
// measured tail against the implied bound chain. The fitted constants are
// batch-dependent empirical certificates, not proved constants.
BoundsReport verify_bounds(std::span<const Trajectory> batch, double m, double window_fraction);

struct SweepAxis {
  std::string param;  // one of a1 a2 b1 b2 c1 c2 rho sigma m x0 y0
  std::vector<double> values;
};

struct SweepCell {
  ModelParams params;
  NoiseSpec noise;
  double x0 = 0.0;
  double y0 = 0.0;
  std::optional<double> p0;
  std::optional<double> r0;
  std::int64_t horizon = 1000;
};

struct SweepSpec {
  SweepCell base;
  std::vector<SweepAxis> axes;
  double tol_distance = 1e-8;
  double tol_residual = 1e-10;
  double bounded_threshold = 1e6;
};

struct SweepRow {
  std::vector<double> coords;
  std::string classification;  // converged | bounded-nonconvergent | out-of-hypothesis | error
  double limit_u = 0.0;
  double distance = 0.0;
  double residual = 0.0;
  double tail_x = 0.0;
  std::string message;
};

// Runs every cell of the cartesian grid in row-major order of the axes.
// Cells are independent; results are ordered by cell index.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

}  // namespace hysteresim
