#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hysteresim/model.hpp"

namespace hysteresim {

// Constants of the reduced second-order form
//   grad2 x + A grad x + B grad s + C x_t + D s_t = h_t,   t >= 2.
struct LyapCoeffs {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
};

// A = (a1 + a2 c2)/(1-a1), B = b1/(1-b1),
// C = a2 b2 (c1-1)/((1-a1)(1-b1)), D = (b1 (a1 + a2 c2) + a2 b2)/((1-a1)(1-b1)).
// All four are positive exactly when the parameter constraints hold and c1 > 1.
LyapCoeffs reduced_coeffs(const ModelParams& params);

double q_of(double x, double s, const LyapCoeffs& co);

// Largest lambda keeping W = V1 + lambda V0 pointwise nonnegative:
// the quadratic form (C/2) a^2 + lambda a b + (1/2 + lambda A/(2C)) b^2 is
// positive semidefinite iff lambda^2 <= C + lambda A, so
// lambda_max = (A + sqrt(A^2 + 4C))/2. Half of it additionally guarantees
// W >= V1/2.
double lambda_max(const LyapCoeffs& co);

// Multi-agent admissibility: the nonnegativity root for the tilde
// functionals combined with the caps C + nu0 D, AC + nu0 (BC + AD), BC + AD.
double lambda_max_multi(const LyapCoeffs& co, const PiOperator& op);

// Per-period energy sample. V1, V0, W, h are defined from t = 2 on.
struct LyapSample {
  std::int64_t t = 0;
  double grad_x = 0.0;
  double grad_s = 0.0;  // aggregate perception gap difference
  double q = 0.0;
  double V1 = 0.0;
  double V0 = 0.0;
  double W = 0.0;
  double h = 0.0;
};

// Right-hand side h_t of the reduced equation, recovered from the trajectory
// and its noise log:
//   h_t = [(1-a1) grad eta + b2 (a2 (z_t - xi_t) + eps_t) + (a1 + a2 c2) eta_t]
//         / ((1-a1)(1-b1)),   z_t = c1 x_t + c2 y_t - r_t + xi_t.
// Entries for t < 2 are NaN.
std::vector<double> h_series(const Trajectory& traj);

// Coefficients of the sup bound |h_t| <= Lp * sigma + Lpp * m.
void hat_sigma_coeffs(const ModelParams& params, double* Lp, double* Lpp);

struct LyapTrack {
  LyapCoeffs coeffs;
  double lambda = 0.0;
  double lambda_cap = 0.0;  // admissibility bound used for the check
  bool multi = false;       // tilde functionals
  LyapSample first;         // t = 1 partial sample (V1/q/gradients only)
  std::vector<LyapSample> samples;  // t = 2 .. horizon
};

// Representative/sticky functionals:
//   V1 = (C (grad x)^2 + D (grad s)^2 + q^2)/2,  V0 = grad x q + A/(2C) q^2.
// Throws InadmissibleLambda unless 0 < lambda < lambda_max.
LyapTrack lyapunov_track(const Trajectory& traj, const LyapCoeffs& co, double lambda);

// Multi-agent tilde functionals:
//   V1 = ((C + nu0 D)(grad x)^2 + D sum nu_i (grad s_i)^2 + q^2)/2.
LyapTrack lyapunov_track_multi(const Trajectory& traj, const LyapCoeffs& co, double lambda);

// Smallest empirical F with
//   V0_t - V0_{t-1} + q_t^2/2 - h_t q_t <= F * denom_t
// over the trajectory, where denom is ((grad2 x)^2/2 + A (grad x)^2) for the
// representative family and ((grad2 x)^2/2 + (grad x)^2 + sum nu_i (grad s_i)^2)
// for the multi-agent one. Used only for the default-lambda safety margin.
double fit_F_grid(const Trajectory& traj, const LyapCoeffs& co);

// 0.5 * min(lambda_max, C / F_grid); the factor also keeps W >= V1/2.
double default_lambda(const Trajectory& traj, const LyapCoeffs& co, double* f_grid_out = nullptr);

// Variant dispatch with default lambda when none is given.
LyapTrack make_track(const Trajectory& traj, std::optional<double> lambda = std::nullopt,
                     double* f_grid_out = nullptr);

// |grad2 x + A grad x + B grad s + C x + D s - h_t| for t >= 2.
std::vector<double> reduced_residuals(const Trajectory& traj);

// Left-minus-right of the per-step energy dissipation inequality for t >= 2;
// values must be <= 0 up to rounding.
std::vector<double> dissipation_residuals(const Trajectory& traj, const LyapCoeffs& co);

struct DecayFit {
  std::optional<double> mu;  // decay rate in W_t - W_{t-1} + mu W_t <= L |h_t| sqrt(W_t)
  std::optional<double> L;
  bool monotone_when_noiseless = true;
  std::int64_t constrained_steps = 0;
};

// Streaming fit of the tightest (mu, L) satisfying the decay inequality at
// every observed step of a batch. Noiseless steps cap mu; noisy steps set
// the required L per candidate mu; the pair minimizing L/mu wins. Steps with
// both energies below `w_floor` are treated as numerically converged: once a
// state freezes, W sits at the rounding floor (ulp of the state, squared)
// and may jitter there.
class DecayFitAccumulator {
 public:
  DecayFitAccumulator();
  void add(double w_prev, double w, double h_abs, double w_floor = 1e-250);
  void add_track(const LyapTrack& track);
  DecayFit finalize() const;

 private:
  std::vector<double> mu_grid_;
  std::vector<double> required_L_;
  double mu_cap_;
  bool violation_ = false;
  std::int64_t steps_ = 0;
  bool any_noisy_ = false;
};

DecayFit fit_decay(std::span<const LyapTrack> tracks);

}  // namespace hysteresim
