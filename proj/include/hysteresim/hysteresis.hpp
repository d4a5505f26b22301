#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hysteresim {

// Piecewise linear saturation: clamp of v to [-rho, rho]. Total function,
// rho >= 0 assumed (rho = 0 forces 0).
double saturate(double v, double rho);

// Memory of a single play operator. The stored quantity is the stop value
// s = x - p (the "perception gap"), which keeps the |s| <= rho invariant
// locally checkable; the play value is recovered as p = x - s.
struct PlayState {
  double rho = 0.0;  // threshold, >= 0
  double s = 0.0;    // current stop value, |s| <= rho
  double x = 0.0;    // last input seen

  double play() const { return x - s; }
};

// Seeds a play with initial stop value s0 and first input x0, so that the
// t = 0 output is p0 = x0 - s0. Throws InvalidInit if |s0| > rho.
PlayState play_init(double rho, double s0, double x0);

// One update step. Returns the advanced state and the new play output.
// The stop and play forms of the recursion are algebraically identical;
// both outputs satisfy p + s = x exactly.
std::pair<PlayState, double> play_step(const PlayState& state, double x_new);

// Full-sequence play/stop application with initial stop value s0.
// Output length equals input length. Throws InvalidInit if |s0| > rho.
std::vector<double> play_apply(double rho, double s0, std::span<const double> x);
std::vector<double> stop_apply(double rho, double s0, std::span<const double> x);

// One weighted play in a Prandtl-Ishlinskii sum.
struct PiAgent {
  double nu = 0.0;    // weight
  double rho = 0.0;   // threshold, strictly increasing across agents
  double beta = 0.0;  // initial stop value
};

// Linear combination of plays nu0 * id + sum_i nu_i * play_{rho_i}[beta_i, .].
// Two admissibility levels are distinguished:
//  - validate(): the structural conditions every use requires (ordering of
//    thresholds and the initial-condition chain |beta_i - beta_{i-1}| <=
//    rho_i - rho_{i-1} with beta_0 = 0). Weights may be any reals.
//  - validate_expectation_weights(): the stricter aggregate-expectation
//    conditions nu_i > 0 and nu0 = 1 - sum nu_i >= 0 used by the
//    multi-agent model.
struct PiOperator {
  double nu0 = 1.0;
  std::vector<PiAgent> agents;

  std::size_t size() const { return agents.size(); }

  // Partial weight sums A_i = nu0 + nu_1 + ... + nu_i, i = 0..n.
  std::vector<double> partial_sums() const;

  void validate() const;                      // throws InvalidPi
  void validate_expectation_weights() const;  // throws InvalidPi
};

enum class PiForm {
  general,      // nu0 * x + sum_i nu_i * play_i(x)
  expectation,  // sum_i nu_i * play_i(x) only (aggregate inflation expectation)
};

// Applies the operator to a sequence. Throws InvalidPi on an inadmissible
// operator.
std::vector<double> pi_apply(const PiOperator& op, std::span<const double> x,
                             PiForm form = PiForm::general);

// x_t - pi_apply(op, x, expectation)_t, identically equal to
// nu0 * x_t + sum_i nu_i * stop_i(x)_t.
std::vector<double> pi_stop_decompose(const PiOperator& op, std::span<const double> x);

// Coefficients of the inverse operator: x = sum_{i=0..n} zeta_i *
// play_{sigma_i}[gamma_i, v], with sigma_0 = gamma_0 = 0 (identity term).
struct PiInverse {
  std::vector<double> zeta;
  std::vector<double> sigma;
  std::vector<double> gamma;

  std::size_t size() const { return zeta.empty() ? 0 : zeta.size() - 1; }
  void validate() const;  // throws InvalidInit on a gamma/sigma chain violation
};

// Closed-form inverse coefficients:
//   B_i = 1/A_i, zeta_0 = B_0, zeta_i = B_i - B_{i-1},
//   sigma_i - sigma_{i-1} = A_{i-1} (rho_i - rho_{i-1}),
//   gamma_i - gamma_{i-1} = A_{i-1} (beta_i - beta_{i-1}).
// Throws NonInvertible if any partial sum A_i <= 0.
PiInverse pi_invert_coeffs(const PiOperator& op);

// Applies the inverse to a sequence v, reconstructing the input of pi_apply
// in its general form.
std::vector<double> pi_invert_apply(const PiInverse& inv, std::span<const double> v);

// Composition of two plays applied in sequence:
//   play_sigma[gamma, play_rho[beta, x]].
// Equal (elementwise, up to accumulation) to play_{rho+sigma}[beta+gamma, x].
std::vector<double> brokate_compose(double rho, double sigma, double beta, double gamma,
                                    std::span<const double> x);

// Sum of |r_t - r_{t-1}| over the sequence.
double total_variation(std::span<const double> r);

// Minimal total variation over all sequences with r_0 fixed and
// |r_t - v_t| <= sigma for all t, by dynamic programming over a
// discretization of each band with `grid` points per band plus the exact
// play-output values as mandatory nodes. Throws InvalidInit if
// |r0 - v_0| > sigma, BudgetExceeded if length * grid exceeds `budget`.
double min_variation_oracle(std::span<const double> v, double sigma, double r0, int grid,
                            std::size_t budget = std::size_t{1} << 22);

}  // namespace hysteresim
