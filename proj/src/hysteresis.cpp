#include "hysteresim/hysteresis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hysteresim/errors.hpp"

namespace hysteresim {

namespace {

std::string str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double saturate(double v, double rho) {
  if (v >= rho) return rho;
  if (v <= -rho) return -rho;
  return v;
}

PlayState play_init(double rho, double s0, double x0) {
  if (!(rho >= 0.0)) throw InvalidInit("play threshold must satisfy rho >= 0, got " + str(rho));
  if (!(std::abs(s0) <= rho))
    throw InvalidInit("play initial stop value must satisfy |s0| <= rho, got s0 = " + str(s0) +
                      " with rho = " + str(rho));
  return PlayState{rho, s0, x0};
}

std::pair<PlayState, double> play_step(const PlayState& state, double x_new) {
  // s_t = Phi_rho(x_t - p_{t-1}); p_t = x_t - s_t. Exact complement of the
  // p-form p_t = x_t + Phi_rho(p_{t-1} - x_t) since Phi is odd and IEEE
  // negation is exact.
  const double s_new = saturate(x_new - state.play(), state.rho);
  PlayState next{state.rho, s_new, x_new};
  return {next, x_new - s_new};
}

std::vector<double> play_apply(double rho, double s0, std::span<const double> x) {
  std::vector<double> p;
  p.reserve(x.size());
  if (x.empty()) {
    if (!(rho >= 0.0) || !(std::abs(s0) <= rho)) throw InvalidInit("invalid play initial condition");
    return p;
  }
  PlayState state = play_init(rho, s0, x[0]);
  p.push_back(state.play());
  for (std::size_t t = 1; t < x.size(); ++t) {
    auto [next, pt] = play_step(state, x[t]);
    state = next;
    p.push_back(pt);
  }
  return p;
}

std::vector<double> stop_apply(double rho, double s0, std::span<const double> x) {
  // Returns the stored stop values so the |s| <= rho clamp is exact; the
  // recomputed x - p can exceed the band by one rounding step.
  std::vector<double> s;
  s.reserve(x.size());
  if (x.empty()) {
    if (!(rho >= 0.0) || !(std::abs(s0) <= rho)) throw InvalidInit("invalid play initial condition");
    return s;
  }
  PlayState state = play_init(rho, s0, x[0]);
  s.push_back(state.s);
  for (std::size_t t = 1; t < x.size(); ++t) {
    state = play_step(state, x[t]).first;
    s.push_back(state.s);
  }
  return s;
}

std::vector<double> PiOperator::partial_sums() const {
  std::vector<double> a;
  a.reserve(agents.size() + 1);
  double acc = nu0;
  a.push_back(acc);
  for (const PiAgent& ag : agents) {
    acc += ag.nu;
    a.push_back(acc);
  }
  return a;
}

void PiOperator::validate() const {
  double prev_rho = 0.0;
  double prev_beta = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const PiAgent& ag = agents[i];
    if (!std::isfinite(ag.nu) || !std::isfinite(ag.rho) || !std::isfinite(ag.beta))
      throw InvalidPi("agent " + std::to_string(i + 1) + " has a non-finite field");
    if (!(ag.rho > prev_rho))
      throw InvalidPi("thresholds must be strictly increasing and positive; rho_" +
                      std::to_string(i + 1) + " = " + str(ag.rho) + " after " + str(prev_rho));
    if (!(std::abs(ag.beta - prev_beta) <= ag.rho - prev_rho))
      throw InvalidPi("initial condition chain violated at agent " + std::to_string(i + 1) +
                      ": |beta_i - beta_{i-1}| = " + str(std::abs(ag.beta - prev_beta)) +
                      " > rho_i - rho_{i-1} = " + str(ag.rho - prev_rho));
    prev_rho = ag.rho;
    prev_beta = ag.beta;
  }
  if (!std::isfinite(nu0)) throw InvalidPi("nu0 is non-finite");
}

void PiOperator::validate_expectation_weights() const {
  validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!(agents[i].nu > 0.0))
      throw InvalidPi("expectation weight nu_" + std::to_string(i + 1) +
                      " must be positive, got " + str(agents[i].nu));
    sum += agents[i].nu;
  }
  if (!(nu0 >= -1e-12) || std::abs(nu0 - (1.0 - sum)) > 1e-9)
    throw InvalidPi("expectation weights require nu0 = 1 - sum(nu_i) >= 0; nu0 = " + str(nu0) +
                    ", 1 - sum = " + str(1.0 - sum));
}

std::vector<double> pi_apply(const PiOperator& op, std::span<const double> x, PiForm form) {
  op.validate();
  std::vector<double> v(x.size(), 0.0);
  if (form == PiForm::general) {
    for (std::size_t t = 0; t < x.size(); ++t) v[t] = op.nu0 * x[t];
  }
  for (const PiAgent& ag : op.agents) {
    const std::vector<double> p = play_apply(ag.rho, ag.beta, x);
    for (std::size_t t = 0; t < x.size(); ++t) v[t] += ag.nu * p[t];
  }
  return v;
}

std::vector<double> pi_stop_decompose(const PiOperator& op, std::span<const double> x) {
  std::vector<double> s = pi_apply(op, x, PiForm::expectation);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = x[t] - s[t];
  return s;
}

void PiInverse::validate() const {
  if (zeta.size() != sigma.size() || zeta.size() != gamma.size() || zeta.empty())
    throw InvalidInit("inverse coefficient arrays must be non-empty and of equal length");
  if (sigma[0] != 0.0 || gamma[0] != 0.0)
    throw InvalidInit("inverse coefficients require sigma_0 = gamma_0 = 0");
  for (std::size_t i = 1; i < sigma.size(); ++i) {
    if (!(sigma[i] > sigma[i - 1]))
      throw InvalidInit("inverse thresholds must be strictly increasing");
    if (!(std::abs(gamma[i] - gamma[i - 1]) <= sigma[i] - sigma[i - 1]))
      throw InvalidInit("inverse initial condition chain violated at index " + std::to_string(i));
  }
}

PiInverse pi_invert_coeffs(const PiOperator& op) {
  op.validate();
  const std::vector<double> a = op.partial_sums();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0))
      throw NonInvertible("partial weight sum A_" + std::to_string(i) + " = " + str(a[i]) +
                          " is not positive");
  }
  PiInverse inv;
  const std::size_t n = op.size();
  inv.zeta.resize(n + 1);
  inv.sigma.resize(n + 1);
  inv.gamma.resize(n + 1);
  inv.zeta[0] = 1.0 / a[0];
  inv.sigma[0] = 0.0;
  inv.gamma[0] = 0.0;
  double prev_rho = 0.0;
  double prev_beta = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    inv.zeta[i] = 1.0 / a[i] - 1.0 / a[i - 1];
    inv.sigma[i] = inv.sigma[i - 1] + a[i - 1] * (op.agents[i - 1].rho - prev_rho);
    inv.gamma[i] = inv.gamma[i - 1] + a[i - 1] * (op.agents[i - 1].beta - prev_beta);
    prev_rho = op.agents[i - 1].rho;
    prev_beta = op.agents[i - 1].beta;
  }
  return inv;
}

std::vector<double> pi_invert_apply(const PiInverse& inv, std::span<const double> v) {
  inv.validate();
  std::vector<double> x(v.size(), 0.0);
  for (std::size_t t = 0; t < v.size(); ++t) x[t] = inv.zeta[0] * v[t];
  for (std::size_t i = 1; i < inv.zeta.size(); ++i) {
    const std::vector<double> p = play_apply(inv.sigma[i], inv.gamma[i], v);
    for (std::size_t t = 0; t < v.size(); ++t) x[t] += inv.zeta[i] * p[t];
  }
  return x;
}

std::vector<double> brokate_compose(double rho, double sigma, double beta, double gamma,
                                    std::span<const double> x) {
  if (!(std::abs(beta) <= rho)) throw InvalidInit("|beta| <= rho required");
  if (!(std::abs(gamma) <= sigma)) throw InvalidInit("|gamma| <= sigma required");
  const std::vector<double> inner = play_apply(rho, beta, x);
  return play_apply(sigma, gamma, inner);
}

double total_variation(std::span<const double> r) {
  double tv = 0.0;
  for (std::size_t t = 1; t < r.size(); ++t) tv += std::abs(r[t] - r[t - 1]);
  return tv;
}

double min_variation_oracle(std::span<const double> v, double sigma, double r0, int grid,
                            std::size_t budget) {
  if (!(sigma >= 0.0)) throw InvalidInit("sigma >= 0 required");
  if (grid < 1) throw InvalidInit("grid must be at least 1");
  if (v.empty()) return 0.0;
  if (!(std::abs(r0 - v[0]) <= sigma))
    throw InvalidInit("|r0 - v_0| <= sigma required, got " + str(std::abs(r0 - v[0])) +
                      " with sigma = " + str(sigma));
  if (v.size() * static_cast<std::size_t>(grid + 1) > budget)
    throw BudgetExceeded("min-variation DP would need " +
                         std::to_string(v.size() * static_cast<std::size_t>(grid + 1)) +
                         " nodes, budget is " + std::to_string(budget));

  // The play trajectory is injected into every band so it is always a
  // feasible DP path.
  const std::vector<double> play = play_apply(sigma, v[0] - r0, v);

  std::vector<double> prev_nodes{r0};
  std::vector<double> prev_cost{0.0};
  std::vector<double> nodes, cost;
  for (std::size_t t = 1; t < v.size(); ++t) {
    nodes.clear();
    nodes.reserve(static_cast<std::size_t>(grid) + 1);
    if (grid == 1 || sigma == 0.0) {
      nodes.push_back(v[t]);
    } else {
      const double lo = v[t] - sigma;
      const double step = 2.0 * sigma / (grid - 1);
      for (int k = 0; k < grid; ++k) nodes.push_back(lo + step * k);
    }
    nodes.push_back(play[t]);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    cost.assign(nodes.size(), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      for (std::size_t i = 0; i < prev_nodes.size(); ++i) {
        const double c = prev_cost[i] + std::abs(nodes[j] - prev_nodes[i]);
        if (c < cost[j]) cost[j] = c;
      }
    }
    prev_nodes = nodes;
    prev_cost = cost;
  }
  return *std::min_element(prev_cost.begin(), prev_cost.end());
}

}  // namespace hysteresim
