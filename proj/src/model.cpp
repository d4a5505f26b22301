#include "hysteresim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "hysteresim/errors.hpp"

namespace hysteresim {

namespace {

std::string str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// One play entering the aggregate expectation, frozen at its previous value.
struct PlayTerm {
  double nu = 1.0;
  double rho = 0.0;
  double p_prev = 0.0;
};

// One saturation branch of the policy rule: r = mu_r (c1 x + c2 y) + const_r.
// mu_r = 1 with const_r = xi (+/- sigma) on the plain/dragged branches,
// mu_r = 0 with const_r = bank_p_prev + xi on the stuck branch.
struct BankBranch {
  double mu_r = 1.0;
  double const_r = 0.0;
};

struct SolveInput {
  const ModelParams* params = nullptr;
  double x_prev = 0.0;
  double y_prev = 0.0;
  double bank_p_prev = 0.0;
  double bank_sigma = 0.0;  // params.sigma for the sticky variant, else 0
  NoiseSlice noise;
  std::int64_t t_next = 0;
};

struct Candidate {
  SystemState state;
  int stuck_count = 0;  // plays frozen in this branch, bank included
  std::size_t order = 0;
};

// Builds the full state at a solved inflation value: per-agent stops through
// the exact saturation, output gap from its equation under the bank branch,
// then the exact policy play update. The supply-equation and policy-rule
// residuals are the branch acceptance checks.
SystemState assemble_state(const SolveInput& in, std::span<const PlayTerm> plays,
                           const BankBranch& bank, double x, double* residual) {
  const ModelParams& mp = *in.params;
  const double k_eff = 1.0 + mp.a2 * mp.c2 * bank.mu_r;
  SystemState st;
  st.t = in.t_next;
  st.x = x;
  st.s_vec.resize(plays.size());
  double p_agg = 0.0;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    st.s_vec[i] = saturate(x - plays[i].p_prev, plays[i].rho);
    p_agg += plays[i].nu * (x - st.s_vec[i]);
  }
  st.p = p_agg;
  st.y = ((1.0 - mp.a1) * in.y_prev + mp.a2 * (p_agg - bank.mu_r * mp.c1 * x - bank.const_r) +
          in.noise.eps) /
         k_eff;
  st.r = bank.mu_r * (mp.c1 * x + mp.c2 * st.y) + bank.const_r;

  const double stance = mp.c1 * st.x + mp.c2 * st.y;
  st.bank_p = stance + saturate(in.bank_p_prev - stance, in.bank_sigma);

  const double supply =
      x - mp.b1 * p_agg - (1.0 - mp.b1) * in.x_prev - mp.b2 * st.y - in.noise.eta;
  const double policy = st.r - (st.bank_p + in.noise.xi);
  *residual = std::max(std::abs(supply), std::abs(policy));
  return st;
}

// Exhaustive enumeration over the saturation branches: each expectation play
// contributes breakpoints p_prev +- rho in x, and the policy play
// contributes its stuck/dragged regimes. On each combination the system is
// affine in x_t, so the step reduces to a scalar linear solve per branch.
SystemState solve_pwl_step(const SolveInput& in, std::span<const PlayTerm> plays,
                           StepInfo* info) {
  const ModelParams& mp = *in.params;

  std::vector<BankBranch> bank_branches;
  if (in.bank_sigma > 0.0) {
    bank_branches.push_back(BankBranch{0.0, in.bank_p_prev + in.noise.xi});  // rate frozen
    bank_branches.push_back(BankBranch{1.0, in.noise.xi + in.bank_sigma});
    bank_branches.push_back(BankBranch{1.0, in.noise.xi - in.bank_sigma});
  } else {
    bank_branches.push_back(BankBranch{1.0, in.noise.xi});
  }

  std::vector<double> brks;
  brks.reserve(2 * plays.size());
  for (const PlayTerm& pl : plays) {
    brks.push_back(pl.p_prev - pl.rho);
    brks.push_back(pl.p_prev + pl.rho);
  }
  std::sort(brks.begin(), brks.end());

  std::vector<Candidate> candidates;
  int singular = 0;
  int attempted = 0;
  std::size_t order = 0;
  for (std::size_t bb = 0; bb < bank_branches.size(); ++bb) {
    const BankBranch& bank = bank_branches[bb];
    const double k_eff = 1.0 + mp.a2 * mp.c2 * bank.mu_r;
    for (std::size_t idx = 0; idx <= brks.size(); ++idx, ++order) {
      const double lo = idx == 0 ? -kInf : brks[idx - 1];
      const double hi = idx == brks.size() ? kInf : brks[idx];
      if (lo >= hi) continue;  // zero-width interval; neighbors cover the point
      ++attempted;

      double g = 0.0;
      double d = 0.0;
      int stuck = bank.mu_r == 0.0 ? 1 : 0;
      for (const PlayTerm& pl : plays) {
        if (hi <= pl.p_prev - pl.rho) {  // dragged from below: p = x + rho
          g += pl.nu;
          d += pl.nu * pl.rho;
        } else if (lo >= pl.p_prev + pl.rho) {  // dragged from above: p = x - rho
          g += pl.nu;
          d -= pl.nu * pl.rho;
        } else {  // stuck: p = p_prev
          d += pl.nu * pl.p_prev;
          ++stuck;
        }
      }

      const double coef =
          1.0 - mp.b1 * g + mp.b2 * mp.a2 * (bank.mu_r * mp.c1 - g) / k_eff;
      const double rhs =
          mp.b1 * d + (1.0 - mp.b1) * in.x_prev + in.noise.eta +
          mp.b2 * ((1.0 - mp.a1) * in.y_prev + mp.a2 * (d - bank.const_r) + in.noise.eps) / k_eff;
      if (std::abs(coef) < 1e-13) {
        ++singular;
        continue;
      }
      const double xc = rhs / coef;
      const double slack = 1e-6 * (1.0 + std::abs(xc));
      if (xc < lo - slack || xc > hi + slack) continue;

      double resid = 0.0;
      SystemState st = assemble_state(in, plays, bank, xc, &resid);
      const double scale = std::max({1.0, std::abs(xc), std::abs(in.x_prev), std::abs(st.p),
                                     std::abs(mp.b2 * st.y), std::abs(st.r)});
      if (resid > 1e-11 * scale) continue;
      candidates.push_back(Candidate{std::move(st), stuck, order});
    }
  }

  if (candidates.empty()) {
    if (singular > 0 && singular == attempted)
      throw SingularBranch("period " + std::to_string(in.t_next) +
                           ": every saturation branch has a singular linear system");
    throw NoConsistentBranch("period " + std::to_string(in.t_next) +
                             ": no saturation branch is self-consistent" +
                             (singular ? " (" + std::to_string(singular) + " singular branch(es) skipped)"
                                       : ""));
  }

  // Merge numerically identical solutions (branch-boundary ties); the label
  // with the most frozen plays wins.
  std::vector<Candidate> distinct;
  for (Candidate& c : candidates) {
    bool merged = false;
    for (Candidate& d : distinct) {
      const double scale = std::max({1.0, std::abs(c.state.x), std::abs(d.state.x)});
      if (std::abs(c.state.x - d.state.x) <= 1e-9 * scale &&
          std::abs(c.state.y - d.state.y) <= 1e-9 * scale &&
          std::abs(c.state.r - d.state.r) <= 1e-9 * scale) {
        if (c.stuck_count > d.stuck_count) d = std::move(c);
        merged = true;
        break;
      }
    }
    if (!merged) distinct.push_back(std::move(c));
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < distinct.size(); ++i) {
    if (std::abs(distinct[i].state.x - in.x_prev) < std::abs(distinct[best].state.x - in.x_prev))
      best = i;
  }
  if (info) info->consistent_branches = static_cast<int>(distinct.size());
  return std::move(distinct[best].state);
}

double representative_stop(const SystemState& st) {
  return st.s_vec.empty() ? st.x - st.p : st.s_vec[0];
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::representative: return "representative";
    case Variant::sticky_bank: return "sticky-bank";
    case Variant::multi_agent: return "multi-agent";
  }
  return "?";
}

int ModelParams::agent_count() const {
  return variant == Variant::multi_agent ? static_cast<int>(agents.size()) : 1;
}

void ModelParams::validate() const {
  if (!(a1 >= 0.0 && a1 < 1.0)) throw ValidationError("requires 0 <= a1 < 1, got a1 = " + str(a1));
  if (!(b1 > 0.0 && b1 < 1.0)) throw ValidationError("requires 0 < b1 < 1, got b1 = " + str(b1));
  if (!(a2 > 0.0)) throw ValidationError("requires a2 > 0, got a2 = " + str(a2));
  if (!(b2 > 0.0)) throw ValidationError("requires b2 > 0, got b2 = " + str(b2));
  if (!(c1 > 0.0)) throw ValidationError("requires c1 > 0, got c1 = " + str(c1));
  if (!(c2 > 0.0)) throw ValidationError("requires c2 > 0, got c2 = " + str(c2));
  if (!(sigma >= 0.0)) throw ValidationError("requires sigma >= 0, got sigma = " + str(sigma));
  if (variant == Variant::multi_agent) {
    if (sigma != 0.0)
      throw ValidationError("the multi-agent model uses the plain Taylor rule; sigma must be 0");
    try {
      agents.validate_expectation_weights();
    } catch (const InvalidPi& e) {
      throw ValidationError(std::string("agents: ") + e.what());
    }
  } else {
    if (!(rho >= 0.0)) throw ValidationError("requires rho >= 0, got rho = " + str(rho));
  }
}

SystemState make_initial_state(const ModelParams& params, double x0, double y0,
                               std::optional<double> p0, std::optional<double> r0,
                               const NoiseSlice& noise0) {
  params.validate();
  SystemState st;
  st.t = 0;
  st.x = x0;
  st.y = y0;
  const double taylor = params.c1 * x0 + params.c2 * y0;
  if (params.variant == Variant::multi_agent) {
    double agg = 0.0;
    for (const PiAgent& ag : params.agents.agents) agg += ag.nu * (x0 - ag.beta);
    if (p0.has_value() && std::abs(*p0 - agg) > 1e-9)
      throw InvalidInit("multi-agent p0 is determined by the agents' initial stops (" + str(agg) +
                        "), got " + str(*p0));
    st.s_vec.reserve(params.agents.size());
    for (const PiAgent& ag : params.agents.agents) st.s_vec.push_back(ag.beta);
    st.p = agg;
    st.r = r0.value_or(taylor + noise0.xi);
    st.bank_p = taylor;
    return st;
  }

  st.p = p0.value_or(x0);
  const double s0 = x0 - st.p;
  if (!(std::abs(s0) <= params.rho))
    throw InvalidInit("requires |x0 - p0| <= rho, got " + str(std::abs(s0)) + " with rho = " +
                      str(params.rho));
  st.s_vec = {s0};
  st.r = r0.value_or(taylor + noise0.xi);
  st.bank_p = st.r - noise0.xi;
  if (params.variant == Variant::sticky_bank) {
    if (!(std::abs(st.bank_p - taylor) <= params.sigma))
      throw InvalidInit("requires |r0 - xi0 - (c1 x0 + c2 y0)| <= sigma, got " +
                        str(std::abs(st.bank_p - taylor)) + " with sigma = " + str(params.sigma));
  } else {
    st.bank_p = taylor;
  }
  return st;
}

SystemState step_representative(const SystemState& prev, const ModelParams& params,
                                const NoiseSlice& noise, StepInfo* info) {
  const PlayTerm play{1.0, params.rho, prev.x - representative_stop(prev)};
  SolveInput in{&params, prev.x, prev.y, prev.bank_p, 0.0, noise, prev.t + 1};
  return solve_pwl_step(in, std::span<const PlayTerm>(&play, 1), info);
}

SystemState step_sticky_bank(const SystemState& prev, const ModelParams& params,
                             const NoiseSlice& noise, StepInfo* info) {
  const PlayTerm play{1.0, params.rho, prev.x - representative_stop(prev)};
  SolveInput in{&params, prev.x, prev.y, prev.bank_p, params.sigma, noise, prev.t + 1};
  return solve_pwl_step(in, std::span<const PlayTerm>(&play, 1), info);
}

SystemState step_multi_agent(const SystemState& prev, const ModelParams& params,
                             const NoiseSlice& noise, StepInfo* info) {
  const std::size_t n = params.agents.size();
  if (prev.s_vec.size() != n)
    throw Error("multi-agent state carries " + std::to_string(prev.s_vec.size()) +
                " stop values, operator has " + std::to_string(n));
  std::vector<PlayTerm> plays(n);
  for (std::size_t i = 0; i < n; ++i) {
    plays[i] = PlayTerm{params.agents.agents[i].nu, params.agents.agents[i].rho,
                        prev.x - prev.s_vec[i]};
  }
  SolveInput in{&params, prev.x, prev.y, prev.bank_p, 0.0, noise, prev.t + 1};
  return solve_pwl_step(in, plays, info);
}

SystemState step(const SystemState& prev, const ModelParams& params, const NoiseSlice& noise,
                 StepInfo* info) {
  switch (params.variant) {
    case Variant::representative: return step_representative(prev, params, noise, info);
    case Variant::sticky_bank: return step_sticky_bank(prev, params, noise, info);
    case Variant::multi_agent: return step_multi_agent(prev, params, noise, info);
  }
  throw Error("unknown variant");
}

double step_residual(const SystemState& prev, const SystemState& next, const ModelParams& params,
                     const NoiseSlice& noise) {
  double worst = std::abs(next.x - params.b1 * next.p - (1.0 - params.b1) * prev.x -
                          params.b2 * next.y - noise.eta);
  worst = std::max(worst, std::abs(next.y - (1.0 - params.a1) * prev.y +
                                   params.a2 * (next.r - next.p) - noise.eps));
  const double stance = params.c1 * next.x + params.c2 * next.y;
  double rule;
  if (params.variant == Variant::sticky_bank) {
    rule = stance + saturate(prev.bank_p - stance, params.sigma) + noise.xi;
    worst = std::max(worst,
                     std::abs(next.bank_p - stance - saturate(prev.bank_p - stance, params.sigma)));
  } else {
    rule = stance + noise.xi;
  }
  worst = std::max(worst, std::abs(next.r - rule));

  if (params.variant == Variant::multi_agent) {
    double agg = 0.0;
    for (std::size_t i = 0; i < params.agents.size(); ++i) {
      const PiAgent& ag = params.agents.agents[i];
      const double p_prev_i = prev.x - prev.s_vec[i];
      worst = std::max(worst, std::abs(next.s_vec[i] - saturate(next.x - p_prev_i, ag.rho)));
      agg += ag.nu * (next.x - next.s_vec[i]);
    }
    worst = std::max(worst, std::abs(next.p - agg));
  } else {
    const double p_prev = prev.x - representative_stop(prev);
    worst = std::max(worst, std::abs(next.p - next.x - saturate(p_prev - next.x, params.rho)));
  }
  return worst;
}

double linearization_determinant(const ModelParams& params) {
  const double den = 1.0 - params.b1 - params.a2 * params.b2;
  if (den == 0.0) throw Degenerate("1 - b1 - a2*b2 = 0; linearization determinant undefined");
  return (1.0 - params.a1) * (1.0 - params.b1) / den;
}

Trajectory simulate(const SystemState& init, const ModelParams& params, const NoiseSpec& noise,
                    std::int64_t horizon) {
  params.validate();
  if (horizon < 0) throw ValidationError("horizon must be nonnegative");
  Trajectory traj;
  traj.params = params;
  traj.seed = noise.seed;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.noise.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.branch_flags.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.states.push_back(init);
  traj.noise.push_back(noise.sample(0));
  traj.branch_flags.push_back(0);
  for (std::int64_t t = 1; t <= horizon; ++t) {
    const NoiseSlice slice = noise.sample(t);
    StepInfo info;
    traj.states.push_back(step(traj.states.back(), params, slice, &info));
    traj.noise.push_back(slice);
    traj.branch_flags.push_back(info.consistent_branches);
  }
  return traj;
}

}  // namespace hysteresim
