#include "hysteresim/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hysteresim/errors.hpp"
#include "hysteresim/lyapunov.hpp"

namespace hysteresim {

double kappa(const ModelParams& params) {
  if (params.c1 == 1.0) throw Degenerate("kappa undefined at c1 = 1");
  return (params.a2 * (params.b2 + params.b1 * params.c2) + params.a1 * params.b1) /
         (params.a2 * params.b2 * (1.0 - params.c1));
}

std::array<double, 3> equilibrium_representative(double u, const ModelParams& params) {
  if (!(std::abs(u) <= params.rho)) throw OutOfBand("requires |u| <= rho");
  const double kap = kappa(params);
  return {kap * u, params.b1 / params.b2 * u, (kap - 1.0) * u};
}

std::array<double, 4> equilibrium_sticky(double u, double v, const ModelParams& params) {
  if (!(std::abs(u) <= params.rho)) throw OutOfBand("requires |u| <= rho");
  if (!(std::abs(v) <= params.sigma)) throw OutOfBand("requires |v| <= sigma");
  if (!(params.c1 > 1.0)) throw Degenerate("sticky-bank equilibrium set requires c1 > 1");
  const double kap = kappa(params);
  const double shift = v / (params.c1 - 1.0);
  return {kap * u + shift, params.b1 / params.b2 * u, (kap - 1.0) * u + shift,
          (params.c1 * kap + params.b1 * params.c2 / params.b2) * u + shift};
}

SystemState equilibrium_multi(std::span<const double> stops, const ModelParams& params) {
  const PiOperator& op = params.agents;
  if (stops.size() != op.size()) throw OutOfBand("one frozen stop per agent required");
  for (std::size_t i = 0; i < stops.size(); ++i) {
    if (!(std::abs(stops[i]) <= op.agents[i].rho))
      throw OutOfBand("requires |s*_i| <= rho_i at agent " + std::to_string(i + 1));
  }
  const LyapCoeffs co = reduced_coeffs(params);
  double weighted = 0.0;
  for (std::size_t i = 0; i < stops.size(); ++i) weighted += op.agents[i].nu * stops[i];

  SystemState st;
  st.t = 0;
  st.x = -co.D * weighted / (co.C + op.nu0 * co.D);
  const double s_agg = op.nu0 * st.x + weighted;
  st.y = params.b1 * s_agg / params.b2;
  st.p = st.x - s_agg;
  st.r = params.c1 * st.x + params.c2 * st.y;
  st.s_vec.assign(stops.begin(), stops.end());
  return st;
}

double distance_to_segment(double x, double y, double p, const ModelParams& params) {
  const double kap = kappa(params);
  // f(u) = max_i |m_i u - c_i| is convex piecewise linear; its minimum over
  // [-rho, rho] is attained at an endpoint, a zero of one term, or a
  // crossing of two terms.
  const double m[3] = {kap, params.b1 / params.b2, kap - 1.0};
  const double c[3] = {x, y, p};
  std::vector<double> cand{-params.rho, params.rho};
  for (int i = 0; i < 3; ++i) {
    if (m[i] != 0.0) cand.push_back(c[i] / m[i]);
    for (int j = i + 1; j < 3; ++j) {
      if (m[i] != m[j]) cand.push_back((c[i] - c[j]) / (m[i] - m[j]));
      if (m[i] != -m[j]) cand.push_back((c[i] + c[j]) / (m[i] + m[j]));
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (double u : cand) {
    u = std::clamp(u, -params.rho, params.rho);
    const double f = std::max({std::abs(m[0] * u - c[0]), std::abs(m[1] * u - c[1]),
                               std::abs(m[2] * u - c[2])});
    best = std::min(best, f);
  }
  return best;
}

double distance_to_attractor(const SystemState& state, const ModelParams& params) {
  switch (params.variant) {
    case Variant::representative:
      return distance_to_segment(state.x, state.y, state.p, params);
    case Variant::sticky_bank: {
      const double u = std::clamp(state.x - state.p, -params.rho, params.rho);
      // the policy play's stop value parameterizes the box direction
      const double stance = params.c1 * state.x + params.c2 * state.y;
      const double v = std::clamp(stance - state.bank_p, -params.sigma, params.sigma);
      const auto eq = equilibrium_sticky(u, v, params);
      return std::max({std::abs(state.x - eq[0]), std::abs(state.y - eq[1]),
                       std::abs(state.p - eq[2]), std::abs(state.r - eq[3])});
    }
    case Variant::multi_agent: {
      std::vector<double> stops(state.s_vec);
      for (std::size_t i = 0; i < stops.size(); ++i)
        stops[i] = std::clamp(stops[i], -params.agents.agents[i].rho, params.agents.agents[i].rho);
      const SystemState eq = equilibrium_multi(stops, params);
      return std::max(
          {std::abs(state.x - eq.x), std::abs(state.y - eq.y), std::abs(state.p - eq.p)});
    }
  }
  throw Error("unknown variant");
}

}  // namespace hysteresim
