#pragma once

#include <array>
#include <span>

#include "hysteresim/model.hpp"

namespace hysteresim {

// Slope of the equilibrium line:
//   kappa = (a2 (b2 + b1 c2) + a1 b1) / (a2 b2 (1 - c1)).
// Equals -D/C of the reduced second-order form. Throws Degenerate if c1 = 1.
double kappa(const ModelParams& params);

// Equilibrium of the representative system at frozen perception gap u,
// |u| <= rho:  x* = kappa u, y* = (b1/b2) u, p* = (kappa - 1) u.
// Returns {x*, y*, p*}. Throws OutOfBand.
std::array<double, 3> equilibrium_representative(double u, const ModelParams& params);

// Equilibrium of the sticky-bank system at (u, v), |u| <= rho, |v| <= sigma.
// Returns {x*, y*, p*, r*}. Requires c1 > 1 (throws Degenerate).
std::array<double, 4> equilibrium_sticky(double u, double v, const ModelParams& params);

// Equilibrium of the multi-agent system with per-agent frozen stops
// stops[i] in [-rho_i, rho_i]. The coordinates solve C x* + D s* = 0 with the
// aggregate gap s* = nu0 x* + sum nu_i stops_i. Returns a full state (t = 0).
SystemState equilibrium_multi(std::span<const double> stops, const ModelParams& params);

// Chebyshev distance from (x, y, p) to the equilibrium segment, minimized
// exactly over the frozen gap u in [-rho, rho].
double distance_to_segment(double x, double y, double p, const ModelParams& params);

// Distance from a state to the equilibrium set of its variant. The segment
// uses the exact minimization above; the sticky box and the multi-agent
// parallelepiped clamp the state's own memory variables onto the set and
// measure the Chebyshev gap to the resulting equilibrium point.
double distance_to_attractor(const SystemState& state, const ModelParams& params);

}  // namespace hysteresim
