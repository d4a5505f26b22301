#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hysteresim {

// One time slice of the three exogenous disturbance channels.
struct NoiseSlice {
  double eta = 0.0;  // supply equation
  double eps = 0.0;  // demand equation
  double xi = 0.0;   // policy rule
};

enum class NoiseKind {
  zero,
  uniform,
  truncated_gaussian,
  scripted,
};

// Uniformly bounded exogenous noise. Generation is counter-based: each
// value is a pure function of (seed, t, channel), so slices can be sampled
// in any order and concurrent sweeps need no stream splitting.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::zero;
  double m_eta = 0.0;
  double m_eps = 0.0;
  double m_xi = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> script_eta;
  std::vector<double> script_eps;
  std::vector<double> script_xi;

  // Largest declared channel bound (the sup-norm disturbance parameter m).
  double declared_bound() const;

  // Pure function of (spec, t). Every emitted value satisfies the hard
  // bound |value| <= channel bound. Throws ScriptExhausted for scripted
  // noise past the table end.
  NoiseSlice sample(std::int64_t t) const;
};

// Running sup of |eta|, |eps|, |xi| over a noise log.
double observed_sup_norm(std::span<const NoiseSlice> log);

}  // namespace hysteresim
