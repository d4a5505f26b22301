#include "hysteresim/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "hysteresim/errors.hpp"

namespace hysteresim {

namespace {

// splitmix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t counter_hash(std::uint64_t seed, std::int64_t t, int channel, int attempt) {
  std::uint64_t h = mix64(seed ^ 0x517cc1b727220a95ull);
  h = mix64(h ^ static_cast<std::uint64_t>(t));
  h = mix64(h ^ (static_cast<std::uint64_t>(channel) << 32 | static_cast<std::uint64_t>(attempt)));
  return h;
}

double to_unit(std::uint64_t h) {  // [0, 1)
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double uniform_sym(std::uint64_t seed, std::int64_t t, int channel, double m) {
  const double u = to_unit(counter_hash(seed, t, channel, 0));
  return m * (2.0 * u - 1.0);
}

// Gaussian with standard deviation m/2, rejection-sampled onto [-m, m].
// Rejection (not clipping) keeps mass off the endpoints.
double truncated_gaussian(std::uint64_t seed, std::int64_t t, int channel, double m) {
  if (m == 0.0) return 0.0;
  for (int attempt = 0; attempt < 128; attempt += 2) {
    const double u1 = 1.0 - to_unit(counter_hash(seed, t, channel, attempt));      // (0, 1]
    const double u2 = to_unit(counter_hash(seed, t, channel, attempt + 1));
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    const double v = 0.5 * m * z;
    if (std::abs(v) <= m) return v;
  }
  throw std::logic_error("truncated gaussian rejection sampling failed to converge");
}

double scripted_value(const std::vector<double>& table, std::int64_t t, const char* channel) {
  if (table.empty()) return 0.0;
  if (t < 0 || static_cast<std::size_t>(t) >= table.size())
    throw ScriptExhausted(std::string("scripted noise channel ") + channel + " has " +
                          std::to_string(table.size()) + " entries, sample at t = " +
                          std::to_string(t) + " requested");
  return table[static_cast<std::size_t>(t)];
}

}  // namespace

double NoiseSpec::declared_bound() const {
  double m = m_eta;
  if (m_eps > m) m = m_eps;
  if (m_xi > m) m = m_xi;
  return m;
}

NoiseSlice NoiseSpec::sample(std::int64_t t) const {
  NoiseSlice slice;
  switch (kind) {
    case NoiseKind::zero:
      break;
    case NoiseKind::uniform:
      slice.eta = uniform_sym(seed, t, 0, m_eta);
      slice.eps = uniform_sym(seed, t, 1, m_eps);
      slice.xi = uniform_sym(seed, t, 2, m_xi);
      break;
    case NoiseKind::truncated_gaussian:
      slice.eta = truncated_gaussian(seed, t, 0, m_eta);
      slice.eps = truncated_gaussian(seed, t, 1, m_eps);
      slice.xi = truncated_gaussian(seed, t, 2, m_xi);
      break;
    case NoiseKind::scripted:
      slice.eta = scripted_value(script_eta, t, "eta");
      slice.eps = scripted_value(script_eps, t, "eps");
      slice.xi = scripted_value(script_xi, t, "xi");
      return slice;  // scripted tables are trusted as given
  }
  // Hard bound, not a statistical one.
  if (std::abs(slice.eta) > m_eta || std::abs(slice.eps) > m_eps || std::abs(slice.xi) > m_xi)
    throw std::logic_error("noise sample exceeded its declared bound");
  return slice;
}

double observed_sup_norm(std::span<const NoiseSlice> log) {
  double m = 0.0;
  for (const NoiseSlice& s : log) {
    if (std::abs(s.eta) > m) m = std::abs(s.eta);
    if (std::abs(s.eps) > m) m = std::abs(s.eps);
    if (std::abs(s.xi) > m) m = std::abs(s.xi);
  }
  return m;
}

}  // namespace hysteresim
