#include "hysteresim/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hysteresim/errors.hpp"

namespace hysteresim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kWFloor = 1e-250;  // below this the run has numerically converged

double sq(double v) { return v * v; }

}  // namespace

LyapCoeffs reduced_coeffs(const ModelParams& p) {
  if (p.a1 == 1.0 || p.b1 == 1.0) throw Degenerate("reduced form requires a1 < 1 and b1 < 1");
  const double na = 1.0 - p.a1;
  const double nb = 1.0 - p.b1;
  LyapCoeffs co;
  co.A = (p.a1 + p.a2 * p.c2) / na;
  co.B = p.b1 / nb;
  co.C = p.a2 * p.b2 * (p.c1 - 1.0) / (na * nb);
  co.D = (p.b1 * (p.a1 + p.a2 * p.c2) + p.a2 * p.b2) / (na * nb);
  return co;
}

double q_of(double x, double s, const LyapCoeffs& co) { return co.C * x + co.D * s; }

double lambda_max(const LyapCoeffs& co) {
  if (!(co.C > 0.0)) throw Degenerate("lambda_max requires C > 0 (c1 > 1)");
  return 0.5 * (co.A + std::sqrt(co.A * co.A + 4.0 * co.C));
}

double lambda_max_multi(const LyapCoeffs& co, const PiOperator& op) {
  if (!(co.C > 0.0)) throw Degenerate("lambda_max requires C > 0 (c1 > 1)");
  const double p = co.C + op.nu0 * co.D;  // coefficient of (grad x)^2 in 2*V1
  const double ratio = p * co.A / co.C;
  const double psd_root = 0.5 * (ratio + std::sqrt(ratio * ratio + 4.0 * p));
  return std::min({psd_root, p, co.A * co.C + op.nu0 * (co.B * co.C + co.A * co.D),
                   co.B * co.C + co.A * co.D});
}

std::vector<double> h_series(const Trajectory& traj) {
  const ModelParams& p = traj.params;
  const double denom = (1.0 - p.a1) * (1.0 - p.b1);
  std::vector<double> h(traj.states.size(), kNaN);
  for (std::size_t t = 2; t < traj.states.size(); ++t) {
    const SystemState& st = traj.states[t];
    const NoiseSlice& nt = traj.noise[t];
    const NoiseSlice& nt1 = traj.noise[t - 1];
    const double z = p.c1 * st.x + p.c2 * st.y - st.r + nt.xi;
    h[t] = ((1.0 - p.a1) * (nt.eta - nt1.eta) + p.b2 * (p.a2 * (z - nt.xi) + nt.eps) +
            (p.a1 + p.a2 * p.c2) * nt.eta) /
           denom;
  }
  return h;
}

void hat_sigma_coeffs(const ModelParams& p, double* Lp, double* Lpp) {
  const double denom = (1.0 - p.a1) * (1.0 - p.b1);
  *Lp = p.b2 * p.a2 / denom;
  *Lpp = (2.0 * (1.0 - p.a1) + p.b2 * (p.a2 + 1.0) + p.a1 + p.a2 * p.c2) / denom;
}

namespace {

double lambda_max_for(const Trajectory& traj, const LyapCoeffs& co, bool multi) {
  return multi ? lambda_max_multi(co, traj.params.agents) : lambda_max(co);
}

LyapTrack track_impl(const Trajectory& traj, const LyapCoeffs& co, double lambda, bool multi) {
  if (!(co.C > 0.0) || !(co.D > 0.0))
    throw Degenerate("Lyapunov tracking requires C, D > 0 (c1 > 1)");
  const double cap = lambda_max_for(traj, co, multi);
  if (!(lambda > 0.0) || !(lambda < cap))
    throw InadmissibleLambda("lambda must lie in (0, " + std::to_string(cap) + "), got " +
                             std::to_string(lambda));

  LyapTrack track;
  track.coeffs = co;
  track.lambda = lambda;
  track.lambda_cap = cap;
  track.multi = multi;

  const std::vector<double> h = h_series(traj);
  const double nu0 = traj.params.agents.nu0;
  const double gx_coef = multi ? co.C + nu0 * co.D : co.C;

  auto make_sample = [&](std::size_t t) {
    const SystemState& st = traj.states[t];
    const SystemState& pv = traj.states[t - 1];
    LyapSample s;
    s.t = static_cast<std::int64_t>(t);
    s.grad_x = st.x - pv.x;
    s.grad_s = st.stop() - pv.stop();
    s.q = q_of(st.x, st.stop(), co);
    double quad = gx_coef * sq(s.grad_x) + sq(s.q);
    if (multi) {
      for (std::size_t i = 0; i < st.s_vec.size(); ++i)
        quad += co.D * traj.params.agents.agents[i].nu * sq(st.s_vec[i] - pv.s_vec[i]);
    } else {
      quad += co.D * sq(s.grad_s);
    }
    s.V1 = 0.5 * quad;
    s.V0 = s.grad_x * s.q + co.A / (2.0 * co.C) * sq(s.q);
    s.W = s.V1 + lambda * s.V0;
    s.h = t < h.size() ? h[t] : kNaN;
    return s;
  };

  if (traj.states.size() >= 2) track.first = make_sample(1);
  track.first.V0 = kNaN;
  track.first.W = kNaN;
  track.first.h = kNaN;
  track.samples.reserve(traj.states.size());
  for (std::size_t t = 2; t < traj.states.size(); ++t) track.samples.push_back(make_sample(t));
  return track;
}

}  // namespace

LyapTrack lyapunov_track(const Trajectory& traj, const LyapCoeffs& co, double lambda) {
  return track_impl(traj, co, lambda, false);
}

LyapTrack lyapunov_track_multi(const Trajectory& traj, const LyapCoeffs& co, double lambda) {
  return track_impl(traj, co, lambda, true);
}

double fit_F_grid(const Trajectory& traj, const LyapCoeffs& co) {
  const bool multi = traj.params.variant == Variant::multi_agent;
  const std::vector<double> h = h_series(traj);
  double f = 0.0;
  for (std::size_t t = 2; t < traj.states.size(); ++t) {
    const SystemState& s2 = traj.states[t];
    const SystemState& s1 = traj.states[t - 1];
    const SystemState& s0 = traj.states[t - 2];
    const double gx = s2.x - s1.x;
    const double gx_prev = s1.x - s0.x;
    const double g2x = gx - gx_prev;
    const double q = q_of(s2.x, s2.stop(), co);
    const double q_prev = q_of(s1.x, s1.stop(), co);
    const double v0 = gx * q + co.A / (2.0 * co.C) * sq(q);
    const double v0_prev = gx_prev * q_prev + co.A / (2.0 * co.C) * sq(q_prev);
    const double numer = v0 - v0_prev + 0.5 * sq(q) - h[t] * q;
    double denom;
    if (multi) {
      denom = 0.5 * sq(g2x) + sq(gx);
      for (std::size_t i = 0; i < s2.s_vec.size(); ++i)
        denom += traj.params.agents.agents[i].nu * sq(s2.s_vec[i] - s1.s_vec[i]);
    } else {
      denom = 0.5 * sq(g2x) + co.A * sq(gx);
    }
    if (denom > 1e-280 && numer > 0.0) f = std::max(f, numer / denom);
  }
  return f;
}

double default_lambda(const Trajectory& traj, const LyapCoeffs& co, double* f_grid_out) {
  const bool multi = traj.params.variant == Variant::multi_agent;
  const double cap = lambda_max_for(traj, co, multi);
  const double f = fit_F_grid(traj, co);
  if (f_grid_out) *f_grid_out = f;
  double lam = cap;
  if (f > 0.0) lam = std::min(lam, co.C / f);
  lam *= 0.5;
  if (!(lam > 0.0)) throw InadmissibleLambda("no admissible lambda for this trajectory");
  return lam;
}

LyapTrack make_track(const Trajectory& traj, std::optional<double> lambda, double* f_grid_out) {
  const LyapCoeffs co = reduced_coeffs(traj.params);
  const double lam = lambda.has_value() ? *lambda : default_lambda(traj, co, f_grid_out);
  return traj.params.variant == Variant::multi_agent ? lyapunov_track_multi(traj, co, lam)
                                                     : lyapunov_track(traj, co, lam);
}

std::vector<double> reduced_residuals(const Trajectory& traj) {
  const LyapCoeffs co = reduced_coeffs(traj.params);
  const std::vector<double> h = h_series(traj);
  std::vector<double> res;
  res.reserve(traj.states.size());
  for (std::size_t t = 2; t < traj.states.size(); ++t) {
    const SystemState& s2 = traj.states[t];
    const SystemState& s1 = traj.states[t - 1];
    const SystemState& s0 = traj.states[t - 2];
    const double g2x = s2.x - 2.0 * s1.x + s0.x;
    const double gx = s2.x - s1.x;
    const double gs = s2.stop() - s1.stop();
    res.push_back(std::abs(g2x + co.A * gx + co.B * gs + co.C * s2.x + co.D * s2.stop() - h[t]));
  }
  return res;
}

std::vector<double> dissipation_residuals(const Trajectory& traj, const LyapCoeffs& co) {
  const bool multi = traj.params.variant == Variant::multi_agent;
  const double nu0 = traj.params.agents.nu0;
  const double gx_coef = multi ? co.C + nu0 * co.D : co.C;
  const std::vector<double> h = h_series(traj);

  auto v1_at = [&](std::size_t t) {
    const SystemState& st = traj.states[t];
    const SystemState& pv = traj.states[t - 1];
    double quad = gx_coef * sq(st.x - pv.x) + sq(q_of(st.x, st.stop(), co));
    if (multi) {
      for (std::size_t i = 0; i < st.s_vec.size(); ++i)
        quad += co.D * traj.params.agents.agents[i].nu * sq(st.s_vec[i] - pv.s_vec[i]);
    } else {
      quad += co.D * sq(st.stop() - pv.stop());
    }
    return 0.5 * quad;
  };

  std::vector<double> res;
  res.reserve(traj.states.size());
  for (std::size_t t = 2; t < traj.states.size(); ++t) {
    const SystemState& s2 = traj.states[t];
    const SystemState& s1 = traj.states[t - 1];
    const SystemState& s0 = traj.states[t - 2];
    const double gx = s2.x - s1.x;
    const double gx_prev = s1.x - s0.x;
    const double gs = s2.stop() - s1.stop();
    const double gs_prev = s1.stop() - s0.stop();
    const double q = q_of(s2.x, s2.stop(), co);
    const double q_prev = q_of(s1.x, s1.stop(), co);
    const double gq = q - q_prev;
    double lhs = v1_at(t) - v1_at(t - 1) + 0.5 * sq(gq) - h[t] * gq;
    if (multi) {
      lhs += 0.5 * (co.C + nu0 * co.D) * sq(gx - gx_prev);
      lhs += (co.A * co.C + nu0 * (co.B * co.C + co.A * co.D)) * sq(gx);
      lhs += co.B * co.D * sq(gs);
      for (std::size_t i = 0; i < s2.s_vec.size(); ++i) {
        const double nu = traj.params.agents.agents[i].nu;
        const double gsi = s2.s_vec[i] - s1.s_vec[i];
        const double gsi_prev = s1.s_vec[i] - s0.s_vec[i];
        lhs += 0.5 * nu * co.D * sq(gsi - gsi_prev);
        lhs += (co.B * co.C + co.A * co.D) * nu * sq(gsi);
      }
    } else {
      lhs += 0.5 * co.C * sq(gx - gx_prev) + 0.5 * co.D * sq(gs - gs_prev);
      lhs += co.A * co.C * sq(gx) + (co.B * co.C + co.A * co.D + co.B * co.D) * sq(gs);
    }
    res.push_back(lhs);
  }
  return res;
}

DecayFitAccumulator::DecayFitAccumulator()
    : mu_cap_(std::numeric_limits<double>::infinity()) {
  // log-spaced candidate decay rates
  constexpr int kGrid = 241;
  mu_grid_.reserve(kGrid);
  for (int j = 0; j < kGrid; ++j) mu_grid_.push_back(std::pow(10.0, -6.0 + 8.0 * j / (kGrid - 1)));
  required_L_.assign(mu_grid_.size(), 0.0);
}

void DecayFitAccumulator::add(double w_prev, double w, double h_abs, double w_floor) {
  w = std::max(w, 0.0);
  w_prev = std::max(w_prev, 0.0);
  if (w < w_floor && w_prev < w_floor) return;  // numerically converged tail
  ++steps_;
  if (h_abs < 1e-300 || std::isnan(h_abs)) {
    if (w == 0.0) return;
    const double ratio = (w_prev - w) / w;
    if (ratio < -1e-13) {
      violation_ = true;
      return;
    }
    if (std::abs(w_prev - w) <= 1e-13 * std::max(w, w_prev)) return;  // tie within rounding
    mu_cap_ = std::min(mu_cap_, ratio);
    return;
  }
  any_noisy_ = true;
  if (w == 0.0) return;  // inequality holds for every (mu, L)
  const double root = std::sqrt(w);
  for (std::size_t j = 0; j < mu_grid_.size(); ++j) {
    const double need = (w - w_prev + mu_grid_[j] * w) / (h_abs * root);
    if (need > required_L_[j]) required_L_[j] = need;
  }
}

void DecayFitAccumulator::add_track(const LyapTrack& track) {
  // Floor scaled from the track's own peak energy: W has units of state^2,
  // so the frozen-state jitter sits near (ulp of the state)^2, many orders
  // below peak * 1e-26.
  double peak = 0.0;
  for (const LyapSample& s : track.samples) peak = std::max(peak, s.W);
  const double w_floor = std::max(kWFloor, 1e-26 * peak);
  for (std::size_t i = 1; i < track.samples.size(); ++i)
    add(track.samples[i - 1].W, track.samples[i].W, std::abs(track.samples[i].h), w_floor);
}

DecayFit DecayFitAccumulator::finalize() const {
  DecayFit fit;
  fit.constrained_steps = steps_;
  fit.monotone_when_noiseless = !violation_;
  if (violation_ || steps_ == 0) return fit;
  if (!any_noisy_) {
    fit.mu = std::min(mu_cap_, mu_grid_.back());
    fit.L = 0.0;
    return fit;
  }
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mu_grid_.size(); ++j) {
    if (mu_grid_[j] > mu_cap_) break;
    const double score = required_L_[j] / mu_grid_[j];
    if (score <= best_score) {  // ties resolve to the larger decay rate
      best_score = score;
      fit.mu = mu_grid_[j];
      fit.L = required_L_[j];
    }
  }
  return fit;
}

DecayFit fit_decay(std::span<const LyapTrack> tracks) {
  DecayFitAccumulator acc;
  for (const LyapTrack& tr : tracks) acc.add_track(tr);
  return acc.finalize();
}

}  // namespace hysteresim
