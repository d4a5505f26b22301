#include "hysteresim/lyapunov.hpp"

#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "hysteresim/errors.hpp"
#include "test_support.hpp"

using namespace hysteresim;

namespace {

ModelParams ledger_params() {
  ModelParams p;
  p.a1 = 0.0;
  p.a2 = 1.0;
  p.b1 = 0.5;
  p.b2 = 1.0;
  p.c1 = 2.0;
  p.c2 = 0.5;
  p.rho = 1.0;
  return p;
}

Trajectory noiseless_run(double x0, double y0, double p0, std::int64_t horizon) {
  const ModelParams p = ledger_params();
  NoiseSpec zero;
  const SystemState init = make_initial_state(p, x0, y0, p0, std::nullopt, zero.sample(0));
  return simulate(init, p, zero, horizon);
}

Trajectory noisy_run(std::uint64_t seed, double m, std::int64_t horizon, double sigma = 0.0) {
  ModelParams p = ledger_params();
  if (sigma > 0.0) {
    p.sigma = sigma;
    p.variant = Variant::sticky_bank;
  }
  NoiseSpec noise;
  noise.kind = NoiseKind::uniform;
  noise.m_eta = noise.m_eps = noise.m_xi = m;
  noise.seed = seed;
  const SystemState init = make_initial_state(p, 0.2, 0.0, 0.2, std::nullopt, noise.sample(0));
  return simulate(init, p, noise, horizon);
}

}  // namespace

TEST_CASE("reduced-form coefficients") {
  const LyapCoeffs co = reduced_coeffs(ledger_params());
  CHECK(co.A == 0.5);
  CHECK(co.B == 1.0);
  CHECK(co.C == 2.0);
  CHECK(co.D == 2.5);

  ModelParams near_one = ledger_params();
  near_one.c1 = 1.0 + 1e-9;
  CHECK(reduced_coeffs(near_one).C == doctest::Approx(2e-9).epsilon(1e-6));
  CHECK(reduced_coeffs(near_one).C > 0.0);

  testrng::Rng rng(51);
  for (int k = 0; k < 200; ++k) {
    ModelParams q;
    q.a1 = rng.uniform(0.0, 0.9);
    q.a2 = rng.uniform(0.1, 2.0);
    q.b1 = rng.uniform(0.1, 0.9);
    q.b2 = rng.uniform(0.1, 2.0);
    q.c1 = rng.uniform(1.01, 3.0);
    q.c2 = rng.uniform(0.1, 2.0);
    const LyapCoeffs c = reduced_coeffs(q);
    CHECK(c.A > 0.0);
    CHECK(c.B > 0.0);
    CHECK(c.C > 0.0);
    CHECK(c.D > 0.0);
  }
}

TEST_CASE("q_of") {
  const LyapCoeffs co = reduced_coeffs(ledger_params());
  CHECK(q_of(0.0, 0.0, co) == 0.0);
  CHECK(q_of(1.0 / 7.0, -2.0 / 35.0, co) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));

  // q vanishes along the trajectory limit
  const Trajectory traj = noiseless_run(0.2, 0.0, 0.2, 5000);
  const SystemState& last = traj.states.back();
  CHECK(std::abs(q_of(last.x, last.stop(), co)) < 1e-10);
}

TEST_CASE("h series: zero in the autonomous case, bounded by hat sigma with noise") {
  {
    const Trajectory traj = noiseless_run(0.2, 0.0, 0.2, 100);
    const std::vector<double> h = h_series(traj);
    for (std::size_t t = 2; t < h.size(); ++t) CHECK(std::abs(h[t]) < 1e-13);
  }
  {
    const double m = 0.05, sigma = 0.3;
    const Trajectory traj = noisy_run(5, m, 2000, sigma);
    double lp = 0.0, lpp = 0.0;
    hat_sigma_coeffs(traj.params, &lp, &lpp);
    const double hat = lp * sigma + lpp * m;
    CHECK(lp == doctest::Approx(2.0).epsilon(1e-15));  // b2 a2 / ((1-a1)(1-b1))
    const std::vector<double> h = h_series(traj);
    for (std::size_t t = 2; t < h.size(); ++t) CHECK(std::abs(h[t]) <= hat + 1e-12);
  }
}

TEST_CASE("reduced second-order equation holds along every variant") {
  auto max_residual = [](const Trajectory& traj) {
    const std::vector<double> res = reduced_residuals(traj);
    return res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
  };
  CHECK(max_residual(noiseless_run(0.2, 0.0, 0.2, 500)) < 1e-9);
  CHECK(max_residual(noisy_run(7, 0.05, 500)) < 1e-9);
  CHECK(max_residual(noisy_run(8, 0.05, 500, 0.25)) < 1e-9);

  ModelParams mp = ledger_params();
  mp.variant = Variant::multi_agent;
  mp.agents.nu0 = 0.25;
  mp.agents.agents = {PiAgent{0.5, 0.5, 0.1}, PiAgent{0.25, 1.5, -0.2}};
  NoiseSpec noise;
  noise.kind = NoiseKind::uniform;
  noise.m_eta = noise.m_eps = noise.m_xi = 0.03;
  noise.seed = 11;
  const SystemState init =
      make_initial_state(mp, 0.5, -0.2, std::nullopt, std::nullopt, noise.sample(0));
  CHECK(max_residual(simulate(init, mp, noise, 500)) < 1e-9);
}

TEST_CASE("lambda_max: closed form and positive semidefiniteness") {
  LyapCoeffs co;
  co.A = 0.5;
  co.B = 1.0;
  co.C = 2.0;
  co.D = 2.5;
  const double lam = lambda_max(co);
  CHECK(lam == doctest::Approx((0.5 + std::sqrt(8.25)) / 2.0).epsilon(1e-15));
  CHECK(lam == doctest::Approx(1.68614).epsilon(1e-5));

  LyapCoeffs no_a = co;
  no_a.A = 0.0;
  CHECK(lambda_max(no_a) == doctest::Approx(std::sqrt(co.C)).epsilon(1e-15));

  // quadratic form (C/2) a^2 + lambda a b + (1/2 + lambda A/(2C)) b^2 stays
  // nonnegative just below the root
  const double lam_eps = lam * (1.0 - 1e-9);
  for (int i = 0; i <= 360; ++i) {
    const double th = 3.141592653589793 * i / 180.0;
    const double a = std::cos(th), b = std::sin(th);
    const double form =
        0.5 * co.C * a * a + lam_eps * a * b + (0.5 + lam_eps * co.A / (2.0 * co.C)) * b * b;
    CHECK(form >= -1e-12);
  }
}

TEST_CASE("track at an equilibrium is identically zero") {
  const ModelParams p = ledger_params();
  NoiseSpec zero;
  const auto eq = std::array<double, 3>{-0.375, 0.15, -0.675};  // u = 0.3
  const SystemState init = make_initial_state(p, eq[0], eq[1], eq[2], std::nullopt, zero.sample(0));
  const Trajectory traj = simulate(init, p, zero, 50);
  const LyapTrack track = lyapunov_track(traj, reduced_coeffs(p), 0.5);
  for (const LyapSample& s : track.samples) {
    CHECK(std::abs(s.V1) < 1e-25);
    CHECK(std::abs(s.V0) < 1e-25);
    CHECK(std::abs(s.W) < 1e-25);
  }
}

TEST_CASE("noiseless energy decays monotonically and the decay fit is positive") {
  const Trajectory traj = noiseless_run(0.2, 0.0, 0.2, 3000);
  const LyapTrack track = make_track(traj);
  REQUIRE(track.samples.size() >= 10);
  for (std::size_t i = 1; i < track.samples.size(); ++i) {
    CHECK(track.samples[i].W <=
          track.samples[i - 1].W + 1e-12 * std::max(1.0, track.samples[i - 1].W));
  }
  CHECK(track.samples.back().W < 1e-14 * track.samples.front().W);

  DecayFitAccumulator acc;
  acc.add_track(track);
  const DecayFit fit = acc.finalize();
  REQUIRE(fit.mu.has_value());
  CHECK(*fit.mu > 0.0);
  CHECK(fit.monotone_when_noiseless);

  // inadmissible mixing weights are rejected
  CHECK_THROWS_AS(lyapunov_track(traj, track.coeffs, -0.1), InadmissibleLambda);
  CHECK_THROWS_AS(lyapunov_track(traj, track.coeffs, track.lambda_cap * 1.01), InadmissibleLambda);
}

TEST_CASE("energy chain q^2 <= 2 V1 <= 4 W at the default lambda") {
  for (const Trajectory& traj : {noiseless_run(0.9, -0.5, 0.3, 400), noisy_run(3, 0.05, 400)}) {
    const LyapTrack track = make_track(traj);
    for (const LyapSample& s : track.samples) {
      CHECK(s.q * s.q <= 2.0 * s.V1 + 1e-12);
      CHECK(2.0 * s.V1 <= 4.0 * s.W + 1e-12 * std::max(1.0, s.V1));
      CHECK(s.V1 >= 0.0);
    }
  }
}

TEST_CASE("per-step dissipation inequality") {
  for (const Trajectory& traj :
       {noiseless_run(0.2, 0.0, 0.2, 500), noisy_run(13, 0.05, 500), noisy_run(14, 0.05, 500, 0.2)}) {
    const LyapCoeffs co = reduced_coeffs(traj.params);
    const std::vector<double> res = dissipation_residuals(traj, co);
    const LyapTrack track = lyapunov_track(traj, co, 0.25);
    for (std::size_t i = 0; i < res.size(); ++i)
      CHECK(res[i] <= 1e-9 * std::max(1.0, track.samples[i].V1));
  }
}

TEST_CASE("decay inequality certificate implies the tail bounds") {
  const double m = 0.04;
  std::vector<LyapTrack> tracks;
  std::vector<Trajectory> trajs;
  for (std::uint64_t seed : {21u, 22u, 23u}) trajs.push_back(noisy_run(seed, m, 20000));
  const LyapCoeffs co = reduced_coeffs(trajs[0].params);
  double lambda = 1e300;
  for (const Trajectory& tr : trajs) lambda = std::min(lambda, default_lambda(tr, co));
  DecayFitAccumulator acc;
  for (const Trajectory& tr : trajs) {
    tracks.push_back(lyapunov_track(tr, co, lambda));
    acc.add_track(tracks.back());
  }
  const DecayFit fit = acc.finalize();
  REQUIRE(fit.mu.has_value());
  REQUIRE(fit.L.has_value());
  const double mu = *fit.mu, L = *fit.L;

  // the fitted pair satisfies the per-step decay inequality everywhere
  for (const LyapTrack& track : tracks) {
    for (std::size_t i = 1; i < track.samples.size(); ++i) {
      const double w = std::max(track.samples[i].W, 0.0);
      const double w_prev = std::max(track.samples[i - 1].W, 0.0);
      CHECK(w - w_prev + mu * w <=
            L * std::abs(track.samples[i].h) * std::sqrt(w) + 1e-12 * std::max(1.0, w));
    }
  }

  // check the implied limsup bound on the tail
  double lp = 0.0, lpp = 0.0;
  hat_sigma_coeffs(trajs[0].params, &lp, &lpp);
  const double hat = lpp * m;  // sigma = 0
  const double w_bound = (L * hat / mu) * (L * hat / mu);
  for (const LyapTrack& track : tracks) {
    double tail = 0.0;
    for (std::size_t i = track.samples.size() * 4 / 5; i < track.samples.size(); ++i)
      tail = std::max(tail, track.samples[i].W);
    CHECK(tail <= w_bound * (1.0 + 1e-9));

    // x-deviation bound through q^2 <= 4 W
    const double x_bound = 2.0 * L * hat / (mu * co.C);
    for (std::size_t i = track.samples.size() * 4 / 5; i < track.samples.size(); ++i)
      CHECK(std::abs(track.samples[i].q) / co.C <= x_bound * (1.0 + 1e-9));
  }

  // window-averaged variant: with T-averages of |h| below their observed
  // level, the tail obeys the geometric-window bound
  const std::size_t T = 10;
  for (const LyapTrack& track : tracks) {
    double hat_T = 0.0;
    for (std::size_t i = 0; i + T <= track.samples.size(); ++i) {
      double avg = 0.0;
      for (std::size_t j = i; j < i + T; ++j) avg += std::abs(track.samples[j].h);
      hat_T = std::max(hat_T, avg / T);
    }
    const double growth = std::pow(1.0 + mu, static_cast<double>(T));
    const double bound_T = L * static_cast<double>(T) * hat_T * growth / (1.0 + mu) / (growth - 1.0);
    double tail = 0.0;
    for (std::size_t i = track.samples.size() * 4 / 5; i < track.samples.size(); ++i)
      tail = std::max(tail, track.samples[i].W);
    CHECK(tail <= bound_T * bound_T * (1.0 + 1e-9));
  }
}

TEST_CASE("multi-agent track with a single unit agent reduces to the plain track") {
  ModelParams mp = ledger_params();
  mp.variant = Variant::multi_agent;
  mp.agents.nu0 = 0.0;
  mp.agents.agents = {PiAgent{1.0, 1.0, 0.0}};
  NoiseSpec zero;
  const SystemState init = make_initial_state(mp, 0.2, 0.0, std::nullopt, std::nullopt, zero.sample(0));
  const Trajectory traj = simulate(init, mp, zero, 300);
  const LyapCoeffs co = reduced_coeffs(mp);
  const LyapTrack plain = lyapunov_track(traj, co, 0.4);
  const LyapTrack multi = lyapunov_track_multi(traj, co, 0.4);
  REQUIRE(plain.samples.size() == multi.samples.size());
  for (std::size_t i = 0; i < plain.samples.size(); ++i) {
    CHECK(plain.samples[i].V1 == multi.samples[i].V1);
    CHECK(plain.samples[i].V0 == multi.samples[i].V0);
    CHECK(plain.samples[i].W == multi.samples[i].W);
  }
}

TEST_CASE("multi-agent energy decays exponentially") {
  ModelParams mp = ledger_params();
  mp.variant = Variant::multi_agent;
  mp.agents.nu0 = 0.2;
  mp.agents.agents = {PiAgent{0.3, 0.5, 0.1}, PiAgent{0.5, 1.25, -0.3}};
  NoiseSpec zero;
  const SystemState init =
      make_initial_state(mp, 0.8, -0.3, std::nullopt, std::nullopt, zero.sample(0));
  const Trajectory traj = simulate(init, mp, zero, 4000);
  const LyapTrack track = make_track(traj);
  for (std::size_t i = 1; i < track.samples.size(); ++i)
    CHECK(track.samples[i].W <=
          track.samples[i - 1].W + 1e-12 * std::max(1.0, track.samples[i - 1].W));

  DecayFitAccumulator acc;
  acc.add_track(track);
  const DecayFit fit = acc.finalize();
  REQUIRE(fit.mu.has_value());
  CHECK(*fit.mu > 0.0);

  // exponential envelope W_t <= (1+mu)^{-(t-2)} W_2, down to the rounding
  // floor of the frozen fixed point (q of order ulp, so W of order ulp^2)
  const double w2 = track.samples.front().W;
  for (std::size_t i = 0; i < track.samples.size(); ++i) {
    const double envelope = w2 * std::pow(1.0 + *fit.mu, -static_cast<double>(i));
    CHECK(track.samples[i].W <= envelope * (1.0 + 1e-9) + 1e-28);
  }

  // admissibility cap respects the multi-agent minimum
  const double cap = lambda_max_multi(reduced_coeffs(mp), mp.agents);
  const LyapCoeffs co = reduced_coeffs(mp);
  CHECK(cap <= co.C + mp.agents.nu0 * co.D);
  CHECK(cap <= co.B * co.C + co.A * co.D);
}
