#include "hysteresim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hysteresim/errors.hpp"

namespace hysteresim {

double tail_limsup(std::span<const double> series, std::size_t window) {
  if (window > series.size()) window = series.size();
  double worst = 0.0;
  for (std::size_t i = series.size() - window; i < series.size(); ++i) {
    if (std::isnan(series[i])) continue;
    worst = std::max(worst, series[i]);
  }
  return worst;
}

TailStats tail_stats(const Trajectory& traj, const LyapTrack& track, std::size_t window) {
  const ModelParams& p = traj.params;
  const double kap = kappa(p);
  TailStats stats;
  stats.window = std::min(window, traj.states.size());
  std::vector<double> xd, yd, pd, rd;
  xd.reserve(stats.window);
  for (std::size_t t = traj.states.size() - stats.window; t < traj.states.size(); ++t) {
    const SystemState& st = traj.states[t];
    const double u = st.stop();
    xd.push_back(std::abs(st.x - kap * u));
    yd.push_back(std::abs(st.y - p.b1 / p.b2 * u));
    pd.push_back(std::abs(st.p - (kap - 1.0) * u));
    rd.push_back(std::abs(st.r - p.c1 * kap * u - p.c2 * p.b1 / p.b2 * u));
  }
  stats.x_dev = tail_limsup(xd, xd.size());
  stats.y_dev = tail_limsup(yd, yd.size());
  stats.p_dev = tail_limsup(pd, pd.size());
  stats.r_dev = tail_limsup(rd, rd.size());
  std::vector<double> w;
  w.reserve(track.samples.size());
  for (const LyapSample& s : track.samples) w.push_back(s.W);
  stats.w_tail = tail_limsup(w, std::min(stats.window, w.size()));
  return stats;
}

ConvergenceReport verify_convergence(const Trajectory& traj, double tol_distance,
                                     double tol_residual) {
  const ModelParams& p = traj.params;
  ConvergenceReport report;
  const SystemState& last = traj.states.back();
  report.limit_u = last.stop();
  report.limit_stops = last.s_vec;
  if (!(p.c1 > 1.0)) {
    report.status = "out-of-hypothesis";
    return report;
  }
  report.distance = distance_to_attractor(last, p);
  const NoiseSlice zero;
  const SystemState next = step(last, p, zero);
  double resid = std::max({std::abs(next.x - last.x), std::abs(next.y - last.y),
                           std::abs(next.p - last.p), std::abs(next.r - last.r)});
  for (std::size_t i = 0; i < last.s_vec.size(); ++i)
    resid = std::max(resid, std::abs(next.s_vec[i] - last.s_vec[i]));
  report.residual = resid;
  report.status =
      (report.distance < tol_distance && report.residual < tol_residual) ? "pass" : "fail";
  return report;
}

BoundsReport verify_bounds(std::span<const Trajectory> batch, double m, double window_fraction) {
  if (batch.empty()) throw ValidationError("verify_bounds needs at least one trajectory");
  const ModelParams& p = batch.front().params;
  for (const Trajectory& traj : batch) {
    const ModelParams& q = traj.params;
    if (q.a1 != p.a1 || q.a2 != p.a2 || q.b1 != p.b1 || q.b2 != p.b2 || q.c1 != p.c1 ||
        q.c2 != p.c2 || q.sigma != p.sigma || q.variant != p.variant)
      throw ValidationError(
          "verify_bounds batches may differ only in the expectation threshold and the seed");
  }
  BoundsReport report;
  report.sigma = p.variant == Variant::sticky_bank ? p.sigma : 0.0;
  report.m = m;
  hat_sigma_coeffs(p, &report.Lp, &report.Lpp);
  report.hat_sigma = report.Lp * report.sigma + report.Lpp * m;
  if (!(p.c1 > 1.0)) {
    report.status = "out-of-hypothesis";
    return report;
  }

  const LyapCoeffs co = reduced_coeffs(p);
  // One shared mixing weight across the batch keeps the fitted pair valid
  // for every run's energy sequence.
  double lambda = std::numeric_limits<double>::infinity();
  for (const Trajectory& traj : batch) lambda = std::min(lambda, default_lambda(traj, co));
  report.lambda = lambda;

  DecayFitAccumulator acc;
  std::vector<LyapTrack> tracks;
  tracks.reserve(batch.size());
  for (const Trajectory& traj : batch) {
    tracks.push_back(traj.params.variant == Variant::multi_agent
                         ? lyapunov_track_multi(traj, co, lambda)
                         : lyapunov_track(traj, co, lambda));
    acc.add_track(tracks.back());
  }
  const DecayFit fit = acc.finalize();
  report.mu_hat = fit.mu;
  report.L_hat = fit.L;
  if (!fit.mu.has_value() || !fit.L.has_value()) {
    report.status = "degenerate";
    return report;
  }

  const double mu = *fit.mu;
  const double L = *fit.L;
  report.w_bound = (L * report.hat_sigma / mu) * (L * report.hat_sigma / mu);
  report.x_bound = 2.0 * L * report.hat_sigma / (mu * co.C);
  report.L1 = 2.0 * L * report.Lp / (mu * co.C);
  report.L2 = 2.0 * L * report.Lpp / (mu * co.C);
  report.y_bound =
      (1.0 - p.b1) / p.b2 * (2.0 * L * report.hat_sigma / mu) / std::sqrt(co.C) + m / p.b2;
  report.r_bound =
      (p.c1 + p.c2) * std::max(report.x_bound, report.y_bound) + report.sigma + m;

  bool ok = true;
  std::map<double, std::pair<double, int>> per_rho;  // rho -> (sum of x tails, count)
  // Relative slack for rounding in the bound chain; the absolute floors
  // cover converged runs whose theoretical tails are exactly zero but whose
  // states freeze at rounding-level deviations (W of order ulp^2).
  const double slack = 1e-12;
  const double coord_floor = 1e-10;
  const double w_floor = 1e-20;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Trajectory& traj = batch[i];
    const auto window =
        static_cast<std::size_t>(window_fraction * static_cast<double>(traj.states.size()));
    BoundsRun run;
    run.rho = traj.params.rho;
    run.seed = traj.seed;
    run.tails = tail_stats(traj, tracks[i], std::max<std::size_t>(window, 1));
    ok = ok && run.tails.x_dev <= report.x_bound * (1.0 + slack) + coord_floor;
    ok = ok && run.tails.p_dev <= report.x_bound * (1.0 + slack) + coord_floor;
    ok = ok && run.tails.y_dev <= report.y_bound * (1.0 + slack) + coord_floor;
    ok = ok && run.tails.r_dev <= report.r_bound * (1.0 + slack) + coord_floor;
    ok = ok && run.tails.w_tail <= report.w_bound * (1.0 + slack) + w_floor;
    auto& cell = per_rho[run.rho];
    cell.first += run.tails.x_dev;
    cell.second += 1;
    report.runs.push_back(run);
  }

  if (per_rho.size() > 1) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, mean = 0.0;
    for (const auto& [rho, cell] : per_rho) {
      const double avg = cell.first / cell.second;
      lo = std::min(lo, avg);
      hi = std::max(hi, avg);
      mean += avg;
    }
    mean /= static_cast<double>(per_rho.size());
    report.rho_spread = mean > 0.0 ? (hi - lo) / mean : 0.0;
  }

  report.status = ok ? "pass" : "fail";
  return report;
}

namespace {

void apply_axis(SweepCell& cell, const std::string& param, double value) {
  if (param == "a1") cell.params.a1 = value;
  else if (param == "a2") cell.params.a2 = value;
  else if (param == "b1") cell.params.b1 = value;
  else if (param == "b2") cell.params.b2 = value;
  else if (param == "c1") cell.params.c1 = value;
  else if (param == "c2") cell.params.c2 = value;
  else if (param == "rho") cell.params.rho = value;
  else if (param == "sigma") {
    cell.params.sigma = value;
    if (value > 0.0) cell.params.variant = Variant::sticky_bank;
  } else if (param == "m") {
    cell.noise.m_eta = cell.noise.m_eps = cell.noise.m_xi = value;
    if (value > 0.0 && cell.noise.kind == NoiseKind::zero) cell.noise.kind = NoiseKind::uniform;
  } else if (param == "x0") cell.x0 = value;
  else if (param == "y0") cell.y0 = value;
  else throw ValidationError("unknown sweep axis '" + param + "'");
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::size_t cells = 1;
  for (const SweepAxis& axis : spec.axes) {
    if (axis.values.empty()) return {};
    cells *= axis.values.size();
  }
  if (spec.axes.empty()) cells = 0;

  std::vector<SweepRow> rows;
  rows.reserve(cells);
  for (std::size_t index = 0; index < cells; ++index) {
    SweepRow row;
    SweepCell cell = spec.base;
    std::size_t rem = index;
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      const SweepAxis& axis = spec.axes[a];
      const double value = axis.values[rem % axis.values.size()];
      rem /= axis.values.size();
      row.coords.push_back(value);
    }
    std::reverse(row.coords.begin(), row.coords.end());
    try {
      for (std::size_t a = 0; a < spec.axes.size(); ++a)
        apply_axis(cell, spec.axes[a].param, row.coords[a]);
      cell.params.validate();

      // The stability hypothesis gates the classification before any judgment
      // about the dynamics; such cells may even diverge.
      if (!(cell.params.c1 > 1.0)) {
        row.classification = "out-of-hypothesis";
        rows.push_back(std::move(row));
        continue;
      }

      const SystemState init =
          make_initial_state(cell.params, cell.x0, cell.y0, cell.p0, cell.r0, cell.noise.sample(0));
      const Trajectory traj = simulate(init, cell.params, cell.noise, cell.horizon);

      double worst = 0.0;
      for (const SystemState& st : traj.states)
        worst = std::max({worst, std::abs(st.x), std::abs(st.y), std::abs(st.p)});
      if (!std::isfinite(worst) || worst > spec.bounded_threshold) {
        row.classification = "error";
        row.message = "trajectory left the bounded-threshold box";
        rows.push_back(std::move(row));
        continue;
      }

      const ConvergenceReport conv =
          verify_convergence(traj, spec.tol_distance, spec.tol_residual);
      row.limit_u = conv.limit_u;
      row.distance = conv.distance;
      row.residual = conv.residual;
      std::vector<double> xs;
      xs.reserve(traj.states.size());
      for (const SystemState& st : traj.states) xs.push_back(std::abs(st.x));
      row.tail_x = tail_limsup(xs, std::max<std::size_t>(traj.states.size() / 5, 1));
      row.classification = conv.pass() ? "converged" : "bounded-nonconvergent";
    } catch (const Error& e) {
      row.classification = "error";
      row.message = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace hysteresim
