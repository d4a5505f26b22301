#include "hysteresim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <nlohmann/json.hpp>

#include "hysteresim/analysis.hpp"
#include "hysteresim/equilibria.hpp"
#include "hysteresim/errors.hpp"
#include "hysteresim/io.hpp"
#include "hysteresim/lyapunov.hpp"

namespace hysteresim {

namespace {

using ordered_json = nlohmann::ordered_json;

bool log_enabled() {
  static const bool enabled = [] {
    const char* env = std::getenv("HYSTERESIM_LOG");
    return env != nullptr && std::string(env) != "" && std::string(env) != "0";
  }();
  return enabled;
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[hysteresim] " << msg << "\n";
}

std::string out_path(const RunOptions& opt, const RunConfig& cfg, const std::string& suffix) {
  std::filesystem::create_directories(opt.out_dir);
  return (std::filesystem::path(opt.out_dir) / (cfg.output_prefix + suffix)).string();
}

OutputMeta make_meta(const RunConfig& cfg, const RunOptions& opt) {
  OutputMeta meta;
  meta.config_hash = cfg.config_hash;
  meta.config_name = std::filesystem::path(opt.config_path).filename().string();
  std::string ov;
  if (opt.seed) ov += "seed=" + std::to_string(*opt.seed);
  if (opt.horizon) ov += (ov.empty() ? "" : " ") + std::string("horizon=") + std::to_string(*opt.horizon);
  meta.overrides = ov;
  return meta;
}

void apply_overrides(RunConfig& cfg, const RunOptions& opt) {
  if (opt.seed) cfg.noise.seed = *opt.seed;
  if (opt.horizon) cfg.horizon = *opt.horizon;
}

ordered_json json_header(const RunConfig& cfg) {
  ordered_json j;
  j["tool_version"] = kToolVersion;
  j["config_hash"] = cfg.config_hash;
  return j;
}

ordered_json json_optional(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

void write_json(const std::string& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Diagnostics need C > 0 (c1 > 1); otherwise the trajectory is written bare.
std::optional<LyapTrack> try_track(const Trajectory& traj, std::optional<double> lambda) {
  try {
    return make_track(traj, lambda);
  } catch (const Error& e) {
    log_line(std::string("diagnostics unavailable: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace

int run_simulate(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  const Trajectory traj = simulate(cfg.initial_state(), cfg.params, cfg.noise, cfg.horizon);
  const std::optional<LyapTrack> track = try_track(traj, cfg.lambda);
  const std::string csv = out_path(opt, cfg, "_trajectory.csv");
  write_trajectory_csv(csv, traj, track ? &*track : nullptr, make_meta(cfg, opt));
  std::cout << "wrote " << csv << " (" << traj.states.size() << " rows)\n";
  if (opt.gnuplot) {
    const std::string gp = out_path(opt, cfg, "_trajectory.gp");
    write_gnuplot_script(gp, std::filesystem::path(csv).filename().string(), make_meta(cfg, opt));
    std::cout << "wrote " << gp << "\n";
  }
  return 0;
}

int run_equilibria(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  const ModelParams& p = cfg.params;
  std::string out;
  out += "# ";
  out += kToolVersion;
  out += "\n# config_hash: " + cfg.config_hash;
  out += "\n# model: ";
  out += variant_name(p.variant);

  const double kap = kappa(p);
  out += "\n# kappa: " + format_double(kap);
  const LyapCoeffs co = reduced_coeffs(p);
  out += "\n# C: " + format_double(co.C) + "\n# D: " + format_double(co.D) + "\n";

  if (p.variant == Variant::multi_agent) {
    out += "s_coords,x,y,p,r\n";
    const std::size_t n = p.agents.size();
    const std::size_t corners = std::size_t{1} << std::min<std::size_t>(n, 12);
    for (std::size_t mask = 0; mask < corners; ++mask) {
      std::vector<double> stops(n);
      for (std::size_t i = 0; i < n; ++i)
        stops[i] = (mask >> i & 1) ? p.agents.agents[i].rho : -p.agents.agents[i].rho;
      const SystemState eq = equilibrium_multi(stops, p);
      std::string coords;
      for (std::size_t i = 0; i < n; ++i)
        coords += (i ? ";" : "") + format_double(stops[i]);
      out += coords + "," + format_double(eq.x) + "," + format_double(eq.y) + "," +
             format_double(eq.p) + "," + format_double(eq.r) + "\n";
    }
  } else if (p.variant == Variant::sticky_bank) {
    out += "u,v,x,y,p,r\n";
    const int nu = 11, nv = 5;
    for (int i = 0; i < nu; ++i) {
      const double u = p.rho == 0.0 ? 0.0 : -p.rho + 2.0 * p.rho * i / (nu - 1);
      for (int j = 0; j < nv; ++j) {
        const double v = p.sigma == 0.0 ? 0.0 : -p.sigma + 2.0 * p.sigma * j / (nv - 1);
        const auto eq = equilibrium_sticky(u, v, p);
        out += format_double(u) + "," + format_double(v) + "," + format_double(eq[0]) + "," +
               format_double(eq[1]) + "," + format_double(eq[2]) + "," + format_double(eq[3]) +
               "\n";
        if (p.sigma == 0.0) break;
      }
      if (p.rho == 0.0) break;
    }
  } else {
    out += "u,x,y,p\n";
    const int nu = 21;
    for (int i = 0; i < nu; ++i) {
      const double u = p.rho == 0.0 ? 0.0 : -p.rho + 2.0 * p.rho * i / (nu - 1);
      const auto eq = equilibrium_representative(u, p);
      out += format_double(u) + "," + format_double(eq[0]) + "," + format_double(eq[1]) + "," +
             format_double(eq[2]) + "\n";
      if (p.rho == 0.0) break;
    }
  }
  const std::string path = out_path(opt, cfg, "_equilibria.csv");
  write_text_file(path, out);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_verify_lyapunov(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  const Trajectory traj = simulate(cfg.initial_state(), cfg.params, cfg.noise, cfg.horizon);

  const LyapCoeffs co = reduced_coeffs(cfg.params);
  double f_grid = 0.0;
  double lambda;
  if (cfg.lambda.has_value()) {
    lambda = *cfg.lambda;
    f_grid = fit_F_grid(traj, co);
  } else {
    lambda = default_lambda(traj, co, &f_grid);
  }
  const LyapTrack track = cfg.params.variant == Variant::multi_agent
                              ? lyapunov_track_multi(traj, co, lambda)
                              : lyapunov_track(traj, co, lambda);

  const std::vector<double> reduced = reduced_residuals(traj);
  const double reduced_max = reduced.empty() ? 0.0 : *std::max_element(reduced.begin(), reduced.end());

  const std::vector<double> diss = dissipation_residuals(traj, co);
  double diss_max = 0.0;
  bool diss_ok = true;
  for (std::size_t i = 0; i < diss.size(); ++i) {
    const double scale = std::max(1.0, track.samples[i].V1);
    diss_max = std::max(diss_max, diss[i]);
    if (diss[i] > 1e-9 * scale) diss_ok = false;
  }

  bool w_nonneg = true;
  bool w_monotone = true;
  for (std::size_t i = 0; i < track.samples.size(); ++i) {
    const LyapSample& s = track.samples[i];
    if (s.W < -1e-12 * std::max(1.0, s.V1)) w_nonneg = false;
    if (i > 0) {
      const double prev = track.samples[i - 1].W;
      if (s.W > prev + 1e-12 * std::max({1.0, s.W, prev}) && std::isnan(s.h) == false &&
          std::abs(s.h) < 1e-300)
        w_monotone = false;
    }
  }

  DecayFitAccumulator acc;
  acc.add_track(track);
  const DecayFit fit = acc.finalize();

  const bool noiseless = cfg.noise.declared_bound() == 0.0 && cfg.params.sigma == 0.0;
  bool pass = reduced_max < 1e-9 && diss_ok && w_nonneg;
  if (noiseless) pass = pass && w_monotone && fit.mu.has_value() && *fit.mu > 0.0;

  ordered_json cert = json_header(cfg);
  cert["lambda"] = track.lambda;
  cert["lambda_max"] = track.lambda_cap;
  cert["f_grid"] = f_grid;
  cert["mu_hat"] = json_optional(fit.mu);
  cert["L_hat"] = json_optional(fit.L);
  cert["max_residuals"] = {{"reduced_equation", reduced_max}, {"dissipation", diss_max}};
  cert["checks"] = {{"reduced_equation", reduced_max < 1e-9},
                    {"dissipation", diss_ok},
                    {"w_nonnegative", w_nonneg},
                    {"w_monotone_noiseless", !noiseless || w_monotone},
                    {"positive_decay_rate", !noiseless || (fit.mu.has_value() && *fit.mu > 0.0)}};
  cert["status"] = pass ? "pass" : "fail";

  const std::string samples = out_path(opt, cfg, "_lyapunov.csv");
  write_samples_csv(samples, track, make_meta(cfg, opt));
  const std::string cert_path = out_path(opt, cfg, "_certificate.json");
  write_json(cert_path, cert);
  std::cout << "wrote " << samples << "\nwrote " << cert_path << "\nstatus: "
            << (pass ? "pass" : "fail") << "\n";
  return pass ? 0 : 1;
}

int run_verify_bounds(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  std::vector<double> rhos = cfg.bounds_rhos;
  if (rhos.empty()) rhos.push_back(cfg.params.rho);
  std::vector<std::uint64_t> seeds = cfg.bounds_seeds;
  if (seeds.empty() && cfg.bounds_seed_count > 0) {
    for (std::uint64_t s = 0; s < cfg.bounds_seed_count; ++s) seeds.push_back(cfg.noise.seed + s);
  }
  if (seeds.empty()) seeds.push_back(cfg.noise.seed);

  std::vector<Trajectory> batch;
  batch.reserve(rhos.size() * seeds.size());
  for (double rho : rhos) {
    for (std::uint64_t seed : seeds) {
      ModelParams params = cfg.params;
      params.rho = rho;
      NoiseSpec noise = cfg.noise;
      noise.seed = seed;
      const SystemState init =
          make_initial_state(params, cfg.x0, cfg.y0, cfg.p0, cfg.r0, noise.sample(0));
      batch.push_back(simulate(init, params, noise, cfg.bounds_horizon));
      log_line("bounds run rho=" + std::to_string(rho) + " seed=" + std::to_string(seed));
    }
  }

  const BoundsReport report =
      verify_bounds(batch, cfg.noise.declared_bound(), cfg.bounds_window_fraction);

  ordered_json j = json_header(cfg);
  j["status"] = report.status;
  j["certificate_kind"] = "empirical";
  j["sigma"] = report.sigma;
  j["m"] = report.m;
  j["hat_sigma"] = report.hat_sigma;
  j["Lp"] = report.Lp;
  j["Lpp"] = report.Lpp;
  j["L1"] = report.L1;
  j["L2"] = report.L2;
  j["lambda"] = report.lambda;
  j["mu_hat"] = json_optional(report.mu_hat);
  j["L_hat"] = json_optional(report.L_hat);
  j["bounds"] = {{"W", report.w_bound},
                 {"x", report.x_bound},
                 {"y", report.y_bound},
                 {"p", report.x_bound},
                 {"r", report.r_bound}};
  j["rho_spread"] = report.rho_spread;
  ordered_json runs = ordered_json::array();
  for (const BoundsRun& run : report.runs) {
    runs.push_back({{"rho", run.rho},
                    {"seed", run.seed},
                    {"tail_x", run.tails.x_dev},
                    {"tail_y", run.tails.y_dev},
                    {"tail_p", run.tails.p_dev},
                    {"tail_r", run.tails.r_dev},
                    {"tail_W", run.tails.w_tail}});
  }
  j["runs"] = runs;

  const std::string path = out_path(opt, cfg, "_bounds.json");
  write_json(path, j);
  std::cout << "wrote " << path << "\nstatus: " << report.status << "\n";
  return report.status == "fail" ? 1 : 0;
}

int run_pi_invert(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  if (!cfg.pi_operator_given) throw ValidationError("pi-invert requires a 'pi' config block");
  const PiOperator& op = cfg.pi_operator;
  const PiInverse inv = pi_invert_coeffs(op);

  std::vector<double> x, v, x_rec;
  if (!cfg.pi_input_x.empty()) {
    x = cfg.pi_input_x;
    v = pi_apply(op, x);
    x_rec = pi_invert_apply(inv, v);
  } else {
    v = cfg.pi_input_v;
    x_rec = pi_invert_apply(inv, v);
  }

  double max_err = 0.0;
  if (!x.empty()) {
    for (std::size_t t = 0; t < x.size(); ++t) max_err = std::max(max_err, std::abs(x[t] - x_rec[t]));
  }

  ordered_json j = json_header(cfg);
  j["A"] = op.partial_sums();
  j["zeta"] = inv.zeta;
  j["sigma"] = inv.sigma;
  j["gamma"] = inv.gamma;
  if (!x.empty()) j["max_roundtrip_error"] = max_err;
  const std::string jpath = out_path(opt, cfg, "_pi.json");
  write_json(jpath, j);

  std::string csv = "# ";
  csv += kToolVersion;
  csv += "\n# config_hash: " + cfg.config_hash + "\n";
  csv += x.empty() ? "t,v,x_reconstructed\n" : "t,x,v,x_reconstructed,abs_error\n";
  for (std::size_t t = 0; t < v.size(); ++t) {
    csv += std::to_string(t);
    if (!x.empty()) csv += "," + format_double(x[t]);
    csv += "," + format_double(v[t]) + "," + format_double(x_rec[t]);
    if (!x.empty()) csv += "," + format_double(std::abs(x[t] - x_rec[t]));
    csv += "\n";
  }
  const std::string cpath = out_path(opt, cfg, "_pi.csv");
  write_text_file(cpath, csv);
  std::cout << "wrote " << jpath << "\nwrote " << cpath << "\n";
  return 0;
}

int run_oracle_minvar(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  if (cfg.minvar_v.empty()) throw ValidationError("oracle-minvar requires a 'minvar' config block");
  const double dp = min_variation_oracle(cfg.minvar_v, cfg.minvar_sigma, cfg.minvar_r0,
                                         cfg.minvar_grid, cfg.minvar_budget);
  const std::vector<double> play =
      play_apply(cfg.minvar_sigma, cfg.minvar_v.front() - cfg.minvar_r0, cfg.minvar_v);
  const double play_tv = total_variation(play);

  ordered_json j = json_header(cfg);
  j["sigma"] = cfg.minvar_sigma;
  j["r0"] = cfg.minvar_r0;
  j["grid"] = cfg.minvar_grid;
  j["min_variation"] = dp;
  j["play_variation"] = play_tv;
  j["difference"] = play_tv - dp;
  const std::string path = out_path(opt, cfg, "_minvar.json");
  write_json(path, j);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_sweep(RunConfig cfg, const RunOptions& opt) {
  apply_overrides(cfg, opt);
  if (!cfg.sweep_given) throw ValidationError("sweep requires a 'sweep' config block");
  cfg.sweep.base.noise.seed = cfg.noise.seed;
  const std::vector<SweepRow> rows = run_sweep(cfg.sweep);

  std::string out = "# ";
  out += kToolVersion;
  out += "\n# config_hash: " + cfg.config_hash + "\n";
  for (const SweepAxis& axis : cfg.sweep.axes) out += axis.param + ",";
  out += "classification,limit_u,distance,residual,tail_x,message\n";
  for (const SweepRow& row : rows) {
    for (double c : row.coords) out += format_double(c) + ",";
    out += row.classification + "," + format_double(row.limit_u) + "," +
           format_double(row.distance) + "," + format_double(row.residual) + "," +
           format_double(row.tail_x) + "," + row.message + "\n";
  }
  const std::string path = out_path(opt, cfg, "_sweep.csv");
  write_text_file(path, out);
  std::cout << "wrote " << path << " (" << rows.size() << " cells)\n";
  return 0;
}

namespace {

// Effective configuration after defaults, echoed at diagnostic verbosity.
ordered_json effective_config(const RunConfig& cfg) {
  ordered_json j;
  j["model"] = variant_name(cfg.params.variant);
  j["params"] = {{"a1", cfg.params.a1}, {"a2", cfg.params.a2}, {"b1", cfg.params.b1},
                 {"b2", cfg.params.b2}, {"c1", cfg.params.c1}, {"c2", cfg.params.c2}};
  j["rho"] = cfg.params.rho;
  j["sigma"] = cfg.params.sigma;
  if (cfg.params.variant == Variant::multi_agent) {
    ordered_json agents = ordered_json::array();
    for (const PiAgent& a : cfg.params.agents.agents)
      agents.push_back({{"nu", a.nu}, {"rho", a.rho}, {"beta", a.beta}});
    j["agents"] = {{"nu0", cfg.params.agents.nu0}, {"agents", agents}};
  }
  j["init"] = {{"x", cfg.x0}, {"y", cfg.y0}};
  if (cfg.p0) j["init"]["p"] = *cfg.p0;
  if (cfg.r0) j["init"]["r"] = *cfg.r0;
  j["horizon"] = cfg.horizon;
  j["seed"] = cfg.noise.seed;
  j["output_prefix"] = cfg.output_prefix;
  return j;
}

}  // namespace

int dispatch(const std::string& subcommand, const RunOptions& opt) {
  try {
    RunConfig cfg = load_config(opt.config_path);
    log_line("loaded config " + opt.config_path + " (hash " + cfg.config_hash + ")");
    log_line("effective config: " + effective_config(cfg).dump());
    if (subcommand == "simulate") return run_simulate(std::move(cfg), opt);
    if (subcommand == "equilibria") return run_equilibria(std::move(cfg), opt);
    if (subcommand == "verify-lyapunov") return run_verify_lyapunov(std::move(cfg), opt);
    if (subcommand == "verify-bounds") return run_verify_bounds(std::move(cfg), opt);
    if (subcommand == "pi-invert") return run_pi_invert(std::move(cfg), opt);
    if (subcommand == "oracle-minvar") return run_oracle_minvar(std::move(cfg), opt);
    if (subcommand == "sweep") return run_sweep(std::move(cfg), opt);
    std::cerr << "unknown subcommand: " << subcommand << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "config validation error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInit& e) {
    std::cerr << "config validation error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidPi& e) {
    std::cerr << "config validation error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hysteresim
