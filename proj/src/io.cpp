#include "hysteresim/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hysteresim/errors.hpp"

namespace hysteresim {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void append_meta(std::string& out, const Trajectory& traj, const LyapTrack* track,
                 const OutputMeta& meta) {
  out += "# ";
  out += kToolVersion;
  out += "\n# config_hash: " + (meta.config_hash.empty() ? std::string("none") : meta.config_hash);
  if (!meta.config_name.empty()) out += "\n# config: " + meta.config_name;
  if (!meta.overrides.empty()) out += "\n# overrides: " + meta.overrides;
  out += "\n# model: ";
  out += variant_name(traj.params.variant);
  out += "\n# seed: " + std::to_string(traj.seed);
  out += "\n# lambda: ";
  out += track ? format_double(track->lambda) : "none";
  out += "\n";
}

void push_field(std::string& line, double v, bool defined) {
  line += ',';
  if (defined && !std::isnan(v)) line += format_double(v);
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const LyapTrack* track, const OutputMeta& meta) {
  const bool multi = traj.params.variant == Variant::multi_agent;
  const std::size_t n_agents = multi ? traj.params.agents.size() : 0;

  std::string out;
  out.reserve(traj.states.size() * 160 + 256);
  append_meta(out, traj, track, meta);
  out += "t,x,y,p,r,s";
  for (std::size_t i = 1; i <= n_agents; ++i) out += ",s_" + std::to_string(i);
  out += ",q,V1,V0,W,h,eta,eps,xi,branch_flag\n";

  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const SystemState& st = traj.states[t];
    std::string line = std::to_string(st.t);
    push_field(line, st.x, true);
    push_field(line, st.y, true);
    push_field(line, st.p, true);
    push_field(line, st.r, true);
    push_field(line, st.stop(), true);
    for (std::size_t i = 0; i < n_agents; ++i)
      push_field(line, i < st.s_vec.size() ? st.s_vec[i] : 0.0, i < st.s_vec.size());

    const LyapSample* sample = nullptr;
    if (track && t >= 2 && t - 2 < track->samples.size()) sample = &track->samples[t - 2];
    if (track) {
      const double q = q_of(st.x, st.stop(), track->coeffs);
      push_field(line, q, true);
    } else {
      push_field(line, 0.0, false);
    }
    push_field(line, sample ? sample->V1 : 0.0, sample != nullptr);
    push_field(line, sample ? sample->V0 : 0.0, sample != nullptr);
    push_field(line, sample ? sample->W : 0.0, sample != nullptr);
    push_field(line, sample ? sample->h : 0.0, sample != nullptr);
    push_field(line, traj.noise[t].eta, true);
    push_field(line, traj.noise[t].eps, true);
    push_field(line, traj.noise[t].xi, true);
    line += ',';
    if (t >= 1) line += std::to_string(traj.branch_flags[t]);
    line += '\n';
    out += line;
  }
  write_text_file(path, out);
}

void write_samples_csv(const std::string& path, const LyapTrack& track, const OutputMeta& meta) {
  std::string out;
  out += "# ";
  out += kToolVersion;
  out += "\n# config_hash: " + (meta.config_hash.empty() ? std::string("none") : meta.config_hash);
  out += "\n# lambda: " + format_double(track.lambda);
  out += "\n# lambda_cap: " + format_double(track.lambda_cap);
  out += "\nt,grad_x,grad_s,q,V1,V0,W,h\n";
  for (const LyapSample& s : track.samples) {
    std::string line = std::to_string(s.t);
    push_field(line, s.grad_x, true);
    push_field(line, s.grad_s, true);
    push_field(line, s.q, true);
    push_field(line, s.V1, true);
    push_field(line, s.V0, true);
    push_field(line, s.W, true);
    push_field(line, s.h, !std::isnan(s.h));
    line += '\n';
    out += line;
  }
  write_text_file(path, out);
}

void write_gnuplot_script(const std::string& path, const std::string& csv_name,
                          const OutputMeta& meta) {
  std::string out;
  out += "# ";
  out += kToolVersion;
  out += "\n# config_hash: " + (meta.config_hash.empty() ? std::string("none") : meta.config_hash);
  out += "\n# companion plot script; run: gnuplot ";
  out += path;
  out += "\nset datafile separator ','\n";
  out += "set key autotitle columnhead\n";
  out += "set xlabel 't'\n";
  out += "plot '" + csv_name + "' using 1:2 with lines title 'x', \\\n";
  out += "     '" + csv_name + "' using 1:3 with lines title 'y', \\\n";
  out += "     '" + csv_name + "' using 1:4 with lines title 'p', \\\n";
  out += "     '" + csv_name + "' using 1:5 with lines title 'r'\n";
  out += "pause -1 'press enter'\n";
  write_text_file(path, out);
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  out << contents;
  if (!out) throw Error("failed writing output file: " + path);
}

}  // namespace hysteresim
