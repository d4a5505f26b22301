#pragma once

#include <optional>
#include <string>

#include "hysteresim/analysis.hpp"
#include "hysteresim/lyapunov.hpp"
#include "hysteresim/model.hpp"

namespace hysteresim {

inline constexpr const char* kToolVersion = "hysteresim 0.1.0";

// %.17g: enough digits for exact double round-trips, so identical runs
// produce byte-identical files.
std::string format_double(double v);

struct OutputMeta {
  std::string config_hash;
  std::string config_name;
  std::string overrides;  // empty unless CLI flags overrode the config
};

// Column contract:
//   t,x,y,p,r,s,<s_1..s_n>,q,V1,V0,W,h,eta,eps,xi,branch_flag
// with the per-agent stop columns present only for the multi-agent variant
// and undefined diagnostics written as empty fields. Metadata rides in
// leading '#' comment lines.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const LyapTrack* track, const OutputMeta& meta);

// Per-step energy samples: t,grad_x,grad_s,q,V1,V0,W,h.
void write_samples_csv(const std::string& path, const LyapTrack& track, const OutputMeta& meta);

// Companion gnuplot script referencing a trajectory CSV.
void write_gnuplot_script(const std::string& path, const std::string& csv_name,
                          const OutputMeta& meta);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace hysteresim
