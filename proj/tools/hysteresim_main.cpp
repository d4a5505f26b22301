#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hysteresim/io.hpp"
#include "hysteresim/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Piecewise-linear macro models with play-operator hysteresis: simulation, "
               "exact Prandtl-Ishlinskii inversion and Lyapunov certificates"};
  app.set_version_flag("--version", std::string(hysteresim::kToolVersion));
  app.require_subcommand(1);

  hysteresim::RunOptions opt;
  std::string subcommand;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "path to the JSON run configuration")->required();
    cmd->add_option("--out", opt.out_dir, "output directory (default: current)");
    cmd->add_option("--seed", [&](const CLI::results_t& res) {
      try {
        opt.seed = std::stoull(res[0]);
      } catch (const std::exception&) {
        return false;
      }
      return true;
    }, "override the config seed");
    cmd->add_option("--horizon", [&](const CLI::results_t& res) {
      try {
        opt.horizon = std::stoll(res[0]);
      } catch (const std::exception&) {
        return false;
      }
      return true;
    }, "override the config horizon");
    cmd->callback([&, cmd] { subcommand = cmd->get_name(); });
  };

  CLI::App* sim = app.add_subcommand("simulate", "run one trajectory and write it as CSV");
  add_common(sim);
  sim->add_flag("--gnuplot", opt.gnuplot, "also emit a companion gnuplot script");

  add_common(app.add_subcommand("equilibria", "write the equilibrium set parameterization"));
  add_common(app.add_subcommand("verify-lyapunov",
                                "track the energy functionals and write a decay certificate"));
  add_common(app.add_subcommand("verify-bounds",
                                "run a batch and check tails against the noise-robustness bounds"));
  add_common(app.add_subcommand("pi-invert",
                                "invert a Prandtl-Ishlinskii operator and reconstruct its input"));
  add_common(app.add_subcommand("oracle-minvar",
                                "dynamic-programming minimal-total-variation oracle"));
  add_common(app.add_subcommand("sweep", "classify a parameter grid"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help/version or the usage error
    return code == 0 ? 0 : 2;
  }
  return hysteresim::dispatch(subcommand, opt);
}
