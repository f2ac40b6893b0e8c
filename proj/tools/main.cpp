#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "openpimd/run.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string restart;
  std::string out_dir;
  long seed = -1;
  int walkers = -1;
  int threads = -1;
  long variational_steps = -1;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "key = value config file");
  cmd->add_option("--restart", args->restart, "checkpoint to resume from");
  cmd->add_option("--seed", args->seed, "master seed");
  cmd->add_option("--walkers", args->walkers, "walker count");
  cmd->add_option("--threads", args->threads, "worker threads (0 = auto)");
  cmd->add_option("--steps", args->variational_steps, "variational steps");
  cmd->add_option("--out", args->out_dir, "output directory");
}

openpimd::RunConfig build_config(const std::string& mode,
                                 const CommonArgs& args) {
  openpimd::RunConfig config =
      args.config_path.empty()
          ? openpimd::RunConfig::defaults_for(mode)
          : openpimd::RunConfig::from_file(args.config_path, mode);
  config.mode = mode;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.walkers > 0) config.walkers = args.walkers;
  if (args.threads >= 0) config.threads = args.threads;
  if (args.variational_steps >= 0)
    config.variational_steps = args.variational_steps;
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.restart.empty()) config.restart = args.restart;
  return config;
}

int do_run(const std::string& mode, const CommonArgs& args) {
  openpimd::RunConfig config = build_config(mode, args);
  if (mode == "run-rdm") config.rdm = true;
  if (mode == "run-many" && config.model_kind == "double-well")
    config.model_kind = "triatomic-bath";
  const auto out = openpimd::run_variational(config);
  std::cout << "completed " << out.bias.iteration << " variational steps, "
            << out.total_samples << " samples -> " << config.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"open-path PIMD sampling of directional momentum distributions"};
  app.require_subcommand(1);

  CommonArgs run1d_args, many_args, rdm_args, oracle_args;
  CLI::App* run1d = app.add_subcommand(
      "run-1d", "VES-biased open-path PIMD on the 1D model");
  add_common(run1d, &run1d_args);
  CLI::App* many = app.add_subcommand(
      "run-many", "VES-biased open-path PIMD on the many-body model");
  add_common(many, &many_args);
  CLI::App* rdm = app.add_subcommand(
      "run-rdm", "2D (r, r') sampling of the reduced density matrix");
  add_common(rdm, &rdm_args);
  CLI::App* oracle = app.add_subcommand(
      "oracle", "exact 1D benchmark distributions");
  add_common(oracle, &oracle_args);

  std::string analyze_dir;
  double tail_fraction = 0.5, drift_z = 3.0;
  int resamples = 100;
  long analyze_seed = 12345;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "post-process a finished run directory");
  analyze->add_option("--dir", analyze_dir, "run directory")->required();
  analyze->add_option("--tail", tail_fraction, "tail fraction for averaging");
  analyze->add_option("--drift-z", drift_z, "stationarity drift tolerance");
  analyze->add_option("--resamples", resamples, "bootstrap resamples");
  analyze->add_option("--seed", analyze_seed, "bootstrap seed");

  std::string pairs_csv, extrap_out = "extrapolation";
  CLI::App* extrap = app.add_subcommand(
      "extrapolate", "linear zero-temperature extrapolation of eigenvalues");
  extrap->add_option("--pairs", pairs_csv,
                     "csv with beta,lambda columns")->required();
  extrap->add_option("--out", extrap_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run1d->parsed()) return do_run("run-1d", run1d_args);
    if (many->parsed()) return do_run("run-many", many_args);
    if (rdm->parsed()) return do_run("run-rdm", rdm_args);
    if (oracle->parsed()) {
      openpimd::RunConfig config = build_config("oracle", oracle_args);
      if (config.out_dir == "run_out") config.out_dir = "oracle_out";
      openpimd::run_oracle(config);
      std::cout << "oracle written to " << config.out_dir << "\n";
      return 0;
    }
    if (analyze->parsed()) {
      openpimd::RunConfig config;
      config.out_dir = analyze_dir;
      config.tail_fraction = tail_fraction;
      config.max_drift_z = drift_z;
      config.bootstrap_resamples = resamples;
      config.seed = static_cast<std::uint64_t>(analyze_seed);
      const auto result = openpimd::analyze_run(config);
      std::cout << "analysis written to " << analyze_dir
                << " (tail rows " << result.tail_rows << ", block "
                << result.block_size << ", uniformity p = "
                << result.uniformity.p_value << ")\n";
      return 0;
    }
    if (extrap->parsed()) {
      const auto fit = openpimd::extrapolate_file(pairs_csv, extrap_out);
      std::cout << "lambda(T=0) = " << fit.intercept << " (slope "
                << fit.slope << ")\n";
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
