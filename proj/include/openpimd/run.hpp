#pragma once

#include <memory>
#include <string>
#include <vector>

#include "openpimd/dynamics.hpp"
#include "openpimd/estimators.hpp"
#include "openpimd/io.hpp"
#include "openpimd/oracle1d.hpp"
#include "openpimd/rdm.hpp"
#include "openpimd/ves.hpp"

namespace openpimd {

// Everything a run needs; defaults reproduce the reference protocol rows
// (run-1d: beta 5000, 12500 MD steps per variational step, dt 10, mu 1e-4,
// 400 beads, 16 walkers).  All quantities in atomic units.
struct RunConfig {
  std::string mode = "run-1d";  // run-1d | run-many | run-rdm | oracle

  // Sampling.
  double beta = 5000.0;
  int beads = 400;
  double dt = 10.0;
  double mu = 1e-4;
  long md_steps = 12500;
  long variational_steps = 1000;
  int walkers = 16;
  std::uint64_t seed = 12345;
  int threads = 0;  // 0 -> hardware concurrency
  long burnin_steps = -1;  // -1 -> md_steps
  long sample_stride = 10;
  long checkpoint_interval = 200;
  double wall = 3.0;
  bool com_removal = false;
  bool rdm = false;  // 2D (r, r') order parameter instead of x

  // Model.
  std::string model_kind = "double-well";
  double well_v0 = 0.006;
  double well_a = 0.6;
  double well_ext_lo = -2.0;
  double well_ext_hi = 2.0;
  double particle_mass = 1836.0;
  double k_perp = 0.05;
  double harmonic_omega = 1.0;
  double m_b = 29376.0;
  double m_c = 29376.0;
  double d_bc = 4.87;
  double k_anchor = 0.5;
  double bath_kappa = 1.5;
  std::vector<double> bath_omegas;     // empty -> default log-spaced set
  std::vector<double> bath_couplings;  // empty -> derived from bath_kappa
  std::vector<double> bath_masses;

  // Bias basis.
  double ves_domain = 3.0;    // x in [-domain, domain]
  double rdm_extent = 1.8;    // (r, r') box
  int rdm_bins = 73;
  double wall_stiffness = 1.0;
  std::string warm_start;     // bias checkpoint to start from

  // Thermostat.
  std::string thermostat_kind = "white";  // white | gle | none
  double gamma0 = 5e-3;
  double gamma_scale = 2.0;
  std::string gle_file;

  // Output and analysis.
  std::string out_dir = "run_out";
  std::string restart;
  double tail_fraction = 0.5;
  double max_drift_z = 3.0;
  int bootstrap_resamples = 100;
  int x_points = 601;
  double p_max = 20.0;
  int p_points = 401;

  // Oracle.
  double oracle_extent = 6.0;
  int oracle_points = 2001;
  int oracle_states = 10;

  static RunConfig defaults_for(const std::string& mode);
  static RunConfig from_file(const std::string& path, const std::string& mode);
  void apply_key(const std::string& key, const std::string& value);
  void validate() const;

  std::unique_ptr<PotentialModel> make_model() const;
  BasisSet make_basis() const;
  IntegratorConfig make_integrator_config() const;

  // Canonical echo; identical configs produce identical manifests.
  std::string manifest_text() const;
  std::string run_id() const;
};

struct RunOutputs {
  BiasState bias;
  std::vector<VesIterationRecord> records;
  long total_samples = 0;
};

// Multi-walker VES loop: every walker advances md_steps steps accumulating
// basis statistics, accumulators merge at the barrier, coefficients update,
// repeat.  Writes manifest, ves_log.csv, samples.csv, bias.ckpt and
// checkpoint.bin into out_dir.
RunOutputs run_variational(const RunConfig& config);

// Post-processing of a finished run directory: quasi-stationarity detection,
// block averaging, 100-fold block bootstrap, and the distribution files
// (free_energy.csv, ntilde.csv, np.csv; spectrum.csv and tx_curves.csv for
// rdm runs).  Refuses runs without a stationary tail.
struct AnalysisResult {
  std::vector<double> alpha_tail;   // tail-averaged coefficients
  DistributionResult free_energy;   // 1D only
  DistributionResult ntilde;
  DistributionResult momentum;
  std::vector<double> eigenvalues;        // rdm only
  std::vector<double> eigenvalue_sigma;   // rdm only
  UniformityReport uniformity;
  int block_size = 1;
  long tail_rows = 0;
  double max_drift_z = 0.0;
  bool stationary = false;
};

AnalysisResult analyze_run(const RunConfig& config);

// Exact 1D benchmark in the same CSV schema, flagged source = "exact".
void run_oracle(const RunConfig& config);

// Least-squares zero-temperature extrapolation of (beta, lambda) pairs read
// from a two-column CSV; writes fit_report.txt.
ExtrapolationFit extrapolate_file(const std::string& pairs_csv,
                                  const std::string& out_dir);

// Walker-level pieces, exposed for tests and the python bindings.
struct Walker {
  PathState state;
  Rng rng;
  std::unique_ptr<Integrator> integrator;

  Walker(const SystemSpec& spec, const PotentialModel& model,
         const IntegratorConfig& config, Rng stream);
};

namespace detail {
bool detect_stationarity(const std::vector<std::vector<double>>& alpha_rows,
                         double tail_fraction, double max_z,
                         double* worst_z = nullptr);
}

}  // namespace openpimd
