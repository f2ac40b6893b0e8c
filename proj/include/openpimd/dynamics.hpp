#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "openpimd/normal_modes.hpp"
#include "openpimd/path.hpp"
#include "openpimd/rng.hpp"

namespace openpimd {

// Colored-noise thermostat: momentum stacked with s auxiliary partners,
// exact Ornstein-Uhlenbeck propagation P -> T P + S xi.
struct GleSpec {
  int aux_count = 0;        // s
  Eigen::MatrixXd drift;    // A_p, (s+1)x(s+1), 1/time
  Eigen::MatrixXd covariance;  // C_p; empty -> (1/beta) I (mass-scaled momenta)

  static GleSpec from_file(const std::string& path);
};

struct ThermostatSpec {
  enum class Kind { None, PerModeWhite, Gle };
  Kind kind = Kind::PerModeWhite;
  // White-noise friction: gamma_k = gamma_scale * omega_k for internal modes,
  // gamma0 for the centroid and the x degree of freedom.
  double gamma0 = 5e-3;
  double gamma_scale = 2.0;
  std::optional<GleSpec> gle;
};

struct IntegratorConfig {
  double dt = 10.0;
  double wall = 3.0;        // reflective bounds [-wall, wall] for x
  bool com_removal = true;  // Cartesian atoms only; p_x and internals excluded
  ThermostatSpec thermostat;
};

// Exact OU half-step operator for one stacked momentum vector, mass-scaled.
class OuUpdate {
 public:
  // T = exp(-A dt), S S^T = C - T C T^T.  Eigenvalues of the fluctuation
  // matrix below -1e-12 are a configuration error; tiny negatives clamp to 0.
  static OuUpdate make(const Eigen::MatrixXd& drift,
                       const Eigen::MatrixXd& covariance, double dt);

  void apply(Eigen::Ref<Eigen::VectorXd> stacked, Rng& rng) const;
  int size() const { return static_cast<int>(transition_.rows()); }
  const Eigen::MatrixXd& transition() const { return transition_; }
  const Eigen::MatrixXd& noise() const { return noise_; }

 private:
  Eigen::MatrixXd transition_;  // T
  Eigen::MatrixXd noise_;       // S
};

// x -> 2w - x (mirrored for -w), momentum flipped, repeated until inside.
void reflect_wall(double& x, double& px, double wall);

// Zeroes the total momentum of the Cartesian bead system, mass-weighted.
void remove_com_velocity(const SystemSpec& spec, PathState& state);

// Five-stage splitting of one MD step: thermostat half, potential kick half,
// exact normal-mode evolution of the full quadratic part (free rings plus the
// (x, p_x) oscillator at omega_x = 1/(beta hbar)), kick half, thermostat
// half; then COM removal and the x wall.
class Integrator {
 public:
  Integrator(const SystemSpec& spec, const IntegratorConfig& config);

  void step(PathState& state, const PotentialModel& model,
            const CollectiveBias* bias, Rng& rng);

  // The analytically integrated quadratic block alone (no thermostat, no
  // kick); exposed for conservation tests.
  void exact_harmonic_step(PathState& state, double dt) const;

  void thermostat_half_step(PathState& state, Rng& rng);

  // Thermalizes MD momenta and auxiliary variables from the Boltzmann
  // marginal at 1/beta.
  void draw_momenta(PathState& state, Rng& rng);

  const RingNormalModes& modes() const { return modes_; }
  const IntegratorConfig& config() const { return config_; }

  std::vector<double>& aux_state() { return aux_; }
  const std::vector<double>& aux_state() const { return aux_; }

 private:
  void kick(PathState& state, const PotentialModel& model,
            const CollectiveBias* bias, double dt_half);

  SystemSpec spec_;
  IntegratorConfig config_;
  RingNormalModes modes_;

  // Per-mode white-noise coefficients c1[k] = exp(-gamma_k dt/2) and the
  // matching noise amplitudes for unit mass (scaled by sqrt(m/beta)).
  std::vector<double> white_c1_, white_c2_;
  double white_c1_x_ = 1.0, white_c2_x_ = 0.0;

  std::optional<OuUpdate> gle_update_;
  std::vector<double> aux_;  // (dof*l + 1) * s auxiliary momenta, x last

  Eigen::MatrixXd scratch_q_, scratch_p_;
  PathForces force_buf_;
};

}  // namespace openpimd
