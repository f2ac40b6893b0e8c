#include "openpimd/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "openpimd/io.hpp"

namespace openpimd {

GleSpec GleSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open GLE matrix file: " + path);
  GleSpec spec;
  in >> spec.aux_count;
  if (!in || spec.aux_count < 0 || spec.aux_count > 64)
    throw ConfigError("bad auxiliary count in GLE file");
  const int n = spec.aux_count + 1;
  spec.drift.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(in >> spec.drift(i, j)))
        throw ConfigError("GLE file truncated while reading A_p");
  double probe;
  if (in >> probe) {
    spec.covariance.resize(n, n);
    spec.covariance(0, 0) = probe;
    for (int i = 0; i < n; ++i)
      for (int j = (i == 0 ? 1 : 0); j < n; ++j)
        if (!(in >> spec.covariance(i, j)))
          throw ConfigError("GLE file truncated while reading C_p");
  }
  return spec;
}

OuUpdate OuUpdate::make(const Eigen::MatrixXd& drift,
                        const Eigen::MatrixXd& covariance, double dt) {
  OuUpdate u;
  u.transition_ = (-dt * drift).exp();
  Eigen::MatrixXd fluct =
      covariance - u.transition_ * covariance * u.transition_.transpose();
  fluct = 0.5 * (fluct + fluct.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fluct);
  const double scale = std::max(1.0, covariance.norm());
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-12 * scale)
      throw ConfigError("GLE fluctuation matrix is not positive semidefinite");
    if (lam[i] < 0.0) lam[i] = 0.0;
  }
  u.noise_ = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
             es.eigenvectors().transpose();
  return u;
}

void OuUpdate::apply(Eigen::Ref<Eigen::VectorXd> stacked, Rng& rng) const {
  const int n = size();
  Eigen::VectorXd xi(n);
  for (int i = 0; i < n; ++i) xi[i] = rng.gaussian();
  stacked = transition_ * stacked + noise_ * xi;
}

void reflect_wall(double& x, double& px, double wall) {
  while (x > wall || x < -wall) {
    if (x > wall) {
      x = 2.0 * wall - x;
      px = -px;
    } else {
      x = -2.0 * wall - x;
      px = -px;
    }
  }
}

void remove_com_velocity(const SystemSpec& spec, PathState& state) {
  if (spec.n_atoms == 0) return;
  const int l = spec.beads;
  double ptot[3] = {0.0, 0.0, 0.0};
  double mass_sum = 0.0;
  for (int n = 0; n < spec.n_atoms; ++n) {
    mass_sum += spec.masses[3 * n];
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < l; ++i) ptot[k] += state.momenta[(3 * n + k) * l + i];
  }
  const double denom = mass_sum * l;
  for (int k = 0; k < 3; ++k) {
    const double vcom = ptot[k] / denom;
    for (int n = 0; n < spec.n_atoms; ++n) {
      const double dp = spec.masses[3 * n] * vcom;
      for (int i = 0; i < l; ++i) state.momenta[(3 * n + k) * l + i] -= dp;
    }
  }
}

Integrator::Integrator(const SystemSpec& spec, const IntegratorConfig& config)
    : spec_(spec),
      config_(config),
      modes_(spec.beads, spec.omega_l()),
      scratch_q_(spec.beads, spec.dof()),
      scratch_p_(spec.beads, spec.dof()) {
  const int l = spec_.beads;
  const auto& thermo = config_.thermostat;
  const double half_dt = 0.5 * config_.dt;
  if (thermo.kind == ThermostatSpec::Kind::PerModeWhite) {
    white_c1_.resize(l);
    white_c2_.resize(l);
    for (int k = 0; k < l; ++k) {
      const double gamma =
          (k == 0) ? thermo.gamma0 : thermo.gamma_scale * modes_.frequencies()[k];
      white_c1_[k] = std::exp(-gamma * half_dt);
      white_c2_[k] = std::sqrt(1.0 - white_c1_[k] * white_c1_[k]);
    }
    white_c1_x_ = std::exp(-thermo.gamma0 * half_dt);
    white_c2_x_ = std::sqrt(1.0 - white_c1_x_ * white_c1_x_);
  } else if (thermo.kind == ThermostatSpec::Kind::Gle) {
    if (!thermo.gle) throw ConfigError("GLE thermostat requested without matrices");
    GleSpec gle = *thermo.gle;
    const int n = gle.aux_count + 1;
    if (gle.covariance.size() == 0)
      gle.covariance = Eigen::MatrixXd::Identity(n, n) / spec_.beta;
    gle_update_ = OuUpdate::make(gle.drift, gle.covariance, half_dt);
    aux_.assign(static_cast<std::size_t>(spec_.dof() * l + 1) * gle.aux_count,
                0.0);
  }
}

void Integrator::draw_momenta(PathState& state, Rng& rng) {
  const int l = spec_.beads;
  for (int c = 0; c < spec_.dof(); ++c) {
    const double sigma = std::sqrt(spec_.masses[c] / spec_.beta);
    for (int i = 0; i < l; ++i)
      state.momenta[c * l + i] = sigma * rng.gaussian();
  }
  state.px = std::sqrt(spec_.mass_a() / spec_.beta) * rng.gaussian();
  if (gle_update_) {
    // Auxiliary variables start near their stationary marginal.
    const double sigma = std::sqrt(1.0 / spec_.beta);
    for (auto& a : aux_) a = sigma * rng.gaussian();
  }
}

void Integrator::thermostat_half_step(PathState& state, Rng& rng) {
  const auto& thermo = config_.thermostat;
  if (thermo.kind == ThermostatSpec::Kind::None) return;
  const int l = spec_.beads;
  const int d = spec_.dof();
  Eigen::Map<Eigen::MatrixXd> p(state.momenta.data(), l, d);

  if (thermo.kind == ThermostatSpec::Kind::PerModeWhite) {
    modes_.to_modes(p, scratch_p_);
    for (int c = 0; c < d; ++c) {
      const double amp = std::sqrt(spec_.masses[c] / spec_.beta);
      for (int k = 0; k < l; ++k) {
        scratch_p_(k, c) = white_c1_[k] * scratch_p_(k, c) +
                           amp * white_c2_[k] * rng.gaussian();
      }
    }
    modes_.to_beads(scratch_p_, p);
    state.px = white_c1_x_ * state.px +
               std::sqrt(spec_.mass_a() / spec_.beta) * white_c2_x_ *
                   rng.gaussian();
    return;
  }

  // GLE: same matrices for every mode, applied to mass-scaled momenta in the
  // normal-mode representation; equilibrium averages are representation
  // independent.
  const int s = gle_update_->size() - 1;
  modes_.to_modes(p, scratch_p_);
  Eigen::VectorXd stacked(s + 1);
  for (int c = 0; c < d; ++c) {
    const double root_m = std::sqrt(spec_.masses[c]);
    for (int k = 0; k < l; ++k) {
      const std::size_t base = static_cast<std::size_t>(c * l + k) * s;
      stacked[0] = scratch_p_(k, c) / root_m;
      for (int j = 0; j < s; ++j) stacked[j + 1] = aux_[base + j];
      gle_update_->apply(stacked, rng);
      scratch_p_(k, c) = stacked[0] * root_m;
      for (int j = 0; j < s; ++j) aux_[base + j] = stacked[j + 1];
    }
  }
  modes_.to_beads(scratch_p_, p);
  const double root_ma = std::sqrt(spec_.mass_a());
  const std::size_t base = static_cast<std::size_t>(d * l) * s;
  stacked[0] = state.px / root_ma;
  for (int j = 0; j < s; ++j) stacked[j + 1] = aux_[base + j];
  gle_update_->apply(stacked, rng);
  state.px = stacked[0] * root_ma;
  for (int j = 0; j < s; ++j) aux_[base + j] = stacked[j + 1];
}

void Integrator::exact_harmonic_step(PathState& state, double dt) const {
  const int l = spec_.beads;
  const int d = spec_.dof();
  Eigen::Map<Eigen::MatrixXd> q(state.positions.data(), l, d);
  Eigen::Map<Eigen::MatrixXd> p(state.momenta.data(), l, d);
  Eigen::MatrixXd qm(l, d), pm(l, d);
  modes_.to_modes(q, qm);
  modes_.to_modes(p, pm);
  for (int c = 0; c < d; ++c) {
    const double m = spec_.masses[c];
    // Free centroid.
    qm(0, c) += dt * pm(0, c) / m;
    for (int k = 1; k < l; ++k) {
      const double w = modes_.frequencies()[k];
      const double cwt = std::cos(w * dt);
      const double swt = std::sin(w * dt);
      const double q0 = qm(k, c);
      const double p0 = pm(k, c);
      qm(k, c) = cwt * q0 + swt / (m * w) * p0;
      pm(k, c) = -m * w * swt * q0 + cwt * p0;
    }
  }
  modes_.to_beads(qm, q);
  modes_.to_beads(pm, p);

  const double wx = 1.0 / spec_.beta;
  const double ma = spec_.mass_a();
  const double cwt = std::cos(wx * dt);
  const double swt = std::sin(wx * dt);
  const double x0 = state.x;
  const double p0 = state.px;
  state.x = cwt * x0 + swt / (ma * wx) * p0;
  state.px = -ma * wx * swt * x0 + cwt * p0;
}

void Integrator::kick(PathState& state, const PotentialModel& model,
                      const CollectiveBias* bias, double dt_half) {
  compute_forces(spec_, state, model, bias, HamiltonianParts::kick(),
                 force_buf_);
  for (double f : force_buf_.beads) {
    if (!std::isfinite(f)) {
      std::ostringstream msg;
      msg << "non-finite force encountered (x=" << state.x
          << ", px=" << state.px << ")";
      throw TrajectoryDivergedError(msg.str());
    }
  }
  if (!std::isfinite(force_buf_.x))
    throw TrajectoryDivergedError("non-finite force on x");
  const std::size_t n = state.momenta.size();
  for (std::size_t i = 0; i < n; ++i)
    state.momenta[i] += dt_half * force_buf_.beads[i];
  state.px += dt_half * force_buf_.x;
}

void Integrator::step(PathState& state, const PotentialModel& model,
                      const CollectiveBias* bias, Rng& rng) {
  const double half = 0.5 * config_.dt;
  thermostat_half_step(state, rng);
  kick(state, model, bias, half);
  exact_harmonic_step(state, config_.dt);
  kick(state, model, bias, half);
  thermostat_half_step(state, rng);
  if (config_.com_removal) remove_com_velocity(spec_, state);
  reflect_wall(state.x, state.px, config_.wall);
}

}  // namespace openpimd
