#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <fstream>
#include <limits>
#include <algorithm>
#include <cstdio>
#include <vector>

#include "openpimd/dynamics.hpp"
#include "openpimd/io.hpp"
#include "openpimd/potentials.hpp"

using namespace openpimd;

namespace {

// Kolmogorov-Smirnov p-value against a zero-mean Gaussian of given sigma.
double ks_gaussian_p(std::vector<double> samples, double sigma) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-samples[i] / (sigma * std::sqrt(2.0)));
    d = std::max(d, std::abs(cdf - (i + 1) / n));
    d = std::max(d, std::abs(cdf - i / n));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

PathState thermalized_state(const SystemSpec& spec, const PotentialModel& model,
                            Integrator& integ, Rng& rng, int steps) {
  PathState state = PathState::initial(spec, model);
  integ.draw_momenta(state, rng);
  for (int i = 0; i < steps; ++i) integ.step(state, model, nullptr, rng);
  return state;
}

}  // namespace

TEST_CASE("wall reflection") {
  double x = 3.2, px = 1.0;
  reflect_wall(x, px, 3.0);
  CHECK(x == doctest::Approx(2.8));
  CHECK(px == doctest::Approx(-1.0));

  x = -3.5;
  px = -0.4;
  reflect_wall(x, px, 3.0);
  CHECK(x == doctest::Approx(-2.5));
  CHECK(px == doctest::Approx(0.4));

  x = 1.0;
  px = 0.7;
  reflect_wall(x, px, 3.0);
  CHECK(x == doctest::Approx(1.0));
  CHECK(px == doctest::Approx(0.7));

  // Far outside: applied repeatedly until inside.
  x = 13.1;
  px = 1.0;
  reflect_wall(x, px, 3.0);
  CHECK(x >= -3.0);
  CHECK(x <= 3.0);
}

TEST_CASE("com velocity removal") {
  TriatomicBathModel model;
  SystemSpec spec = SystemSpec::for_model(model, 8, 1000.0);
  PathState state = PathState::initial(spec, model);
  Rng rng(3);
  for (auto& p : state.momenta) p = 2.0 * rng.uniform() - 1.0;
  state.px = 0.77;

  remove_com_velocity(spec, state);
  const int l = spec.beads;
  for (int k = 0; k < 3; ++k) {
    double total = 0.0;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < l; ++i) total += state.momenta[(3 * n + k) * l + i];
    CHECK(std::abs(total) < 1e-12);
  }
  CHECK(state.px == doctest::Approx(0.77));  // untouched

  // Idempotent on an already-zero state.
  const auto before = state.momenta;
  remove_com_velocity(spec, state);
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(state.momenta[i] == doctest::Approx(before[i]).epsilon(1e-14));
}

TEST_CASE("single atom with uniform momentum zeroes out") {
  FreeParticle model(1836.0);
  SystemSpec spec = SystemSpec::for_model(model, 4, 1000.0);
  PathState state = PathState::initial(spec, model);
  for (auto& p : state.momenta) p = 2.5;
  remove_com_velocity(spec, state);
  for (double p : state.momenta) CHECK(std::abs(p) < 1e-12);
}

TEST_CASE("exact harmonic step properties") {
  FreeParticle model(1836.0);
  const double beta = 500.0;
  SystemSpec spec = SystemSpec::for_model(model, 16, beta);
  IntegratorConfig cfg;
  cfg.dt = 25.0;
  cfg.thermostat.kind = ThermostatSpec::Kind::None;
  cfg.com_removal = false;
  Integrator integ(spec, cfg);

  SUBCASE("centroid drifts freely") {
    PathState state = PathState::initial(spec, model);
    for (auto& p : state.momenta) p = 0.5;  // uniform -> pure centroid motion
    const double q0 = state.positions[0];
    integ.exact_harmonic_step(state, 25.0);
    CHECK(state.positions[0] ==
          doctest::Approx(q0 + 25.0 * 0.5 / 1836.0).epsilon(1e-13));
    CHECK(state.momenta[0] == doctest::Approx(0.5));
  }

  SUBCASE("x oscillator returns after one full period") {
    PathState state = PathState::initial(spec, model);
    state.x = 0.9;
    state.px = -0.03;
    const double period = 2.0 * std::numbers::pi * beta;  // omega_x = 1/beta
    integ.exact_harmonic_step(state, period);
    CHECK(state.x == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(state.px == doctest::Approx(-0.03).epsilon(1e-12));
  }

  SUBCASE("free ring hamiltonian conserved to 1e-12 per step") {
    Rng rng(7);
    PathState state = PathState::initial(spec, model);
    for (auto& q : state.positions) q += 0.3 * (2.0 * rng.uniform() - 1.0);
    integ.draw_momenta(state, rng);
    state.x = 0.4;
    const double e0 = hamiltonian_energy(spec, state, model).total();
    for (int s = 0; s < 100; ++s) {
      integ.exact_harmonic_step(state, 25.0);
      const double e = hamiltonian_energy(spec, state, model).total();
      CHECK(std::abs(e - e0) / std::abs(e0) < 1e-12);
    }
  }
}

TEST_CASE("two-bead ring has a single internal mode at 2 omega_l") {
  FreeParticle model(1.0);
  SystemSpec spec = SystemSpec::for_model(model, 2, 10.0);
  IntegratorConfig cfg;
  cfg.thermostat.kind = ThermostatSpec::Kind::None;
  cfg.com_removal = false;
  Integrator integ(spec, cfg);
  CHECK(integ.modes().frequencies()[0] == doctest::Approx(0.0));
  CHECK(integ.modes().frequencies()[1] ==
        doctest::Approx(2.0 * spec.omega_l()).epsilon(1e-14));

  // The internal coordinate oscillates exactly at 2 omega_l.
  PathState state = PathState::initial(spec, model);
  state.positions[0] = 0.5;
  state.positions[1] = -0.5;
  const double w = 2.0 * spec.omega_l();
  const double t = 0.37 / w;
  integ.exact_harmonic_step(state, t);
  CHECK(state.positions[0] == doctest::Approx(0.5 * std::cos(w * t)).epsilon(1e-12));
}

TEST_CASE("ou update closed forms") {
  SUBCASE("zero drift is the identity map") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 1);
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(1, 1);
    const OuUpdate u = OuUpdate::make(a, c, 0.5);
    CHECK(u.transition()(0, 0) == doctest::Approx(1.0));
    CHECK(u.noise()(0, 0) == doctest::Approx(0.0).epsilon(1e-7));
  }
  SUBCASE("scalar white noise matches the exponential decay") {
    const double gamma = 0.37, dt_half = 0.21, beta = 4.0;
    Eigen::MatrixXd a(1, 1);
    a << gamma;
    Eigen::MatrixXd c(1, 1);
    c << 1.0 / beta;
    const OuUpdate u = OuUpdate::make(a, c, dt_half);
    CHECK(u.transition()(0, 0) == doctest::Approx(std::exp(-gamma * dt_half)));
    const double expect =
        std::sqrt((1.0 - std::exp(-2.0 * gamma * dt_half)) / beta);
    CHECK(u.noise()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("indefinite fluctuation matrix is rejected") {
    Eigen::MatrixXd a(1, 1);
    a << -0.5;  // unstable drift grows the covariance
    Eigen::MatrixXd c(1, 1);
    c << 1.0;
    CHECK_THROWS_AS(OuUpdate::make(a, c, 0.5), ConfigError);
  }
}

TEST_CASE("ou stationary covariance is reproduced") {
  // 2-variable GLE block: momentum plus one auxiliary.
  Eigen::MatrixXd a(2, 2);
  a << 0.2, 0.4, -0.4, 0.9;
  Eigen::MatrixXd c(2, 2);
  c << 0.8, 0.1, 0.1, 0.5;
  const OuUpdate u = OuUpdate::make(a, c, 0.3);
  Rng rng(99);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  const int burn = 2000, n = 400000;
  for (int i = 0; i < burn; ++i) u.apply(v, rng);
  for (int i = 0; i < n; ++i) {
    u.apply(v, rng);
    cov += v * v.transpose();
  }
  cov /= n;
  for (int r = 0; r < 2; ++r)
    for (int s = 0; s < 2; ++s)
      CHECK(cov(r, s) == doctest::Approx(c(r, s)).epsilon(0.02).scale(1.0));
}

TEST_CASE("gle matrices load from plain text") {
  const std::string path = "gle_test.dat";
  {
    std::ofstream out(path);
    out << "1\n0.1 0.2\n-0.2 0.5\n";
  }
  const GleSpec spec = GleSpec::from_file(path);
  CHECK(spec.aux_count == 1);
  CHECK(spec.drift(0, 1) == doctest::Approx(0.2));
  CHECK(spec.covariance.size() == 0);
  std::remove(path.c_str());
}

TEST_CASE("nve drift stays below 1e-4 over ten thousand steps") {
  DoubleWell1D model;
  SystemSpec spec = SystemSpec::for_model(model, 64, 2000.0);
  IntegratorConfig warm;
  warm.dt = 10.0;
  warm.com_removal = false;
  Integrator warm_integ(spec, warm);
  Rng rng(123);
  PathState state = thermalized_state(spec, model, warm_integ, rng, 2000);

  IntegratorConfig nve;
  nve.dt = 10.0;
  nve.com_removal = false;
  nve.thermostat.kind = ThermostatSpec::Kind::None;
  Integrator integ(spec, nve);
  const double e0 = hamiltonian_energy(spec, state, model).total();
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    integ.step(state, model, nullptr, rng);
    if (s % 50 == 0) {
      const double e = hamiltonian_energy(spec, state, model).total();
      worst = std::max(worst, std::abs(e - e0) / std::abs(e0));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("md step conserves the quadratic hamiltonian exactly when V = 0") {
  FreeParticle model(1836.0);
  SystemSpec spec = SystemSpec::for_model(model, 32, 1000.0);
  IntegratorConfig cfg;
  cfg.dt = 40.0;
  cfg.com_removal = false;
  cfg.thermostat.kind = ThermostatSpec::Kind::None;
  Integrator integ(spec, cfg);
  Rng rng(5);
  PathState state = PathState::initial(spec, model);
  for (auto& q : state.positions) q += 0.4 * (2.0 * rng.uniform() - 1.0);
  integ.draw_momenta(state, rng);
  state.x = 0.8;

  const double e0 = hamiltonian_energy(spec, state, model).total();
  for (int s = 0; s < 500; ++s) integ.step(state, model, nullptr, rng);
  const double e1 = hamiltonian_energy(spec, state, model).total();
  CHECK(std::abs(e1 - e0) / e0 < 1e-12);
}

TEST_CASE("equipartition under the per-mode thermostat") {
  DoubleWell1D model;
  const double beta = 1000.0;
  SystemSpec spec = SystemSpec::for_model(model, 32, beta);
  IntegratorConfig cfg;
  cfg.dt = 10.0;
  cfg.com_removal = false;
  cfg.thermostat.gamma0 = 0.01;
  Integrator integ(spec, cfg);
  Rng rng(2718);
  PathState state = thermalized_state(spec, model, integ, rng, 3000);

  double kinetic = 0.0;
  long count = 0;
  const int l = spec.beads;
  const int steps = 60000;
  for (int s = 0; s < steps; ++s) {
    integ.step(state, model, nullptr, rng);
    if (s % 5 != 0) continue;
    for (int c = 0; c < spec.dof(); ++c)
      for (int i = 0; i < l; ++i)
        kinetic += state.momenta[c * l + i] * state.momenta[c * l + i] /
                   (2.0 * spec.masses[c]);
    kinetic += state.px * state.px / (2.0 * spec.mass_a());
    count += spec.dof() * l + 1;
  }
  const double per_dof = kinetic / count;
  CHECK(per_dof == doctest::Approx(0.5 / beta).epsilon(0.01));
}

TEST_CASE("bead momentum marginal is gaussian (KS test)") {
  DoubleWell1D model;
  const double beta = 1000.0;
  SystemSpec spec = SystemSpec::for_model(model, 16, beta);
  IntegratorConfig cfg;
  cfg.dt = 10.0;
  cfg.com_removal = false;
  cfg.thermostat.gamma0 = 0.02;
  Integrator integ(spec, cfg);
  Rng rng(31415);
  PathState state = thermalized_state(spec, model, integ, rng, 2000);

  std::vector<double> samples;
  samples.reserve(100000);
  const int l = spec.beads;
  while (samples.size() < 100000) {
    for (int s = 0; s < 7; ++s) integ.step(state, model, nullptr, rng);
    for (int i = 0; i < l; ++i) samples.push_back(state.momenta[0 * l + i]);
  }
  const double p = ks_gaussian_p(samples, std::sqrt(1836.0 / beta));
  CHECK(p > 0.01);
}

TEST_CASE("free ring radius of gyration matches the analytic value") {
  FreeParticle model(1.0);
  const double beta = 4.0;
  const int l = 16;
  SystemSpec spec = SystemSpec::for_model(model, l, beta);
  IntegratorConfig cfg;
  cfg.dt = 0.05 / spec.omega_l();
  cfg.com_removal = false;
  cfg.thermostat.gamma0 = 0.5;
  cfg.wall = 1e9;  // keep x out of the way
  Integrator integ(spec, cfg);
  Rng rng(115);
  PathState state = thermalized_state(spec, model, integ, rng, 5000);

  double rg2 = 0.0;
  long count = 0;
  for (int s = 0; s < 200000; ++s) {
    integ.step(state, model, nullptr, rng);
    if (s % 10 != 0) continue;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int i = 0; i < l; ++i) mean += state.positions[c * l + i];
      mean /= l;
      for (int i = 0; i < l; ++i) {
        const double d = state.positions[c * l + i] - mean;
        rg2 += d * d;
      }
      count += l;
    }
  }
  rg2 /= count;
  // (1/l) sum_{k>0} 1/(beta m w_k^2) per component = beta (l^2-1)/(12 l^2 m).
  const double expect = beta * (l * l - 1.0) / (12.0 * l * l);
  CHECK(rg2 == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  TriatomicBathModel model;
  SystemSpec spec = SystemSpec::for_model(model, 8, 2000.0);
  IntegratorConfig cfg;
  cfg.dt = 10.0;
  cfg.com_removal = true;

  const auto run = [&]() {
    Integrator integ(spec, cfg);
    Rng rng = Rng::for_stream(42, 0);
    PathState state = PathState::initial(spec, model);
    integ.draw_momenta(state, rng);
    for (int s = 0; s < 300; ++s) integ.step(state, model, nullptr, rng);
    return state;
  };
  const PathState a = run();
  const PathState b = run();
  CHECK(a.positions == b.positions);
  CHECK(a.momenta == b.momenta);
  CHECK(a.x == b.x);
  CHECK(a.px == b.px);
}

TEST_CASE("non-finite forces raise a trajectory error") {
  DoubleWell1D model;
  SystemSpec spec = SystemSpec::for_model(model, 4, 1000.0);
  IntegratorConfig cfg;
  Integrator integ(spec, cfg);
  Rng rng(9);
  PathState state = PathState::initial(spec, model);
  state.positions[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(integ.step(state, model, nullptr, rng),
                  TrajectoryDivergedError);
}
