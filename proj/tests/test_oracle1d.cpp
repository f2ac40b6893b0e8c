#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "openpimd/estimators.hpp"
#include "openpimd/oracle1d.hpp"
#include "openpimd/potentials.hpp"

using namespace openpimd;

namespace {

EigenSolution default_double_well(int points = 2001, int states = 8) {
  const DoubleWellProfile dw{0.006, 0.6, -2.0, 2.0};
  return solve_schrodinger(Grid1D{6.0, points},
                           [dw](double q) { return dw.value(q); }, 1836.0,
                           states);
}

}  // namespace

TEST_CASE("harmonic oscillator spectrum") {
  const EigenSolution sol = solve_schrodinger(
      Grid1D{12.0, 2001}, [](double q) { return 0.5 * q * q; }, 1.0, 4);
  CHECK(sol.energies[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(sol.energies[1] == doctest::Approx(1.5).epsilon(1e-5));
  CHECK(sol.energies[2] == doctest::Approx(2.5).epsilon(1e-4));
}

TEST_CASE("virial theorem for the harmonic ground state") {
  const EigenSolution sol = solve_schrodinger(
      Grid1D{10.0, 8001}, [](double q) { return 0.5 * q * q; }, 1.0, 1);
  const int n = sol.grid.points;
  const double h = sol.grid.spacing();
  double v_expect = 0.0;
  for (int i = 0; i < n; ++i) {
    const double q = sol.grid.point(i);
    v_expect += 0.5 * q * q * sol.wavefunctions(i, 0) * sol.wavefunctions(i, 0);
  }
  v_expect *= h;
  const double t_expect = sol.energies[0] - v_expect;
  CHECK(t_expect == doctest::Approx(v_expect).epsilon(1e-6));
}

TEST_CASE("particle in a box level ratio") {
  const EigenSolution sol = solve_schrodinger(
      Grid1D{6.0, 2401}, [](double) { return 0.0; }, 1.0, 2);
  CHECK(sol.energies[1] / sol.energies[0] == doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("orthonormality of retained states") {
  const EigenSolution sol = default_double_well();
  const double h = sol.grid.spacing();
  for (int m = 0; m < 8; ++m)
    for (int n = m; n < 8; ++n) {
      const double overlap =
          sol.wavefunctions.col(m).dot(sol.wavefunctions.col(n)) * h;
      CHECK(overlap == doctest::Approx(m == n ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("parity alternates for the even potential") {
  const EigenSolution sol = default_double_well();
  const int n = sol.grid.points;
  const double h = sol.grid.spacing();
  for (int k = 0; k < 6; ++k) {
    double mirror = 0.0;
    for (int i = 0; i < n; ++i)
      mirror += sol.wavefunctions(i, k) * sol.wavefunctions(n - 1 - i, k);
    mirror *= h;
    CHECK(mirror == doctest::Approx(k % 2 == 0 ? 1.0 : -1.0).epsilon(1e-8));
  }
}

TEST_CASE("tunneling splitting is grid-converged") {
  const EigenSolution coarse = default_double_well(2001);
  const EigenSolution fine = default_double_well(4001);
  const double d_coarse = coarse.energies[1] - coarse.energies[0];
  const double d_fine = fine.energies[1] - fine.energies[0];
  CHECK(std::abs(d_coarse - d_fine) / d_fine < 1e-4);
  // Frozen from this oracle (Richardson-checked): the default well splits by
  // 7.048e-4 hartree.
  CHECK(d_fine == doctest::Approx(7.048e-4).epsilon(2e-3));
}

TEST_CASE("thermal density matrix") {
  const EigenSolution sol = default_double_well();
  const double h = sol.grid.spacing();

  SUBCASE("trace is one") {
    const Eigen::MatrixXd rho = thermal_density_matrix(sol, 2000.0);
    CHECK(rho.trace() * h == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("spectrum of the weighted kernel equals the occupations") {
    const double beta = 2000.0;
    const Eigen::MatrixXd rho = thermal_density_matrix(sol, beta);
    const auto occ = thermal_occupations(sol, beta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho * h);
    for (int k = 0; k < 4; ++k)
      CHECK(es.eigenvalues()[sol.grid.points - 1 - k] ==
            doctest::Approx(occ[k]).epsilon(1e-8));
  }
  SUBCASE("ground-state projector in the low-temperature limit") {
    const double splitting = sol.energies[1] - sol.energies[0];
    const double beta = 1e6 / splitting * (1.0 / 1e6) * 1e6;  // beta >> 1/dE
    const auto occ = thermal_occupations(sol, beta);
    CHECK(occ[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("exact distributions of the default double well") {
  const EigenSolution sol = default_double_well();
  const auto x_grid = linspace(-3.0, 3.0, 1201);
  const auto p_grid = linspace(-20.0, 20.0, 1601);
  const double beta = 5000.0;
  const ExactDistributions dist = exact_ntilde_np(sol, beta, x_grid, p_grid);

  SUBCASE("ntilde is even and equals one at zero") {
    const int n = static_cast<int>(x_grid.size());
    for (int i = 0; i < n; ++i)
      CHECK(dist.ntilde.values[i] ==
            doctest::Approx(dist.ntilde.values[n - 1 - i]).epsilon(1e-12));
    CHECK(dist.ntilde.values[n / 2] == doctest::Approx(1.0));
  }
  SUBCASE("both momentum routes agree") {
    CHECK(dist.route_difference < 1e-6);
  }
  SUBCASE("n(p) integrates to ntilde(0)") {
    CHECK(trapezoid(dist.momentum.grid, dist.momentum.values) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("secondary shoulder: excess over the central Gaussian") {
    // Fit log n = c + s p^2 on the central lobe, then look for a significant
    // positive deviation at larger p (the deep-tunneling signature).
    const auto& p = dist.momentum.grid;
    const auto& np = dist.momentum.values;
    const int n = static_cast<int>(p.size());
    const int mid = n / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int i = mid; i < n && np[i] > 0.5 * np[mid]; ++i) {
      const double x = p[i] * p[i];
      const double y = std::log(np[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++count;
    }
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    const double icept = (sy - slope * sx) / count;
    double excess = 0.0, p_at = 0.0;
    for (int i = mid; i < n; ++i) {
      const double gauss = std::exp(icept + slope * p[i] * p[i]);
      if (np[i] - gauss > excess) {
        excess = np[i] - gauss;
        p_at = p[i];
      }
    }
    CHECK(excess > 0.05 * np[mid]);
    CHECK(p_at > 3.0);
    CHECK(p_at < 8.0);
  }
  SUBCASE("local minimum appears at beta 5000") {
    const auto& np = dist.momentum.values;
    const int n = static_cast<int>(np.size());
    bool has_min = false;
    for (int i = n / 2 + 1; i + 1 < n; ++i)
      if (np[i] < np[i - 1] && np[i] < np[i + 1] && np[i] > 1e-5) has_min = true;
    CHECK(has_min);
  }
}

TEST_CASE("harmonic momentum variance matches the coth law") {
  const EigenSolution sol = solve_schrodinger(
      Grid1D{12.0, 2001}, [](double q) { return 0.5 * q * q; }, 1.0, 24);
  const double beta = 2.0;
  const auto x_grid = linspace(-12.0, 12.0, 1201);
  const auto p_grid = linspace(-12.0, 12.0, 1201);
  const ExactDistributions dist = exact_ntilde_np(sol, beta, x_grid, p_grid);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    num += p_grid[i] * p_grid[i] * dist.momentum.values[i];
    den += dist.momentum.values[i];
  }
  const double variance = num / den;
  // (m w / 2) coth(beta w / 2) with m = w = 1, beta = 2: 0.65652.
  CHECK(variance == doctest::Approx(0.5 / std::tanh(1.0)).epsilon(1e-4));
  CHECK(0.5 / std::tanh(1.0) == doctest::Approx(0.65652).epsilon(1e-5));
}

TEST_CASE("ground state weight formula") {
  CHECK(ground_state_weight(9.11e-5, 5000.0) ==
        doctest::Approx(0.612).epsilon(2e-3));
  CHECK(ground_state_weight(0.0, 3000.0) == doctest::Approx(0.5));
  CHECK(ground_state_weight(1.0, 1e6) == doctest::Approx(1.0));
}

TEST_CASE("insufficient retained states raises") {
  const EigenSolution sol = default_double_well(2001, 3);
  // At high temperature three states cannot cover the partition function.
  CHECK_THROWS(thermal_occupations(sol, 200.0));
}

TEST_CASE("grid must stay fine enough") {
  CHECK_THROWS_AS(solve_schrodinger(Grid1D{6.0, 101},
                                    [](double q) { return q * q; }, 1.0, 2),
                  std::invalid_argument);
}
