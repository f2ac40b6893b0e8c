#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>
#include <algorithm>

#include "openpimd/estimators.hpp"

using namespace openpimd;

TEST_CASE("ntilde from a free-energy profile") {
  SUBCASE("constant profile gives a flat distribution") {
    const auto grid = linspace(-2.0, 2.0, 41);
    std::vector<double> f(grid.size(), 0.123);
    const auto nt = ntilde_from_free_energy(grid, f, 1000.0);
    for (double v : nt.values) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("free-particle profile reproduces the gaussian") {
    // F = m x^2 / (2 beta^2) makes ntilde = exp(-m x^2 / (2 beta)).
    const double m = 1836.0, beta = 1000.0;
    const auto grid = linspace(-3.0, 3.0, 601);
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      f[i] = m * grid[i] * grid[i] / (2.0 * beta * beta);
    const auto nt = ntilde_from_free_energy(grid, f, beta);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(nt.values[i] ==
            doctest::Approx(std::exp(-m * grid[i] * grid[i] / (2.0 * beta)))
                .epsilon(1e-12));
    // Spot value quoted to four digits: x = 1 -> 0.3992.
    const auto it = std::find_if(grid.begin(), grid.end(), [](double x) {
      return std::abs(x - 1.0) < 1e-12;
    });
    REQUIRE(it != grid.end());
    CHECK(nt.values[it - grid.begin()] == doctest::Approx(0.3992).epsilon(2e-4));
  }
  SUBCASE("grid without the origin is rejected") {
    const std::vector<double> grid{0.5, 1.0, 1.5};
    const std::vector<double> f{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(ntilde_from_free_energy(grid, f, 10.0),
                    std::invalid_argument);
  }
}

TEST_CASE("cosine transform of a gaussian pair") {
  const double sigma = 0.7;
  const auto x = linspace(-8.0, 8.0, 1601);
  DistributionResult nt;
  nt.grid = x;
  nt.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    nt.values[i] = std::exp(-x[i] * x[i] / (2.0 * sigma * sigma));

  const auto p = linspace(-12.0, 12.0, 1201);
  const auto np = momentum_transform(nt, p);
  const double norm = sigma / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(np.values[i] ==
          doctest::Approx(norm * std::exp(-sigma * sigma * p[i] * p[i] / 2.0))
              .epsilon(1e-8).scale(norm));

  SUBCASE("parseval: the transform integrates to ntilde(0)") {
    CHECK(trapezoid(np.grid, np.values) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("transform is even") {
    const int n = static_cast<int>(p.size());
    for (int i = 0; i < n; ++i)
      CHECK(np.values[i] == doctest::Approx(np.values[n - 1 - i]).epsilon(1e-14));
  }
}

TEST_CASE("classical free-particle chain: maxwell-boltzmann") {
  const double m = 1836.0, beta = 1000.0;
  const auto x = linspace(-8.0, 8.0, 3201);
  DistributionResult nt;
  nt.grid = x;
  nt.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    nt.values[i] = std::exp(-m * x[i] * x[i] / (2.0 * beta));

  const auto p = linspace(-12.0, 12.0, 1201);
  const auto np = momentum_transform(nt, p);
  const auto mb = classical_momentum(m, beta, p);
  const double peak = std::sqrt(beta / (2.0 * std::numbers::pi * m));
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(np.values[i] ==
          doctest::Approx(mb.values[i]).epsilon(1e-7).scale(peak));
}

TEST_CASE("classical momentum reference") {
  const double m = 2.5, beta = 8.0;
  const auto p = linspace(-12.0, 12.0, 4001);
  const auto mb = classical_momentum(m, beta, p);
  CHECK(mb.values[2000] ==
        doctest::Approx(std::sqrt(beta / (2.0 * std::numbers::pi * m))));
  CHECK(trapezoid(mb.grid, mb.values) == doctest::Approx(1.0).epsilon(1e-10));
  double var = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    var += p[i] * p[i] * mb.values[i];
  var *= (p[1] - p[0]);
  CHECK(var == doctest::Approx(m / beta).epsilon(1e-8));
}

TEST_CASE("transform linearity") {
  Rng rng(55);
  const auto x = linspace(-4.0, 4.0, 401);
  const auto p = linspace(-6.0, 6.0, 301);
  DistributionResult a, b, sum;
  a.grid = b.grid = sum.grid = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a.values.push_back(std::exp(-x[i] * x[i]) * (1.0 + 0.2 * rng.uniform()));
    b.values.push_back(std::exp(-0.5 * x[i] * x[i]) * rng.uniform());
    sum.values.push_back(a.values[i] + b.values[i]);
  }
  const auto ta = momentum_transform(a, p);
  const auto tb = momentum_transform(b, p);
  const auto ts = momentum_transform(sum, p);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(ts.values[i] ==
          doctest::Approx(ta.values[i] + tb.values[i]).epsilon(1e-12));
}

TEST_CASE("edge warning when ntilde has not decayed") {
  const auto x = linspace(-1.0, 1.0, 101);
  DistributionResult nt;
  nt.grid = x;
  nt.values.assign(x.size(), 1.0);
  bool warn = false;
  momentum_transform(nt, linspace(-2.0, 2.0, 11), &warn);
  CHECK(warn);
}

TEST_CASE("block averaging") {
  SUBCASE("iid noise plateaus at once") {
    Rng rng(71);
    std::vector<double> series(4096);
    for (auto& v : series) v = rng.gaussian();
    const SeriesStats stats = block_average(series);
    CHECK(stats.block_size <= 4);
    CHECK(stats.effective_samples > 0.5 * series.size());
  }
  SUBCASE("ar(1) correlation shrinks the effective sample count") {
    Rng rng(72);
    const double rho = 0.9;
    const int n = 65536;
    std::vector<double> series(n);
    double state = 0.0;
    for (auto& v : series) {
      state = rho * state + rng.gaussian();
      v = state;
    }
    const SeriesStats stats = block_average(series);
    const double expect = n * (1.0 - rho) / (1.0 + rho);
    CHECK(stats.effective_samples > expect / 1.5);
    CHECK(stats.effective_samples < expect * 1.5);
  }
  SUBCASE("constant series has zero error everywhere") {
    std::vector<double> series(256, 3.14);
    const SeriesStats stats = block_average(series);
    for (double e : stats.block_errors) CHECK(e == doctest::Approx(0.0));
  }
  SUBCASE("too-short series is rejected") {
    std::vector<double> series(8, 1.0);
    CHECK_THROWS_AS(block_average(series), std::invalid_argument);
  }
}

TEST_CASE("block bootstrap") {
  SUBCASE("identical blocks give zero sigma") {
    std::vector<std::vector<double>> rows(64, std::vector<double>{1.5, -2.0});
    Rng rng(81);
    const auto boot = bootstrap_blocks(
        rows, 4, 50, rng, [](std::span<const double> mean) {
          return std::vector<double>{mean[0] + mean[1], mean[0] * mean[1]};
        });
    CHECK(boot.sigma[0] == doctest::Approx(0.0));
    CHECK(boot.sigma[1] == doctest::Approx(0.0));
  }
  SUBCASE("resample count self-consistency") {
    Rng data_rng(82);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 256; ++i)
      rows.push_back({data_rng.gaussian(), 2.0 + 0.5 * data_rng.gaussian()});
    const auto pipeline = [](std::span<const double> mean) {
      return std::vector<double>{mean[0], mean[1], mean[0] * mean[1]};
    };
    Rng r1(83), r2(84);
    const auto b100 = bootstrap_blocks(rows, 2, 100, r1, pipeline);
    const auto b200 = bootstrap_blocks(rows, 2, 200, r2, pipeline);
    for (std::size_t i = 0; i < b100.sigma.size(); ++i) {
      if (b200.sigma[i] == 0.0) continue;
      CHECK(b100.sigma[i] / b200.sigma[i] > 0.8);
      CHECK(b100.sigma[i] / b200.sigma[i] < 1.25);
    }
  }
  SUBCASE("sigma matches linear error propagation") {
    // Single synthetic coefficient with known spread; the pipeline is
    // linear, so sigma(out) = |d out/d coeff| * sigma(mean).
    Rng data_rng(85);
    const double sigma0 = 0.03;
    const int n = 512;
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < n; ++i)
      rows.push_back({0.7 + sigma0 * data_rng.gaussian()});
    Rng rng(86);
    const auto boot = bootstrap_blocks(
        rows, 1, 200, rng, [](std::span<const double> mean) {
          return std::vector<double>{-3.0 * mean[0]};
        });
    const double expect = 3.0 * sigma0 / std::sqrt(static_cast<double>(n));
    CHECK(boot.sigma[0] == doctest::Approx(expect).epsilon(0.15));
  }
  SUBCASE("too few blocks is an error") {
    std::vector<std::vector<double>> rows(12, std::vector<double>{1.0});
    Rng rng(87);
    CHECK_THROWS_AS(
        bootstrap_blocks(rows, 4, 10, rng,
                         [](std::span<const double> m) {
                           return std::vector<double>{m[0]};
                         }),
        std::invalid_argument);
  }
}

TEST_CASE("uniformity check") {
  Rng rng(91);
  SUBCASE("uniform samples pass") {
    std::vector<double> samples(20000);
    for (auto& s : samples) s = 6.0 * rng.uniform() - 3.0;
    const auto report = uniformity_check(samples, -3.0, 3.0);
    CHECK(report.p_value > 0.01);
  }
  SUBCASE("bimodal samples fail decisively") {
    std::vector<double> samples(20000);
    for (auto& s : samples)
      s = (rng.uniform() < 0.5 ? -1.0 : 1.0) + 0.1 * rng.gaussian();
    const auto report = uniformity_check(samples, -3.0, 3.0);
    CHECK(report.p_value < 1e-6);
  }
}

TEST_CASE("chi-square survival function sanity") {
  // Median of chi2 with k dof is about k(1 - 2/(9k))^3.
  CHECK(chi_square_p_value(0.0, 5) == doctest::Approx(1.0));
  CHECK(chi_square_p_value(4.351, 5) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(chi_square_p_value(100.0, 5) < 1e-15);
}
