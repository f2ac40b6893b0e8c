#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "openpimd/rng.hpp"

namespace openpimd {

// A distribution on a grid with per-point standard errors.  The adopted
// normalization for the end-to-end distribution is ntilde(0) = 1, which makes
// the transformed momentum distribution integrate to one.
struct DistributionResult {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> errors;  // empty when no uncertainty is attached
  std::string normalization;   // "ntilde0=1", "integral=1", ...
};

std::vector<double> linspace(double lo, double hi, int n);

// ntilde(x) = exp(-beta (F(x) - F(0))); the grid must contain x = 0.
DistributionResult ntilde_from_free_energy(std::span<const double> grid,
                                           std::span<const double> free_energy,
                                           double beta);

// n(p) = (1/2pi) integral cos(p x) ntilde(x) dx by trapezoidal quadrature
// (hbar = 1).  Warns via the returned flag when ntilde has not decayed at the
// grid edge.
DistributionResult momentum_transform(const DistributionResult& ntilde,
                                      std::span<const double> p_grid,
                                      bool* edge_warning = nullptr);

// sqrt(beta/2 pi m) exp(-beta p^2 / 2m)
DistributionResult classical_momentum(double mass, double beta,
                                      std::span<const double> p_grid);

struct SeriesStats {
  double mean = 0.0;
  double std_error = 0.0;       // at the plateau block size
  int block_size = 1;
  double effective_samples = 0.0;
  std::vector<int> block_sizes;       // the scanned sizes
  std::vector<double> block_errors;   // standard error per scanned size
};

// Block averaging: the plateau is the smallest block size whose standard
// error is within 5% of the maximum over all larger scanned sizes.
SeriesStats block_average(std::span<const double> series);

// Resamples whole blocks of rows (joint across columns, preserving
// cross-coefficient correlation), pushes each resampled column mean through
// `pipeline`, and reports the pointwise mean and standard deviation of the
// outputs.
struct BootstrapResult {
  std::vector<double> mean;
  std::vector<double> sigma;
  int resamples = 0;
  int blocks = 0;
};

BootstrapResult bootstrap_blocks(
    const std::vector<std::vector<double>>& series_rows, int block_size,
    int resamples, Rng& rng,
    const std::function<std::vector<double>(std::span<const double>)>&
        pipeline);

// Chi-square statistic and p-value of a histogram against the uniform law.
struct UniformityReport {
  double chi_square = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

UniformityReport uniformity_check(std::span<const double> samples, double lo,
                                  double hi, int bins = 24);

// Survival function of the chi-square law (regularized upper incomplete
// gamma), used by the uniformity check.
double chi_square_p_value(double statistic, int dof);

double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace openpimd
