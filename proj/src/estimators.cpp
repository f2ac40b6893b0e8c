#include "openpimd/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace openpimd {

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("linspace needs >= 2 points");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return g;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("trapezoid grid mismatch");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return acc;
}

DistributionResult ntilde_from_free_energy(std::span<const double> grid,
                                           std::span<const double> free_energy,
                                           double beta) {
  if (grid.size() != free_energy.size())
    throw std::invalid_argument("free-energy grid mismatch");
  // Locate x = 0 on the grid.
  int zero = -1;
  double best = 1e300;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i]) < best) {
      best = std::abs(grid[i]);
      zero = static_cast<int>(i);
    }
  }
  const double span = grid.back() - grid.front();
  if (zero < 0 || best > 1e-9 * (1.0 + std::abs(span)) + 1e-12)
    throw std::invalid_argument("grid does not contain x = 0");

  DistributionResult out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.resize(grid.size());
  const double f0 = free_energy[zero];
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.values[i] = std::exp(-beta * (free_energy[i] - f0));
  out.normalization = "ntilde0=1";
  return out;
}

DistributionResult momentum_transform(const DistributionResult& ntilde,
                                      std::span<const double> p_grid,
                                      bool* edge_warning) {
  const auto& x = ntilde.grid;
  const auto& f = ntilde.values;
  if (x.size() < 2) throw std::invalid_argument("ntilde grid too small");
  if (edge_warning != nullptr)
    *edge_warning = std::abs(f.front()) > 1e-8 || std::abs(f.back()) > 1e-8;

  DistributionResult out;
  out.grid.assign(p_grid.begin(), p_grid.end());
  out.values.resize(p_grid.size());
  const double inv2pi = 1.0 / (2.0 * std::numbers::pi);
  for (std::size_t ip = 0; ip < p_grid.size(); ++ip) {
    const double p = p_grid[ip];
    double acc = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
      const double yi = std::cos(p * x[i]) * f[i];
      const double ym = std::cos(p * x[i - 1]) * f[i - 1];
      acc += 0.5 * (x[i] - x[i - 1]) * (yi + ym);
    }
    out.values[ip] = inv2pi * acc;
  }
  out.normalization = "integral=1";
  return out;
}

DistributionResult classical_momentum(double mass, double beta,
                                      std::span<const double> p_grid) {
  if (mass <= 0.0 || beta <= 0.0)
    throw std::invalid_argument("mass and beta must be positive");
  DistributionResult out;
  out.grid.assign(p_grid.begin(), p_grid.end());
  out.values.resize(p_grid.size());
  const double norm = std::sqrt(beta / (2.0 * std::numbers::pi * mass));
  for (std::size_t i = 0; i < p_grid.size(); ++i)
    out.values[i] = norm * std::exp(-0.5 * beta * p_grid[i] * p_grid[i] / mass);
  out.normalization = "integral=1";
  return out;
}

SeriesStats block_average(std::span<const double> series) {
  const int n = static_cast<int>(series.size());
  if (n < 16) throw std::invalid_argument("series too short to block average");

  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;

  SeriesStats stats;
  stats.mean = mean;
  for (int b = 1; b <= n / 8; b *= 2) {
    const int nblocks = n / b;
    double var = 0.0;
    for (int k = 0; k < nblocks; ++k) {
      double bm = 0.0;
      for (int i = 0; i < b; ++i) bm += series[k * b + i];
      bm /= b;
      var += (bm - mean) * (bm - mean);
    }
    var /= (nblocks - 1);
    stats.block_sizes.push_back(b);
    stats.block_errors.push_back(std::sqrt(var / nblocks));
  }

  // Plateau: smallest block whose standard error reaches 95% of the maximum
  // over it and all larger blocks.
  const int m = static_cast<int>(stats.block_sizes.size());
  std::vector<double> tail_max(m);
  double running = 0.0;
  for (int i = m - 1; i >= 0; --i) {
    running = std::max(running, stats.block_errors[i]);
    tail_max[i] = running;
  }
  int chosen = m - 1;
  for (int i = 0; i < m; ++i) {
    if (stats.block_errors[i] >= 0.95 * tail_max[i]) {
      chosen = i;
      break;
    }
  }
  stats.block_size = stats.block_sizes[chosen];
  stats.std_error = stats.block_errors[chosen];

  double var1 = 0.0;
  for (double v : series) var1 += (v - mean) * (v - mean);
  var1 /= (n - 1);
  stats.effective_samples =
      stats.std_error > 0.0 ? var1 / (stats.std_error * stats.std_error)
                            : static_cast<double>(n);
  return stats;
}

BootstrapResult bootstrap_blocks(
    const std::vector<std::vector<double>>& series_rows, int block_size,
    int resamples, Rng& rng,
    const std::function<std::vector<double>(std::span<const double>)>&
        pipeline) {
  const int rows = static_cast<int>(series_rows.size());
  if (rows < 1) throw std::invalid_argument("empty series");
  const int cols = static_cast<int>(series_rows.front().size());
  const int nblocks = rows / std::max(1, block_size);
  if (nblocks < 8)
    throw std::invalid_argument(
        "need at least 8 decorrelated blocks for the bootstrap");

  std::vector<double> colmean(cols);
  std::vector<double> out_sum, out_sq;
  BootstrapResult result;
  result.resamples = resamples;
  result.blocks = nblocks;

  for (int r = 0; r < resamples; ++r) {
    std::fill(colmean.begin(), colmean.end(), 0.0);
    long count = 0;
    for (int k = 0; k < nblocks; ++k) {
      const int pick = static_cast<int>(rng.next() % nblocks);
      for (int i = 0; i < block_size; ++i) {
        const auto& row = series_rows[pick * block_size + i];
        for (int c = 0; c < cols; ++c) colmean[c] += row[c];
        ++count;
      }
    }
    for (auto& v : colmean) v /= count;
    const std::vector<double> out = pipeline(colmean);
    if (out_sum.empty()) {
      out_sum.assign(out.size(), 0.0);
      out_sq.assign(out.size(), 0.0);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out_sum[i] += out[i];
      out_sq[i] += out[i] * out[i];
    }
  }

  result.mean.resize(out_sum.size());
  result.sigma.resize(out_sum.size());
  for (std::size_t i = 0; i < out_sum.size(); ++i) {
    result.mean[i] = out_sum[i] / resamples;
    const double var =
        std::max(0.0, out_sq[i] / resamples - result.mean[i] * result.mean[i]);
    result.sigma[i] = std::sqrt(var * resamples / std::max(1, resamples - 1));
  }
  return result;
}

namespace {

// Regularized upper incomplete gamma Q(a, x) by series / continued fraction.
double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 1.0;
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) {
    // P by series, Q = 1 - P.
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Q by Lentz continued fraction.
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_p_value(double statistic, int dof) {
  return gamma_q(0.5 * dof, 0.5 * statistic);
}

UniformityReport uniformity_check(std::span<const double> samples, double lo,
                                  double hi, int bins) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::vector<long> counts(bins, 0);
  long total = 0;
  for (double s : samples) {
    if (s < lo || s > hi) continue;
    int b = static_cast<int>((s - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
    ++total;
  }
  UniformityReport report;
  report.dof = bins - 1;
  if (total == 0) {
    report.p_value = 0.0;
    return report;
  }
  const double expect = static_cast<double>(total) / bins;
  for (long c : counts)
    report.chi_square += (c - expect) * (c - expect) / expect;
  report.p_value = chi_square_p_value(report.chi_square, report.dof);
  return report;
}

}  // namespace openpimd
