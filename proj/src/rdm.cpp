#include "openpimd/rdm.hpp"

#include <cmath>
#include <stdexcept>

namespace openpimd {

std::vector<double> RdmGrid::centers() const {
  std::vector<double> c(bins);
  for (int i = 0; i < bins; ++i) c[i] = center(i);
  return c;
}

void RdmGrid::validate() const {
  if (bins < 3 || bins % 2 == 0)
    throw std::invalid_argument("rdm grid needs an odd bin count >= 3");
  if (half_extent <= 0.0)
    throw std::invalid_argument("rdm grid extent must be positive");
}

std::pair<double, double> order_params(const SystemSpec& spec,
                                       const PathState& state,
                                       const BcGeometry& geom) {
  const int l = spec.beads;
  double a_dot_e = 0.0;
  for (int k = 0; k < 3; ++k)
    a_dot_e += state.pos(3 * spec.tagged_a + k, 0, l) * geom.e[k];
  return {a_dot_e + 0.5 * state.x, a_dot_e - 0.5 * state.x};
}

double Ves2dBias::wall_energy(double r, double* slope) const {
  double v = 0.0, dv = 0.0;
  if (r > onset_) {
    v = 0.5 * stiffness_ * (r - onset_) * (r - onset_);
    dv = stiffness_ * (r - onset_);
  } else if (r < -onset_) {
    v = 0.5 * stiffness_ * (r + onset_) * (r + onset_);
    dv = stiffness_ * (r + onset_);
  }
  if (slope != nullptr) *slope = dv;
  return v;
}

double Ves2dBias::energy(const SystemSpec& spec, const PathState& state,
                         const BcGeometry& geom) const {
  const auto [r, rp] = order_params(spec, state, geom);
  const double s[2] = {r, rp};
  return state_->value(std::span(s, 2)) + wall_energy(r, nullptr) +
         wall_energy(rp, nullptr);
}

double Ves2dBias::add_forces(const SystemSpec& spec, const PathState& state,
                             const BcGeometry& geom,
                             std::span<double> bead_forces,
                             double& force_x) const {
  const auto [r, rp] = order_params(spec, state, geom);
  const double s[2] = {r, rp};
  double vb, dvb[2];
  state_->value_and_gradient(std::span(s, 2), vb, std::span(dvb, 2));
  double wall_slope_r = 0.0, wall_slope_rp = 0.0;
  vb += wall_energy(r, &wall_slope_r) + wall_energy(rp, &wall_slope_rp);
  const double dv_dr = dvb[0] + wall_slope_r;
  const double dv_drp = dvb[1] + wall_slope_rp;

  const int l = spec.beads;
  // dr/dx = +1/2, dr'/dx = -1/2.
  force_x -= 0.5 * (dv_dr - dv_drp);

  // Both order parameters move with bead 0 of A along e.
  const double dv_sum = dv_dr + dv_drp;
  for (int k = 0; k < 3; ++k)
    bead_forces[(3 * spec.tagged_a + k) * l + 0] -= dv_sum * geom.e[k];

  // Dependence through e: d(rA0 . e)/drB0 = J rA0 (J symmetric), C negated.
  if (geom.varying) {
    std::array<double, 3> ra0;
    for (int k = 0; k < 3; ++k) ra0[k] = state.pos(3 * spec.tagged_a + k, 0, l);
    const auto j_ra = geom.jacobian_apply(ra0);
    for (int k = 0; k < 3; ++k) {
      bead_forces[(3 * spec.anchor_b + k) * l + 0] -= dv_sum * j_ra[k];
      bead_forces[(3 * spec.anchor_c + k) * l + 0] += dv_sum * j_ra[k];
    }
  }
  return vb;
}

DiscretizedRdm discretize_rho(const RdmGrid& grid,
                              std::span<const double> f2_row_major,
                              double beta) {
  grid.validate();
  const int n = grid.bins;
  if (static_cast<int>(f2_row_major.size()) != n * n)
    throw std::invalid_argument("free-energy surface size mismatch");

  double fmin = f2_row_major[0];
  for (double f : f2_row_major) fmin = std::min(fmin, f);

  DiscretizedRdm out;
  out.cell = grid.cell();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = std::exp(-beta * (f2_row_major[i * n + j] - fmin)) * out.cell;

  const double scale = m.cwiseAbs().maxCoeff();
  out.asymmetry =
      scale > 0.0 ? (m - m.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  m = 0.5 * (m + m.transpose()).eval();
  const double trace = m.trace();
  if (trace <= 0.0) throw std::runtime_error("discretized kernel has no weight");
  out.matrix = m / trace;
  return out;
}

SpectralDecomposition symmetric_eigensolve(const Eigen::MatrixXd& matrix,
                                           double cell,
                                           std::span<const double> grid) {
  const int n = static_cast<int>(matrix.rows());
  if (matrix.cols() != n) throw std::invalid_argument("matrix not square");
  const double scale = std::max(1e-300, matrix.cwiseAbs().maxCoeff());
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale)
    throw std::invalid_argument("matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (matrix + matrix.transpose()));
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");

  SpectralDecomposition out;
  out.cell = cell;
  out.grid.assign(grid.begin(), grid.end());
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  // Eigen sorts ascending; flip to descending and fix signs.
  for (int k = 0; k < n; ++k) {
    out.eigenvalues[k] = solver.eigenvalues()[n - 1 - k];
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - k);
    int imax = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
    if (v[imax] < 0.0) v = -v;
    // Measure normalization: cell * sum psi^2 = 1.
    out.eigenvectors.col(k) = v / std::sqrt(cell);
  }
  return out;
}

double translation_expectation(std::span<const double> psi,
                               std::span<const double> grid, double cell,
                               double x) {
  const int n = static_cast<int>(psi.size());
  if (static_cast<int>(grid.size()) != n)
    throw std::invalid_argument("grid size mismatch");
  const double lo = grid.front();
  const double hi = grid.back();
  const double h = (hi - lo) / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double target = grid[i] + x;
    if (target < lo || target > hi) continue;
    const double idx = (target - lo) / h;
    const int i0 = std::min(static_cast<int>(idx), n - 2);
    const double frac = idx - i0;
    acc += psi[i] * ((1.0 - frac) * psi[i0] + frac * psi[i0 + 1]);
  }
  return acc * cell;
}

DistributionResult reconstruct_ntilde(const SpectralDecomposition& spec,
                                      std::span<const double> x_grid) {
  const int n = static_cast<int>(spec.grid.size());
  DistributionResult out;
  out.grid.assign(x_grid.begin(), x_grid.end());
  out.values.assign(x_grid.size(), 0.0);
  out.normalization = "ntilde0=1";
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
    double val = 0.0;
    for (int k = 0; k < n; ++k) {
      if (std::abs(spec.eigenvalues[k]) < 1e-14) continue;
      val += spec.eigenvalues[k] *
             translation_expectation(
                 std::span(spec.eigenvectors.col(k).data(), n), spec.grid,
                 spec.cell, x_grid[ix]);
    }
    out.values[ix] = val;
  }
  double at0 = 0.0, best = 1e300;
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
    if (std::abs(x_grid[ix]) < best) {
      best = std::abs(x_grid[ix]);
      at0 = out.values[ix];
    }
  }
  if (at0 != 0.0)
    for (auto& v : out.values) v /= at0;
  return out;
}

ExtrapolationFit extrapolate_to_zero_temperature(
    std::span<const double> betas, std::span<const double> lambdas) {
  const int n = static_cast<int>(betas.size());
  if (n < 3 || static_cast<int>(lambdas.size()) != n)
    throw std::invalid_argument("extrapolation needs at least 3 (beta,lambda) pairs");

  ExtrapolationFit fit;
  fit.temperatures.resize(n);
  fit.values.assign(lambdas.begin(), lambdas.end());
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = 1.0 / betas[i];
    fit.temperatures[i] = t;
    st += t;
    sl += lambdas[i];
    stt += t * t;
    stl += t * lambdas[i];
  }
  const double denom = n * stt - st * st;
  if (std::abs(denom) < 1e-30)
    throw std::invalid_argument("degenerate temperatures in extrapolation");
  fit.slope = (n * stl - st * sl) / denom;
  fit.intercept = (sl - fit.slope * st) / n;
  fit.residuals.resize(n);
  for (int i = 0; i < n; ++i)
    fit.residuals[i] =
        lambdas[i] - (fit.intercept + fit.slope * fit.temperatures[i]);
  return fit;
}

}  // namespace openpimd
