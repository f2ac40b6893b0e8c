#include "openpimd/oracle1d.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace openpimd {

std::vector<double> Grid1D::all_points() const {
  std::vector<double> q(points);
  for (int i = 0; i < points; ++i) q[i] = point(i);
  return q;
}

namespace {

// Solves (T - sigma I) v = b for a symmetric tridiagonal T by LU with partial
// pivoting (the extra superdiagonal band appears under pivoting).
void shifted_tridiagonal_solve(const Eigen::VectorXd& diag,
                               const Eigen::VectorXd& sub, double sigma,
                               Eigen::VectorXd& v) {
  const int n = static_cast<int>(diag.size());
  Eigen::VectorXd d(n), u1(n), u2(n);
  Eigen::VectorXd l(n);
  std::vector<bool> swapped(n, false);

  for (int i = 0; i < n; ++i) d[i] = diag[i] - sigma;
  u1.setZero();
  u2.setZero();
  for (int i = 0; i + 1 < n; ++i) u1[i] = sub[i];

  // Row elimination with pivoting between rows i and i+1.
  Eigen::VectorXd b = v;
  for (int i = 0; i + 1 < n; ++i) {
    double low = sub[i];  // entry (i+1, i)
    if (std::abs(d[i]) < std::abs(low)) {
      std::swap(d[i], low);
      const double t1 = u1[i];
      u1[i] = d[i + 1];
      d[i + 1] = t1;
      const double t2 = u2[i];
      u2[i] = u1[i + 1];
      u1[i + 1] = t2;
      std::swap(b[i], b[i + 1]);
      swapped[i] = true;
    }
    if (d[i] == 0.0) d[i] = 1e-300;
    const double m = low / d[i];
    d[i + 1] -= m * u1[i];
    u1[i + 1] -= m * u2[i];
    b[i + 1] -= m * b[i];
  }
  if (d[n - 1] == 0.0) d[n - 1] = 1e-300;

  v[n - 1] = b[n - 1] / d[n - 1];
  if (n >= 2) v[n - 2] = (b[n - 2] - u1[n - 2] * v[n - 1]) / d[n - 2];
  for (int i = n - 3; i >= 0; --i)
    v[i] = (b[i] - u1[i] * v[i + 1] - u2[i] * v[i + 2]) / d[i];
}

}  // namespace

EigenSolution solve_schrodinger(const Grid1D& grid,
                                const std::function<double(double)>& potential,
                                double mass, int n_states) {
  const int n = grid.points;
  if (n < 201) throw std::invalid_argument("grid too coarse (need >= 201 points)");
  if (n_states < 1 || n_states > n / 4)
    throw std::invalid_argument("state count out of range");
  const double h = grid.spacing();
  const double kin = 1.0 / (2.0 * mass * h * h);

  Eigen::VectorXd diag(n), sub(n - 1);
  for (int i = 0; i < n; ++i) diag[i] = 2.0 * kin + potential(grid.point(i));
  sub.setConstant(-kin);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("tridiagonal eigenvalue iteration failed");
  const Eigen::VectorXd& all = solver.eigenvalues();  // ascending

  EigenSolution sol;
  sol.grid = grid;
  sol.mass = mass;
  sol.energies.resize(n_states);
  sol.wavefunctions.resize(n, n_states);

  // Inverse iteration per eigenvalue, reorthogonalizing against the states
  // already converged (handles near-degenerate tunneling doublets).
  const double scale = std::abs(all[n - 1]) + std::abs(all[0]);
  Eigen::VectorXd v(n);
  for (int k = 0; k < n_states; ++k) {
    const double sigma = all[k] + scale * 1e-14;
    for (int i = 0; i < n; ++i)
      v[i] = std::sin((k + 1) * std::numbers::pi * (i + 1) /
                      static_cast<double>(n + 1)) +
             1e-3 * std::cos(0.37 * (i + 1) * (k + 2));
    for (int iter = 0; iter < 4; ++iter) {
      for (int j = 0; j < k; ++j) {
        const double overlap = sol.wavefunctions.col(j).dot(v) * h;
        v -= overlap * sol.wavefunctions.col(j);
      }
      shifted_tridiagonal_solve(diag, sub, sigma, v);
      v /= v.norm();
    }
    for (int j = 0; j < k; ++j) {
      const double overlap = sol.wavefunctions.col(j).dot(v) * h;
      v -= overlap * sol.wavefunctions.col(j);
    }
    v /= (v.norm() * std::sqrt(h));  // h-weighted normalization
    // Sign convention: positive at the left-most antinode region; fix by the
    // largest-magnitude component.
    int imax = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
    if (v[imax] < 0.0) v = -v;
    sol.wavefunctions.col(k) = v;
    sol.energies[k] = all[k];
  }

  for (int k = 0; k < n_states; ++k) {
    const double peak = sol.wavefunctions.col(k).cwiseAbs().maxCoeff();
    const double edge = std::max(std::abs(sol.wavefunctions(0, k)),
                                 std::abs(sol.wavefunctions(n - 1, k)));
    sol.edge_magnitude = std::max(sol.edge_magnitude, edge / peak);
  }
  return sol;
}

std::vector<double> thermal_occupations(const EigenSolution& sol, double beta) {
  const int k = static_cast<int>(sol.energies.size());
  std::vector<double> occ(k);
  double z = 0.0;
  for (int n = 0; n < k; ++n) {
    occ[n] = std::exp(-beta * (sol.energies[n] - sol.energies[0]));
    z += occ[n];
  }
  for (auto& w : occ) w /= z;
  // Coverage check: the next state above the retained set must be negligible.
  const double tail = std::exp(
      -beta * (sol.energies[k - 1] - sol.energies[0]));
  if (tail / z > 1e-8)
    throw std::runtime_error(
        "thermal weight not converged; retain more states");
  return occ;
}

Eigen::MatrixXd thermal_density_matrix(const EigenSolution& sol, double beta) {
  if (sol.edge_magnitude > 1e-10)
    throw std::runtime_error(
        "retained states do not decay at the grid edge; enlarge the box");
  const auto occ = thermal_occupations(sol, beta);
  const int n = sol.grid.points;
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < occ.size(); ++k) {
    if (occ[k] < 1e-14) continue;
    rho.noalias() +=
        occ[k] * sol.wavefunctions.col(k) * sol.wavefunctions.col(k).transpose();
  }
  return rho;
}

ExactDistributions exact_ntilde_np(const EigenSolution& sol, double beta,
                                   std::span<const double> x_grid,
                                   std::span<const double> p_grid) {
  if (sol.edge_magnitude > 1e-10)
    throw std::runtime_error(
        "retained states do not decay at the grid edge; enlarge the box");
  const auto occ = thermal_occupations(sol, beta);
  const int n = sol.grid.points;
  const double h = sol.grid.spacing();
  const int nk = static_cast<int>(occ.size());

  ExactDistributions out;
  out.ntilde.grid.assign(x_grid.begin(), x_grid.end());
  out.ntilde.values.resize(x_grid.size());
  out.ntilde.normalization = "ntilde0=1";

  // ntilde(x) = sum_n occ_n <psi_n | T_x | psi_n>; cubic interpolation of the
  // shifted wavefunction (linear at the box edge) and zero extension outside.
  const auto overlap_shift = [&](int k, double shift) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double q = sol.grid.point(i) - shift;
      const double idx = (q + sol.grid.extent) / h;
      if (idx < 0.0 || idx > n - 1) continue;
      const int i0 = std::min(static_cast<int>(idx), n - 2);
      const double frac = idx - i0;
      double shifted;
      if (i0 >= 1 && i0 <= n - 3) {
        const double ym = sol.wavefunctions(i0 - 1, k);
        const double y0 = sol.wavefunctions(i0, k);
        const double y1 = sol.wavefunctions(i0 + 1, k);
        const double y2 = sol.wavefunctions(i0 + 2, k);
        const double t = frac;
        shifted = ym * (-t * (t - 1.0) * (t - 2.0) / 6.0) +
                  y0 * ((t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0) +
                  y1 * (-(t + 1.0) * t * (t - 2.0) / 2.0) +
                  y2 * ((t + 1.0) * t * (t - 1.0) / 6.0);
      } else {
        shifted = (1.0 - frac) * sol.wavefunctions(i0, k) +
                  frac * sol.wavefunctions(i0 + 1, k);
      }
      acc += sol.wavefunctions(i, k) * shifted;
    }
    return acc * h;
  };

  for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
    double val = 0.0;
    for (int k = 0; k < nk; ++k) {
      if (occ[k] < 1e-14) continue;
      val += occ[k] * overlap_shift(k, x_grid[ix]);
    }
    out.ntilde.values[ix] = val;
  }
  // Normalize to ntilde(0) = 1 (exactly 1 already up to interpolation).
  double at0 = 0.0;
  double best = 1e300;
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
    if (std::abs(x_grid[ix]) < best) {
      best = std::abs(x_grid[ix]);
      at0 = out.ntilde.values[ix];
    }
  }
  if (at0 <= 0.0) throw std::runtime_error("ntilde(0) not positive");
  for (auto& v : out.ntilde.values) v /= at0;

  out.momentum = momentum_transform(out.ntilde, p_grid);

  // Second route: n(p) = sum_n occ_n |psihat_n(p)|^2 with
  // psihat(p) = (1/sqrt(2 pi)) int e^{-ipq} psi(q) dq.
  std::vector<double> route2(p_grid.size(), 0.0);
  for (std::size_t ip = 0; ip < p_grid.size(); ++ip) {
    const double p = p_grid[ip];
    for (int k = 0; k < nk; ++k) {
      if (occ[k] < 1e-14) continue;
      double re = 0.0, im = 0.0;
      for (int i = 0; i < n; ++i) {
        const double q = sol.grid.point(i);
        re += std::cos(p * q) * sol.wavefunctions(i, k);
        im += std::sin(p * q) * sol.wavefunctions(i, k);
      }
      re *= h;
      im *= h;
      route2[ip] += occ[k] * (re * re + im * im) / (2.0 * std::numbers::pi);
    }
  }
  double diff = 0.0;
  for (std::size_t ip = 0; ip < p_grid.size(); ++ip)
    diff = std::max(diff, std::abs(route2[ip] - out.momentum.values[ip]));
  out.route_difference = diff;
  return out;
}

double ground_state_weight(double splitting, double beta) {
  return 1.0 / (1.0 + std::exp(-beta * splitting));
}

}  // namespace openpimd
