#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "openpimd/estimators.hpp"

namespace openpimd {

struct Grid1D {
  double extent = 6.0;  // [-extent, extent], bohr
  int points = 2001;

  double spacing() const { return 2.0 * extent / (points - 1); }
  double point(int i) const { return -extent + i * spacing(); }
  std::vector<double> all_points() const;
};

// Lowest eigenpairs of -(1/2m) d2/dq2 + V(q) with second-order central
// differences and hard walls; wavefunction columns are h-weighted
// orthonormal: h * sum_i psi_m(i) psi_n(i) = delta_mn.
struct EigenSolution {
  Grid1D grid;
  double mass = 1.0;
  std::vector<double> energies;
  Eigen::MatrixXd wavefunctions;  // points x k
  // Largest |psi| at the box edge relative to max |psi|, over retained
  // states.  Thermal-kernel routines require < 1e-10 (they zero-extend).
  double edge_magnitude = 0.0;
};

EigenSolution solve_schrodinger(const Grid1D& grid,
                                const std::function<double(double)>& potential,
                                double mass, int n_states);

// rho(r, r') = sum_n e^{-beta E_n} psi_n(r) psi_n(r') / Z; errors out when
// the retained states cover less than 1 - 1e-8 of the partition function.
Eigen::MatrixXd thermal_density_matrix(const EigenSolution& sol, double beta);

// Thermal occupations e^{-beta E_n}/Z of the retained states.
std::vector<double> thermal_occupations(const EigenSolution& sol, double beta);

// ntilde by the anti-diagonal integral of the thermal kernel (normalized to
// ntilde(0) = 1) and n(p) by both routes: the cosine transform of ntilde and
// the momentum-space wavefunctions.  The two n(p) routes are cross-checked;
// the transform route is returned.
struct ExactDistributions {
  DistributionResult ntilde;
  DistributionResult momentum;
  double route_difference = 0.0;  // sup-norm between the two n(p) routes
};

ExactDistributions exact_ntilde_np(const EigenSolution& sol, double beta,
                                   std::span<const double> x_grid,
                                   std::span<const double> p_grid);

// Two-level ground-state weight 1 / (1 + exp(-beta dE)).
double ground_state_weight(double splitting, double beta);

}  // namespace openpimd
